//! Reaction vocabulary for the head and expression channels, and the
//! confusion-matrix sensor models used by the simulator.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::evaluation::ReactionLabel;
use crate::headpose::{GestureKind, HeadGesture};

/// Tolerance when validating probabilities read from text.
const LOAD_TOLERANCE: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum SensorError {
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("row ({channel}, {true_label}) {message}")]
    NotStochastic { channel: Channel, true_label: &'static str, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpressionLabel {
    Happiness,
    Focused,
    Confused,
    Disgust,
    Tired,
    Neutral,
}

impl FromStr for ExpressionLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "happiness" => Self::Happiness,
            "focused" => Self::Focused,
            "confused" => Self::Confused,
            "disgust" => Self::Disgust,
            "tired" => Self::Tired,
            "neutral" => Self::Neutral,
            other => return Err(format!("unknown expression label {other:?}")),
        })
    }
}

/// Sensing channel a reaction was observed through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Head,
    Expression,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Head => "head",
            Self::Expression => "expression",
        })
    }
}

impl FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "head" => Ok(Self::Head),
            "expression" => Ok(Self::Expression),
            other => Err(format!("unknown channel {other:?}")),
        }
    }
}

pub fn gesture_kind_to_reaction(kind: GestureKind) -> ReactionLabel {
    match kind {
        GestureKind::Nod => ReactionLabel::Positive,
        GestureKind::Shake => ReactionLabel::Negative,
    }
}

pub fn gesture_to_reaction(gesture: &HeadGesture) -> ReactionLabel {
    gesture_kind_to_reaction(gesture.kind)
}

pub fn expression_to_reaction(label: ExpressionLabel) -> ReactionLabel {
    match label {
        ExpressionLabel::Happiness | ExpressionLabel::Focused => ReactionLabel::Positive,
        ExpressionLabel::Confused | ExpressionLabel::Disgust | ExpressionLabel::Tired => {
            ReactionLabel::Negative
        }
        ExpressionLabel::Neutral => ReactionLabel::Neutral,
    }
}

/// `rows[true][observed]`, indexed by [`ReactionLabel::index`].
pub type ConfusionRows = [[f64; 3]; 3];

/// Per-channel conditional distribution of the observed reaction given the
/// true reaction.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionModel {
    head: ConfusionRows,
    expression: ConfusionRows,
}

impl ConfusionModel {
    pub fn new(head: ConfusionRows, expression: ConfusionRows) -> Result<Self, SensorError> {
        for (channel, rows) in [(Channel::Head, &head), (Channel::Expression, &expression)] {
            check_rows(channel, rows, 1e-12)?;
        }
        Ok(Self { head, expression })
    }

    /// Every observation equals the truth.
    pub fn identity() -> Self {
        let eye = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        Self { head: eye, expression: eye }
    }

    pub fn rows(&self, channel: Channel) -> &ConfusionRows {
        match channel {
            Channel::Head => &self.head,
            Channel::Expression => &self.expression,
        }
    }

    pub fn probability(&self, channel: Channel, truth: ReactionLabel, observed: ReactionLabel) -> f64 {
        self.rows(channel)[truth.index()][observed.index()]
    }

    /// Parses `channel, true_label, observed_label, probability` rows.
    /// Blank lines and `#` comments are skipped; probabilities may be decimal
    /// or a `numerator/denominator` fraction. Unlisted cells are zero.
    pub fn parse(text: &str, source: &str) -> Result<Self, SensorError> {
        let mut head = [[0.0; 3]; 3];
        let mut expression = [[0.0; 3]; 3];
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| SensorError::Parse {
                path: source.to_string(),
                line: lineno + 1,
                message,
            };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(err(format!("expected 4 comma-separated fields, got {}", fields.len())));
            }
            if fields[0].eq_ignore_ascii_case("channel") {
                continue;
            }
            let channel: Channel = fields[0].parse().map_err(err)?;
            let truth: ReactionLabel = fields[1].parse().map_err(err)?;
            let observed: ReactionLabel = fields[2].parse().map_err(err)?;
            let prob = parse_probability(fields[3]).map_err(err)?;
            if !seen.insert((channel, truth, observed)) {
                return Err(err("duplicate cell".into()));
            }
            let rows = match channel {
                Channel::Head => &mut head,
                Channel::Expression => &mut expression,
            };
            rows[truth.index()][observed.index()] = prob;
        }
        for (channel, rows) in [(Channel::Head, &mut head), (Channel::Expression, &mut expression)] {
            check_rows(channel, rows, LOAD_TOLERANCE)?;
            for row in rows.iter_mut() {
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-12 {
                    row.iter_mut().for_each(|p| *p /= sum);
                }
            }
        }
        Ok(Self { head, expression })
    }

    pub fn load(path: &Path) -> Result<Self, SensorError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Serializes to the text table accepted by [`ConfusionModel::parse`].
    pub fn to_table(&self) -> String {
        let mut out = String::from("channel,true_label,observed_label,probability\n");
        for channel in [Channel::Head, Channel::Expression] {
            for truth in ReactionLabel::ALL {
                for observed in ReactionLabel::ALL {
                    let p = self.probability(channel, truth, observed);
                    out.push_str(&format!("{channel},{},{},{p:?}\n", truth.as_str(), observed.as_str()));
                }
            }
        }
        out
    }
}

fn parse_probability(s: &str) -> Result<f64, String> {
    let value = match s.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|e| format!("bad numerator {num:?}: {e}"))?;
            let den: f64 = den.trim().parse().map_err(|e| format!("bad denominator {den:?}: {e}"))?;
            if den == 0.0 {
                return Err("zero denominator".into());
            }
            num / den
        }
        None => s.parse().map_err(|e| format!("bad probability {s:?}: {e}"))?,
    };
    if !(0.0..=1.0).contains(&value) {
        return Err(format!("probability {value} outside [0, 1]"));
    }
    Ok(value)
}

fn check_rows(channel: Channel, rows: &ConfusionRows, tolerance: f64) -> Result<(), SensorError> {
    for truth in ReactionLabel::ALL {
        let row = &rows[truth.index()];
        let fail = |message: String| SensorError::NotStochastic {
            channel,
            true_label: truth.as_str(),
            message,
        };
        if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(fail("has an entry outside [0, 1]".into()));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > tolerance {
            return Err(fail(format!("sums to {sum}")));
        }
    }
    Ok(())
}

/// Measured head-gesture and expression-recognition confusion counts,
/// converted to exact conditional probabilities.
///
/// A true neutral head input is assumed to be observed as neutral; the
/// detector's false-positive rate at rest was never measured.
pub fn default_confusion_model() -> ConfusionModel {
    let head = [
        // true positive (nod): 25 nod, 3 shake, 2 missed
        [25.0 / 30.0, 3.0 / 30.0, 2.0 / 30.0],
        // true negative (shake): 5 nod, 24 shake, 1 missed
        [5.0 / 30.0, 24.0 / 30.0, 1.0 / 30.0],
        [0.0, 0.0, 1.0],
    ];
    let expression = [
        [38.0 / 49.0, 6.0 / 49.0, 5.0 / 49.0],
        [19.0 / 84.0, 60.0 / 84.0, 5.0 / 84.0],
        [6.0 / 148.0, 11.0 / 148.0, 131.0 / 148.0],
    ];
    ConfusionModel::new(head, expression).expect("built-in confusion model is stochastic")
}

/// Samples one observed reaction by inverse CDF over the fixed label order.
pub fn observe<R: Rng + ?Sized>(
    truth: ReactionLabel,
    channel: Channel,
    model: &ConfusionModel,
    rng: &mut R,
) -> ReactionLabel {
    let row = &model.rows(channel)[truth.index()];
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for label in ReactionLabel::ALL {
        acc += row[label.index()];
        if u < acc {
            return label;
        }
    }
    // u landed in the rounding gap above the last cumulative sum.
    ReactionLabel::ALL
        .into_iter()
        .rev()
        .find(|l| row[l.index()] > 0.0)
        .unwrap_or(ReactionLabel::Neutral)
}
