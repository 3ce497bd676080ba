//! Weighted class-participation score and three-level verdict.
//!
//! Each student carries a history of positive (`p`) and negative (`n`)
//! reactions. Their weight coefficient is `ln(2p + n)`, clamped at zero, and
//! weights are the coefficients normalized to sum to one. The class score is
//! the weighted sum of current reaction values.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvaluationError {
    #[error("classroom has no students")]
    EmptyClassroom,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid evaluation params: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReactionLabel {
    Positive,
    Negative,
    Neutral,
}

impl ReactionLabel {
    /// Fixed order used for sampling and table layout.
    pub const ALL: [ReactionLabel; 3] = [Self::Positive, Self::Negative, Self::Neutral];

    pub fn index(self) -> usize {
        match self {
            Self::Positive => 0,
            Self::Negative => 1,
            Self::Neutral => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Positive => "positive",
            Self::Negative => "negative",
            Self::Neutral => "neutral",
        }
    }
}

impl std::str::FromStr for ReactionLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "positive" => Ok(Self::Positive),
            "negative" => Ok(Self::Negative),
            "neutral" => Ok(Self::Neutral),
            other => Err(format!("unknown reaction label {other:?}")),
        }
    }
}

/// Classroom verdict derived from the class score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ClassLevel {
    Positive,
    Negative,
    Neutral,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudentRecord {
    pub student_id: String,
    pub display_name: String,
    /// Past positive reactions.
    pub p: u64,
    /// Past negative reactions.
    pub n: u64,
}

impl StudentRecord {
    pub fn new(student_id: impl Into<String>, display_name: impl Into<String>) -> Self {
        Self { student_id: student_id.into(), display_name: display_name.into(), p: 0, n: 0 }
    }

    pub fn with_history(student_id: impl Into<String>, p: u64, n: u64) -> Self {
        let id = student_id.into();
        Self { display_name: id.clone(), student_id: id, p, n }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationParams {
    pub positive_value: f64,
    pub negative_value: f64,
    pub neutral_value: f64,
    pub positive_threshold: f64,
    pub negative_threshold: f64,
    /// Soft roster limit; larger rosters are scored with a warning.
    pub max_students: usize,
}

impl Default for EvaluationParams {
    fn default() -> Self {
        Self {
            positive_value: 1.0,
            negative_value: -1.2,
            neutral_value: 0.0,
            positive_threshold: 0.2,
            negative_threshold: -0.15,
            max_students: 30,
        }
    }
}

impl EvaluationParams {
    pub fn validate(&self) -> Result<(), EvaluationError> {
        let values = [
            self.positive_value,
            self.negative_value,
            self.neutral_value,
            self.positive_threshold,
            self.negative_threshold,
        ];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EvaluationError::InvalidParams("values must be finite".into()));
        }
        if !(self.negative_value < self.neutral_value && self.neutral_value < self.positive_value) {
            return Err(EvaluationError::InvalidParams(
                "reaction values must satisfy negative < neutral < positive".into(),
            ));
        }
        if self.negative_threshold >= self.positive_threshold {
            return Err(EvaluationError::InvalidParams(
                "negative threshold must be below the positive threshold".into(),
            ));
        }
        Ok(())
    }
}

/// How student weights are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// History-based weights.
    #[default]
    Weighted,
    /// Every student weighs `1/n`.
    Uniform,
}

impl Weighting {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Weighted => "weighted",
            Self::Uniform => "uniform",
        }
    }
}

impl std::str::FromStr for Weighting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "weighted" => Ok(Self::Weighted),
            "uniform" => Ok(Self::Uniform),
            other => Err(format!("unknown weighting {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentContribution {
    pub student: String,
    pub w: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEvaluation {
    pub r_class: f64,
    pub level: ClassLevel,
    pub per_student: Vec<StudentContribution>,
    pub ts_ms: i64,
}

pub fn reaction_value(label: ReactionLabel, params: &EvaluationParams) -> f64 {
    match label {
        ReactionLabel::Positive => params.positive_value,
        ReactionLabel::Negative => params.negative_value,
        ReactionLabel::Neutral => params.neutral_value,
    }
}

/// `ln(2p + n)`, or zero when `2p + n <= 1`.
pub fn weight_coefficient(p: u64, n: u64) -> f64 {
    let x = 2.0 * p as f64 + n as f64;
    if x <= 1.0 {
        0.0
    } else {
        x.ln()
    }
}

pub fn weights(records: &[StudentRecord]) -> Result<Vec<f64>, EvaluationError> {
    weights_with(records, Weighting::Weighted)
}

/// Normalized weights. Falls back to uniform weights when every coefficient
/// is zero.
pub fn weights_with(records: &[StudentRecord], weighting: Weighting) -> Result<Vec<f64>, EvaluationError> {
    if records.is_empty() {
        return Err(EvaluationError::EmptyClassroom);
    }
    let uniform = || vec![1.0 / records.len() as f64; records.len()];
    if weighting == Weighting::Uniform {
        return Ok(uniform());
    }
    let coefficients: Vec<f64> = records.iter().map(|r| weight_coefficient(r.p, r.n)).collect();
    let total: f64 = coefficients.iter().sum();
    if total <= 0.0 {
        return Ok(uniform());
    }
    Ok(coefficients.iter().map(|f| f / total).collect())
}

pub fn classify_level(r_class: f64, params: &EvaluationParams) -> ClassLevel {
    if r_class >= params.positive_threshold {
        ClassLevel::Positive
    } else if r_class < params.negative_threshold {
        ClassLevel::Negative
    } else {
        ClassLevel::Neutral
    }
}

pub fn class_score(
    records: &[StudentRecord],
    current_reactions: &[ReactionLabel],
    params: &EvaluationParams,
) -> Result<ClassEvaluation, EvaluationError> {
    class_score_with(records, current_reactions, params, Weighting::Weighted)
}

/// Scores the current reactions against history as of the previous tick.
/// Records are not updated; see [`apply_reaction`].
pub fn class_score_with(
    records: &[StudentRecord],
    current_reactions: &[ReactionLabel],
    params: &EvaluationParams,
    weighting: Weighting,
) -> Result<ClassEvaluation, EvaluationError> {
    if records.len() != current_reactions.len() {
        return Err(EvaluationError::InvalidInput(format!(
            "{} records but {} reactions",
            records.len(),
            current_reactions.len()
        )));
    }
    if records.len() > params.max_students {
        tracing::warn!(
            students = records.len(),
            limit = params.max_students,
            "roster exceeds the recommended class size"
        );
    }
    let w = weights_with(records, weighting)?;
    let per_student: Vec<StudentContribution> = records
        .iter()
        .zip(current_reactions)
        .zip(&w)
        .map(|((rec, &label), &w)| StudentContribution {
            student: rec.student_id.clone(),
            w,
            r: reaction_value(label, params),
        })
        .collect();
    // Weight mass per label, so a unanimous class scores exactly that label's value.
    let mut mass = [0.0; 3];
    for (&label, &w) in current_reactions.iter().zip(&w) {
        mass[label.index()] += w;
    }
    let r_class = match mass.iter().filter(|m| **m > 0.0).count() {
        1 => {
            let label = ReactionLabel::ALL.into_iter().find(|l| mass[l.index()] > 0.0).unwrap();
            reaction_value(label, params)
        }
        _ => ReactionLabel::ALL
            .iter()
            .map(|&l| mass[l.index()] * reaction_value(l, params))
            .sum::<f64>()
            .clamp(params.negative_value, params.positive_value),
    };
    Ok(ClassEvaluation {
        r_class,
        level: classify_level(r_class, params),
        per_student,
        ts_ms: 0,
    })
}

pub fn apply_reaction(record: &StudentRecord, label: ReactionLabel) -> StudentRecord {
    let mut next = record.clone();
    match label {
        ReactionLabel::Positive => next.p += 1,
        ReactionLabel::Negative => next.n += 1,
        ReactionLabel::Neutral => {}
    }
    next
}
