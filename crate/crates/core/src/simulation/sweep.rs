use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{assign_reactions_for_target, generate_cohort, CohortSpec, SimulationError};
use crate::evaluation::{class_score_with, EvaluationParams, ReactionLabel, StudentRecord, Weighting};
use crate::sensors::{observe, Channel, ConfusionModel};

pub const CSV_HEADER: [&str; 8] = [
    "target_r_class",
    "mean_true_r_class",
    "mean_predicted_r_class",
    "deviation",
    "level_accuracy",
    "trials",
    "weighting",
    "seed",
];

/// Stream reserved for the shared cohort in fixed-cohort mode.
const FIXED_COHORT_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub target_min: f64,
    pub target_max: f64,
    pub step: f64,
    pub trials_per_case: usize,
    pub seed: u64,
    /// Probability that a reaction is sensed through the head channel.
    pub channel_split: f64,
    pub weighting: Weighting,
    /// Maximum distance between a trial's true score and the case target.
    pub target_tolerance: f64,
    /// Draw one cohort for the whole sweep instead of one per trial.
    pub fixed_cohort: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            target_min: -1.2,
            target_max: 1.0,
            step: 0.1,
            trials_per_case: 1000,
            seed: 1,
            channel_split: 0.5,
            weighting: Weighting::Weighted,
            target_tolerance: 0.05,
            fixed_cohort: false,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), SimulationError> {
        let bad = |m: &str| Err(SimulationError::InvalidConfig(m.to_string()));
        if !(self.target_min < self.target_max) {
            return bad("target_min must be below target_max");
        }
        if !(self.step > 0.0) {
            return bad("step must be positive");
        }
        if self.trials_per_case == 0 {
            return bad("at least one trial per case is required");
        }
        if !(0.0..=1.0).contains(&self.channel_split) {
            return bad("channel_split must lie in [0, 1]");
        }
        if !(self.target_tolerance > 0.0) {
            return bad("target_tolerance must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CaseResult {
    pub target_r_class: f64,
    pub mean_true_r_class: f64,
    pub mean_predicted_r_class: f64,
    /// `|mean_predicted - mean_true|`.
    pub deviation: f64,
    /// Fraction of trials whose predicted level equals the true level.
    pub level_accuracy: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CaseOutcome {
    Completed(CaseResult),
    Skipped { target_r_class: f64, reason: String },
}

impl CaseOutcome {
    pub fn result(&self) -> Option<&CaseResult> {
        match self {
            Self::Completed(r) => Some(r),
            Self::Skipped { .. } => None,
        }
    }

    pub fn target(&self) -> f64 {
        match self {
            Self::Completed(r) => r.target_r_class,
            Self::Skipped { target_r_class, .. } => *target_r_class,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub cases: Vec<CaseOutcome>,
    /// Unweighted mean of the completed cases' level accuracies.
    pub mean_accuracy: f64,
    pub weighting: Weighting,
    pub seed: u64,
}

impl SweepReport {
    pub fn completed(&self) -> impl Iterator<Item = &CaseResult> {
        self.cases.iter().filter_map(CaseOutcome::result)
    }
}

/// Independent generator for one `(case, trial)` pair.
pub fn trial_rng(seed: u64, case_index: usize, trial_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((case_index as u64) << 32) | trial_index as u64);
    rng
}

/// Targets from `target_min` to `target_max` inclusive in `step` increments,
/// rounded to 12 decimals so accumulated error never leaks into the output.
pub fn sweep_targets(cfg: &SweepConfig) -> Vec<f64> {
    let count = ((cfg.target_max - cfg.target_min) / cfg.step + 1e-9).floor() as usize;
    (0..=count)
        .map(|i| ((cfg.target_min + i as f64 * cfg.step) * 1e12).round() / 1e12 + 0.0)
        .collect()
}

struct TrialOutcome {
    true_r: f64,
    predicted_r: f64,
    correct: bool,
}

fn run_trial<R: Rng>(
    target: f64,
    cohort: &[StudentRecord],
    cfg: &SweepConfig,
    model: &ConfusionModel,
    params: &EvaluationParams,
    rng: &mut R,
) -> Result<TrialOutcome, SimulationError> {
    let truth = assign_reactions_for_target(target, cohort, params, cfg.weighting, cfg.target_tolerance, rng)?;
    let true_eval = class_score_with(cohort, &truth, params, cfg.weighting)?;
    let observed: Vec<ReactionLabel> = truth
        .iter()
        .map(|&t| {
            let channel = if rng.random::<f64>() < cfg.channel_split {
                Channel::Head
            } else {
                Channel::Expression
            };
            observe(t, channel, model, rng)
        })
        .collect();
    let predicted = class_score_with(cohort, &observed, params, cfg.weighting)?;
    Ok(TrialOutcome {
        true_r: true_eval.r_class,
        predicted_r: predicted.r_class,
        correct: predicted.level == true_eval.level,
    })
}

fn fixed_cohort(spec: &CohortSpec, cfg: &SweepConfig) -> Result<Option<Vec<StudentRecord>>, SimulationError> {
    if !cfg.fixed_cohort {
        return Ok(None);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(FIXED_COHORT_STREAM);
    generate_cohort(spec, &mut rng).map(Some)
}

fn run_case_indexed(
    case_index: usize,
    target: f64,
    spec: &CohortSpec,
    cfg: &SweepConfig,
    model: &ConfusionModel,
    params: &EvaluationParams,
    shared_cohort: Option<&[StudentRecord]>,
) -> Result<CaseResult, SimulationError> {
    let outcomes: Vec<TrialOutcome> = (0..cfg.trials_per_case)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(cfg.seed, case_index, trial);
            let drawn;
            let cohort = match shared_cohort {
                Some(c) => c,
                None => {
                    drawn = generate_cohort(spec, &mut rng)?;
                    &drawn
                }
            };
            run_trial(target, cohort, cfg, model, params, &mut rng)
        })
        .collect::<Result<_, _>>()?;

    // Sequential sums keep the floating-point result independent of scheduling.
    let trials = outcomes.len();
    let n = trials as f64;
    let mean_true = outcomes.iter().map(|o| o.true_r).sum::<f64>() / n;
    let mean_predicted = outcomes.iter().map(|o| o.predicted_r).sum::<f64>() / n;
    let correct = outcomes.iter().filter(|o| o.correct).count();
    Ok(CaseResult {
        target_r_class: target,
        mean_true_r_class: mean_true,
        mean_predicted_r_class: mean_predicted,
        deviation: (mean_predicted - mean_true).abs(),
        level_accuracy: correct as f64 / n,
        trials,
    })
}

/// Runs a single target as case 0 of a sweep.
pub fn run_case(
    target: f64,
    spec: &CohortSpec,
    cfg: &SweepConfig,
    model: &ConfusionModel,
    params: &EvaluationParams,
) -> Result<CaseResult, SimulationError> {
    spec.validate()?;
    cfg.validate()?;
    params.validate()?;
    let shared = fixed_cohort(spec, cfg)?;
    run_case_indexed(0, target, spec, cfg, model, params, shared.as_deref())
}

/// Runs every target of the sweep. Cases whose target cannot be reached are
/// reported as skipped; other errors abort the sweep.
pub fn run_sweep(
    spec: &CohortSpec,
    cfg: &SweepConfig,
    model: &ConfusionModel,
    params: &EvaluationParams,
) -> Result<SweepReport, SimulationError> {
    spec.validate()?;
    cfg.validate()?;
    params.validate()?;
    let shared = fixed_cohort(spec, cfg)?;
    let targets = sweep_targets(cfg);
    let cases = targets
        .par_iter()
        .enumerate()
        .map(|(i, &target)| {
            match run_case_indexed(i, target, spec, cfg, model, params, shared.as_deref()) {
                Ok(r) => Ok(CaseOutcome::Completed(r)),
                Err(e @ SimulationError::UnreachableTarget { .. }) => {
                    tracing::warn!(target, error = %e, "case skipped");
                    Ok(CaseOutcome::Skipped { target_r_class: target, reason: e.to_string() })
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>, SimulationError>>()?;

    let accuracies: Vec<f64> = cases.iter().filter_map(|c| c.result().map(|r| r.level_accuracy)).collect();
    let mean_accuracy = if accuracies.is_empty() {
        f64::NAN
    } else {
        accuracies.iter().sum::<f64>() / accuracies.len() as f64
    };
    Ok(SweepReport { cases, mean_accuracy, weighting: cfg.weighting, seed: cfg.seed })
}

/// Writes one row per case. Skipped cases keep their target and leave the
/// measured columns empty.
pub fn write_csv<W: Write>(report: &SweepReport, out: W) -> Result<(), SimulationError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    let weighting = report.weighting.as_str();
    let seed = report.seed.to_string();
    for case in &report.cases {
        match case {
            CaseOutcome::Completed(r) => w.write_record([
                r.target_r_class.to_string(),
                r.mean_true_r_class.to_string(),
                r.mean_predicted_r_class.to_string(),
                r.deviation.to_string(),
                r.level_accuracy.to_string(),
                r.trials.to_string(),
                weighting.to_string(),
                seed.clone(),
            ])?,
            CaseOutcome::Skipped { target_r_class, .. } => w.write_record([
                target_r_class.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                "0".to_string(),
                weighting.to_string(),
                seed.clone(),
            ])?,
        }
    }
    w.flush()?;
    Ok(())
}
