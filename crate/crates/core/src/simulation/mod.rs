//! Monte Carlo evaluation of the class score under noisy reaction sensing.
//!
//! Each case fixes a target class score. Every trial draws a cohort, assigns
//! true reactions that hit the target, passes each reaction through one
//! randomly chosen sensing channel and compares the predicted verdict with
//! the true one.

mod assign;
mod cohort;
mod sweep;

pub use assign::{assign_reactions_for_target, FLIPS_PER_STUDENT};
pub use cohort::{generate_cohort, CohortSpec};
pub use sweep::{
    run_case, run_sweep, sweep_targets, trial_rng, write_csv, CaseOutcome, CaseResult, SweepConfig,
    SweepReport, CSV_HEADER,
};

use crate::evaluation::EvaluationError;

#[derive(Debug, thiserror::Error)]
pub enum SimulationError {
    #[error("infeasible cohort spec: {0}")]
    InfeasibleSpec(String),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("target {target} unreachable within the flip budget (closest {achieved})")]
    UnreachableTarget { target: f64, achieved: f64 },
    #[error(transparent)]
    Evaluation(#[from] EvaluationError),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
