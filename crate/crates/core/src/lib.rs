//! Core algorithms for live classroom reaction evaluation.
//!
//! - [`headpose`]: landmark frames to Euler angles via perspective-n-point,
//!   and nod/shake detection on the resulting angle stream.
//! - [`sensors`]: reaction vocabulary and confusion-matrix sensor models.
//! - [`evaluation`]: history-weighted class score and its verdict.
//! - [`simulation`]: Monte Carlo sweep of the score under sensor noise.
//! - [`config`]: TOML configuration shared by the server and simulator.

pub mod config;
pub mod evaluation;
pub mod headpose;
pub mod sensors;
pub mod simulation;

pub use evaluation::{
    apply_reaction, class_score, class_score_with, classify_level, reaction_value, weight_coefficient,
    weights, weights_with, ClassEvaluation, ClassLevel, EvaluationError, EvaluationParams, ReactionLabel,
    StudentContribution, StudentRecord, Weighting,
};
pub use headpose::{
    estimate_euler, EulerEstimate, EulerSample, GestureDetector, GestureKind, HeadGesture, HeadPoseConfig,
    HeadPoseError, LandmarkFrame,
};
pub use sensors::{
    default_confusion_model, expression_to_reaction, gesture_to_reaction, observe, Channel, ConfusionModel,
    ExpressionLabel,
};
