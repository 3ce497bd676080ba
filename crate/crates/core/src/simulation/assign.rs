use rand::seq::SliceRandom;
use rand::Rng;

use super::SimulationError;
use crate::evaluation::{class_score_with, reaction_value, weights_with, EvaluationParams, ReactionLabel, StudentRecord, Weighting};

/// Flip budget per student for the greedy repair.
pub const FLIPS_PER_STUDENT: usize = 10;

/// Finds current reactions whose class score lies within `tolerance` of
/// `target`.
///
/// Starts from a uniformly random assignment and repeatedly applies the
/// single-student change that most reduces the distance to the target. The
/// extreme targets have exactly one solution and are returned directly.
pub fn assign_reactions_for_target<R: Rng + ?Sized>(
    target: f64,
    records: &[StudentRecord],
    params: &EvaluationParams,
    weighting: Weighting,
    tolerance: f64,
    rng: &mut R,
) -> Result<Vec<ReactionLabel>, SimulationError> {
    const EDGE: f64 = 1e-12;
    if !(target >= params.negative_value - EDGE && target <= params.positive_value + EDGE) {
        return Err(SimulationError::InvalidConfig(format!(
            "target {target} outside [{}, {}]",
            params.negative_value, params.positive_value
        )));
    }
    let n = records.len();
    if target >= params.positive_value - EDGE {
        return Ok(vec![ReactionLabel::Positive; n]);
    }
    if target <= params.negative_value + EDGE {
        return Ok(vec![ReactionLabel::Negative; n]);
    }

    let weights = weights_with(records, weighting)?;
    let mut labels: Vec<ReactionLabel> = (0..n)
        .map(|_| ReactionLabel::ALL[rng.random_range(0..3)])
        .collect();
    // Acceptance uses the real class score; incremental sums drift by a few ulps.
    let exact = |labels: &[ReactionLabel]| class_score_with(records, labels, params, weighting).map(|e| e.r_class);
    let mut score = exact(&labels)?;
    // Random scan order spreads ties across students instead of favouring low indices.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    for _ in 0..FLIPS_PER_STUDENT * n {
        let error = (score - target).abs();
        if error <= tolerance {
            return Ok(labels);
        }
        let mut best: Option<(usize, ReactionLabel, f64)> = None;
        for &i in &order {
            let current = reaction_value(labels[i], params);
            for candidate in ReactionLabel::ALL {
                if candidate == labels[i] {
                    continue;
                }
                let next = score + weights[i] * (reaction_value(candidate, params) - current);
                let next_error = (next - target).abs();
                if best.is_none_or(|(_, _, e)| next_error < e) {
                    best = Some((i, candidate, next_error));
                }
            }
        }
        match best {
            Some((i, label, next_error)) if next_error < error => {
                labels[i] = label;
                score = exact(&labels)?;
            }
            _ => break,
        }
    }
    if (score - target).abs() <= tolerance {
        Ok(labels)
    } else {
        Err(SimulationError::UnreachableTarget { target, achieved: score })
    }
}
