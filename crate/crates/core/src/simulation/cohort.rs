use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SimulationError;
use crate::evaluation::StudentRecord;

/// Composition of a simulated classroom's reaction history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortSpec {
    pub n_students: usize,
    /// Inclusive bounds on each student's past reaction count.
    pub history_min: u64,
    pub history_max: u64,
    /// Students with `p > n`.
    pub n_more_positive: usize,
    /// Students with `n > p`.
    pub n_more_negative: usize,
    /// Students with `p == n`.
    pub n_balanced: usize,
}

impl Default for CohortSpec {
    fn default() -> Self {
        Self {
            n_students: 30,
            history_min: 6,
            history_max: 12,
            n_more_positive: 16,
            n_more_negative: 10,
            n_balanced: 4,
        }
    }
}

impl CohortSpec {
    /// Scales the default 16/10/4 group proportions to `n_students`.
    pub fn for_students(n_students: usize) -> Self {
        let base = Self::default();
        let scale = |k: usize| (k * n_students + base.n_students / 2) / base.n_students;
        let n_more_positive = scale(base.n_more_positive).min(n_students);
        let n_more_negative = scale(base.n_more_negative).min(n_students - n_more_positive);
        Self {
            n_students,
            n_more_positive,
            n_more_negative,
            n_balanced: n_students - n_more_positive - n_more_negative,
            ..base
        }
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        let infeasible = |m: String| Err(SimulationError::InfeasibleSpec(m));
        if self.n_students == 0 {
            return infeasible("cohort needs at least one student".into());
        }
        if self.n_more_positive + self.n_more_negative + self.n_balanced != self.n_students {
            return infeasible(format!(
                "group sizes {}+{}+{} do not add up to {} students",
                self.n_more_positive, self.n_more_negative, self.n_balanced, self.n_students
            ));
        }
        if self.history_min == 0 || self.history_min > self.history_max {
            return infeasible(format!(
                "history bounds [{}, {}] must satisfy 0 < min <= max",
                self.history_min, self.history_max
            ));
        }
        if self.n_balanced > 0 && self.even_totals().is_empty() {
            return infeasible("balanced students need an even history total within the bounds".into());
        }
        Ok(())
    }

    fn even_totals(&self) -> Vec<u64> {
        (self.history_min..=self.history_max).filter(|t| t % 2 == 0).collect()
    }
}

/// Draws a cohort: positive-leaning students first, then negative-leaning,
/// then balanced ones.
pub fn generate_cohort<R: Rng + ?Sized>(
    spec: &CohortSpec,
    rng: &mut R,
) -> Result<Vec<StudentRecord>, SimulationError> {
    spec.validate()?;
    let evens = spec.even_totals();
    let mut records = Vec::with_capacity(spec.n_students);
    let mut push = |p: u64, n: u64| {
        let id = format!("s{:02}", records.len() + 1);
        records.push(StudentRecord::with_history(id, p, n));
    };
    for _ in 0..spec.n_more_positive {
        let total = rng.random_range(spec.history_min..=spec.history_max);
        let minority = rng.random_range(0..=(total - 1) / 2);
        push(total - minority, minority);
    }
    for _ in 0..spec.n_more_negative {
        let total = rng.random_range(spec.history_min..=spec.history_max);
        let minority = rng.random_range(0..=(total - 1) / 2);
        push(minority, total - minority);
    }
    for _ in 0..spec.n_balanced {
        let total = evens[rng.random_range(0..evens.len())];
        push(total / 2, total / 2);
    }
    Ok(records)
}
