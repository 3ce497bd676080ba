use classpulse_core::simulation::{
    assign_reactions_for_target, generate_cohort, run_sweep, write_csv, CohortSpec, SweepConfig, SweepReport,
};
use classpulse_core::{
    class_score_with, default_confusion_model, ConfusionModel, EvaluationParams, Weighting,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn csv_bytes(report: &SweepReport) -> Vec<u8> {
    let mut out = Vec::new();
    write_csv(report, &mut out).unwrap();
    out
}

fn sweep_on(threads: usize, cfg: &SweepConfig) -> Vec<u8> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let report = pool
        .install(|| run_sweep(&CohortSpec::default(), cfg, &default_confusion_model(), &EvaluationParams::default()))
        .unwrap();
    csv_bytes(&report)
}

#[test]
fn output_does_not_depend_on_worker_count() {
    let cfg = SweepConfig { trials_per_case: 60, seed: 99, ..SweepConfig::default() };
    let one = sweep_on(1, &cfg);
    assert_eq!(one, sweep_on(3, &cfg));
    assert_eq!(one, sweep_on(8, &cfg));
    let fixed = SweepConfig { fixed_cohort: true, ..cfg };
    assert_eq!(sweep_on(1, &fixed), sweep_on(5, &fixed));
}

#[test]
fn identity_model_is_exact() {
    let cfg = SweepConfig { trials_per_case: 100, seed: 5, ..SweepConfig::default() };
    for weighting in [Weighting::Weighted, Weighting::Uniform] {
        let cfg = SweepConfig { weighting, ..cfg.clone() };
        let report = run_sweep(
            &CohortSpec::default(),
            &cfg,
            &ConfusionModel::identity(),
            &EvaluationParams::default(),
        )
        .unwrap();
        assert_eq!(report.completed().count(), 23);
        for case in report.completed() {
            assert_eq!(case.level_accuracy, 1.0, "{case:?}");
            assert!(case.deviation <= cfg.target_tolerance, "{case:?}");
            assert_eq!(case.deviation, 0.0, "{case:?}");
        }
    }
}

#[test]
fn deviation_grows_away_from_zero() {
    let cfg = SweepConfig { trials_per_case: 200, seed: 3, ..SweepConfig::default() };
    let report =
        run_sweep(&CohortSpec::default(), &cfg, &default_confusion_model(), &EvaluationParams::default()).unwrap();
    let near: Vec<f64> = report.completed().filter(|c| c.target_r_class.abs() <= 0.1 + 1e-9).map(|c| c.deviation).collect();
    let far: Vec<f64> = report.completed().filter(|c| c.target_r_class.abs() >= 0.9 - 1e-9).map(|c| c.deviation).collect();
    let max_near = near.iter().cloned().fold(f64::MIN, f64::max);
    let min_far = far.iter().cloned().fold(f64::MAX, f64::min);
    assert!(min_far > max_near, "far {far:?} vs near {near:?}");
}

#[test]
fn accepted_assignment_scores_within_tolerance_exactly() {
    // shrunk case where a running sum ended a few ulps inside the band but the class score did not
    let params = EvaluationParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3219338127977868878);
    let records = generate_cohort(&CohortSpec::for_students(24), &mut rng).unwrap();
    let labels = assign_reactions_for_target(-1.0, &records, &params, Weighting::Uniform, 0.05, &mut rng).unwrap();
    let r = class_score_with(&records, &labels, &params, Weighting::Uniform).unwrap().r_class;
    assert!((r + 1.0).abs() <= 0.05, "{r}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn assignments_land_within_tolerance(
        step in 0usize..=22, seed in any::<u64>(), uniform in any::<bool>(), n in 5usize..=30,
    ) {
        let target = ((-1.2 + 0.1 * step as f64) * 1e12).round() / 1e12;
        let weighting = if uniform { Weighting::Uniform } else { Weighting::Weighted };
        let params = EvaluationParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let records = generate_cohort(&CohortSpec::for_students(n), &mut rng).unwrap();
        match assign_reactions_for_target(target, &records, &params, weighting, 0.05, &mut rng) {
            Ok(labels) => {
                let r = class_score_with(&records, &labels, &params, weighting).unwrap().r_class;
                prop_assert!((r - target).abs() <= 0.05, "target {target} got {r}");
            }
            // small cohorts can have gaps wider than the tolerance
            Err(e) => prop_assert!(n < 30, "{e}"),
        }
    }
}
