use classpulse_core::{
    class_score, class_score_with, classify_level, weight_coefficient, weights, ClassLevel, EvaluationError,
    EvaluationParams, ReactionLabel, StudentRecord, Weighting,
};
use proptest::prelude::*;

fn label() -> impl Strategy<Value = ReactionLabel> {
    prop_oneof![Just(ReactionLabel::Positive), Just(ReactionLabel::Negative), Just(ReactionLabel::Neutral)]
}

fn roster(max: usize) -> impl Strategy<Value = (Vec<StudentRecord>, Vec<ReactionLabel>)> {
    prop::collection::vec(((0u64..60, 0u64..60), label()), 1..=max).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, ((p, n), l))| (StudentRecord::with_history(format!("s{i}"), p, n), l))
            .unzip()
    })
}

/// Independent oracle: weights from a log of arbitrary base, straight
/// weighted sum, no special cases beyond the all-clamped fallback.
fn oracle(records: &[StudentRecord], reactions: &[ReactionLabel], base: f64) -> f64 {
    let f: Vec<f64> = records
        .iter()
        .map(|r| {
            let x = 2.0 * r.p as f64 + r.n as f64;
            if x <= 1.0 { 0.0 } else { x.log(base) }
        })
        .collect();
    let total: f64 = f.iter().sum();
    let n = records.len() as f64;
    let value = |l: &ReactionLabel| match l {
        ReactionLabel::Positive => 1.0,
        ReactionLabel::Negative => -1.2,
        ReactionLabel::Neutral => 0.0,
    };
    f.iter()
        .zip(reactions)
        .map(|(fi, l)| if total > 0.0 { fi / total } else { 1.0 / n } * value(l))
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn score_invariants((records, reactions) in roster(30), base in prop_oneof![Just(2.0), Just(10.0), 1.01f64..100.0]) {
        let params = EvaluationParams::default();
        let w = weights(&records).unwrap();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(w.iter().all(|&x| (0.0..=1.0).contains(&x)));

        let ev = class_score(&records, &reactions, &params).unwrap();
        prop_assert!((-1.2..=1.0).contains(&ev.r_class));
        prop_assert!((ev.r_class - oracle(&records, &reactions, base)).abs() <= 1e-12);
        prop_assert_eq!(ev.level, classify_level(ev.r_class, &params));
        let direct: f64 = ev.per_student.iter().map(|c| c.w * c.r).sum();
        prop_assert!((ev.r_class - direct).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn permutation_invariance((records, reactions) in roster(30), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let params = EvaluationParams::default();
        let mut idx: Vec<usize> = (0..records.len()).collect();
        idx.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let r2: Vec<_> = idx.iter().map(|&i| records[i].clone()).collect();
        let l2: Vec<_> = idx.iter().map(|&i| reactions[i]).collect();
        let a = class_score(&records, &reactions, &params).unwrap().r_class;
        let b = class_score(&r2, &l2, &params).unwrap().r_class;
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn negative_to_positive_raises_score((records, mut reactions) in roster(30), pick in any::<prop::sample::Index>()) {
        let params = EvaluationParams::default();
        let i = pick.index(records.len());
        reactions[i] = ReactionLabel::Negative;
        let before = class_score(&records, &reactions, &params).unwrap();
        reactions[i] = ReactionLabel::Positive;
        let after = class_score(&records, &reactions, &params).unwrap();
        if before.per_student[i].w > 0.0 {
            prop_assert!(after.r_class > before.r_class);
        } else {
            prop_assert_eq!(after.r_class, before.r_class);
        }
    }

    #[test]
    fn unanimous_rosters_hit_the_extremes((records, _) in roster(30)) {
        let params = EvaluationParams::default();
        let all = |l| vec![l; records.len()];
        prop_assert_eq!(class_score(&records, &all(ReactionLabel::Positive), &params).unwrap().r_class, 1.0);
        prop_assert_eq!(class_score(&records, &all(ReactionLabel::Negative), &params).unwrap().r_class, -1.2);
        prop_assert_eq!(class_score(&records, &all(ReactionLabel::Neutral), &params).unwrap().r_class, 0.0);
    }

    #[test]
    fn uniform_weighting_ignores_history((records, reactions) in roster(30)) {
        let params = EvaluationParams::default();
        let fresh: Vec<_> = records.iter().map(|r| StudentRecord::with_history(r.student_id.clone(), 0, 0)).collect();
        let a = class_score_with(&records, &reactions, &params, Weighting::Uniform).unwrap();
        let b = class_score(&fresh, &reactions, &params).unwrap();
        prop_assert!((a.r_class - b.r_class).abs() <= 1e-12);
    }
}

#[test]
fn dominant_history_pulls_score_to_its_reaction() {
    let params = EvaluationParams::default();
    let reactions = [ReactionLabel::Negative, ReactionLabel::Positive, ReactionLabel::Neutral];
    let mut last = f64::INFINITY;
    for k in 1..=18 {
        let records = [
            StudentRecord::with_history("big", 10u64.pow(k), 0),
            StudentRecord::with_history("a", 3, 1),
            StudentRecord::with_history("b", 1, 4),
        ];
        let gap = (class_score(&records, &reactions, &params).unwrap().r_class - (-1.2)).abs();
        assert!(gap < last, "gap {gap} did not shrink at 10^{k}");
        last = gap;
    }
    // others fully clamped: the dominant student carries all the weight
    let records = [
        StudentRecord::with_history("big", 5, 0),
        StudentRecord::with_history("a", 0, 1),
        StudentRecord::with_history("b", 0, 0),
    ];
    assert_eq!(class_score(&records, &reactions, &params).unwrap().r_class, -1.2);
}

#[test]
fn degenerate_rosters() {
    let params = EvaluationParams::default();
    assert!(matches!(weights(&[]), Err(EvaluationError::EmptyClassroom)));
    assert!(matches!(class_score(&[], &[], &params), Err(EvaluationError::EmptyClassroom)));
    let one = [StudentRecord::with_history("a", 1, 1)];
    assert!(matches!(class_score(&one, &[], &params), Err(EvaluationError::InvalidInput(_))));

    let clamped = [StudentRecord::with_history("a", 0, 0), StudentRecord::with_history("b", 0, 1)];
    assert_eq!(weights(&clamped).unwrap(), vec![0.5, 0.5]);
    let ev = class_score(&clamped, &[ReactionLabel::Positive, ReactionLabel::Negative], &params).unwrap();
    assert!((ev.r_class - (-0.1)).abs() < 1e-15);
    assert_eq!(ev.level, ClassLevel::Neutral);

    // over the soft limit: scored, not rejected
    let big: Vec<_> = (0..45).map(|i| StudentRecord::with_history(format!("s{i}"), 2, 1)).collect();
    let ev = class_score(&big, &vec![ReactionLabel::Positive; 45], &params).unwrap();
    assert_eq!(ev.r_class, 1.0);
}

#[test]
fn verdict_boundaries() {
    let params = EvaluationParams::default();
    assert_eq!(classify_level(0.2, &params), ClassLevel::Positive);
    assert_eq!(classify_level(0.19999999999999998, &params), ClassLevel::Neutral);
    assert_eq!(classify_level(-0.15, &params), ClassLevel::Neutral);
    assert_eq!(classify_level(-0.151, &params), ClassLevel::Negative);
    assert_eq!(classify_level(1.0, &params), ClassLevel::Positive);
    assert_eq!(classify_level(-1.2, &params), ClassLevel::Negative);
}

#[test]
fn coefficient_examples() {
    assert!((weight_coefficient(4, 2) - 2.302_585_092_994_046).abs() < 1e-15);
    assert_eq!(weight_coefficient(0, 1), 0.0);
    assert_eq!(weight_coefficient(0, 0), 0.0);
    assert!((weight_coefficient(1, 0) - std::f64::consts::LN_2).abs() < 1e-15);
}
