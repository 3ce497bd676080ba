use classpulse_core::headpose::{
    build_intrinsics, euler_to_matrix, euler_to_rotation_vector, matrix_to_euler, project_points,
    rotation_vector_to_euler, solve_pnp, synthesize_frame, EulerAngles,
};
use classpulse_core::{estimate_euler, EulerSample, GestureDetector, GestureKind, HeadPoseConfig};
use nalgebra::{Point3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

#[test]
fn euler_round_trip_thousand_rotations() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let a = EulerAngles::new(
            rng.random_range(-179.0..179.0),
            rng.random_range(-85.0..85.0),
            rng.random_range(-179.0..179.0),
        );
        let back = matrix_to_euler(&euler_to_matrix(a));
        let via_vector = rotation_vector_to_euler(&euler_to_rotation_vector(a));
        for (x, y) in [(a.pitch, back.pitch), (a.yaw, back.yaw), (a.roll, back.roll)] {
            worst = worst.max(angle_gap(x, y));
        }
        for (x, y) in [(a.pitch, via_vector.pitch), (a.yaw, via_vector.yaw), (a.roll, via_vector.roll)] {
            assert!(angle_gap(x, y) < 1e-7, "{a:?} -> {via_vector:?}");
        }
    }
    assert!(worst < 1e-9, "worst round-trip error {worst}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn noiseless_pose_is_recovered(
        pitch in -30.0f64..30.0, yaw in -40.0f64..40.0, roll in -20.0f64..20.0,
        tx in -6.0f64..6.0, ty in -6.0f64..6.0, tz in 35.0f64..90.0,
    ) {
        let config = HeadPoseConfig::default();
        let k = build_intrinsics(640, 480).unwrap();
        let truth = EulerAngles::new(pitch, yaw, roll);
        let t = Vector3::new(tx, ty, tz);
        let image = project_points(&config.model_points(), &euler_to_rotation_vector(truth), &t, &k).unwrap();
        let pose = solve_pnp(&config.model_points(), &image, &k).unwrap();
        prop_assert!(pose.converged);
        prop_assert!(pose.reprojection_rms < 1e-6, "rms {}", pose.reprojection_rms);
        let got = rotation_vector_to_euler(&pose.rotation_vector);
        prop_assert!(angle_gap(got.pitch, pitch) < 1e-6);
        prop_assert!(angle_gap(got.yaw, yaw) < 1e-6);
        prop_assert!(angle_gap(got.roll, roll) < 1e-6);
        prop_assert!((pose.translation_vector - t).norm() < 1e-6 * tz);
    }

    /// Scaling the model and the translation together leaves the image, and
    /// therefore the recovered rotation, unchanged.
    #[test]
    fn scale_changes_translation_only(
        pitch in -25.0f64..25.0, yaw in -35.0f64..35.0, scale in 0.2f64..5.0,
    ) {
        let config = HeadPoseConfig::default();
        let k = build_intrinsics(800, 600).unwrap();
        let rvec = euler_to_rotation_vector(EulerAngles::new(pitch, yaw, 3.0));
        let t = Vector3::new(1.0, -1.5, 60.0);
        let model = config.model_points();
        let scaled: Vec<Point3<f64>> = model.iter().map(|p| Point3::from(p.coords * scale)).collect();
        let image = project_points(&model, &rvec, &t, &k).unwrap();
        let a = solve_pnp(&model, &image, &k).unwrap();
        let b = solve_pnp(&scaled, &image, &k).unwrap();
        prop_assert!((a.rotation_vector - b.rotation_vector).norm() < 1e-8);
        prop_assert!((a.translation_vector * scale - b.translation_vector).norm() < 1e-6 * scale * 60.0);
    }
}

#[test]
fn synthetic_frames_within_two_degrees() {
    let config = HeadPoseConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..1000 {
        let truth = EulerAngles::new(rng.random_range(-30.0..30.0), rng.random_range(-40.0..40.0), 0.0);
        let t = Vector3::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0), rng.random_range(40.0..80.0));
        let frame = synthesize_frame("s", i, truth, t, (640, 480), &config).unwrap();
        let s = estimate_euler(&frame, &config).sample().copied().expect("in-range pose");
        assert!(angle_gap(s.pitch, truth.pitch) < 2.0 && angle_gap(s.yaw, truth.yaw) < 2.0);
    }
}

fn sample(ts_ms: i64, pitch: f64, yaw: f64) -> EulerSample {
    EulerSample { ts_ms, pitch, yaw, roll: 0.0 }
}

fn run(trace: &[EulerSample]) -> Vec<(GestureKind, i64)> {
    let mut d = GestureDetector::new(&HeadPoseConfig::default());
    trace
        .iter()
        .filter_map(|s| d.step(*s).unwrap().map(|g| (g.kind, g.ts_ms)))
        .collect()
}

#[test]
fn threshold_edges() {
    let nod = |delta: f64| run(&[sample(0, 0.0, 0.0), sample(100, delta, 0.0)]);
    let shake = |delta: f64| run(&[sample(0, 0.0, 0.0), sample(100, 0.0, delta)]);
    assert_eq!(nod(10.1), vec![(GestureKind::Nod, 100)]);
    assert_eq!(nod(-10.1), vec![(GestureKind::Nod, 100)]);
    assert!(nod(9.9).is_empty());
    assert_eq!(shake(12.1), vec![(GestureKind::Shake, 100)]);
    assert!(shake(11.9).is_empty());
    // pitch wins when both move
    assert_eq!(run(&[sample(0, 0.0, 0.0), sample(100, 11.0, 13.0)]), vec![(GestureKind::Nod, 100)]);
}

#[test]
fn refractory_window() {
    let trace = [sample(0, 0.0, 0.0), sample(100, 12.0, 0.0), sample(500, 27.0, 0.0), sample(1100, 42.0, 0.0)];
    assert_eq!(run(&trace), vec![(GestureKind::Nod, 100), (GestureKind::Nod, 1100)]);
}

proptest! {
    #[test]
    fn detector_is_deterministic(steps in prop::collection::vec((1i64..400, -20.0f64..20.0, -20.0f64..20.0), 1..200)) {
        let mut t = 0;
        let trace: Vec<EulerSample> = steps
            .iter()
            .map(|&(dt, p, y)| {
                t += dt;
                sample(t, p, y)
            })
            .collect();
        let a = run(&trace);
        prop_assert_eq!(&a, &run(&trace));
        // gestures are separated by at least the refractory period
        for w in a.windows(2) {
            prop_assert!(w[1].1 - w[0].1 >= 900);
        }
    }
}
