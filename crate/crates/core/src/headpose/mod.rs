//! Landmark frames to head orientation, and orientation to nod/shake gestures.

mod gesture;
mod model;
mod pnp;
mod rotation;

use nalgebra::{Point2, Vector3};
use serde::{Deserialize, Serialize};

pub use gesture::{GestureDetector, GestureKind, HeadGesture, OutOfOrder};
pub use model::{
    default_model_points, HeadPoseConfig, DEFAULT_LANDMARK_INDICES, DEFAULT_MODEL_POINTS,
    LANDMARK_COUNT,
};
pub use pnp::{
    build_intrinsics, project_points, solve_pnp, solve_pnp_with, CameraIntrinsics, PnpOptions,
    PoseSolution, MIN_CORRESPONDENCES,
};
pub use rotation::{
    euler_to_matrix, euler_to_rotation_vector, matrix_to_euler, rodrigues,
    rotation_matrix_to_vector, rotation_vector_to_euler, EulerAngles, GIMBAL_LOCK_EPS,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HeadPoseError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("invalid head pose config: {0}")]
    InvalidConfig(String),
}

/// One timestamped 68-point landmark observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkFrame {
    pub student_id: String,
    pub ts_ms: i64,
    pub width: u32,
    pub height: u32,
    pub points: Vec<[f64; 2]>,
}

impl LandmarkFrame {
    pub fn validate(&self) -> Result<(), HeadPoseError> {
        if self.width == 0 || self.height == 0 {
            return Err(HeadPoseError::InvalidInput("image dimensions must be positive".into()));
        }
        if self.points.len() != LANDMARK_COUNT {
            return Err(HeadPoseError::InvalidInput(format!(
                "expected {LANDMARK_COUNT} landmarks, got {}",
                self.points.len()
            )));
        }
        let (w, h) = (f64::from(self.width), f64::from(self.height));
        for (i, [x, y]) in self.points.iter().enumerate() {
            if !(x.is_finite() && y.is_finite() && (0.0..=w).contains(x) && (0.0..=h).contains(y)) {
                return Err(HeadPoseError::InvalidInput(format!(
                    "landmark {i} at ({x}, {y}) is outside the {}x{} image",
                    self.width, self.height
                )));
            }
        }
        Ok(())
    }
}

/// Timestamped head orientation, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerSample {
    pub ts_ms: i64,
    pub pitch: f64,
    pub yaw: f64,
    pub roll: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outlier {
    /// Pose solved but outside the physiological head range.
    OutOfRange(EulerSample),
    /// Pose could not be solved for this frame.
    SolveFailed(HeadPoseError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum EulerEstimate {
    Sample(EulerSample),
    Outlier(Outlier),
}

impl EulerEstimate {
    pub fn sample(&self) -> Option<&EulerSample> {
        match self {
            Self::Sample(s) => Some(s),
            Self::Outlier(_) => None,
        }
    }
}

/// Estimates head orientation for one frame. Failures never propagate as
/// errors; they are reported as outliers so the stream can continue.
pub fn estimate_euler(frame: &LandmarkFrame, config: &HeadPoseConfig) -> EulerEstimate {
    match solve_frame(frame, config) {
        Ok(sample) => {
            if sample.pitch.abs() > config.pitch_range_deg || sample.yaw.abs() > config.yaw_range_deg {
                EulerEstimate::Outlier(Outlier::OutOfRange(sample))
            } else {
                EulerEstimate::Sample(sample)
            }
        }
        Err(e) => EulerEstimate::Outlier(Outlier::SolveFailed(e)),
    }
}

fn solve_frame(frame: &LandmarkFrame, config: &HeadPoseConfig) -> Result<EulerSample, HeadPoseError> {
    frame.validate()?;
    let intrinsics = build_intrinsics(frame.width, frame.height)?;
    let image: Vec<Point2<f64>> = config
        .landmark_indices
        .iter()
        .map(|&i| {
            let [x, y] = frame.points.get(i).copied().ok_or_else(|| {
                HeadPoseError::InvalidConfig(format!("landmark index {i} out of range"))
            })?;
            Ok(Point2::new(x, y))
        })
        .collect::<Result<_, HeadPoseError>>()?;
    let pose = solve_pnp(&config.model_points(), &image, &intrinsics)?;
    let angles = rotation_vector_to_euler(&pose.rotation_vector);
    Ok(EulerSample { ts_ms: frame.ts_ms, pitch: angles.pitch, yaw: angles.yaw, roll: angles.roll })
}

/// Builds a noiseless frame by projecting the configured head model with a
/// known pose. Landmarks outside the configured subset are placed at the
/// centroid of the projected subset.
pub fn synthesize_frame(
    student_id: impl Into<String>,
    ts_ms: i64,
    angles: EulerAngles,
    translation: Vector3<f64>,
    (width, height): (u32, u32),
    config: &HeadPoseConfig,
) -> Result<LandmarkFrame, HeadPoseError> {
    let intrinsics = build_intrinsics(width, height)?;
    let rvec = euler_to_rotation_vector(angles);
    let projected = project_points(&config.model_points(), &rvec, &translation, &intrinsics)
        .ok_or_else(|| HeadPoseError::InvalidInput("model projects behind the camera".into()))?;
    let n = projected.len() as f64;
    let cx = projected.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = projected.iter().map(|p| p.y).sum::<f64>() / n;
    let mut points = vec![[cx, cy]; LANDMARK_COUNT];
    for (&i, p) in config.landmark_indices.iter().zip(&projected) {
        points[i] = [p.x, p.y];
    }
    let frame = LandmarkFrame { student_id: student_id.into(), ts_ms, width, height, points };
    frame.validate()?;
    Ok(frame)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(pitch: f64, yaw: f64) -> LandmarkFrame {
        synthesize_frame(
            "s1",
            0,
            EulerAngles::new(pitch, yaw, 0.0),
            Vector3::new(0.0, 0.0, 50.0),
            (640, 480),
            &HeadPoseConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn frontal_frame() {
        let est = estimate_euler(&frame(0.0, 0.0), &HeadPoseConfig::default());
        let s = est.sample().expect("frontal pose accepted");
        assert!(s.pitch.abs() < 2.0 && s.yaw.abs() < 2.0);
    }

    #[test]
    fn pitched_frame() {
        let est = estimate_euler(&frame(25.0, 10.0), &HeadPoseConfig::default());
        let s = est.sample().unwrap();
        assert!((s.pitch - 25.0).abs() < 2.0);
        assert!((s.yaw - 10.0).abs() < 2.0);
    }

    #[test]
    fn extreme_yaw_is_outlier() {
        let est = estimate_euler(&frame(0.0, 80.0), &HeadPoseConfig::default());
        match est {
            EulerEstimate::Outlier(Outlier::OutOfRange(s)) => assert!((s.yaw - 80.0).abs() < 1e-6),
            other => panic!("expected out-of-range outlier, got {other:?}"),
        }
    }

    #[test]
    fn malformed_frames_are_outliers() {
        let mut f = frame(0.0, 0.0);
        f.points.pop();
        assert!(matches!(
            estimate_euler(&f, &HeadPoseConfig::default()),
            EulerEstimate::Outlier(Outlier::SolveFailed(HeadPoseError::InvalidInput(_)))
        ));
        let mut f = frame(0.0, 0.0);
        f.points[10] = [700.0, 10.0];
        assert!(f.validate().is_err());
        f.points[10] = [f64::NAN, 10.0];
        assert!(f.validate().is_err());
    }

    #[test]
    fn collinear_landmarks_are_outliers() {
        let mut f = frame(0.0, 0.0);
        for (k, p) in f.points.iter_mut().enumerate() {
            *p = [100.0 + k as f64, 100.0 + k as f64];
        }
        assert!(matches!(
            estimate_euler(&f, &HeadPoseConfig::default()),
            EulerEstimate::Outlier(Outlier::SolveFailed(HeadPoseError::Degenerate(_)))
        ));
    }
}
