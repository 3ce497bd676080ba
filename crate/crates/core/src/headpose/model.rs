//! Default landmark subset, generic 3D head model and detector configuration.

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::pnp::{is_flat, MIN_CORRESPONDENCES};
use super::HeadPoseError;

/// Number of points in a standard facial landmark annotation.
pub const LANDMARK_COUNT: usize = 68;

/// Chin, brow corners, nose tip and wings, eye corners, mouth corners.
pub const DEFAULT_LANDMARK_INDICES: [usize; 14] =
    [8, 17, 21, 22, 26, 30, 31, 35, 36, 39, 42, 45, 48, 54];

/// Generic anthropometric head, centimetres, camera axes (x right, y down,
/// z away from the viewer). Order matches [`DEFAULT_LANDMARK_INDICES`].
pub const DEFAULT_MODEL_POINTS: [[f64; 3]; 14] = [
    [0.0, 7.415691, -4.070434],        // 8 chin
    [-6.825897, -6.760612, -4.402142], // 17 brow outer
    [-1.330353, -7.122144, -6.903745], // 21 brow inner
    [1.330353, -7.122144, -6.903745],  // 22 brow inner
    [6.825897, -6.760612, -4.402142],  // 26 brow outer
    [0.0, -2.0, -8.0],                 // 30 nose tip
    [-2.005628, -1.409845, -6.165652], // 31 nose wing
    [2.005628, -1.409845, -6.165652],  // 35 nose wing
    [-5.311432, -5.485328, -3.987654], // 36 eye outer
    [-1.789930, -5.393625, -4.413414], // 39 eye inner
    [1.789930, -5.393625, -4.413414],  // 42 eye inner
    [5.311432, -5.485328, -3.987654],  // 45 eye outer
    [-2.774015, 2.080775, -5.048531],  // 48 mouth corner
    [2.774015, 2.080775, -5.048531],   // 54 mouth corner
];

pub fn default_model_points() -> Vec<Point3<f64>> {
    DEFAULT_MODEL_POINTS.iter().map(|p| Point3::new(p[0], p[1], p[2])).collect()
}

/// Pose estimation and gesture detection settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadPoseConfig {
    pub landmark_indices: Vec<usize>,
    pub model_points_3d: Vec<[f64; 3]>,
    pub sample_period_ms: i64,
    pub pitch_threshold_deg: f64,
    pub yaw_threshold_deg: f64,
    pub refractory_ms: i64,
    /// Accepted samples satisfy `|pitch| <= pitch_range_deg`.
    pub pitch_range_deg: f64,
    /// Accepted samples satisfy `|yaw| <= yaw_range_deg`.
    pub yaw_range_deg: f64,
    /// The detector reference is the first sample within this range on both axes.
    pub frontal_range_deg: f64,
}

impl Default for HeadPoseConfig {
    fn default() -> Self {
        Self {
            landmark_indices: DEFAULT_LANDMARK_INDICES.to_vec(),
            model_points_3d: DEFAULT_MODEL_POINTS.to_vec(),
            sample_period_ms: 100,
            pitch_threshold_deg: 10.0,
            yaw_threshold_deg: 12.0,
            refractory_ms: 900,
            pitch_range_deg: 60.0,
            yaw_range_deg: 75.0,
            frontal_range_deg: 15.0,
        }
    }
}

impl HeadPoseConfig {
    pub fn model_points(&self) -> Vec<Point3<f64>> {
        self.model_points_3d.iter().map(|p| Point3::new(p[0], p[1], p[2])).collect()
    }

    pub fn validate(&self) -> Result<(), HeadPoseError> {
        let invalid = |msg: String| Err(HeadPoseError::InvalidConfig(msg));
        let n = self.landmark_indices.len();
        if n != self.model_points_3d.len() {
            return invalid(format!(
                "{n} landmark indices but {} model points",
                self.model_points_3d.len()
            ));
        }
        if n < MIN_CORRESPONDENCES {
            return invalid(format!("at least {MIN_CORRESPONDENCES} landmarks required"));
        }
        let mut seen = [false; LANDMARK_COUNT];
        for &i in &self.landmark_indices {
            if i >= LANDMARK_COUNT {
                return invalid(format!("landmark index {i} out of range"));
            }
            if std::mem::replace(&mut seen[i], true) {
                return invalid(format!("landmark index {i} repeated"));
            }
        }
        if self.model_points_3d.iter().flatten().any(|c| !c.is_finite())
            || is_flat(self.model_points_3d.iter().map(|p| p.as_slice()), 3)
        {
            return invalid("model points must be finite and non-coplanar".into());
        }
        let positive = [
            self.pitch_threshold_deg,
            self.yaw_threshold_deg,
            self.pitch_range_deg,
            self.yaw_range_deg,
            self.frontal_range_deg,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) || self.sample_period_ms <= 0 {
            return invalid("thresholds, ranges and sample period must be positive".into());
        }
        if self.refractory_ms < self.sample_period_ms {
            return invalid("refractory period shorter than the sample period".into());
        }
        Ok(())
    }
}
