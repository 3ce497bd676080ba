//! Nod/shake detection from consecutive Euler samples.

use serde::{Deserialize, Serialize};

use super::model::HeadPoseConfig;
use super::EulerSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GestureKind {
    Nod,
    Shake,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadGesture {
    pub kind: GestureKind,
    pub ts_ms: i64,
    /// Absolute angle change that triggered the detection, degrees.
    pub delta_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("sample at {ts_ms} ms is not after the previous sample at {previous_ms} ms")]
pub struct OutOfOrder {
    pub ts_ms: i64,
    pub previous_ms: i64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Thresholds {
    pitch: f64,
    yaw: f64,
    refractory_ms: i64,
    pitch_range: f64,
    yaw_range: f64,
    frontal: f64,
}

/// Per-student gesture detector state.
///
/// The reference sample is the last accepted sample. Until a sample within
/// the frontal range arrives the detector stays uninitialized and discards
/// input.
#[derive(Debug, Clone, PartialEq)]
pub struct GestureDetector {
    thresholds: Thresholds,
    reference: Option<EulerSample>,
    last_gesture_ms: Option<i64>,
}

impl GestureDetector {
    pub fn new(config: &HeadPoseConfig) -> Self {
        Self {
            thresholds: Thresholds {
                pitch: config.pitch_threshold_deg,
                yaw: config.yaw_threshold_deg,
                refractory_ms: config.refractory_ms,
                pitch_range: config.pitch_range_deg,
                yaw_range: config.yaw_range_deg,
                frontal: config.frontal_range_deg,
            },
            reference: None,
            last_gesture_ms: None,
        }
    }

    pub fn is_initialized(&self) -> bool {
        self.reference.is_some()
    }

    pub fn reference(&self) -> Option<&EulerSample> {
        self.reference.as_ref()
    }

    /// Feeds one sample. Pitch changes take precedence over yaw changes when
    /// both exceed their thresholds.
    pub fn step(&mut self, sample: EulerSample) -> Result<Option<HeadGesture>, OutOfOrder> {
        let t = self.thresholds;
        if let Some(prev) = &self.reference {
            if sample.ts_ms <= prev.ts_ms {
                return Err(OutOfOrder { ts_ms: sample.ts_ms, previous_ms: prev.ts_ms });
            }
        }
        if !(sample.pitch.abs() <= t.pitch_range && sample.yaw.abs() <= t.yaw_range) {
            return Ok(None);
        }
        let Some(prev) = self.reference.replace(sample) else {
            if sample.pitch.abs() > t.frontal || sample.yaw.abs() > t.frontal {
                self.reference = None;
            }
            return Ok(None);
        };

        let d_pitch = (sample.pitch - prev.pitch).abs();
        let d_yaw = (sample.yaw - prev.yaw).abs();
        let candidate = if d_pitch > t.pitch {
            Some((GestureKind::Nod, d_pitch))
        } else if d_yaw > t.yaw {
            Some((GestureKind::Shake, d_yaw))
        } else {
            None
        };
        let Some((kind, delta_deg)) = candidate else {
            return Ok(None);
        };
        if let Some(last) = self.last_gesture_ms {
            if sample.ts_ms - last < t.refractory_ms {
                return Ok(None);
            }
        }
        self.last_gesture_ms = Some(sample.ts_ms);
        Ok(Some(HeadGesture { kind, ts_ms: sample.ts_ms, delta_deg }))
    }
}
