//! Axis-angle, rotation matrix and Euler angle conversions.
//!
//! Euler angles follow a single fixed Tait-Bryan convention throughout the
//! crate: `R = Rz(roll) * Ry(yaw) * Rx(pitch)` in the camera frame (x right,
//! y down, z forward). Pitch is the nodding axis and yaw the shaking axis.

use nalgebra::{Matrix3, Rotation3, Vector3};

/// Below this `|cos(yaw)|` the decomposition is treated as gimbal-locked.
pub const GIMBAL_LOCK_EPS: f64 = 1e-7;

/// Head orientation in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EulerAngles {
    pub pitch: f64,
    pub yaw: f64,
    pub roll: f64,
}

impl EulerAngles {
    pub fn new(pitch: f64, yaw: f64, roll: f64) -> Self {
        Self { pitch, yaw, roll }
    }
}

/// Skew-symmetric cross-product matrix of `v`.
pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rodrigues formula: rotation vector (axis times angle, radians) to matrix.
pub fn rodrigues(rotation_vector: &Vector3<f64>) -> Matrix3<f64> {
    let theta_sq = rotation_vector.norm_squared();
    let k = hat(rotation_vector);
    let k2 = k * k;
    // Taylor expansions keep the small-angle branch accurate to machine precision.
    let (a, b) = if theta_sq < 1e-10 {
        (1.0 - theta_sq / 6.0, 0.5 - theta_sq / 24.0)
    } else {
        let theta = theta_sq.sqrt();
        (theta.sin() / theta, (1.0 - theta.cos()) / theta_sq)
    };
    Matrix3::identity() + k * a + k2 * b
}

/// Inverse of [`rodrigues`]. The returned angle lies in `[0, pi]`.
pub fn rotation_matrix_to_vector(matrix: &Matrix3<f64>) -> Vector3<f64> {
    Rotation3::from_matrix(matrix).scaled_axis()
}

/// Extracts `(pitch, yaw, roll)` in degrees from a rotation matrix.
///
/// At gimbal lock roll is pinned to zero and the remaining in-plane rotation
/// is reported as pitch.
pub fn matrix_to_euler(r: &Matrix3<f64>) -> EulerAngles {
    let cos_yaw = r[(0, 0)].hypot(r[(1, 0)]);
    let yaw = (-r[(2, 0)]).atan2(cos_yaw);
    let (pitch, roll) = if cos_yaw < GIMBAL_LOCK_EPS {
        ((-r[(1, 2)]).atan2(r[(1, 1)]), 0.0)
    } else {
        (r[(2, 1)].atan2(r[(2, 2)]), r[(1, 0)].atan2(r[(0, 0)]))
    };
    EulerAngles {
        pitch: pitch.to_degrees(),
        yaw: yaw.to_degrees(),
        roll: roll.to_degrees(),
    }
}

/// Composes `Rz(roll) * Ry(yaw) * Rx(pitch)` from angles in degrees.
pub fn euler_to_matrix(angles: EulerAngles) -> Matrix3<f64> {
    let (sp, cp) = angles.pitch.to_radians().sin_cos();
    let (sy, cy) = angles.yaw.to_radians().sin_cos();
    let (sr, cr) = angles.roll.to_radians().sin_cos();
    Matrix3::new(
        cr * cy,
        cr * sy * sp - sr * cp,
        cr * sy * cp + sr * sp,
        sr * cy,
        sr * sy * sp + cr * cp,
        sr * sy * cp - cr * sp,
        -sy,
        cy * sp,
        cy * cp,
    )
}

pub fn euler_to_rotation_vector(angles: EulerAngles) -> Vector3<f64> {
    rotation_matrix_to_vector(&euler_to_matrix(angles))
}

/// Rotation vector to `(pitch, yaw, roll)` degrees via [`rodrigues`].
pub fn rotation_vector_to_euler(rotation_vector: &Vector3<f64>) -> EulerAngles {
    matrix_to_euler(&rodrigues(rotation_vector))
}
