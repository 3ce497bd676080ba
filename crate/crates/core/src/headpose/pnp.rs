//! Perspective-n-point pose recovery.
//!
//! A normalized direct linear transform gives the initial pose, which is then
//! refined with Levenberg-Marquardt on the six pose parameters. Rotation
//! updates are applied on the left (`R <- exp(w) R`) so the Jacobian stays
//! closed-form.

use nalgebra::{DMatrix, Matrix3, Matrix3x4, Matrix4, Matrix6, Point2, Point3, Vector3, Vector6};

use super::rotation::{hat, rodrigues, rotation_matrix_to_vector};
use super::HeadPoseError;

/// Minimum number of correspondences for the linear initialization.
pub const MIN_CORRESPONDENCES: usize = 6;

/// Relative singular-value floor below which a point set counts as flat.
const DEGENERACY_RATIO: f64 = 1e-9;

/// Pinhole camera with zero lens distortion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// `(k1, k2, p1, p2, k3)`; always zero for the built-in construction.
    pub distortion: [f64; 5],
}

impl CameraIntrinsics {
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Projects a camera-frame point to pixels. Returns `None` behind the camera.
    pub fn project(&self, p: &Vector3<f64>) -> Option<Point2<f64>> {
        if p.z <= 0.0 || !p.z.is_finite() {
            return None;
        }
        Some(Point2::new(
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        ))
    }

    fn normalize(&self, p: &Point2<f64>) -> Point2<f64> {
        Point2::new((p.x - self.cx) / self.fx, (p.y - self.cy) / self.fy)
    }
}

/// Uncalibrated-webcam approximation: focal length equal to the image width,
/// principal point at the image center, no distortion.
pub fn build_intrinsics(width: u32, height: u32) -> Result<CameraIntrinsics, HeadPoseError> {
    if width == 0 || height == 0 {
        return Err(HeadPoseError::InvalidInput(format!(
            "image dimensions must be positive, got {width}x{height}"
        )));
    }
    let w = f64::from(width);
    Ok(CameraIntrinsics {
        fx: w,
        fy: w,
        cx: w / 2.0,
        cy: f64::from(height) / 2.0,
        distortion: [0.0; 5],
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PnpOptions {
    pub max_iterations: usize,
    /// Convergence threshold on the norm of the parameter step.
    pub step_tolerance: f64,
}

impl Default for PnpOptions {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            step_tolerance: 1e-10,
        }
    }
}

/// Rigid model-to-camera pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseSolution {
    /// Axis-angle rotation, radians.
    pub rotation_vector: Vector3<f64>,
    /// Translation in model units.
    pub translation_vector: Vector3<f64>,
    /// Root-mean-square reprojection error in pixels.
    pub reprojection_rms: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl PoseSolution {
    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        rodrigues(&self.rotation_vector)
    }
}

/// Projects model points with the given pose.
pub fn project_points(
    model_points: &[Point3<f64>],
    rotation_vector: &Vector3<f64>,
    translation: &Vector3<f64>,
    intrinsics: &CameraIntrinsics,
) -> Option<Vec<Point2<f64>>> {
    let r = rodrigues(rotation_vector);
    model_points
        .iter()
        .map(|p| intrinsics.project(&(r * p.coords + translation)))
        .collect()
}

pub fn solve_pnp(
    model_points: &[Point3<f64>],
    image_points: &[Point2<f64>],
    intrinsics: &CameraIntrinsics,
) -> Result<PoseSolution, HeadPoseError> {
    solve_pnp_with(model_points, image_points, intrinsics, PnpOptions::default())
}

pub fn solve_pnp_with(
    model_points: &[Point3<f64>],
    image_points: &[Point2<f64>],
    intrinsics: &CameraIntrinsics,
    options: PnpOptions,
) -> Result<PoseSolution, HeadPoseError> {
    if model_points.len() != image_points.len() {
        return Err(HeadPoseError::InvalidInput(format!(
            "{} model points but {} image points",
            model_points.len(),
            image_points.len()
        )));
    }
    if model_points.len() < MIN_CORRESPONDENCES {
        return Err(HeadPoseError::InvalidInput(format!(
            "at least {MIN_CORRESPONDENCES} correspondences required, got {}",
            model_points.len()
        )));
    }
    let finite = model_points.iter().all(|p| p.coords.iter().all(|c| c.is_finite()))
        && image_points.iter().all(|p| p.coords.iter().all(|c| c.is_finite()));
    if !finite || intrinsics.fx <= 0.0 || intrinsics.fy <= 0.0 {
        return Err(HeadPoseError::InvalidInput(
            "non-finite coordinates or invalid intrinsics".into(),
        ));
    }
    if is_flat(model_points.iter().map(|p| p.coords.as_slice()), 3) {
        return Err(HeadPoseError::Degenerate("model points are coplanar".into()));
    }
    if is_flat(image_points.iter().map(|p| p.coords.as_slice()), 2) {
        return Err(HeadPoseError::Degenerate("image points are collinear".into()));
    }

    let normalized: Vec<Point2<f64>> = image_points.iter().map(|p| intrinsics.normalize(p)).collect();
    let (rotation, translation) = linear_initialization(model_points, &normalized)?;
    refine(model_points, image_points, intrinsics, rotation, translation, options)
}

/// True when the centered point cloud spans fewer than `dim` dimensions.
pub(crate) fn is_flat<'a>(points: impl Iterator<Item = &'a [f64]>, dim: usize) -> bool {
    let rows: Vec<&[f64]> = points.collect();
    let n = rows.len();
    let mut centroid = vec![0.0; dim];
    for r in &rows {
        for (c, v) in centroid.iter_mut().zip(r.iter()) {
            *c += v / n as f64;
        }
    }
    let centered = DMatrix::from_fn(n, dim, |i, j| rows[i][j] - centroid[j]);
    let sv = centered.singular_values();
    let max = sv.max();
    let min = sv.min();
    max <= 0.0 || min / max < DEGENERACY_RATIO
}

/// Similarity transform moving the centroid to the origin and scaling the
/// mean distance to `sqrt(dim)`.
fn normalizing_transform(points: &[&[f64]], dim: usize) -> (Vec<f64>, f64) {
    let n = points.len() as f64;
    let mut centroid = vec![0.0; dim];
    for p in points {
        for (c, v) in centroid.iter_mut().zip(p.iter()) {
            *c += v / n;
        }
    }
    let mean_dist = points
        .iter()
        .map(|p| p.iter().zip(&centroid).map(|(v, c)| (v - c).powi(2)).sum::<f64>().sqrt())
        .sum::<f64>()
        / n;
    (centroid, (dim as f64).sqrt() / mean_dist)
}

fn linear_initialization(
    model_points: &[Point3<f64>],
    normalized_image: &[Point2<f64>],
) -> Result<(Matrix3<f64>, Vector3<f64>), HeadPoseError> {
    let world: Vec<&[f64]> = model_points.iter().map(|p| p.coords.as_slice()).collect();
    let image: Vec<&[f64]> = normalized_image.iter().map(|p| p.coords.as_slice()).collect();
    let (wc, ws) = normalizing_transform(&world, 3);
    let (ic, is) = normalizing_transform(&image, 2);

    let n = model_points.len();
    let mut a = DMatrix::<f64>::zeros(2 * n, 12);
    for i in 0..n {
        let x = [
            (world[i][0] - wc[0]) * ws,
            (world[i][1] - wc[1]) * ws,
            (world[i][2] - wc[2]) * ws,
            1.0,
        ];
        let u = (image[i][0] - ic[0]) * is;
        let v = (image[i][1] - ic[1]) * is;
        for k in 0..4 {
            a[(2 * i, k)] = x[k];
            a[(2 * i, 8 + k)] = -u * x[k];
            a[(2 * i + 1, 4 + k)] = x[k];
            a[(2 * i + 1, 8 + k)] = -v * x[k];
        }
    }

    let svd = a.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| HeadPoseError::Degenerate("linear system decomposition failed".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let largest = svd.singular_values[order[order.len() - 1]];
    // A one-dimensional null space is required for a unique projection.
    if order.len() < 12 || svd.singular_values[order[1]] < DEGENERACY_RATIO * largest {
        return Err(HeadPoseError::Degenerate(
            "projection is not uniquely determined by the correspondences".into(),
        ));
    }
    let h = v_t.row(order[0]);
    let p_norm = Matrix3x4::from_fn(|r, c| h[4 * r + c]);

    let t_world = Matrix4::new(
        ws, 0.0, 0.0, -ws * wc[0],
        0.0, ws, 0.0, -ws * wc[1],
        0.0, 0.0, ws, -ws * wc[2],
        0.0, 0.0, 0.0, 1.0,
    );
    let t_image_inv = Matrix3::new(
        1.0 / is, 0.0, ic[0],
        0.0, 1.0 / is, ic[1],
        0.0, 0.0, 1.0,
    );
    let mut p = t_image_inv * p_norm * t_world;
    let mut m: Matrix3<f64> = p.fixed_view::<3, 3>(0, 0).into_owned();
    if m.determinant() < 0.0 {
        p = -p;
        m = -m;
    }
    let svd = m.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(HeadPoseError::Degenerate("rotation block decomposition failed".into())),
    };
    let scale = svd.singular_values.sum() / 3.0;
    if scale <= 0.0 || !scale.is_finite() {
        return Err(HeadPoseError::Degenerate("zero projection scale".into()));
    }
    let mut rotation = u * v_t;
    if rotation.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        rotation = u * v_t;
    }
    let translation = p.column(3).into_owned() / scale;
    Ok((rotation, translation))
}

struct Evaluation {
    residuals: Vec<f64>,
    cost: f64,
}

fn evaluate(
    model_points: &[Point3<f64>],
    image_points: &[Point2<f64>],
    intrinsics: &CameraIntrinsics,
    rotation: &Matrix3<f64>,
    translation: &Vector3<f64>,
) -> Option<Evaluation> {
    let mut residuals = Vec::with_capacity(2 * model_points.len());
    for (m, obs) in model_points.iter().zip(image_points) {
        let projected = intrinsics.project(&(rotation * m.coords + translation))?;
        residuals.push(projected.x - obs.x);
        residuals.push(projected.y - obs.y);
    }
    let cost = residuals.iter().map(|r| r * r).sum();
    Some(Evaluation { residuals, cost })
}

fn normal_equations(
    model_points: &[Point3<f64>],
    intrinsics: &CameraIntrinsics,
    rotation: &Matrix3<f64>,
    translation: &Vector3<f64>,
    residuals: &[f64],
) -> (Matrix6<f64>, Vector6<f64>) {
    let mut jtj = Matrix6::zeros();
    let mut jtr = Vector6::zeros();
    for (i, m) in model_points.iter().enumerate() {
        let rotated = rotation * m.coords;
        let pc = rotated + translation;
        let inv_z = 1.0 / pc.z;
        let d_proj = nalgebra::Matrix2x3::new(
            intrinsics.fx * inv_z,
            0.0,
            -intrinsics.fx * pc.x * inv_z * inv_z,
            0.0,
            intrinsics.fy * inv_z,
            -intrinsics.fy * pc.y * inv_z * inv_z,
        );
        let d_rot = -d_proj * hat(&rotated);
        let mut j = nalgebra::Matrix2x6::zeros();
        j.fixed_view_mut::<2, 3>(0, 0).copy_from(&d_rot);
        j.fixed_view_mut::<2, 3>(0, 3).copy_from(&d_proj);
        let r = nalgebra::Vector2::new(residuals[2 * i], residuals[2 * i + 1]);
        jtj += j.transpose() * j;
        jtr += j.transpose() * r;
    }
    (jtj, jtr)
}

fn refine(
    model_points: &[Point3<f64>],
    image_points: &[Point2<f64>],
    intrinsics: &CameraIntrinsics,
    mut rotation: Matrix3<f64>,
    mut translation: Vector3<f64>,
    options: PnpOptions,
) -> Result<PoseSolution, HeadPoseError> {
    let mut current = evaluate(model_points, image_points, intrinsics, &rotation, &translation)
        .ok_or_else(|| HeadPoseError::Degenerate("initial pose places points behind the camera".into()))?;
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        iterations += 1;
        let (jtj, jtr) =
            normal_equations(model_points, intrinsics, &rotation, &translation, &current.residuals);
        if jtj.clone().cholesky().is_none() {
            return Err(HeadPoseError::Degenerate("rank-deficient normal equations".into()));
        }
        let mut damped = jtj;
        for k in 0..6 {
            damped[(k, k)] += lambda * jtj[(k, k)];
        }
        let step = match damped.cholesky() {
            Some(chol) => -chol.solve(&jtr),
            None => return Err(HeadPoseError::Degenerate("rank-deficient normal equations".into())),
        };
        let omega = Vector3::new(step[0], step[1], step[2]);
        let candidate_rotation = rodrigues(&omega) * rotation;
        let candidate_translation = translation + Vector3::new(step[3], step[4], step[5]);
        let step_norm = step.norm();

        match evaluate(model_points, image_points, intrinsics, &candidate_rotation, &candidate_translation) {
            Some(next) if next.cost <= current.cost => {
                rotation = candidate_rotation;
                translation = candidate_translation;
                current = next;
                lambda = (lambda * 0.1).max(1e-12);
            }
            _ => lambda *= 10.0,
        }
        if step_norm < options.step_tolerance || current.cost == 0.0 {
            converged = true;
            break;
        }
    }

    Ok(PoseSolution {
        rotation_vector: rotation_matrix_to_vector(&rotation),
        translation_vector: translation,
        reprojection_rms: (current.cost / model_points.len() as f64).sqrt(),
        converged,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::headpose::model::default_model_points;
    use crate::headpose::rotation::{euler_to_rotation_vector, EulerAngles};

    #[test]
    fn intrinsics_from_dimensions() {
        let k = build_intrinsics(640, 480).unwrap();
        assert_eq!((k.fx, k.fy, k.cx, k.cy), (640.0, 640.0, 320.0, 240.0));
        assert_eq!(k.distortion, [0.0; 5]);
        let k = build_intrinsics(2, 2).unwrap();
        assert_eq!((k.fx, k.cx, k.cy), (2.0, 1.0, 1.0));
        assert!(matches!(build_intrinsics(0, 480), Err(HeadPoseError::InvalidInput(_))));
        assert!(build_intrinsics(640, 0).is_err());
    }

    #[test]
    fn identity_pose_recovered() {
        let model = default_model_points();
        let k = build_intrinsics(640, 480).unwrap();
        let t = Vector3::new(0.0, 0.0, 50.0);
        let image = project_points(&model, &Vector3::zeros(), &t, &k).unwrap();
        let pose = solve_pnp(&model, &image, &k).unwrap();
        assert!(pose.rotation_vector.norm() < 1e-8, "{:?}", pose.rotation_vector);
        assert!((pose.translation_vector - t).norm() < 1e-6);
        assert!(pose.converged);
    }

    #[test]
    fn collinear_image_points_are_degenerate() {
        let model = default_model_points();
        let k = build_intrinsics(640, 480).unwrap();
        let image: Vec<_> = (0..model.len())
            .map(|i| Point2::new(100.0 + 10.0 * i as f64, 50.0 + 5.0 * i as f64))
            .collect();
        assert!(matches!(solve_pnp(&model, &image, &k), Err(HeadPoseError::Degenerate(_))));
    }

    #[test]
    fn coplanar_model_is_degenerate() {
        let model: Vec<_> = (0..8)
            .map(|i| Point3::new(i as f64, (i * i) as f64 * 0.3, 0.0))
            .collect();
        let k = build_intrinsics(640, 480).unwrap();
        let image: Vec<_> = (0..8).map(|i| Point2::new(i as f64 * 7.0, (i % 3) as f64 * 11.0)).collect();
        assert!(matches!(solve_pnp(&model, &image, &k), Err(HeadPoseError::Degenerate(_))));
    }

    #[test]
    fn too_few_points_rejected() {
        let model = default_model_points();
        let k = build_intrinsics(640, 480).unwrap();
        let image = project_points(&model, &Vector3::zeros(), &Vector3::new(0.0, 0.0, 50.0), &k).unwrap();
        assert!(matches!(
            solve_pnp(&model[..5], &image[..5], &k),
            Err(HeadPoseError::InvalidInput(_))
        ));
        assert!(solve_pnp(&model[..6], &image[..6], &k).is_ok());
    }

    #[test]
    fn non_convergence_is_flagged_not_failed() {
        let model = default_model_points();
        let k = build_intrinsics(640, 480).unwrap();
        let rvec = euler_to_rotation_vector(EulerAngles::new(10.0, 20.0, 0.0));
        let mut image = project_points(&model, &rvec, &Vector3::new(0.0, 0.0, 50.0), &k).unwrap();
        image[3].x += 4.0;
        let pose = solve_pnp_with(
            &model,
            &image,
            &k,
            PnpOptions { max_iterations: 1, step_tolerance: 1e-10 },
        )
        .unwrap();
        assert!(!pose.converged);
        assert_eq!(pose.iterations, 1);
        assert!(pose.reprojection_rms > 0.0);
    }
}
