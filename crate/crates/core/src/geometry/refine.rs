//! Gauss-Newton pose refinement on pixel reprojection error.
//!
//! The pose is updated as `R ← exp([ω]×)·R`, `t ← t + δt` with the 6-vector
//! `(ω, δt)` solved from the normal equations. A step that raises the cost is
//! retried with Levenberg damping until it does not.

use nalgebra::{Matrix2x3, Matrix6, SMatrix, UnitQuaternion, Vector2, Vector3, Vector6};

use super::camera::{CameraIntrinsics, Correspondence2D3D, Pose, MIN_DEPTH};
use crate::error::{Error, Result};

const MAX_DAMPING: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineOptions {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions {
            max_iters: 50,
            tol: 1e-12,
        }
    }
}

/// Minimizes the summed squared reprojection error starting from `initial`.
///
/// Correspondences behind the camera at the initial pose are ignored. The
/// returned pose never has a higher cost than `initial`.
pub fn refine_pose(
    initial: &Pose,
    corr: &[Correspondence2D3D],
    k: &CameraIntrinsics,
    max_iters: usize,
    tol: f64,
) -> Result<Pose> {
    let usable: Vec<Correspondence2D3D> = corr
        .iter()
        .filter(|c| c.is_finite() && initial.transform(&c.world).z > MIN_DEPTH)
        .copied()
        .collect();
    if usable.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: usable.len(),
        });
    }

    let mut pose = *initial;
    let mut cost = total_cost(&pose, &usable, k);
    if !cost.is_finite() {
        return Err(Error::NonConvergence("non-finite initial cost".into()));
    }
    let mut damping = 0.0;

    for _ in 0..max_iters {
        let (h, g) = normal_equations(&pose, &usable, k);
        let accepted = loop {
            let mut a = h;
            if damping > 0.0 {
                for i in 0..6 {
                    a[(i, i)] += damping * h[(i, i)].max(1e-9);
                }
            }
            let Some(chol) = a.cholesky() else {
                damping = escalate(damping);
                if damping > MAX_DAMPING {
                    return Err(Error::NonConvergence(
                        "normal equations singular after damping".into(),
                    ));
                }
                continue;
            };
            let step = -chol.solve(&g);
            if step.norm() < tol {
                break None;
            }
            let candidate = apply_step(&pose, &step);
            let new_cost = total_cost(&candidate, &usable, k);
            if new_cost <= cost {
                damping = if damping > 1e-9 { damping / 10.0 } else { 0.0 };
                break Some((candidate, new_cost, step.norm()));
            }
            damping = escalate(damping);
            if damping > MAX_DAMPING {
                // no descent direction left at working precision
                break None;
            }
        };
        match accepted {
            Some((p, c, step_norm)) => {
                pose = p;
                cost = c;
                if step_norm < tol {
                    break;
                }
            }
            None => break,
        }
    }
    Ok(pose)
}

fn escalate(damping: f64) -> f64 {
    if damping == 0.0 {
        1e-4
    } else {
        damping * 10.0
    }
}

fn apply_step(pose: &Pose, step: &Vector6<f64>) -> Pose {
    let omega = Vector3::new(step[0], step[1], step[2]);
    let dt = Vector3::new(step[3], step[4], step[5]);
    let rotation = UnitQuaternion::from_scaled_axis(omega) * pose.rotation;
    Pose::new(
        UnitQuaternion::new_normalize(rotation.into_inner()),
        pose.translation + dt,
    )
}

fn total_cost(pose: &Pose, corr: &[Correspondence2D3D], k: &CameraIntrinsics) -> f64 {
    let mut cost = 0.0;
    for c in corr {
        let pc = pose.transform(&c.world);
        if pc.z <= MIN_DEPTH {
            return f64::INFINITY;
        }
        cost += (k.project_camera_point(&pc) - c.pixel).norm_squared();
    }
    cost
}

/// `JᵀJ` and `Jᵀr` of the stacked pixel residuals.
fn normal_equations(
    pose: &Pose,
    corr: &[Correspondence2D3D],
    k: &CameraIntrinsics,
) -> (Matrix6<f64>, Vector6<f64>) {
    let mut h = Matrix6::zeros();
    let mut g = Vector6::zeros();
    for c in corr {
        let rotated = pose.rotation * c.world;
        let pc = rotated + pose.translation;
        let (x, y, z) = (pc.x, pc.y, pc.z);
        let r: Vector2<f64> = k.project_camera_point(&pc) - c.pixel;
        let d_proj = Matrix2x3::new(
            k.fx / z,
            0.0,
            -k.fx * x / (z * z),
            0.0,
            k.fy / z,
            -k.fy * y / (z * z),
        );
        // ∂pc/∂ω = −[R·p]×, ∂pc/∂t = I
        let skew = -rotated.cross_matrix();
        let mut j = SMatrix::<f64, 2, 6>::zeros();
        j.fixed_view_mut::<2, 3>(0, 0).copy_from(&(d_proj * skew));
        j.fixed_view_mut::<2, 3>(0, 3).copy_from(&d_proj);
        h += j.transpose() * j;
        g += j.transpose() * r;
    }
    (h, g)
}
