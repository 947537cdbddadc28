use super::camera::Pose;

/// Translation (meters, between camera centers) and rotation (degrees) error.
///
/// The rotation angle is `2·acos(|⟨q_est, q_truth⟩|)`, evaluated as
/// `2·atan2(‖vec(q_rel)‖, |w(q_rel)|)` which is the same quantity but keeps full
/// precision for nearly identical rotations.
pub fn pose_error(estimate: &Pose, truth: &Pose) -> (f64, f64) {
    let dt = (estimate.center() - truth.center()).norm();
    let rel = estimate.rotation.quaternion().conjugate() * truth.rotation.quaternion();
    let w = rel.w.abs();
    let v = rel.imag().norm();
    let angle = 2.0 * v.atan2(w);
    (dt, angle.to_degrees())
}
