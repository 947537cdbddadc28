//! Pinhole geometry and pose estimation from 2D-3D correspondences.

mod camera;
mod metrics;
mod p3p;
mod ransac;
mod refine;

pub use camera::{project, CameraIntrinsics, Correspondence2D3D, Pose, MIN_DEPTH};
pub use metrics::pose_error;
pub use p3p::solve_p3p;
pub use ransac::{estimate_pose_ransac, RansacConfig, RansacResult};
pub use refine::{refine_pose, RefineOptions};
