//! Camera relocalization from sparse image descriptors.
//!
//! A shared-weights MLP regresses a 3D scene coordinate for every descriptor of
//! a frame; the resulting 2D-3D matches go through P3P inside RANSAC followed by
//! Gauss-Newton refinement to recover the 6-DoF camera pose.
//!
//! Modules:
//! - [`regressor`]: the MLP, its loss and gradients, Adam and the training loop.
//! - [`geometry`]: pinhole projection, P3P, pose refinement, RANSAC, pose error.
//! - [`data`]: descriptor sets, the on-disk dataset format and subsampling.
//! - [`synth`]: synthetic scenes and rendered views with exact ground truth.
//! - [`eval`]: error statistics and benchmark/ablation drivers.
//! - [`cli`]: the `f2m` command-line front end.

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod regressor;
pub mod synth;

pub use error::{Error, Result};
