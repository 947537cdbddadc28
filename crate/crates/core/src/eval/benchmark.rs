use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{accuracy_at, median_errors, PoseErr};
use crate::data::{top_k_descriptors, DescriptorSet, SceneDataset};
use crate::error::{Error, Result};
use crate::geometry::{
    estimate_pose_ransac, pose_error, CameraIntrinsics, Correspondence2D3D, Pose, RansacConfig,
};
use crate::regressor::MlpRegressor;
use crate::synth::derive_seed;

pub const DEFAULT_DESC_COUNT: usize = 2048;

const TAG_RANSAC: u64 = 11;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkOptions {
    /// Descriptors kept per query frame (highest detector score first).
    pub desc_count: usize,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        BenchmarkOptions {
            desc_count: DEFAULT_DESC_COUNT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameResult {
    pub id: String,
    /// `None` when localization failed.
    pub err_m: Option<f64>,
    pub err_deg: Option<f64>,
    pub inliers: usize,
    pub time_ms: f64,
    pub regression_ms: f64,
    pub pose_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Per-frame errors plus aggregate statistics of one benchmark run.
///
/// Medians are taken over localized frames only; accuracies count failed
/// frames as misses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scene: String,
    pub model_params: usize,
    pub desc_count: usize,
    pub per_frame: Vec<FrameResult>,
    pub median_m: Option<f64>,
    pub median_deg: Option<f64>,
    pub acc_3cm3deg: f64,
    pub acc_5cm5deg: f64,
    pub acc_10cm5deg: f64,
    pub failures: usize,
    pub mean_regression_ms: f64,
    pub mean_pose_ms: f64,
}

impl EvalReport {
    pub fn errors(&self) -> Vec<PoseErr> {
        self.per_frame
            .iter()
            .filter_map(|f| Some(PoseErr::new(f.err_m?, f.err_deg?)))
            .collect()
    }

    /// Copy with every wall-clock field zeroed, for reproducibility checks.
    pub fn without_timings(&self) -> EvalReport {
        let mut r = self.clone();
        for f in &mut r.per_frame {
            f.time_ms = 0.0;
            f.regression_ms = 0.0;
            f.pose_ms = 0.0;
        }
        r.mean_regression_ms = 0.0;
        r.mean_pose_ms = 0.0;
        r
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// `id,err_m,err_deg,inliers`; failed frames leave the errors empty.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("id,err_m,err_deg,inliers\n");
        for f in &self.per_frame {
            let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{}", f.id, fmt(f.err_m), fmt(f.err_deg), f.inliers);
        }
        s
    }

    pub fn write(&self, json_path: &Path) -> Result<()> {
        fs::write(json_path, self.to_json()).map_err(|e| Error::io(json_path, e))?;
        let csv_path = json_path.with_extension("csv");
        fs::write(&csv_path, self.to_csv()).map_err(|e| Error::io(&csv_path, e))
    }
}

/// 2D-3D matches from a frame's keypoints and predicted coordinates.
pub fn regress_correspondences(
    model: &MlpRegressor,
    frame: &DescriptorSet,
) -> Result<Vec<Correspondence2D3D>> {
    let coords = model.forward(frame)?;
    Ok(coords
        .0
        .iter()
        .enumerate()
        .map(|(i, w)| Correspondence2D3D::new(frame.keypoint(i), *w))
        .collect())
}

/// Regress coordinates for one frame and estimate its pose.
pub fn localize_frame(
    model: &MlpRegressor,
    frame: &DescriptorSet,
    k: &CameraIntrinsics,
    ransac: &RansacConfig,
) -> Result<(Pose, usize)> {
    let corr = regress_correspondences(model, frame)?;
    let r = estimate_pose_ransac(&corr, k, ransac)?;
    Ok((r.pose, r.n_inliers))
}

fn evaluate_frame(
    model: &MlpRegressor,
    frame: &DescriptorSet,
    truth: &Pose,
    k: &CameraIntrinsics,
    ransac: &RansacConfig,
    desc_count: usize,
) -> Result<FrameResult> {
    let start = Instant::now();
    let query = top_k_descriptors(frame, desc_count);
    let corr = regress_correspondences(model, &query)?;
    let regression_ms = start.elapsed().as_secs_f64() * 1e3;
    let pose_start = Instant::now();
    let outcome = estimate_pose_ransac(&corr, k, ransac);
    let pose_ms = pose_start.elapsed().as_secs_f64() * 1e3;
    let time_ms = start.elapsed().as_secs_f64() * 1e3;
    let id = frame.frame_id().to_string();
    Ok(match outcome {
        Ok(r) => {
            let (m, deg) = pose_error(&r.pose, truth);
            FrameResult {
                id,
                err_m: Some(m),
                err_deg: Some(deg),
                inliers: r.n_inliers,
                time_ms,
                regression_ms,
                pose_ms,
                failure: None,
            }
        }
        Err(
            e @ (Error::InsufficientData { .. }
            | Error::LocalizationFailure { .. }
            | Error::NonConvergence(_)),
        ) => FrameResult {
            id,
            err_m: None,
            err_deg: None,
            inliers: 0,
            time_ms,
            regression_ms,
            pose_ms,
            failure: Some(e.to_string()),
        },
        Err(e) => return Err(e),
    })
}

/// Localizes every frame of `test` and aggregates the pose errors.
///
/// Each frame's RANSAC seed is derived from `ransac.seed` and the frame index,
/// so results do not depend on scheduling.
pub fn run_benchmark(
    model: &MlpRegressor,
    test: &SceneDataset,
    ransac: &RansacConfig,
    options: &BenchmarkOptions,
) -> Result<EvalReport> {
    if test.frames.is_empty() {
        return Err(Error::InvalidInput("empty test set".into()));
    }
    if options.desc_count == 0 {
        return Err(Error::InvalidInput("desc_count must be at least 1".into()));
    }
    ransac.validate()?;
    let k = test.camera.intrinsics;
    let per_frame = test
        .frames
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            let truth = f.pose.ok_or_else(|| {
                Error::InvalidInput(format!("frame {}: no ground-truth pose", f.set.frame_id()))
            })?;
            let cfg = RansacConfig {
                seed: derive_seed(ransac.seed, TAG_RANSAC, i as u64),
                ..ransac.clone()
            };
            evaluate_frame(model, &f.set, &truth, &k, &cfg, options.desc_count)
        })
        .collect::<Result<Vec<_>>>()?;

    let errors: Vec<PoseErr> = per_frame
        .iter()
        .filter_map(|f| Some(PoseErr::new(f.err_m?, f.err_deg?)))
        .collect();
    let failures = per_frame.len() - errors.len();
    // failed frames count as misses
    let all: Vec<PoseErr> = per_frame
        .iter()
        .map(|f| PoseErr::new(f.err_m.unwrap_or(f64::INFINITY), f.err_deg.unwrap_or(f64::INFINITY)))
        .collect();
    let median = median_errors(&errors).ok();
    let n = per_frame.len() as f64;
    Ok(EvalReport {
        scene: test.scene.clone(),
        model_params: model.param_count(),
        desc_count: options.desc_count,
        median_m: median.map(|m| m.meters),
        median_deg: median.map(|m| m.degrees),
        acc_3cm3deg: accuracy_at(&all, 0.03, 3.0)?,
        acc_5cm5deg: accuracy_at(&all, 0.05, 5.0)?,
        acc_10cm5deg: accuracy_at(&all, 0.10, 5.0)?,
        failures,
        mean_regression_ms: per_frame.iter().map(|f| f.regression_ms).sum::<f64>() / n,
        mean_pose_ms: per_frame.iter().map(|f| f.pose_ms).sum::<f64>() / n,
        per_frame,
    })
}
