use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::camera::{CameraIntrinsics, Correspondence2D3D, Pose};
use super::p3p::solve_p3p;
use super::refine::{refine_pose, RefineOptions};
use crate::error::{Error, Result};

const MIN_INLIERS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct RansacConfig {
    pub max_reproj_error_px: f64,
    pub max_iterations: usize,
    pub confidence: f64,
    pub seed: u64,
    pub refine_on_inliers: bool,
}

impl Default for RansacConfig {
    fn default() -> Self {
        RansacConfig {
            max_reproj_error_px: 12.0,
            max_iterations: 10_000,
            confidence: 0.9999,
            seed: 0,
            refine_on_inliers: true,
        }
    }
}

impl RansacConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_reproj_error_px > 0.0) {
            return Err(Error::InvalidInput(
                "RANSAC threshold must be positive".into(),
            ));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::InvalidInput(
                "RANSAC confidence must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacResult {
    pub pose: Pose,
    pub inliers: Vec<bool>,
    pub n_inliers: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Score {
    inliers: usize,
    error_sum: f64,
}

impl Score {
    fn better_than(&self, other: &Score) -> bool {
        self.inliers > other.inliers
            || (self.inliers == other.inliers && self.error_sum < other.error_sum)
    }
}

fn score(pose: &Pose, corr: &[Correspondence2D3D], k: &CameraIntrinsics, thresh: f64) -> Score {
    let mut s = Score {
        inliers: 0,
        error_sum: 0.0,
    };
    for c in corr {
        match c.reprojection_error(pose, k) {
            Some(e) if e <= thresh => {
                s.inliers += 1;
                s.error_sum += e;
            }
            _ => s.error_sum += thresh,
        }
    }
    s
}

fn inlier_mask(pose: &Pose, corr: &[Correspondence2D3D], k: &CameraIntrinsics, thresh: f64) -> Vec<bool> {
    corr.iter()
        .map(|c| c.reprojection_error(pose, k).is_some_and(|e| e <= thresh))
        .collect()
}

/// Iteration bound for a minimal sample of 3 given the current inlier ratio.
fn adaptive_bound(inlier_ratio: f64, confidence: f64, cap: usize) -> usize {
    let w3 = inlier_ratio.powi(3);
    if w3 >= 1.0 {
        return 1;
    }
    if w3 <= 0.0 {
        return cap;
    }
    let n = (1.0 - confidence).ln() / (1.0 - w3).ln();
    if !n.is_finite() || n >= cap as f64 {
        cap
    } else {
        (n.ceil() as usize).max(1)
    }
}

/// Robust pose from 2D-3D matches: P3P hypotheses scored by inlier count,
/// with the best one optionally refined on its inliers.
///
/// Among hypotheses with equal inlier counts the one with the lower truncated
/// reprojection error wins, which also disambiguates the P3P candidates.
pub fn estimate_pose_ransac(
    corr: &[Correspondence2D3D],
    k: &CameraIntrinsics,
    config: &RansacConfig,
) -> Result<RansacResult> {
    config.validate()?;
    let n = corr.len();
    if n < MIN_INLIERS {
        return Err(Error::InsufficientData {
            needed: MIN_INLIERS,
            got: n,
        });
    }
    let thresh = config.max_reproj_error_px;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut best: Option<(Pose, Score)> = None;
    let mut bound = config.max_iterations;
    let mut iterations = 0;
    while iterations < bound {
        iterations += 1;
        let sample = index::sample(&mut rng, n, 3);
        let triple = [corr[sample.index(0)], corr[sample.index(1)], corr[sample.index(2)]];
        let Ok(candidates) = solve_p3p(&triple, k) else {
            continue;
        };
        for pose in candidates {
            let s = score(&pose, corr, k, thresh);
            if best.as_ref().is_none_or(|(_, b)| s.better_than(b)) {
                bound = adaptive_bound(
                    s.inliers as f64 / n as f64,
                    config.confidence,
                    config.max_iterations,
                );
                best = Some((pose, s));
            }
        }
    }

    let Some((mut pose, mut best_score)) = best else {
        return Err(Error::LocalizationFailure { inliers: 0 });
    };
    if best_score.inliers < MIN_INLIERS {
        return Err(Error::LocalizationFailure {
            inliers: best_score.inliers,
        });
    }

    if config.refine_on_inliers {
        let opts = RefineOptions::default();
        // re-estimate on the inlier set while the support does not shrink
        for _ in 0..3 {
            let mask = inlier_mask(&pose, corr, k, thresh);
            let inliers: Vec<_> = corr
                .iter()
                .zip(&mask)
                .filter(|(_, m)| **m)
                .map(|(c, _)| *c)
                .collect();
            let Ok(refined) = refine_pose(&pose, &inliers, k, opts.max_iters, opts.tol) else {
                break;
            };
            let s = score(&refined, corr, k, thresh);
            if s.inliers < best_score.inliers {
                break;
            }
            let grew = s.inliers > best_score.inliers;
            pose = refined;
            best_score = s;
            if !grew {
                break;
            }
        }
    }

    let inliers = inlier_mask(&pose, corr, k, thresh);
    Ok(RansacResult {
        pose,
        n_inliers: best_score.inliers,
        inliers,
        iterations,
    })
}
