use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::SceneDataset;
use super::frame::DescriptorSet;
use crate::error::{Error, Result};

/// Keeps `round(fraction · n)` frames drawn uniformly without replacement,
/// preserving their original order.
pub fn subsample_frames(dataset: &SceneDataset, fraction: f64, seed: u64) -> Result<SceneDataset> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let n = dataset.frames.len();
    let keep = (fraction * n as f64).round() as usize;
    if keep == 0 {
        return Err(Error::DegenerateDataset(format!(
            "fraction {fraction} of {n} frames leaves no frame"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, n, keep).into_vec();
    picked.sort_unstable();
    Ok(SceneDataset {
        frames: picked.iter().map(|&i| dataset.frames[i].clone()).collect(),
        ..dataset.clone_header()
    })
}

/// Keeps the `k` highest-scoring entries (ties to the lower index), in their
/// original order.
pub fn top_k_descriptors(frame: &DescriptorSet, k: usize) -> DescriptorSet {
    if k >= frame.len() {
        return frame.clone();
    }
    let scores = frame.scores();
    let mut order: Vec<usize> = (0..frame.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut keep = order[..k].to_vec();
    keep.sort_unstable();
    frame.select(&keep)
}
