//! Training-data fraction and query descriptor-count sweeps.

use std::fmt::Write as _;

use super::benchmark::{run_benchmark, BenchmarkOptions, EvalReport};
use crate::data::{subsample_frames, top_k_descriptors, DescriptorSet, SceneDataset};
use crate::error::Result;
use crate::geometry::RansacConfig;
use crate::regressor::{fit_with_progress, EpochStats, MlpRegressor, TrainConfig};

/// Everything needed to train a regressor from scratch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSetup {
    pub layer_dims: Vec<usize>,
    pub init_seed: u64,
    /// Descriptors kept per training frame, chosen once by detector score.
    pub desc_cap: usize,
    pub config: TrainConfig,
}

/// Caps every frame to its `cap` best-scoring descriptors.
pub fn cap_descriptors(frames: &[DescriptorSet], cap: usize) -> Vec<DescriptorSet> {
    frames.iter().map(|f| top_k_descriptors(f, cap)).collect()
}

pub fn train_model(
    train: &SceneDataset,
    setup: &TrainSetup,
    on_epoch: impl FnMut(&EpochStats),
) -> Result<(MlpRegressor, Vec<EpochStats>)> {
    let model = MlpRegressor::new_random(&setup.layer_dims, setup.init_seed)?;
    let frames = cap_descriptors(&train.descriptor_sets(), setup.desc_cap);
    fit_with_progress(model, &frames, &setup.config, on_epoch)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FractionRun {
    pub fraction: f64,
    pub train_frames: usize,
    pub report: EvalReport,
}

/// Retrains on `fraction` of the training frames for every entry of
/// `fractions` and benchmarks each model on the same test set.
pub fn fraction_sweep(
    train: &SceneDataset,
    test: &SceneDataset,
    fractions: &[f64],
    setup: &TrainSetup,
    ransac: &RansacConfig,
    options: &BenchmarkOptions,
    subsample_seed: u64,
    mut on_epoch: impl FnMut(f64, &EpochStats),
) -> Result<Vec<FractionRun>> {
    fractions
        .iter()
        .map(|&fraction| {
            let subset = subsample_frames(train, fraction, subsample_seed)?;
            let (model, _) = train_model(&subset, setup, |s| on_epoch(fraction, s))?;
            Ok(FractionRun {
                fraction,
                train_frames: subset.frames.len(),
                report: run_benchmark(&model, test, ransac, options)?,
            })
        })
        .collect()
}

/// One benchmark per query descriptor budget.
pub fn descriptor_count_sweep(
    model: &MlpRegressor,
    test: &SceneDataset,
    ransac: &RansacConfig,
    counts: &[usize],
) -> Result<Vec<EvalReport>> {
    counts
        .iter()
        .map(|&desc_count| run_benchmark(model, test, ransac, &BenchmarkOptions { desc_count }))
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn fraction_summary_csv(runs: &[FractionRun]) -> String {
    let mut s =
        String::from("fraction,train_frames,median_m,median_deg,acc_5cm5deg,acc_10cm5deg,failures\n");
    for r in runs {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.fraction,
            r.train_frames,
            opt(r.report.median_m),
            opt(r.report.median_deg),
            r.report.acc_5cm5deg,
            r.report.acc_10cm5deg,
            r.report.failures
        );
    }
    s
}

pub fn desc_summary_csv(reports: &[EvalReport]) -> String {
    let mut s = String::from("desc_count,median_m,median_deg,acc_5cm5deg,acc_10cm5deg,failures\n");
    for r in reports {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.desc_count,
            opt(r.median_m),
            opt(r.median_deg),
            r.acc_5cm5deg,
            r.acc_10cm5deg,
            r.failures
        );
    }
    s
}
