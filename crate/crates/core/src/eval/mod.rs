//! Pose-error statistics, the relocalization benchmark and ablation sweeps.

mod ablation;
mod benchmark;
mod metrics;

pub use ablation::{
    cap_descriptors, desc_summary_csv, descriptor_count_sweep, fraction_summary_csv,
    fraction_sweep, train_model, FractionRun, TrainSetup,
};
pub use benchmark::{
    localize_frame, regress_correspondences, run_benchmark, BenchmarkOptions, EvalReport,
    FrameResult, DEFAULT_DESC_COUNT,
};
pub use metrics::{accuracy_at, median_errors, PoseErr};
