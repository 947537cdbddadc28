//! The `f2m` command line.

pub mod kv;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::{read_dataset, read_frame, write_dataset, Split};
use crate::error::{Error, Result};
use crate::eval::{
    desc_summary_csv, descriptor_count_sweep, fraction_summary_csv, fraction_sweep, localize_frame,
    run_benchmark, train_model, BenchmarkOptions, TrainSetup, DEFAULT_DESC_COUNT,
};
use crate::geometry::{CameraIntrinsics, RansacConfig};
use crate::regressor::{format_loss_trace, read_model, write_model, Architecture, TrainConfig};
use crate::synth::{build_dataset, SynthConfig};
use kv::KvMap;

/// Environment variable capping worker threads (0 = automatic).
pub const THREADS_ENV: &str = "F2M_THREADS";

#[derive(Debug, Parser)]
#[command(name = "f2m", version, about = "Scene coordinate regression and relocalization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic scene dataset.
    Synth {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a regressor on the train split of a dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Loss trace path (default: <out>.loss.csv).
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Benchmark a model on the test split of a dataset.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DESC_COUNT)]
        desc_count: usize,
        /// RANSAC seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        ransac: RansacArgs,
    },
    /// Estimate the pose of a single frame and print qw qx qy qz tx ty tz.
    Localize {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        frame: PathBuf,
        /// fx,fy,cx,cy
        #[arg(long)]
        intrinsics: String,
        #[arg(long, default_value_t = DEFAULT_DESC_COUNT)]
        desc_count: usize,
        /// RANSAC seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        ransac: RansacArgs,
    },
    /// Retrain on fractions of the training frames and benchmark each model.
    AblateFraction {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1.0,0.8,0.6,0.4,0.2,0.1")]
        fractions: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DESC_COUNT)]
        desc_count: usize,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        ransac: RansacArgs,
    },
    /// Benchmark one model with several query descriptor budgets.
    AblateDesc {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "2048,640,180,40")]
        counts: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
        /// RANSAC seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        ransac: RansacArgs,
    },
    /// Check a dataset directory against every format invariant.
    Validate {
        #[arg(long)]
        data: PathBuf,
    },
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, default_value = "tiny")]
    arch: String,
    /// Divide every hidden width of the architecture by this factor.
    #[arg(long, default_value_t = 1)]
    width_divisor: usize,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Descriptors kept per training frame (highest score first).
    #[arg(long, default_value_t = DEFAULT_DESC_COUNT)]
    desc_cap: usize,
    /// Draw this many of each frame's descriptors afresh every epoch.
    #[arg(long)]
    epoch_sample: Option<usize>,
    /// key = value file overriding optimizer settings.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RansacArgs {
    #[arg(long, default_value_t = 12.0)]
    threshold: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iterations: usize,
    #[arg(long, default_value_t = 0.9999)]
    confidence: f64,
    #[arg(long)]
    no_refine: bool,
}

impl RansacArgs {
    fn config(&self, seed: u64) -> RansacConfig {
        RansacConfig {
            max_reproj_error_px: self.threshold,
            max_iterations: self.max_iterations,
            confidence: self.confidence,
            seed,
            refine_on_inliers: !self.no_refine,
        }
    }
}

fn print_ransac(c: &RansacConfig) {
    eprintln!("ransac.max_reproj_error_px = {}", c.max_reproj_error_px);
    eprintln!("ransac.max_iterations = {}", c.max_iterations);
    eprintln!("ransac.confidence = {}", c.confidence);
    eprintln!("ransac.seed = {}", c.seed);
    eprintln!("ransac.refine_on_inliers = {}", c.refine_on_inliers);
}

/// Applies optimizer overrides from a `key = value` file; on error `config`
/// is left unchanged.
pub fn apply_train_kv(config: &mut TrainConfig, kv: &KvMap) -> Result<()> {
    let mut next = config.clone();
    apply_train_kv_unchecked(&mut next, kv)?;
    next.validate()?;
    *config = next;
    Ok(())
}

fn apply_train_kv_unchecked(config: &mut TrainConfig, kv: &KvMap) -> Result<()> {
    for (key, value) in kv.iter() {
        let num = || -> Result<f64> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("{key}: expected a number, got {value:?}")))
        };
        let int = || -> Result<u64> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("{key}: expected an integer, got {value:?}")))
        };
        match key {
            "epochs" => config.epochs = int()? as usize,
            "batch_size" => config.batch_size = int()? as usize,
            "lr0" => config.lr0 = num()?,
            "lr_decay" => config.lr_decay = num()?,
            "beta1" => config.beta1 = num()?,
            "beta2" => config.beta2 = num()?,
            "weight_decay" => config.weight_decay = num()?,
            "eps" => config.eps = num()?,
            "seed" => config.seed = int()?,
            "epoch_sample" => config.epoch_sample = Some(int()? as usize),
            other => return Err(Error::Config(format!("unknown train key {other:?}"))),
        }
    }
    Ok(())
}

impl TrainArgs {
    fn setup(&self, dim: usize) -> Result<TrainSetup> {
        let arch: Architecture = self.arch.parse()?;
        let mut config = TrainConfig::default();
        if let Some(path) = &self.config {
            apply_train_kv(&mut config, &KvMap::read(path)?)?;
        }
        if let Some(e) = self.epochs {
            config.epochs = e;
        }
        if let Some(s) = self.seed {
            config.seed = s;
        }
        if self.epoch_sample.is_some() {
            config.epoch_sample = self.epoch_sample;
        }
        config.validate()?;
        if self.desc_cap == 0 {
            return Err(Error::Config("desc_cap must be at least 1".into()));
        }
        Ok(TrainSetup {
            layer_dims: arch.scaled_layer_dims(dim, self.width_divisor),
            init_seed: config.seed,
            desc_cap: self.desc_cap,
            config,
        })
    }
}

fn print_setup(s: &TrainSetup) {
    let c = &s.config;
    eprintln!("layer_dims = {:?}", s.layer_dims);
    eprintln!("init_seed = {}", s.init_seed);
    eprintln!("desc_cap = {}", s.desc_cap);
    eprintln!("epochs = {}", c.epochs);
    eprintln!("batch_size = {}", c.batch_size);
    eprintln!("lr0 = {}", c.lr0);
    eprintln!("lr_decay = {}", c.lr_decay);
    eprintln!("beta1 = {}", c.beta1);
    eprintln!("beta2 = {}", c.beta2);
    eprintln!("weight_decay = {}", c.weight_decay);
    eprintln!("eps = {}", c.eps);
    eprintln!("seed = {}", c.seed);
    match c.epoch_sample {
        Some(n) => eprintln!("epoch_sample = {n}"),
        None => eprintln!("epoch_sample = all"),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn parse_intrinsics(s: &str) -> Result<CameraIntrinsics> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("intrinsics must be fx,fy,cx,cy, got {s:?}")))?;
    match v.as_slice() {
        [fx, fy, cx, cy] => CameraIntrinsics::new(*fx, *fy, *cx, *cy),
        _ => Err(Error::Config(format!("intrinsics must be fx,fy,cx,cy, got {s:?}"))),
    }
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{THREADS_ENV} must be an integer, got {v:?}")))?;
    eprintln!("threads = {}", if n == 0 { "auto".to_string() } else { n.to_string() });
    if n > 0 {
        // fails only if a pool already exists, e.g. when called twice in-process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn execute(command: Command) -> Result<()> {
    init_threads()?;
    match command {
        Command::Synth { config, out, seed } => {
            let mut cfg = SynthConfig::default();
            if let Some(path) = &config {
                cfg.apply(&KvMap::read(path)?)?;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            eprintln!("{cfg}");
            let dataset = build_dataset(&cfg)?;
            write_dataset(&dataset, &out)?;
            eprintln!("wrote {} frames to {}", dataset.frames.len(), out.display());
        }
        Command::Train {
            data,
            out,
            trace,
            train,
        } => {
            let dataset = read_dataset(&data)?;
            let setup = train.setup(dataset.dim)?;
            print_setup(&setup);
            let train_split = dataset.split(Split::Train);
            let (model, stats) = train_model(&train_split, &setup, |s| {
                eprintln!("epoch {} lr {:e} loss {:.6}", s.epoch, s.lr, s.mean_loss);
            })?;
            let trace_path = trace.unwrap_or_else(|| {
                let mut p = out.clone().into_os_string();
                p.push(".loss.csv");
                PathBuf::from(p)
            });
            write_text(&trace_path, &format_loss_trace(&stats))?;
            write_model(&model, &out)?;
            eprintln!("wrote {} ({} parameters)", out.display(), model.param_count());
        }
        Command::Eval {
            data,
            model,
            out,
            desc_count,
            seed,
            ransac,
        } => {
            let ransac = ransac.config(seed);
            eprintln!("desc_count = {desc_count}");
            print_ransac(&ransac);
            let dataset = read_dataset(&data)?;
            let model = read_model(&model)?;
            let report = run_benchmark(
                &model,
                &dataset.split(Split::Test),
                &ransac,
                &BenchmarkOptions { desc_count },
            )?;
            report.write(&out)?;
            eprintln!(
                "median {:?} m / {:?} deg, failures {}",
                report.median_m, report.median_deg, report.failures
            );
        }
        Command::Localize {
            model,
            frame,
            intrinsics,
            desc_count,
            seed,
            ransac,
        } => {
            let k = parse_intrinsics(&intrinsics)?;
            let ransac = ransac.config(seed);
            eprintln!("intrinsics = {},{},{},{}", k.fx, k.fy, k.cx, k.cy);
            eprintln!("desc_count = {desc_count}");
            print_ransac(&ransac);
            let model = read_model(&model)?;
            let id = frame
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let set = crate::data::top_k_descriptors(&read_frame(&frame, &id)?, desc_count);
            let (pose, inliers) = localize_frame(&model, &set, &k, &ransac)?;
            let a = pose.to_array();
            println!(
                "{} {} {} {} {} {} {}",
                a[0], a[1], a[2], a[3], a[4], a[5], a[6]
            );
            eprintln!("inliers = {inliers}");
        }
        Command::AblateFraction {
            data,
            fractions,
            out,
            desc_count,
            train,
            ransac,
        } => {
            let dataset = read_dataset(&data)?;
            let setup = train.setup(dataset.dim)?;
            let ransac = ransac.config(setup.config.seed);
            print_setup(&setup);
            print_ransac(&ransac);
            eprintln!("fractions = {fractions:?}");
            eprintln!("desc_count = {desc_count}");
            create_dir(&out)?;
            let runs = fraction_sweep(
                &dataset.split(Split::Train),
                &dataset.split(Split::Test),
                &fractions,
                &setup,
                &ransac,
                &BenchmarkOptions { desc_count },
                setup.config.seed,
                |f, s| {
                    if s.epoch + 1 == setup.config.epochs {
                        eprintln!("fraction {f}: final loss {:.6}", s.mean_loss);
                    }
                },
            )?;
            for r in &runs {
                r.report
                    .write(&out.join(format!("fraction_{}.json", r.fraction)))?;
            }
            write_text(&out.join("summary.csv"), &fraction_summary_csv(&runs))?;
        }
        Command::AblateDesc {
            data,
            model,
            counts,
            out,
            seed,
            ransac,
        } => {
            let ransac = ransac.config(seed);
            print_ransac(&ransac);
            eprintln!("counts = {counts:?}");
            let dataset = read_dataset(&data)?;
            let model = read_model(&model)?;
            create_dir(&out)?;
            let reports =
                descriptor_count_sweep(&model, &dataset.split(Split::Test), &ransac, &counts)?;
            for r in &reports {
                r.write(&out.join(format!("desc_{}.json", r.desc_count)))?;
            }
            write_text(&out.join("summary.csv"), &desc_summary_csv(&reports))?;
        }
        Command::Validate { data } => {
            let dataset = read_dataset(&data)?;
            let train = dataset.frames.iter().filter(|f| f.split == Split::Train).count();
            println!(
                "ok: scene {} M={} frames={} (train {}, test {})",
                dataset.scene,
                dataset.dim,
                dataset.frames.len(),
                train,
                dataset.frames.len() - train
            );
        }
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code: 0 on success, 2 on usage errors, 1 on failures.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
