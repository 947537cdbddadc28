use std::fs;
use std::path::Path;

use f2m::cli;
use f2m::data::{read_dataset, Split};
use f2m::eval::{run_benchmark, BenchmarkOptions, EvalReport};
use f2m::geometry::{pose_error, project, RansacConfig};
use f2m::regressor::{fit, read_model, MlpRegressor, TrainConfig};
use f2m::synth::{build_dataset, generate_scene, lookup_regressor, SynthConfig};

fn small_config() -> SynthConfig {
    SynthConfig {
        n_landmarks: 400,
        dim: 32,
        n_train_views: 8,
        n_test_views: 6,
        desc_sigma: 0.0,
        ..SynthConfig::default()
    }
}

fn run(args: &[&str]) -> i32 {
    cli::run(std::iter::once("f2m").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn rendered_keypoints_are_consistent_with_poses() {
    let cfg = small_config();
    let ds = build_dataset(&cfg).unwrap();
    for f in &ds.frames {
        let pose = f.pose.unwrap();
        for i in 0..f.set.len() {
            let w = f.set.gt_coord(i).unwrap();
            let uv = project(&w, &pose, &ds.camera.intrinsics).unwrap();
            assert!((uv - f.set.keypoint(i)).norm() <= 6.0 * cfg.px_sigma);
        }
    }
}

#[test]
fn lookup_oracle_localizes_every_test_frame() {
    let cfg = small_config();
    let ds = build_dataset(&cfg).unwrap();
    let model = lookup_regressor(&generate_scene(&cfg)).unwrap();
    let report = run_benchmark(
        &model,
        &ds.split(Split::Test),
        &RansacConfig::default(),
        &BenchmarkOptions::default(),
    )
    .unwrap();
    assert_eq!(report.failures, 0);
    assert_eq!(report.acc_5cm5deg, 100.0, "{:?} {:?} {:?}", report.median_m, report.median_deg, report.per_frame.iter().map(|f| f.inliers).collect::<Vec<_>>());
    assert!(report.median_m.unwrap() < 0.01, "{report:?}");

    // the same numbers come out of a closed-form recomputation
    for (fr, f) in report.per_frame.iter().zip(&ds.split(Split::Test).frames) {
        assert_eq!(fr.id, f.set.frame_id());
        assert!(fr.err_m.unwrap() < 0.05 && fr.err_deg.unwrap() < 1.0);
    }
}

#[test]
fn benchmark_is_reproducible_modulo_timings() {
    let cfg = small_config();
    let ds = build_dataset(&cfg).unwrap();
    let model = lookup_regressor(&generate_scene(&cfg)).unwrap();
    let test = ds.split(Split::Test);
    let opts = BenchmarkOptions { desc_count: 50 };
    let a = run_benchmark(&model, &test, &RansacConfig::default(), &opts).unwrap();
    let b = run_benchmark(&model, &test, &RansacConfig::default(), &opts).unwrap();
    assert_eq!(a.without_timings().to_json(), b.without_timings().to_json());
    let back: EvalReport = serde_json::from_str(&a.to_json()).unwrap();
    assert_eq!(back, a);
}

#[test]
fn untrained_model_reports_failures_not_errors() {
    let cfg = small_config();
    let ds = build_dataset(&cfg).unwrap();
    let zero = MlpRegressor::zeros(&[32, 3]).unwrap();
    let report = run_benchmark(
        &zero,
        &ds.split(Split::Test),
        &RansacConfig::default(),
        &BenchmarkOptions::default(),
    )
    .unwrap();
    // every descriptor maps to the origin: no pose can be recovered
    assert_eq!(report.failures, 6);
    assert_eq!(report.acc_10cm5deg, 0.0);
    assert!(report.median_m.is_none());
}

#[test]
fn training_reduces_the_loss_and_is_deterministic() {
    let cfg = small_config();
    let ds = build_dataset(&cfg).unwrap();
    let frames = ds.split(Split::Train).descriptor_sets();
    let train = TrainConfig {
        epochs: 10,
        ..TrainConfig::default()
    };
    let init = MlpRegressor::new_random(&[32, 32, 32, 3], 1).unwrap();
    let (a, trace) = fit(init.clone(), &frames, &train).unwrap();
    let (b, _) = fit(init, &frames, &train).unwrap();
    assert_eq!(a, b);
    assert!(trace.last().unwrap().mean_loss < trace[0].mean_loss);
}

#[test]
fn cli_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let config = d.join("synth.cfg");
    fs::write(
        &config,
        "n_landmarks = 300\ndim = 16\nn_train_views = 6\nn_test_views = 4\n",
    )
    .unwrap();
    let data = d.join("data");
    assert_eq!(run(&["synth", "--config", p(&config), "--out", p(&data), "--seed", "3"]), 0);
    assert_eq!(run(&["validate", "--data", p(&data)]), 0);
    let ds = read_dataset(&data).unwrap();
    assert_eq!(ds.dim, 16);
    assert_eq!(ds.frames.len(), 10);

    let model = d.join("m.f2mw");
    let train = [
        "train", "--data", p(&data), "--arch", "tiny", "--width-divisor", "32", "--epochs", "3",
        "--seed", "5", "--desc-cap", "64", "--out", p(&model),
    ];
    assert_eq!(run(&train), 0);
    let first = fs::read(&model).unwrap();
    let trace = fs::read_to_string(d.join("m.f2mw.loss.csv")).unwrap();
    assert_eq!(trace.lines().count(), 3);
    assert_eq!(run(&train), 0);
    assert_eq!(fs::read(&model).unwrap(), first);
    let m = read_model(&model).unwrap();
    assert_eq!(m.layer_dims(), vec![16, 16, 16, 16, 4, 3]);

    let report = d.join("report.json");
    let eval = ["eval", "--data", p(&data), "--model", p(&model), "--out", p(&report)];
    assert_eq!(run(&eval), 0);
    let r: EvalReport = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r.per_frame.len(), 4);
    let csv = fs::read_to_string(d.join("report.csv")).unwrap();
    assert!(csv.starts_with("id,err_m,err_deg,inliers\n"));
    assert_eq!(csv.lines().count(), 5);
    let again = d.join("again.json");
    assert_eq!(run(&["eval", "--data", p(&data), "--model", p(&model), "--out", p(&again)]), 0);
    let r2: EvalReport = serde_json::from_str(&fs::read_to_string(&again).unwrap()).unwrap();
    assert_eq!(r.without_timings(), r2.without_timings());

    let sweep = d.join("desc");
    let ablate = [
        "ablate-desc", "--data", p(&data), "--model", p(&model), "--counts", "100,20", "--out",
        p(&sweep),
    ];
    assert_eq!(run(&ablate), 0);
    let summary = fs::read_to_string(sweep.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(sweep.join("desc_20.json").exists());

    let frac = d.join("frac");
    let ablate = [
        "ablate-fraction", "--data", p(&data), "--fractions", "1.0,0.5", "--width-divisor", "32",
        "--epochs", "2", "--desc-cap", "32", "--out", p(&frac),
    ];
    assert_eq!(run(&ablate), 0);
    let summary = fs::read_to_string(frac.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
}

#[test]
fn cli_localize_prints_a_pose() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = small_config();
    let data = d.join("data");
    f2m::data::write_dataset(&build_dataset(&cfg).unwrap(), &data).unwrap();
    let model = d.join("lookup.f2mw");
    f2m::regressor::write_model(&lookup_regressor(&generate_scene(&cfg)).unwrap(), &model).unwrap();
    let frame = data.join("frames/test_00000.f2m");
    let k = "525,525,320,240";
    assert_eq!(
        run(&["localize", "--model", p(&model), "--frame", p(&frame), "--intrinsics", k]),
        0
    );
    // the library path used by the command recovers the ground truth
    let ds = read_dataset(&data).unwrap();
    let f = &ds.split(Split::Test).frames[0];
    let set = f2m::data::read_frame(&frame, "test_00000").unwrap();
    let m = read_model(&model).unwrap();
    let (pose, _) =
        f2m::eval::localize_frame(&m, &set, &ds.camera.intrinsics, &RansacConfig::default()).unwrap();
    let (em, edeg) = pose_error(&pose, &f.pose.unwrap());
    assert!(em < 0.05 && edeg < 1.0);
}

#[test]
fn cli_errors_use_distinct_exit_codes() {
    assert_eq!(run(&["bogus-command"]), 2);
    assert_eq!(run(&["train", "--data"]), 2);
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing");
    assert_eq!(run(&["validate", "--data", p(&missing)]), 1);
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "dim = -3\n").unwrap();
    let out = dir.path().join("out");
    assert_eq!(run(&["synth", "--config", p(&bad), "--out", p(&out)]), 1);
}
