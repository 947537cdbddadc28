use std::ffi::{CStr, CString};
use std::ptr;

use f2m::geometry::{project, CameraIntrinsics, Pose};
use f2m::regressor::{write_model, MlpRegressor};
use f2m_ffi::*;
use nalgebra::{UnitQuaternion, Vector3};

const K: F2mIntrinsics = F2mIntrinsics {
    fx: 500.0,
    fy: 500.0,
    cx: 320.0,
    cy: 240.0,
};

fn last_error() -> String {
    let p = f2m_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn load(path: &std::path::Path) -> *mut F2mModel {
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { f2m_model_load(c.as_ptr(), &mut model) }, F2mStatus::Ok);
    assert!(!model.is_null());
    model
}

fn scene() -> (Pose, Vec<f64>, Vec<f64>) {
    let pose = Pose::new(
        UnitQuaternion::from_euler_angles(0.1, -0.2, 0.05),
        Vector3::new(0.2, -0.1, 0.3),
    );
    let k = CameraIntrinsics::new(K.fx, K.fy, K.cx, K.cy).unwrap();
    let mut px = Vec::new();
    let mut world = Vec::new();
    for i in 0..40 {
        let f = i as f64;
        let pc = Vector3::new((f * 0.37).sin(), (f * 0.71).cos() * 0.7, 3.0 + (f * 0.13).sin());
        let w = pose.rotation.inverse() * (pc - pose.translation);
        let uv = project(&w, &pose, &k).unwrap();
        px.extend([uv.x, uv.y]);
        world.extend([w.x, w.y, w.z]);
    }
    (pose, px, world)
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(f2m_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn model_round_trip_matches_core_forward() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.f2mw");
    let core = MlpRegressor::new_random(&[6, 8, 3], 4).unwrap();
    write_model(&core, &path).unwrap();

    let model = load(&path);
    unsafe {
        assert_eq!(f2m_model_input_dim(model), 6);
        assert_eq!(f2m_model_param_count(model), core.param_count());
        let desc: Vec<f32> = (0..18).map(|i| (i as f32 * 0.3).sin()).collect();
        let mut out = vec![0.0f64; 9];
        let st = f2m_model_forward(model, desc.as_ptr(), 3, 6, out.as_mut_ptr());
        assert_eq!(st, F2mStatus::Ok);
        let x = ndarray::Array2::from_shape_fn((3, 6), |(r, c)| desc[r * 6 + c] as f64);
        let want = core.forward_rows(x.view()).unwrap();
        assert_eq!(out, want.iter().copied().collect::<Vec<_>>());

        let st = f2m_model_forward(model, desc.as_ptr(), 3, 5, out.as_mut_ptr());
        assert_eq!(st, F2mStatus::InvalidArgument);
        assert!(last_error().contains("dimension"));
        f2m_model_free(model);
        f2m_model_free(ptr::null_mut());
    }
}

#[test]
fn load_errors_carry_status_and_message() {
    let missing = CString::new("/nonexistent/model.f2mw").unwrap();
    let mut model = ptr::null_mut();
    let st = unsafe { f2m_model_load(missing.as_ptr(), &mut model) };
    assert_eq!(st, F2mStatus::Io);
    assert!(model.is_null());
    assert!(last_error().contains("/nonexistent/model.f2mw"));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("junk.f2mw");
    std::fs::write(&path, b"not a model").unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { f2m_model_load(c.as_ptr(), &mut model) }, F2mStatus::Format);

    assert_eq!(unsafe { f2m_model_load(ptr::null(), &mut model) }, F2mStatus::NullPointer);
    assert_eq!(
        unsafe { f2m_model_load(c.as_ptr(), ptr::null_mut()) },
        F2mStatus::NullPointer
    );
}

#[test]
fn estimate_pose_recovers_exact_pose() {
    let (truth, px, world) = scene();
    let n = px.len() / 2;
    let opts = f2m_ransac_options_default();
    assert_eq!(opts.max_reproj_error_px, 12.0);
    let mut pose = F2mPose { q: [0.0; 4], t: [0.0; 3] };
    let mut flags = vec![0u8; n];
    let mut count = 0usize;
    let st = unsafe {
        f2m_estimate_pose(
            px.as_ptr(),
            world.as_ptr(),
            n,
            &K,
            &opts,
            &mut pose,
            flags.as_mut_ptr(),
            &mut count,
        )
    };
    assert_eq!(st, F2mStatus::Ok, "{}", last_error());
    assert_eq!(count, n);
    assert!(flags.iter().all(|&f| f == 1));

    let t = truth.to_array();
    let truth = F2mPose {
        q: [t[0], t[1], t[2], t[3]],
        t: [t[4], t[5], t[6]],
    };
    let (mut m, mut deg) = (f64::NAN, f64::NAN);
    assert_eq!(unsafe { f2m_pose_error(&pose, &truth, &mut m, &mut deg) }, F2mStatus::Ok);
    assert!(m < 1e-8 && deg < 1e-6, "{m} m, {deg} deg");
}

#[test]
fn estimate_pose_reports_degenerate_input() {
    let (_, px, world) = scene();
    let opts = f2m_ransac_options_default();
    let mut pose = F2mPose { q: [0.0; 4], t: [0.0; 3] };
    let st = unsafe {
        f2m_estimate_pose(
            px.as_ptr(),
            world.as_ptr(),
            3,
            &K,
            &opts,
            &mut pose,
            ptr::null_mut(),
            ptr::null_mut(),
        )
    };
    assert_eq!(st, F2mStatus::Degenerate);
    assert!(last_error().contains("at least 4"));

    let bad = F2mIntrinsics { fx: 0.0, ..K };
    let st = unsafe {
        f2m_estimate_pose(
            px.as_ptr(),
            world.as_ptr(),
            10,
            &bad,
            &opts,
            &mut pose,
            ptr::null_mut(),
            ptr::null_mut(),
        )
    };
    assert_eq!(st, F2mStatus::InvalidArgument);
}

#[test]
fn pose_error_rejects_non_unit_quaternion() {
    let a = F2mPose {
        q: [1.0, 0.0, 0.0, 0.0],
        t: [0.0; 3],
    };
    let b = F2mPose {
        q: [2.0, 0.0, 0.0, 0.0],
        t: [0.0; 3],
    };
    let (mut m, mut deg) = (0.0, 0.0);
    assert_eq!(
        unsafe { f2m_pose_error(&a, &b, &mut m, &mut deg) },
        F2mStatus::InvalidArgument
    );
    assert_eq!(
        unsafe { f2m_pose_error(&a, ptr::null(), &mut m, &mut deg) },
        F2mStatus::NullPointer
    );
}

#[test]
fn generated_header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/f2m.h"))
        .expect("header written by the build script");
    for name in [
        "f2m_version",
        "f2m_last_error",
        "f2m_model_load",
        "f2m_model_free",
        "f2m_model_forward",
        "f2m_estimate_pose",
        "f2m_localize",
        "f2m_pose_error",
        "typedef struct F2mModel F2mModel",
        "F2M_STATUS_LOCALIZATION_FAILED",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}

#[test]
fn localize_with_lookup_model_recovers_pose() {
    use f2m::data::Split;
    use f2m::synth::{build_dataset, generate_scene, lookup_regressor, SynthConfig};

    let cfg = SynthConfig {
        n_landmarks: 300,
        dim: 16,
        n_train_views: 1,
        n_test_views: 1,
        desc_sigma: 0.0,
        ..SynthConfig::default()
    };
    let ds = build_dataset(&cfg).unwrap();
    let frame = &ds.split(Split::Test).frames[0];
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lookup.f2mw");
    write_model(&lookup_regressor(&generate_scene(&cfg)).unwrap(), &path).unwrap();

    let kp: Vec<f32> = frame.set.keypoints().iter().flatten().copied().collect();
    let desc: Vec<f32> = frame.set.descriptors().iter().copied().collect();
    let n = frame.set.len();
    let i = ds.camera.intrinsics;
    let k = F2mIntrinsics {
        fx: i.fx,
        fy: i.fy,
        cx: i.cx,
        cy: i.cy,
    };
    let model = load(&path);
    let opts = f2m_ransac_options_default();
    let mut pose = F2mPose {
        q: [0.0; 4],
        t: [0.0; 3],
    };
    let mut inliers = 0usize;
    unsafe {
        let st = f2m_localize(model, kp.as_ptr(), desc.as_ptr(), n, 16, &k, &opts, &mut pose, &mut inliers);
        assert_eq!(st, F2mStatus::Ok, "{}", last_error());
        let st = f2m_localize(model, kp.as_ptr(), desc.as_ptr(), n, 15, &k, &opts, &mut pose, &mut inliers);
        assert_eq!(st, F2mStatus::InvalidArgument);
        f2m_model_free(model);
    }
    let [qw, qx, qy, qz] = pose.q;
    let [tx, ty, tz] = pose.t;
    let est = Pose::from_array([qw, qx, qy, qz, tx, ty, tz]).unwrap();
    let (m, deg) = f2m::geometry::pose_error(&est, &frame.pose.unwrap());
    assert!(m < 0.05 && deg < 1.0, "{m} m, {deg} deg");
    assert!(inliers > n / 2);
}
