//! C interface to the f2m relocalization toolkit.
//!
//! Every fallible function returns an [`F2mStatus`]. On failure a description
//! is available from [`f2m_last_error`] on the calling thread until the next
//! failing call. Models are opaque handles: create them with
//! [`f2m_model_load`] and release them with [`f2m_model_free`].
//!
//! Arrays are row-major and owned by the caller. Poses map world points into
//! the camera frame, `x_cam = R(q) x_world + t`, with `q = (w, x, y, z)`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use f2m::geometry::{
    estimate_pose_ransac, pose_error, CameraIntrinsics, Correspondence2D3D, Pose, RansacConfig,
};
use f2m::regressor::{read_model, MlpRegressor};
use f2m::Error;
use ndarray::{Array2, ArrayView2};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum F2mStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Degenerate = 5,
    LocalizationFailed = 6,
    NonConvergence = 7,
    Panic = 8,
}

/// A trained scene coordinate regressor.
pub struct F2mModel {
    inner: MlpRegressor,
}

/// Pinhole intrinsics in pixels.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F2mIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F2mRansacOptions {
    /// Inlier threshold on the reprojection error, in pixels.
    pub max_reproj_error_px: f64,
    pub max_iterations: usize,
    /// Probability of having drawn an all-inlier sample before stopping early.
    pub confidence: f64,
    pub seed: u64,
    /// Refine the best hypothesis on its inliers with Gauss-Newton.
    pub refine_on_inliers: bool,
}

/// World-to-camera pose: rotation quaternion `(w, x, y, z)` and translation.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F2mPose {
    pub q: [f64; 4],
    pub t: [f64; 3],
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(F2mStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidInput(_) | Error::Config(_) | Error::BehindCamera(_) => {
                F2mStatus::InvalidArgument
            }
            Error::Io { .. } => F2mStatus::Io,
            Error::Format { .. } | Error::Json { .. } => F2mStatus::Format,
            Error::DegenerateBatch
            | Error::DegenerateDataset(_)
            | Error::DegenerateSample(_)
            | Error::InsufficientData { .. } => F2mStatus::Degenerate,
            Error::LocalizationFailure { .. } => F2mStatus::LocalizationFailed,
            Error::NonConvergence(_) => F2mStatus::NonConvergence,
        };
        Failure(status, e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(F2mStatus::NullPointer, format!("{name} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(F2mStatus::InvalidArgument, msg.into())
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> F2mStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => F2mStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal panic: {msg}"));
            F2mStatus::Panic
        }
    }
}

/// # Safety
/// `ptr` must be null or valid for `len` reads.
unsafe fn input<'a, T>(ptr: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(name));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

/// # Safety
/// `ptr` must be null or valid for `len` writes.
unsafe fn output<'a, T>(ptr: *mut T, len: usize, name: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(null(name));
    }
    Ok(slice::from_raw_parts_mut(ptr, len))
}

/// # Safety
/// `ptr` must be null or point to a valid `T`.
unsafe fn deref<'a, T>(ptr: *const T, name: &str) -> Result<&'a T, Failure> {
    ptr.as_ref().ok_or_else(|| null(name))
}

fn intrinsics(k: &F2mIntrinsics) -> Result<CameraIntrinsics, Failure> {
    Ok(CameraIntrinsics::new(k.fx, k.fy, k.cx, k.cy)?)
}

fn ransac_config(o: &F2mRansacOptions) -> RansacConfig {
    RansacConfig {
        max_reproj_error_px: o.max_reproj_error_px,
        max_iterations: o.max_iterations,
        confidence: o.confidence,
        seed: o.seed,
        refine_on_inliers: o.refine_on_inliers,
    }
}

fn to_pose(p: &F2mPose) -> Result<Pose, Failure> {
    let [w, x, y, z] = p.q;
    let [tx, ty, tz] = p.t;
    Ok(Pose::from_array([w, x, y, z, tx, ty, tz])?)
}

fn from_pose(p: &Pose) -> F2mPose {
    let a = p.to_array();
    F2mPose {
        q: [a[0], a[1], a[2], a[3]],
        t: [a[4], a[5], a[6]],
    }
}

fn checked_len(a: usize, b: usize) -> Result<usize, Failure> {
    a.checked_mul(b).ok_or_else(|| invalid("array size overflows"))
}

/// Library version as a NUL-terminated string with static lifetime.
#[no_mangle]
pub extern "C" fn f2m_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or null if none occurred.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn f2m_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Defaults: 12 px threshold, 10000 iterations, confidence 0.9999, seed 0,
/// refinement on.
#[no_mangle]
pub extern "C" fn f2m_ransac_options_default() -> F2mRansacOptions {
    let c = RansacConfig::default();
    F2mRansacOptions {
        max_reproj_error_px: c.max_reproj_error_px,
        max_iterations: c.max_iterations,
        confidence: c.confidence,
        seed: c.seed,
        refine_on_inliers: c.refine_on_inliers,
    }
}

/// Loads a model file and stores a new handle in `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn f2m_model_load(path: *const c_char, out: *mut *mut F2mModel) -> F2mStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| invalid("path is not valid UTF-8"))?;
        let inner = read_model(path)?;
        *out = Box::into_raw(Box::new(F2mModel { inner }));
        Ok(())
    })
}

/// Releases a handle from [`f2m_model_load`]; null is ignored.
///
/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn f2m_model_free(model: *mut F2mModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Descriptor dimension expected by the model, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn f2m_model_input_dim(model: *const F2mModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.input_dim())
}

/// Number of weights and biases, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn f2m_model_param_count(model: *const F2mModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.param_count())
}

/// Regresses `n` descriptors (`n × dim` floats) to `n × 3` scene coordinates.
///
/// # Safety
/// `descriptors` must hold `n * dim` values and `out_coords` room for `n * 3`.
#[no_mangle]
pub unsafe extern "C" fn f2m_model_forward(
    model: *const F2mModel,
    descriptors: *const f32,
    n: usize,
    dim: usize,
    out_coords: *mut f64,
) -> F2mStatus {
    guard(|| {
        let model = &deref(model, "model")?.inner;
        if dim != model.input_dim() {
            return Err(invalid(format!(
                "descriptor dimension {dim} does not match model input {}",
                model.input_dim()
            )));
        }
        let desc = input(descriptors, checked_len(n, dim)?, "descriptors")?;
        let out = output(out_coords, checked_len(n, 3)?, "out_coords")?;
        let x = Array2::from_shape_fn((n, dim), |(r, c)| desc[r * dim + c] as f64);
        let y = model.forward_rows(x.view())?;
        for (dst, src) in out.iter_mut().zip(y.iter()) {
            *dst = *src;
        }
        Ok(())
    })
}

fn run_ransac(
    corr: &[Correspondence2D3D],
    k: &F2mIntrinsics,
    options: &F2mRansacOptions,
    out_pose: &mut F2mPose,
    out_inliers: Option<&mut [u8]>,
    out_n_inliers: Option<&mut usize>,
) -> Result<(), Failure> {
    let r = estimate_pose_ransac(corr, &intrinsics(k)?, &ransac_config(options))?;
    *out_pose = from_pose(&r.pose);
    if let Some(flags) = out_inliers {
        for (dst, &inl) in flags.iter_mut().zip(&r.inliers) {
            *dst = inl as u8;
        }
    }
    if let Some(count) = out_n_inliers {
        *count = r.n_inliers;
    }
    Ok(())
}

/// Robust pose from `n` 2D-3D matches: `pixels` holds `n × 2` values, `world`
/// `n × 3`. `out_inliers` (n flags) and `out_n_inliers` may be null.
///
/// # Safety
/// Every non-null pointer must be valid for the sizes above.
#[no_mangle]
pub unsafe extern "C" fn f2m_estimate_pose(
    pixels: *const f64,
    world: *const f64,
    n: usize,
    k: *const F2mIntrinsics,
    options: *const F2mRansacOptions,
    out_pose: *mut F2mPose,
    out_inliers: *mut u8,
    out_n_inliers: *mut usize,
) -> F2mStatus {
    guard(|| {
        let px = input(pixels, checked_len(n, 2)?, "pixels")?;
        let w = input(world, checked_len(n, 3)?, "world")?;
        let k = deref(k, "k")?;
        let options = deref(options, "options")?;
        let out_pose = out_pose.as_mut().ok_or_else(|| null("out_pose"))?;
        let corr: Vec<Correspondence2D3D> = (0..n)
            .map(|i| {
                Correspondence2D3D::new(
                    [px[2 * i], px[2 * i + 1]].into(),
                    [w[3 * i], w[3 * i + 1], w[3 * i + 2]].into(),
                )
            })
            .collect();
        let flags = if out_inliers.is_null() {
            None
        } else {
            Some(output(out_inliers, n, "out_inliers")?)
        };
        run_ransac(&corr, k, options, out_pose, flags, out_n_inliers.as_mut())
    })
}

/// Regresses scene coordinates for one frame and estimates its pose.
/// `keypoints` holds `n × 2` pixel positions, `descriptors` `n × dim` values.
///
/// # Safety
/// Every non-null pointer must be valid for the sizes above; `model` must be
/// a live handle.
#[no_mangle]
pub unsafe extern "C" fn f2m_localize(
    model: *const F2mModel,
    keypoints: *const f32,
    descriptors: *const f32,
    n: usize,
    dim: usize,
    k: *const F2mIntrinsics,
    options: *const F2mRansacOptions,
    out_pose: *mut F2mPose,
    out_n_inliers: *mut usize,
) -> F2mStatus {
    guard(|| {
        let model = &deref(model, "model")?.inner;
        if dim != model.input_dim() {
            return Err(invalid(format!(
                "descriptor dimension {dim} does not match model input {}",
                model.input_dim()
            )));
        }
        let kp = input(keypoints, checked_len(n, 2)?, "keypoints")?;
        let desc = input(descriptors, checked_len(n, dim)?, "descriptors")?;
        let k = deref(k, "k")?;
        let options = deref(options, "options")?;
        let out_pose = out_pose.as_mut().ok_or_else(|| null("out_pose"))?;
        let x = ArrayView2::from_shape((n, dim), desc)
            .map_err(|e| invalid(e.to_string()))?
            .mapv(f64::from);
        let coords = model.forward_rows(x.view())?;
        let corr: Vec<Correspondence2D3D> = coords
            .outer_iter()
            .enumerate()
            .map(|(i, w)| {
                Correspondence2D3D::new(
                    [kp[2 * i] as f64, kp[2 * i + 1] as f64].into(),
                    [w[0], w[1], w[2]].into(),
                )
            })
            .collect();
        run_ransac(&corr, k, options, out_pose, None, out_n_inliers.as_mut())
    })
}

/// Camera-center distance (m) and rotation angle (deg) between two poses.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn f2m_pose_error(
    estimate: *const F2mPose,
    truth: *const F2mPose,
    out_m: *mut f64,
    out_deg: *mut f64,
) -> F2mStatus {
    guard(|| {
        let est = to_pose(deref(estimate, "estimate")?)?;
        let truth = to_pose(deref(truth, "truth")?)?;
        let out_m = out_m.as_mut().ok_or_else(|| null("out_m"))?;
        let out_deg = out_deg.as_mut().ok_or_else(|| null("out_deg"))?;
        (*out_m, *out_deg) = pose_error(&est, &truth);
        Ok(())
    })
}
