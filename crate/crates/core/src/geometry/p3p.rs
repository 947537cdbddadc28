//! Minimal three-point pose solver.
//!
//! Grunert's formulation: with unknown depths `s1, s2, s3` along the three
//! bearing rays, the law of cosines on the three inter-point distances gives a
//! system that reduces to a quartic in the depth ratio `v = s3 / s1`. Each real
//! root yields one set of camera-frame points, and the pose follows from
//! aligning those with the world points.

use nalgebra::{Complex, DMatrix, Matrix3, Schur, UnitQuaternion, Vector3};

use super::camera::{CameraIntrinsics, Correspondence2D3D, Pose, MIN_DEPTH};
use crate::error::{Error, Result};

/// Minimum triangle area (m²) of the three world points.
const MIN_TRIANGLE_AREA: f64 = 1e-9;

/// Candidates are dropped if they do not reproduce the three input pixels to
/// this accuracy.
const MAX_CANDIDATE_REPROJ_PX: f64 = 1e-6;

/// Solves for up to four poses consistent with three 2D-3D correspondences.
///
/// An empty result means the configuration has no admissible real solution.
pub fn solve_p3p(corr: &[Correspondence2D3D; 3], k: &CameraIntrinsics) -> Result<Vec<Pose>> {
    if corr.iter().any(|c| !c.is_finite()) {
        return Err(Error::DegenerateSample("non-finite correspondence".into()));
    }
    let [p1, p2, p3] = [corr[0].world, corr[1].world, corr[2].world];
    let area = 0.5 * (p2 - p1).cross(&(p3 - p1)).norm();
    if area <= MIN_TRIANGLE_AREA {
        return Err(Error::DegenerateSample(format!(
            "world points are collinear or coincident (area {area:.3e} m²)"
        )));
    }
    let j = [
        k.bearing(&corr[0].pixel),
        k.bearing(&corr[1].pixel),
        k.bearing(&corr[2].pixel),
    ];

    let mut poses = Vec::with_capacity(4);
    for depths in grunert_depths(&[p1, p2, p3], &j) {
        let cam = [depths[0] * j[0], depths[1] * j[1], depths[2] * j[2]];
        let Some(pose) = align_points(&[p1, p2, p3], &cam) else {
            continue;
        };
        let ok = corr.iter().all(|c| {
            c.reprojection_error(&pose, k)
                .is_some_and(|e| e <= MAX_CANDIDATE_REPROJ_PX)
        });
        if ok && !poses.iter().any(|q: &Pose| same_pose(q, &pose)) {
            poses.push(pose);
        }
    }
    Ok(poses)
}

fn same_pose(a: &Pose, b: &Pose) -> bool {
    a.rotation.angle_to(&b.rotation) < 1e-9 && (a.translation - b.translation).norm() < 1e-9
}

/// Positive depth triples along the bearings `j` that reproduce the pairwise
/// distances of `p`.
fn grunert_depths(p: &[Vector3<f64>; 3], j: &[Vector3<f64>; 3]) -> Vec<[f64; 3]> {
    let a2 = (p[1] - p[2]).norm_squared();
    let b2 = (p[0] - p[2]).norm_squared();
    let c2 = (p[0] - p[1]).norm_squared();
    let cos_a = j[1].dot(&j[2]);
    let cos_b = j[0].dot(&j[2]);
    let cos_g = j[0].dot(&j[1]);

    let amc = (a2 - c2) / b2;
    let apc = (a2 + c2) / b2;
    let bmc = (b2 - c2) / b2;
    let bma = (b2 - a2) / b2;

    // leading coefficient first
    let coeffs = [
        (amc - 1.0).powi(2) - 4.0 * c2 / b2 * cos_a * cos_a,
        4.0 * (amc * (1.0 - amc) * cos_b - (1.0 - apc) * cos_a * cos_g
            + 2.0 * c2 / b2 * cos_a * cos_a * cos_b),
        2.0 * (amc * amc - 1.0 + 2.0 * amc * amc * cos_b * cos_b + 2.0 * bmc * cos_a * cos_a
            - 4.0 * apc * cos_a * cos_b * cos_g
            + 2.0 * bma * cos_g * cos_g),
        4.0 * (-amc * (1.0 + amc) * cos_b + 2.0 * a2 / b2 * cos_g * cos_g * cos_b
            - (1.0 - apc) * cos_a * cos_g),
        (1.0 + amc).powi(2) - 4.0 * a2 / b2 * cos_g * cos_g,
    ];

    let target = [a2, b2, c2];
    let cosines = [cos_a, cos_b, cos_g];
    let mut out = Vec::with_capacity(4);
    for v in real_roots_quartic(coeffs) {
        if v <= 0.0 {
            continue;
        }
        let denom = 1.0 + v * v - 2.0 * v * cos_b;
        if denom <= 0.0 {
            continue;
        }
        let s1 = (b2 / denom).sqrt();
        let s3 = v * s1;
        // s2 from the two remaining cosine-law equations; take the root of the
        // c-equation closest to satisfying the a-equation
        let Some(s2) = solve_s2(s1, s3, a2, c2, cos_a, cos_g) else {
            continue;
        };
        if let Some(s) = polish_depths([s1, s2, s3], target, cosines) {
            if s.iter().all(|d| *d > MIN_DEPTH) {
                out.push(s);
            }
        }
    }
    out
}

fn solve_s2(s1: f64, s3: f64, a2: f64, c2: f64, cos_a: f64, cos_g: f64) -> Option<f64> {
    // c² = s1² + s2² − 2 s1 s2 cosγ
    let disc = s1 * s1 * cos_g * cos_g - (s1 * s1 - c2);
    if disc < -1e-9 * c2.max(1.0) {
        return None;
    }
    let root = disc.max(0.0).sqrt();
    let residual = |s2: f64| (s2 * s2 + s3 * s3 - 2.0 * s2 * s3 * cos_a - a2).abs();
    [s1 * cos_g + root, s1 * cos_g - root]
        .into_iter()
        .filter(|s| *s > 0.0)
        .min_by(|x, y| residual(*x).total_cmp(&residual(*y)))
}

/// Newton iterations on the three cosine-law equations.
fn polish_depths(mut s: [f64; 3], target: [f64; 3], cosines: [f64; 3]) -> Option<[f64; 3]> {
    let [ta, tb, tc] = target;
    let [ca, cb, cg] = cosines;
    let scale = ta.max(tb).max(tc);
    for _ in 0..8 {
        let [s1, s2, s3] = s;
        let f = Vector3::new(
            s2 * s2 + s3 * s3 - 2.0 * s2 * s3 * ca - ta,
            s1 * s1 + s3 * s3 - 2.0 * s1 * s3 * cb - tb,
            s1 * s1 + s2 * s2 - 2.0 * s1 * s2 * cg - tc,
        );
        if f.amax() <= 1e-15 * scale {
            break;
        }
        let jac = Matrix3::new(
            0.0,
            2.0 * s2 - 2.0 * s3 * ca,
            2.0 * s3 - 2.0 * s2 * ca,
            2.0 * s1 - 2.0 * s3 * cb,
            0.0,
            2.0 * s3 - 2.0 * s1 * cb,
            2.0 * s1 - 2.0 * s2 * cg,
            2.0 * s2 - 2.0 * s1 * cg,
            0.0,
        );
        let Some(step) = jac.lu().solve(&f) else {
            break;
        };
        let next = [s1 - step.x, s2 - step.y, s3 - step.z];
        if next.iter().any(|v| !v.is_finite()) {
            break;
        }
        s = next;
    }
    let residual = {
        let [s1, s2, s3] = s;
        (s2 * s2 + s3 * s3 - 2.0 * s2 * s3 * ca - ta)
            .abs()
            .max((s1 * s1 + s3 * s3 - 2.0 * s1 * s3 * cb - tb).abs())
            .max((s1 * s1 + s2 * s2 - 2.0 * s1 * s2 * cg - tc).abs())
    };
    (residual <= 1e-6 * scale).then_some(s)
}

/// Real roots of `c0 x⁴ + c1 x³ + c2 x² + c3 x + c4` via companion-matrix
/// eigenvalues, each polished with Newton steps on the polynomial.
pub(crate) fn real_roots_quartic(c: [f64; 5]) -> Vec<f64> {
    let lead = c[0];
    let max_c = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max_c == 0.0 || !max_c.is_finite() {
        return Vec::new();
    }
    if lead.abs() <= 1e-14 * max_c {
        return real_roots_cubic([c[1], c[2], c[3], c[4]]);
    }
    let (a3, a2, a1, a0) = (c[1] / lead, c[2] / lead, c[3] / lead, c[4] / lead);
    let poly = |x: f64| (((x + a3) * x + a2) * x + a1) * x + a0;
    let dpoly = |x: f64| ((4.0 * x + 3.0 * a3) * x + 2.0 * a2) * x + a1;
    monic_roots(&[a3, a2, a1, a0])
        .iter()
        .filter(|z| z.im.abs() <= 1e-6 * (1.0 + z.re.abs()))
        .map(|z| newton_polish(z.re, poly, dpoly))
        .collect()
}

fn real_roots_cubic(c: [f64; 4]) -> Vec<f64> {
    let max_c = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if c[0].abs() <= 1e-14 * max_c {
        // quadratic
        let (a, b, cc) = (c[1], c[2], c[3]);
        if a.abs() <= 1e-14 * max_c {
            return if b.abs() > 0.0 { vec![-cc / b] } else { Vec::new() };
        }
        let disc = b * b - 4.0 * a * cc;
        if disc < 0.0 {
            return Vec::new();
        }
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        let mut roots = vec![q / a];
        if q != 0.0 {
            roots.push(cc / q);
        }
        return roots;
    }
    let (a2, a1, a0) = (c[1] / c[0], c[2] / c[0], c[3] / c[0]);
    let poly = |x: f64| ((x + a2) * x + a1) * x + a0;
    let dpoly = |x: f64| (3.0 * x + 2.0 * a2) * x + a1;
    monic_roots(&[a2, a1, a0])
        .iter()
        .filter(|z| z.im.abs() <= 1e-6 * (1.0 + z.re.abs()))
        .map(|z| newton_polish(z.re, poly, dpoly))
        .collect()
}

/// All complex roots of `x^N + a[0] x^(N-1) + ... + a[N-1]`.
///
/// Eigenvalues of the companion matrix; the Schur iteration is bounded and
/// falls back to Durand-Kerner on the rare inputs where it stalls.
fn monic_roots(a: &[f64]) -> Vec<Complex<f64>> {
    let n = a.len();
    let mut companion = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        companion[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        companion[(i, n - 1)] = -a[n - 1 - i];
    }
    if let Some(schur) = Schur::try_new(companion, f64::EPSILON, 500) {
        return schur.complex_eigenvalues().iter().copied().collect();
    }
    durand_kerner(a)
}

fn durand_kerner(a: &[f64]) -> Vec<Complex<f64>> {
    let n = a.len();
    let eval = |z: Complex<f64>| a.iter().fold(Complex::new(1.0, 0.0), |acc, c| acc * z + c);
    let radius = 1.0 + a.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let seed = Complex::new(0.4, 0.9);
    let mut z: Vec<Complex<f64>> = (0..n).map(|i| seed.powu(i as u32) * radius).collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..n {
            let denom = (0..n)
                .filter(|&j| j != i)
                .fold(Complex::new(1.0, 0.0), |acc, j| acc * (z[i] - z[j]));
            if denom.norm() == 0.0 {
                continue;
            }
            let step = eval(z[i]) / denom;
            z[i] -= step;
            moved = moved.max(step.norm());
        }
        if moved <= 1e-15 * radius {
            break;
        }
    }
    z
}

fn newton_polish(mut x: f64, f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..4 {
        let d = df(x);
        if d == 0.0 {
            break;
        }
        let next = x - f(x) / d;
        if !next.is_finite() || f(next).abs() > f(x).abs() {
            break;
        }
        x = next;
    }
    x
}

/// Rigid transform mapping `world[i]` onto `cam[i]` (least squares, SVD).
pub(crate) fn align_points(world: &[Vector3<f64>], cam: &[Vector3<f64>]) -> Option<Pose> {
    let n = world.len() as f64;
    let cw = world.iter().sum::<Vector3<f64>>() / n;
    let cc = cam.iter().sum::<Vector3<f64>>() / n;
    let mut h = Matrix3::zeros();
    for (w, c) in world.iter().zip(cam) {
        h += (w - cw) * (c - cc).transpose();
    }
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u?, svd.v_t?);
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let r = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    if !r.iter().all(|x| x.is_finite()) {
        return None;
    }
    let rotation = UnitQuaternion::from_matrix(&r);
    let translation = cc - rotation * cw;
    Some(Pose::new(rotation, translation))
}
