use crate::error::{Error, Result};

/// Translation (m) and rotation (deg) error of one localized frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseErr {
    pub meters: f64,
    pub degrees: f64,
}

impl PoseErr {
    pub fn new(meters: f64, degrees: f64) -> Self {
        PoseErr { meters, degrees }
    }
}

impl From<(f64, f64)> for PoseErr {
    fn from((meters, degrees): (f64, f64)) -> Self {
        PoseErr { meters, degrees }
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Component-wise median; even counts average the two middle values.
pub fn median_errors(errors: &[PoseErr]) -> Result<PoseErr> {
    if errors.is_empty() {
        return Err(Error::InvalidInput("median of an empty error list".into()));
    }
    Ok(PoseErr {
        meters: median(errors.iter().map(|e| e.meters).collect()),
        degrees: median(errors.iter().map(|e| e.degrees).collect()),
    })
}

/// Percentage of frames within both thresholds.
pub fn accuracy_at(errors: &[PoseErr], thresh_m: f64, thresh_deg: f64) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::InvalidInput("accuracy of an empty error list".into()));
    }
    if !(thresh_m > 0.0 && thresh_deg > 0.0) {
        return Err(Error::InvalidInput("accuracy thresholds must be positive".into()));
    }
    let hits = errors
        .iter()
        .filter(|e| e.meters <= thresh_m && e.degrees <= thresh_deg)
        .count();
    Ok(100.0 * hits as f64 / errors.len() as f64)
}
