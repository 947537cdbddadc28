use std::fmt;

use crate::cli::kv::KvMap;
use crate::data::Camera;
use crate::error::{Error, Result};
use crate::geometry::CameraIntrinsics;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub scene: String,
    pub n_landmarks: usize,
    /// Box side lengths in meters, centered at the origin.
    pub box_extents: [f64; 3],
    pub dim: usize,
    /// Per-component Gaussian noise added to observed descriptors.
    pub desc_sigma: f64,
    /// Gaussian keypoint noise in pixels.
    pub px_sigma: f64,
    pub n_train_views: usize,
    pub n_test_views: usize,
    /// Distance of the camera from the vertical axis through the box center.
    pub orbit_radius: (f64, f64),
    pub orbit_height: (f64, f64),
    /// Half-width of the box around the center that cameras aim at.
    pub look_jitter: f64,
    /// Fraction of planted outliers for correspondence-level experiments.
    pub outlier_fraction: f64,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            scene: "synthetic".into(),
            n_landmarks: 3000,
            box_extents: [4.0, 4.0, 4.0],
            dim: 64,
            desc_sigma: 0.05,
            px_sigma: 1.0,
            n_train_views: 200,
            n_test_views: 50,
            orbit_radius: (3.5, 4.5),
            orbit_height: (-0.5, 0.5),
            look_jitter: 0.3,
            outlier_fraction: 0.3,
            fx: 525.0,
            fy: 525.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
            seed: 0,
        }
    }
}

fn parse_pair(s: &str) -> Option<(f64, f64)> {
    let (a, b) = s.split_once(',')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

fn parse_triple(s: &str) -> Option<[f64; 3]> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse().ok())
        .collect::<Option<_>>()?;
    v.try_into().ok()
}

impl SynthConfig {
    pub fn camera(&self) -> Camera {
        Camera {
            intrinsics: CameraIntrinsics {
                fx: self.fx,
                fy: self.fy,
                cx: self.cx,
                cy: self.cy,
            },
            width: self.width,
            height: self.height,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if self.box_extents.iter().any(|e| !(*e > 0.0)) {
            return bad("box extents must be positive");
        }
        if !(self.desc_sigma >= 0.0) || !(self.px_sigma >= 0.0) {
            return bad("noise sigmas must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.outlier_fraction) {
            return bad("outlier_fraction must lie in [0, 1]");
        }
        if self.orbit_radius.0 > self.orbit_radius.1 || self.orbit_height.0 > self.orbit_height.1 {
            return bad("range lower bound exceeds upper bound");
        }
        if self.orbit_radius.0 <= 0.0 {
            return bad("orbit radius must be positive");
        }
        if self.width == 0 || self.height == 0 {
            return bad("image size must be positive");
        }
        self.camera().intrinsics.validate()
    }

    /// Overrides fields from `key = value` pairs; ranges are written `lo,hi`.
    /// On error `self` is left unchanged.
    pub fn apply(&mut self, kv: &KvMap) -> Result<()> {
        let mut next = self.clone();
        next.apply_unchecked(kv)?;
        next.validate()?;
        *self = next;
        Ok(())
    }

    fn apply_unchecked(&mut self, kv: &KvMap) -> Result<()> {
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
            let pair = || {
                parse_pair(value)
                    .ok_or_else(|| Error::Config(format!("{key}: expected lo,hi, got {value:?}")))
            };
            match key {
                "scene" => self.scene = value.to_string(),
                "n_landmarks" => self.n_landmarks = int()? as usize,
                "box_extents" => {
                    self.box_extents = match parse_triple(value) {
                        Some(t) => t,
                        None => [num()?; 3],
                    }
                }
                "dim" => self.dim = int()? as usize,
                "desc_sigma" => self.desc_sigma = num()?,
                "px_sigma" => self.px_sigma = num()?,
                "n_train_views" => self.n_train_views = int()? as usize,
                "n_test_views" => self.n_test_views = int()? as usize,
                "orbit_radius" => self.orbit_radius = pair()?,
                "orbit_height" => self.orbit_height = pair()?,
                "look_jitter" => self.look_jitter = num()?,
                "outlier_fraction" => self.outlier_fraction = num()?,
                "fx" => self.fx = num()?,
                "fy" => self.fy = num()?,
                "cx" => self.cx = num()?,
                "cy" => self.cy = num()?,
                "width" => self.width = int()? as u32,
                "height" => self.height = int()? as u32,
                "seed" => self.seed = int()?,
                other => return Err(Error::Config(format!("unknown synth key {other:?}"))),
            }
        }
        Ok(())
    }
}

impl fmt::Display for SynthConfig {
    /// Every field as `key = value`, in a form [`SynthConfig::apply`] accepts.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [bx, by, bz] = self.box_extents;
        writeln!(f, "scene = {}", self.scene)?;
        writeln!(f, "n_landmarks = {}", self.n_landmarks)?;
        writeln!(f, "box_extents = {bx},{by},{bz}")?;
        writeln!(f, "dim = {}", self.dim)?;
        writeln!(f, "desc_sigma = {}", self.desc_sigma)?;
        writeln!(f, "px_sigma = {}", self.px_sigma)?;
        writeln!(f, "n_train_views = {}", self.n_train_views)?;
        writeln!(f, "n_test_views = {}", self.n_test_views)?;
        writeln!(f, "orbit_radius = {},{}", self.orbit_radius.0, self.orbit_radius.1)?;
        writeln!(f, "orbit_height = {},{}", self.orbit_height.0, self.orbit_height.1)?;
        writeln!(f, "look_jitter = {}", self.look_jitter)?;
        writeln!(f, "outlier_fraction = {}", self.outlier_fraction)?;
        writeln!(f, "fx = {}", self.fx)?;
        writeln!(f, "fy = {}", self.fy)?;
        writeln!(f, "cx = {}", self.cx)?;
        writeln!(f, "cy = {}", self.cy)?;
        writeln!(f, "width = {}", self.width)?;
        writeln!(f, "height = {}", self.height)?;
        write!(f, "seed = {}", self.seed)
    }
}
