use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum camera-frame depth for a point to count as in front of the camera.
pub const MIN_DEPTH: f64 = 1e-9;

/// Pinhole intrinsics without distortion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        let k = CameraIntrinsics { fx, fy, cx, cy };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy].iter().all(|v| v.is_finite());
        if !finite || self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "intrinsics need finite values and positive focal lengths, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Pixel of a camera-frame point; the caller guarantees positive depth.
    pub fn project_camera_point(&self, pc: &Vector3<f64>) -> Vector2<f64> {
        Vector2::new(
            self.fx * pc.x / pc.z + self.cx,
            self.fy * pc.y / pc.z + self.cy,
        )
    }

    /// Unit bearing vector through a pixel.
    pub fn bearing(&self, pixel: &Vector2<f64>) -> Vector3<f64> {
        Vector3::new(
            (pixel.x - self.cx) / self.fx,
            (pixel.y - self.cy) / self.fy,
            1.0,
        )
        .normalize()
    }
}

/// Rigid world-to-camera transform: `x_cam = R * x_world + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Pose::identity()
    }
}

impl Pose {
    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Pose {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Pose::new(UnitQuaternion::identity(), Vector3::zeros())
    }

    /// Pose with the given rotation whose camera center sits at `center`.
    pub fn from_center(rotation: UnitQuaternion<f64>, center: Vector3<f64>) -> Self {
        Pose::new(rotation, -(rotation * center))
    }

    /// Camera at `eye` looking at `target`, with image "down" along `-up`.
    pub fn look_at(eye: &Vector3<f64>, target: &Vector3<f64>, up: &Vector3<f64>) -> Result<Self> {
        let forward = target - eye;
        if forward.norm() < 1e-12 {
            return Err(Error::InvalidInput("look_at: eye equals target".into()));
        }
        let z = forward.normalize();
        let x = z.cross(up);
        if x.norm() < 1e-12 {
            return Err(Error::InvalidInput("look_at: up parallel to view axis".into()));
        }
        let x = x.normalize();
        let y = z.cross(&x);
        // rows of the world-to-camera rotation are the camera axes in world coordinates
        let r = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        let rotation =
            UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(r));
        Ok(Pose::from_center(rotation, *eye))
    }

    /// `[qw, qx, qy, qz, tx, ty, tz]`.
    pub fn to_array(&self) -> [f64; 7] {
        let q = self.rotation.quaternion();
        let t = &self.translation;
        [q.w, q.i, q.j, q.k, t.x, t.y, t.z]
    }

    pub fn from_array(a: [f64; 7]) -> Result<Self> {
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite pose {a:?}")));
        }
        let q = Quaternion::new(a[0], a[1], a[2], a[3]);
        if (q.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "pose quaternion norm {} is not 1",
                q.norm()
            )));
        }
        Ok(Pose::new(
            UnitQuaternion::new_unchecked(q),
            Vector3::new(a[4], a[5], a[6]),
        ))
    }

    pub fn transform(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * world + self.translation
    }

    /// Camera center in world coordinates, `-Rᵀ t`.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.inverse() * self.translation)
    }
}

/// A keypoint matched to a 3D world point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence2D3D {
    pub pixel: Vector2<f64>,
    pub world: Vector3<f64>,
}

impl Correspondence2D3D {
    pub fn new(pixel: Vector2<f64>, world: Vector3<f64>) -> Self {
        Correspondence2D3D { pixel, world }
    }

    pub fn is_finite(&self) -> bool {
        self.pixel.iter().chain(self.world.iter()).all(|v| v.is_finite())
    }

    /// Pixel distance to the projection of `world`, or `None` when the point is
    /// not in front of the camera.
    pub fn reprojection_error(&self, pose: &Pose, k: &CameraIntrinsics) -> Option<f64> {
        let pc = pose.transform(&self.world);
        if pc.z <= MIN_DEPTH {
            return None;
        }
        Some((k.project_camera_point(&pc) - self.pixel).norm())
    }
}

/// Projects a world point to pixel coordinates.
pub fn project(point: &Vector3<f64>, pose: &Pose, k: &CameraIntrinsics) -> Result<Vector2<f64>> {
    let pc = pose.transform(point);
    if pc.z <= MIN_DEPTH {
        return Err(Error::BehindCamera(pc.z));
    }
    Ok(k.project_camera_point(&pc))
}
