//! Rigid transforms, Euler rotations and pinhole projection.
//!
//! Rotations use the intrinsic Z-Y-X convention: `R = Rz(yaw) * Ry(pitch) * Rx(roll)`.
//! A LiDAR point `p` maps into the camera frame as `R * p + T`, and a camera-frame
//! point projects through `[K | 0]`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points closer to the image plane than this are discarded before division.
pub const MIN_DEPTH: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerAngles {
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }
    }

    pub fn from_degrees(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self::new(roll.to_radians(), pitch.to_radians(), yaw.to_radians())
    }

    pub fn is_finite(&self) -> bool {
        self.roll.is_finite() && self.pitch.is_finite() && self.yaw.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_euler_translation(angles: EulerAngles, translation: Vector3<f64>) -> Result<Self> {
        let mut t = rotation_from_euler(angles)?;
        t.translation = translation;
        Ok(t)
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Inverse of a rigid transform: `[Rᵀ | -Rᵀ T]`.
    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Recovers Z-Y-X Euler angles. Valid away from pitch = ±90°.
    pub fn euler_angles(&self) -> EulerAngles {
        let r = &self.rotation;
        let pitch = (-r[(2, 0)]).clamp(-1.0, 1.0).asin();
        let roll = r[(2, 1)].atan2(r[(2, 2)]);
        let yaw = r[(1, 0)].atan2(r[(0, 0)]);
        EulerAngles { roll, pitch, yaw }
    }

    /// Row-major 3×4 `[R | T]`.
    pub fn to_row_major_3x4(&self) -> [f64; 12] {
        let mut out = [0.0; 12];
        for r in 0..3 {
            for c in 0..3 {
                out[r * 4 + c] = self.rotation[(r, c)];
            }
            out[r * 4 + 3] = self.translation[r];
        }
        out
    }

    pub fn from_row_major_3x4(v: &[f64; 12]) -> Self {
        let rotation = Matrix3::new(v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10]);
        let translation = Vector3::new(v[3], v[7], v[11]);
        Self {
            rotation,
            translation,
        }
    }

    /// Largest elementwise deviation of `RᵀR` from identity and `|det R - 1|`.
    pub fn orthonormality_error(&self) -> (f64, f64) {
        let gram = self.rotation.transpose() * self.rotation - Matrix3::identity();
        let inf = gram.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (inf, (self.rotation.determinant() - 1.0).abs())
    }
}

/// `Rz(yaw) * Ry(pitch) * Rx(roll)` with zero translation.
pub fn rotation_from_euler(angles: EulerAngles) -> Result<RigidTransform> {
    if !angles.is_finite() {
        return Err(Error::invalid(format!("non-finite Euler angles {angles:?}")));
    }
    let (sr, cr) = angles.roll.sin_cos();
    let (sp, cp) = angles.pitch.sin_cos();
    let (sy, cy) = angles.yaw.sin_cos();
    let rotation = Matrix3::new(
        cy * cp,
        cy * sp * sr - sy * cr,
        cy * sp * cr + sy * sr,
        sy * cp,
        sy * sp * sr + cy * cr,
        sy * sp * cr - cy * sr,
        -sp,
        cp * sr,
        cp * cr,
    );
    Ok(RigidTransform {
        rotation,
        translation: Vector3::zeros(),
    })
}

pub fn transform_point(t: &RigidTransform, p: &Vector3<f64>) -> Result<Vector3<f64>> {
    if !p.iter().all(|v| v.is_finite()) {
        return Err(Error::invalid(format!("non-finite point {p:?}")));
    }
    Ok(t.apply(p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub u0: f64,
    pub v0: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, u0: f64, v0: f64) -> Result<Self> {
        let k = Self { fx, fy, u0, v0 };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.fx, self.fy, self.u0, self.v0].iter().all(|v| v.is_finite());
        if !all_finite || self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::invalid(format!("bad intrinsics {self:?}")));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.u0, 0.0, self.fy, self.v0, 0.0, 0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
    pub depth: Option<f64>,
}

pub fn project_to_pixel(k: &CameraIntrinsics, p_cam: &Vector3<f64>) -> Result<PixelPoint> {
    if !p_cam.iter().all(|v| v.is_finite()) {
        return Err(Error::invalid(format!("non-finite point {p_cam:?}")));
    }
    let z = p_cam.z;
    if z <= MIN_DEPTH {
        return Err(Error::BehindCamera { depth: z });
    }
    Ok(PixelPoint {
        u: k.fx * (p_cam.x / z) + k.u0,
        v: k.fy * (p_cam.y / z) + k.v0,
        depth: Some(z),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageSize {
    pub width: usize,
    pub height: usize,
}

impl ImageSize {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height }
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub intensities: Vec<f64>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>, intensities: Vec<f64>) -> Result<Self> {
        if points.len() != intensities.len() {
            return Err(Error::invalid(format!(
                "{} points but {} intensities",
                points.len(),
                intensities.len()
            )));
        }
        if let Some(i) = points.iter().position(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(Error::invalid(format!("non-finite coordinate at point {i}")));
        }
        if let Some(i) = intensities.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid(format!("intensity out of [0,1] at point {i}")));
        }
        Ok(Self {
            points,
            intensities,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A LiDAR point after projection into the image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedPoint {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
    pub intensity: f64,
    /// Index of the source point in the cloud.
    pub source: usize,
}

/// Projects every cloud point, dropping points behind the camera or outside the
/// image. Input order is preserved.
pub fn project_cloud(
    cloud: &PointCloud,
    t: &RigidTransform,
    k: &CameraIntrinsics,
    size: ImageSize,
) -> Vec<ProjectedPoint> {
    project_indices(cloud, 0..cloud.len(), t, k, size)
}

/// Like [`project_cloud`] but restricted to the given point indices, in the given order.
pub fn project_indices(
    cloud: &PointCloud,
    indices: impl IntoIterator<Item = usize>,
    t: &RigidTransform,
    k: &CameraIntrinsics,
    size: ImageSize,
) -> Vec<ProjectedPoint> {
    let mut out = Vec::new();
    for i in indices {
        let pc = t.apply(&cloud.points[i]);
        if pc.z <= MIN_DEPTH {
            continue;
        }
        let u = k.fx * (pc.x / pc.z) + k.u0;
        let v = k.fy * (pc.y / pc.z) + k.v0;
        if size.contains(u, v) {
            out.push(ProjectedPoint {
                u,
                v,
                depth: pc.z,
                intensity: cloud.intensities[i],
                source: i,
            });
        }
    }
    out
}

/// Per-pixel camera depth; `f64::INFINITY` marks pixels with no data.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl DepthImage {
    pub const NO_DATA: f64 = f64::INFINITY;

    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        let d = self.data[y * self.width + x];
        (d != Self::NO_DATA).then_some(d)
    }

    pub fn populated(&self) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().copied().filter(|d| *d != Self::NO_DATA)
    }
}

/// Rasterizes the cloud into a depth image: round-to-nearest pixel, nearest depth wins.
pub fn generate_depth_map(
    cloud: &PointCloud,
    t: &RigidTransform,
    k: &CameraIntrinsics,
    size: ImageSize,
) -> DepthImage {
    let mut data = vec![DepthImage::NO_DATA; size.width * size.height];
    for p in project_cloud(cloud, t, k, size) {
        let x = p.u.round() as usize;
        let y = p.v.round() as usize;
        if x >= size.width || y >= size.height {
            continue;
        }
        let slot = &mut data[y * size.width + x];
        if p.depth < *slot {
            *slot = p.depth;
        }
    }
    DepthImage {
        width: size.width,
        height: size.height,
        data,
    }
}
