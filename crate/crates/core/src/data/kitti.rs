//! KITTI velodyne scans: little-endian `f32` quadruples `(x, y, z, reflectance)`.

use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Position, Result};
use crate::geometry::PointCloud;

const RECORD: usize = 16;
const KIND: &str = "KITTI point cloud";

pub fn parse_kitti_cloud(bytes: &[u8]) -> Result<PointCloud> {
    let tail = bytes.len() % RECORD;
    if tail != 0 {
        return Err(Error::malformed(
            KIND,
            Position::ByteOffset(bytes.len() - tail),
            format!("{} bytes is not a multiple of {RECORD}", bytes.len()),
        ));
    }
    let count = bytes.len() / RECORD;
    let mut points = Vec::with_capacity(count);
    let mut intensities = Vec::with_capacity(count);
    for (i, rec) in bytes.chunks_exact(RECORD).enumerate() {
        let f: [f32; 4] = std::array::from_fn(|k| {
            f32::from_le_bytes(rec[4 * k..4 * k + 4].try_into().expect("4-byte slice"))
        });
        if let Some(v) = f.iter().find(|v| !v.is_finite()) {
            return Err(Error::malformed(KIND, Position::PointIndex(i), format!("non-finite value {v}")));
        }
        points.push(Vector3::new(f[0] as f64, f[1] as f64, f[2] as f64));
        intensities.push((f[3] as f64).clamp(0.0, 1.0));
    }
    PointCloud::new(points, intensities)
}

/// Inverse of [`parse_kitti_cloud`] for clouds whose values are representable as `f32`.
pub fn encode_kitti_cloud(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.len() * RECORD);
    for (p, r) in cloud.points.iter().zip(&cloud.intensities) {
        for v in [p.x, p.y, p.z, *r] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn load_pointcloud_kitti(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    parse_kitti_cloud(&super::read_bytes(path)?).map_err(|e| e.in_file(path))
}

pub fn save_pointcloud_kitti(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    super::write_bytes(path.as_ref(), &encode_kitti_cloud(cloud))
}
