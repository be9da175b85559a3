//! File formats, synthetic scenes and run artifacts.

pub mod artifacts;
pub mod calib;
pub mod kitti;
pub mod manifest;
pub mod pgm;
pub mod synthetic;

use std::path::Path;

use crate::error::{Error, Result};

pub use calib::{load_calibration, parse_calibration, CalibrationFile, DEFAULT_PROJECTION_KEY, VELO_TO_CAM_KEY};
pub use kitti::{encode_kitti_cloud, load_pointcloud_kitti, parse_kitti_cloud, save_pointcloud_kitti};
pub use manifest::{load_scene, LoadedScene, SceneManifest};
pub use pgm::{encode_pgm, load_image_pgm, parse_pgm, save_image_pgm};
pub use synthetic::{decalibrate, generate_synthetic_scene, Decalibration, SceneLayout};

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
