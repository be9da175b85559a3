//! JSON scene manifests tying a cloud, an image and a calibration file together.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::calib::{format_calibration, load_calibration, DEFAULT_PROJECTION_KEY};
use super::kitti::{load_pointcloud_kitti, save_pointcloud_kitti};
use super::pgm::{load_image_pgm, save_image_pgm};
use super::synthetic::Decalibration;
use crate::error::{Error, Position, Result};
use crate::geometry::RigidTransform;
use crate::problem::{CalibrationScene, FeatureSettings};

const KIND: &str = "scene manifest";
const ORTHONORMAL_TOLERANCE: f64 = 1e-5;

fn default_key() -> String {
    DEFAULT_PROJECTION_KEY.to_string()
}

/// Provenance of a generated scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticInfo {
    pub seed: u64,
    pub layout: String,
}

/// File paths are relative to the manifest's directory unless absolute. Transforms are
/// row-major 3x4 `[R | t]` mapping LiDAR coordinates into the camera frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub cloud: PathBuf,
    pub image: PathBuf,
    pub calibration: PathBuf,
    #[serde(default = "default_key")]
    pub calibration_key: String,
    /// Extrinsics to correct; falls back to `Tr_velo_to_cam` from the calibration file.
    #[serde(default)]
    pub initial_extrinsics: Option<[f64; 12]>,
    #[serde(default)]
    pub ground_truth: Option<[f64; 12]>,
    #[serde(default)]
    pub decalibration: Option<Decalibration>,
    #[serde(default)]
    pub settings: FeatureSettings,
    #[serde(default)]
    pub synthetic: Option<SyntheticInfo>,
}

impl SceneManifest {
    pub fn parse(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)
            .map_err(|e| Error::malformed(KIND, Position::Line(e.line()), e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest is always serializable");
        s.push('\n');
        s
    }

    fn validate(&self) -> Result<()> {
        let s = &self.settings;
        let bad = |reason: String| Error::malformed(KIND, Position::Line(1), reason);
        if !(s.gradient_threshold >= 0.0 && s.gradient_threshold.is_finite()) {
            return Err(bad(format!("gradient_threshold {} must be finite and >= 0", s.gradient_threshold)));
        }
        if !(s.depth_gap > 0.0 && s.depth_gap.is_finite()) {
            return Err(bad(format!("depth_gap {} must be finite and > 0", s.depth_gap)));
        }
        if !(0.0..=1.0).contains(&s.reflectance_threshold) {
            return Err(bad(format!("reflectance_threshold {} must lie in [0,1]", s.reflectance_threshold)));
        }
        for (name, t) in [("initial_extrinsics", &self.initial_extrinsics), ("ground_truth", &self.ground_truth)] {
            if let Some(v) = t {
                transform_from(v).map_err(|r| bad(format!("{name}: {r}")))?;
            }
        }
        Ok(())
    }
}

fn transform_from(v: &[f64; 12]) -> std::result::Result<RigidTransform, String> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err("non-finite entry".into());
    }
    let t = RigidTransform::from_row_major_3x4(v);
    let (ortho, det) = t.orthonormality_error();
    if ortho > ORTHONORMAL_TOLERANCE || det > ORTHONORMAL_TOLERANCE {
        return Err(format!("rotation is not orthonormal (error {ortho:.2e}, det error {det:.2e})"));
    }
    Ok(t)
}

/// A scene together with the manifest it came from.
#[derive(Debug, Clone)]
pub struct LoadedScene {
    pub scene: Arc<CalibrationScene>,
    pub manifest: SceneManifest,
    pub path: PathBuf,
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<SceneManifest> {
    let path = path.as_ref();
    let bytes = super::read_bytes(path)?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| Error::malformed(KIND, Position::ByteOffset(e.valid_up_to()), "invalid UTF-8").in_file(path))?;
    SceneManifest::parse(text).map_err(|e| e.in_file(path))
}

/// Loads and checks every referenced file before building the scene.
pub fn load_scene(path: impl AsRef<Path>) -> Result<LoadedScene> {
    let path = path.as_ref();
    let manifest = load_manifest(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let cloud = load_pointcloud_kitti(dir.join(&manifest.cloud))?;
    let image = load_image_pgm(dir.join(&manifest.image))?;
    let calib_path = dir.join(&manifest.calibration);
    let calib = load_calibration(&calib_path, &manifest.calibration_key)?;
    let initial = match &manifest.initial_extrinsics {
        Some(v) => transform_from(v).expect("validated"),
        None => calib
            .velo_to_cam
            .ok_or_else(|| Error::MissingField("initial_extrinsics".into()).in_file(&calib_path))?,
    };
    let ground_truth = manifest.ground_truth.as_ref().map(|v| transform_from(v).expect("validated"));
    let scene = CalibrationScene::new(cloud, image, calib.intrinsics, initial, ground_truth, manifest.settings)
        .map_err(|e| e.in_file(path))?;
    Ok(LoadedScene {
        scene: Arc::new(scene),
        manifest,
        path: path.to_path_buf(),
    })
}

pub const MANIFEST_FILE: &str = "scene.json";

/// Writes `cloud.bin`, `image.pgm`, `calib.txt` and `scene.json` into `dir`. The
/// calibration file carries the scene's initial extrinsics as `Tr_velo_to_cam`.
pub fn write_scene(
    dir: impl AsRef<Path>,
    scene: &CalibrationScene,
    decalibration: Option<Decalibration>,
    synthetic: Option<SyntheticInfo>,
) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = SceneManifest {
        cloud: "cloud.bin".into(),
        image: "image.pgm".into(),
        calibration: "calib.txt".into(),
        calibration_key: default_key(),
        initial_extrinsics: Some(scene.initial.to_row_major_3x4()),
        ground_truth: scene.ground_truth.map(|t| t.to_row_major_3x4()),
        decalibration,
        settings: scene.settings,
        synthetic,
    };
    save_pointcloud_kitti(dir.join(&manifest.cloud), &scene.cloud)?;
    save_image_pgm(dir.join(&manifest.image), &scene.image)?;
    super::write_bytes(
        &dir.join(&manifest.calibration),
        format_calibration(&scene.intrinsics, Some(&scene.initial), &manifest.calibration_key).as_bytes(),
    )?;
    let path = dir.join(MANIFEST_FILE);
    super::write_bytes(&path, manifest.to_json().as_bytes())?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_manifest_uses_defaults() {
        let m = SceneManifest::parse(r#"{"cloud": "a.bin", "image": "a.pgm", "calibration": "c.txt"}"#).unwrap();
        assert_eq!(m.calibration_key, "P2");
        assert_eq!(m.settings, FeatureSettings::default());
        assert!(m.initial_extrinsics.is_none());
    }

    #[test]
    fn bad_json_reports_line() {
        match SceneManifest::parse("{\n\"cloud\": 3\n}").unwrap_err() {
            Error::Malformed { position, .. } => assert_eq!(position, Position::Line(2)),
            e => panic!("unexpected {e}"),
        }
        assert!(SceneManifest::parse(r#"{"cloud": "a"}"#).is_err());
    }

    #[test]
    fn rejects_non_rigid_transforms() {
        let text = r#"{"cloud": "a", "image": "b", "calibration": "c",
            "ground_truth": [2,0,0,0, 0,1,0,0, 0,0,1,0]}"#;
        assert!(SceneManifest::parse(text).is_err());
        let text = r#"{"cloud": "a", "image": "b", "calibration": "c", "settings": {"depth_gap": 0}}"#;
        assert!(SceneManifest::parse(text).is_err());
    }

    #[test]
    fn missing_files_name_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("scene.json");
        std::fs::write(&p, r#"{"cloud": "nope.bin", "image": "a.pgm", "calibration": "c.txt"}"#).unwrap();
        let e = load_scene(&p).unwrap_err();
        assert!(matches!(e, Error::Io { .. }));
        assert!(e.to_string().contains("nope.bin"));
    }
}
