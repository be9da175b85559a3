//! KITTI calibration text: `KEY: v1 v2 ...` lines.

use std::path::Path;

use crate::error::{Error, Position, Result};
use crate::geometry::{CameraIntrinsics, RigidTransform};

pub const DEFAULT_PROJECTION_KEY: &str = "P2";
pub const VELO_TO_CAM_KEY: &str = "Tr_velo_to_cam";

const KIND: &str = "calibration file";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationFile {
    pub intrinsics: CameraIntrinsics,
    pub velo_to_cam: Option<RigidTransform>,
}

/// Reads the 3x4 projection stored under `projection_key` and the optional
/// LiDAR-to-camera transform. Other keys are ignored.
pub fn parse_calibration(text: &str, projection_key: &str) -> Result<CalibrationFile> {
    let mut projection = None;
    let mut velo = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let pos = Position::Line(i + 1);
        let (key, rest) = line
            .split_once(':')
            .ok_or_else(|| Error::malformed(KIND, pos, "expected `KEY: values`"))?;
        let key = key.trim();
        let slot = if key == projection_key {
            &mut projection
        } else if key == VELO_TO_CAM_KEY {
            &mut velo
        } else {
            continue;
        };
        let values = rest
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::malformed(KIND, pos, format!("`{t}` is not a finite number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let values: [f64; 12] = values
            .try_into()
            .map_err(|v: Vec<f64>| Error::malformed(KIND, pos, format!("`{key}` needs 12 values, found {}", v.len())))?;
        *slot = Some((values, pos));
    }
    let (p, pos) = projection.ok_or_else(|| Error::MissingField(projection_key.to_string()))?;
    let intrinsics = CameraIntrinsics::new(p[0], p[5], p[2], p[6])
        .map_err(|e| Error::malformed(KIND, pos, e.to_string()))?;
    Ok(CalibrationFile {
        intrinsics,
        velo_to_cam: velo.map(|(v, _)| RigidTransform::from_row_major_3x4(&v)),
    })
}

pub fn load_calibration(path: impl AsRef<Path>, projection_key: &str) -> Result<CalibrationFile> {
    let path = path.as_ref();
    let bytes = super::read_bytes(path)?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| Error::malformed(KIND, Position::ByteOffset(e.valid_up_to()), "invalid UTF-8").in_file(path))?;
    parse_calibration(text, projection_key).map_err(|e| e.in_file(path))
}

/// Text form of a calibration with zero skew and no stereo baseline.
pub fn format_calibration(k: &CameraIntrinsics, velo_to_cam: Option<&RigidTransform>, projection_key: &str) -> String {
    let row = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ");
    let p = [k.fx, 0.0, k.u0, 0.0, 0.0, k.fy, k.v0, 0.0, 0.0, 0.0, 1.0, 0.0];
    let mut out = format!("{projection_key}: {}\n", row(&p));
    if let Some(t) = velo_to_cam {
        out.push_str(&format!("{VELO_TO_CAM_KEY}: {}\n", row(&t.to_row_major_3x4())));
    }
    out
}
