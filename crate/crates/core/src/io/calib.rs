//! Calibration files.
//!
//! ```json
//! {
//!   "format": "fringefree-calib/1",
//!   "cam1": {
//!     "intrinsics": {"fx": 1000, "fy": 1000, "cx": 319.5, "cy": 239.5, "width": 640, "height": 480},
//!     "pose": {"rotation": [1,0,0, 0,1,0, 0,0,1], "translation": [69, 0, 0]},
//!     "lens": {"k1": 0, "k2": 0, "k3": 0, "p1": 0, "p2": 0}
//!   },
//!   "cam2": { ... },
//!   "projector": { ..., "distortion_grid": "grid.json" }
//! }
//! ```
//!
//! The pose maps world to device coordinates: `p_dev = R p_world + t`, with
//! `R` given row-major. A relative grid path is resolved against the
//! calibration file's directory.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{grid_from_json, read_file, IoError};
use crate::correspond::SensorRig;
use crate::geometry::{DeviceKind, Intrinsics, LensDistortion, PinholeDevice, Pose};

pub const CALIB_FORMAT: &str = "fringefree-calib/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibPose {
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibDevice {
    pub intrinsics: Intrinsics,
    pub pose: CalibPose,
    #[serde(default)]
    pub lens: LensDistortion,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distortion_grid: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibFile {
    pub format: String,
    pub cam1: CalibDevice,
    pub cam2: CalibDevice,
    pub projector: CalibDevice,
}

impl CalibDevice {
    fn from_device(d: &PinholeDevice, grid: Option<String>) -> Self {
        let t = d.pose().translation();
        Self {
            intrinsics: *d.intrinsics(),
            pose: CalibPose {
                rotation: d.pose().rotation_row_major(),
                translation: [t.x, t.y, t.z],
            },
            lens: *d.lens(),
            distortion_grid: grid,
        }
    }

    /// Builds the device without loading any grid.
    pub fn device(&self, kind: DeviceKind) -> Result<PinholeDevice, IoError> {
        let bad = |e: crate::geometry::GeometryError| IoError::format("calibration", e.to_string());
        let pose = Pose::new(
            Matrix3::from_row_slice(&self.pose.rotation),
            Vector3::from(self.pose.translation),
        )
        .map_err(bad)?;
        let lens = self.lens;
        for c in [lens.k1, lens.k2, lens.k3, lens.p1, lens.p2] {
            if !c.is_finite() {
                return Err(IoError::format("calibration", "non-finite lens coefficient"));
            }
        }
        PinholeDevice::new(kind, self.intrinsics, pose, lens).map_err(bad)
    }
}

impl CalibFile {
    /// Rig without distortion grids.
    pub fn rig_without_grids(&self) -> Result<SensorRig, IoError> {
        if self.cam1.distortion_grid.is_some() || self.cam2.distortion_grid.is_some() {
            return Err(IoError::format("calibration", "cameras cannot carry a distortion grid"));
        }
        SensorRig::new(
            self.cam1.device(DeviceKind::Camera)?,
            self.cam2.device(DeviceKind::Camera)?,
            self.projector.device(DeviceKind::Projector)?,
        )
        .map_err(|e| IoError::format("calibration", e.to_string()))
    }

    /// Rig with the projector grid loaded relative to `base_dir`.
    pub fn rig(&self, base_dir: &Path) -> Result<SensorRig, IoError> {
        let rig = self.rig_without_grids()?;
        let Some(rel) = &self.projector.distortion_grid else {
            return Ok(rig);
        };
        let path = base_dir.join(rel);
        let text = read_file(&path)?;
        let text = String::from_utf8(text)
            .map_err(|_| IoError::format("distortion grid", "file is not UTF-8"))?;
        let grid = grid_from_json(&text)?;
        let proj = rig
            .projector
            .clone()
            .with_grid(Some(Arc::new(grid)))
            .map_err(|e| IoError::format("calibration", e.to_string()))?;
        rig.with_projector(proj)
            .map_err(|e| IoError::format("calibration", e.to_string()))
    }
}

pub fn parse_calib(text: &str) -> Result<CalibFile, IoError> {
    let file: CalibFile = serde_json::from_str(text)?;
    if file.format != CALIB_FORMAT {
        return Err(IoError::format(
            "calibration",
            format!("format tag {:?}, expected {CALIB_FORMAT:?}", file.format),
        ));
    }
    Ok(file)
}

/// Reads a calibration file and its grid.
pub fn read_calib(path: &Path) -> Result<SensorRig, IoError> {
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| IoError::format("calibration", "file is not UTF-8"))?;
    let file = parse_calib(&text)?;
    file.rig(path.parent().unwrap_or(Path::new(".")))
}

/// Calibration document for a rig. The grid itself is written separately.
pub fn rig_to_calib(rig: &SensorRig, projector_grid: Option<String>) -> CalibFile {
    CalibFile {
        format: CALIB_FORMAT.to_string(),
        cam1: CalibDevice::from_device(&rig.cam1, None),
        cam2: CalibDevice::from_device(&rig.cam2, None),
        projector: CalibDevice::from_device(&rig.projector, projector_grid),
    }
}

pub fn write_calib(file: &CalibFile) -> String {
    serde_json::to_string_pretty(file).expect("calibration serializes")
}
