//! File formats: PGM image stacks with JSON sidecars, PLY clouds, JSON
//! calibration and grid files, binary ground truth and CSV reports.
//!
//! Every decoder takes bytes or text and never panics on malformed input.

mod calib;
mod csvout;
mod gt;
mod pgm;
mod ply;
mod sidecar;

pub use calib::{
    parse_calib, read_calib, rig_to_calib, write_calib, CalibDevice, CalibFile, CalibPose,
    CALIB_FORMAT,
};
pub use csvout::{write_candidates_csv, write_sweep_csv, SweepRow};
pub use gt::{decode_ground_truth, encode_ground_truth, GT_FORMAT};
pub use pgm::{decode_pgm, encode_pgm, BitDepth};
pub use ply::{decode_ply, encode_ply, PlyFormat, PlyVertex};
pub use sidecar::{parse_sidecar, StackSidecar, STACK_FORMAT};

pub use crate::projcal::DistortionGrid;
pub use grid_json::{grid_from_json, grid_to_json, GRID_FORMAT};

mod grid_json;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl IoError {
    pub(crate) fn format(what: &'static str, reason: impl Into<String>) -> Self {
        IoError::Format {
            what,
            reason: reason.into(),
        }
    }
}

/// Reads a whole file, naming the path on failure.
pub fn read_file(path: &std::path::Path) -> Result<Vec<u8>, IoError> {
    std::fs::read(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

/// Writes a whole file, naming the path on failure.
pub fn write_file(path: &std::path::Path, bytes: &[u8]) -> Result<(), IoError> {
    std::fs::write(path, bytes).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}
