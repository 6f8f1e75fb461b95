//! JSON sidecar describing a PGM image stack.
//!
//! Frame `k` in `frames` shows the pattern shifted by `+2 pi k / K`;
//! `graycode` lists the bit planes most significant first.

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::phase::{FringeConfig, FringeOrientation};

pub const STACK_FORMAT: &str = "fringefree-stack/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackSidecar {
    pub format: String,
    /// Number of phase steps K.
    pub steps: usize,
    /// Fringe period λ, projector pixels.
    pub period_px: f64,
    /// Number of fringe periods N.
    pub fringe_count: usize,
    #[serde(default)]
    pub orientation: FringeOrientation,
    pub width: usize,
    pub height: usize,
    /// 8 or 16.
    pub bit_depth: u8,
    /// Fringe frame files in phase-shift order.
    pub frames: Vec<String>,
    #[serde(default)]
    pub graycode: Vec<String>,
}

impl StackSidecar {
    pub fn fringe_config(&self) -> Result<FringeConfig, IoError> {
        let cfg = FringeConfig {
            period_px: self.period_px,
            steps: self.steps,
            fringe_count: self.fringe_count,
            orientation: self.orientation,
        };
        cfg.validate()
            .map_err(|e| IoError::format("stack sidecar", e.to_string()))?;
        Ok(cfg)
    }
}

pub fn parse_sidecar(text: &str) -> Result<StackSidecar, IoError> {
    let s: StackSidecar = serde_json::from_str(text)?;
    if s.format != STACK_FORMAT {
        return Err(IoError::format(
            "stack sidecar",
            format!("format tag {:?}, expected {STACK_FORMAT:?}", s.format),
        ));
    }
    if s.frames.len() != s.steps {
        return Err(IoError::format(
            "stack sidecar",
            format!("{} frames listed for K = {}", s.frames.len(), s.steps),
        ));
    }
    if s.bit_depth != 8 && s.bit_depth != 16 {
        return Err(IoError::format("stack sidecar", "bit depth must be 8 or 16"));
    }
    s.fringe_config()?;
    Ok(s)
}
