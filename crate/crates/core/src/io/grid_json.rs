//! Distortion grid files: spacing, origin, node counts, row-major vectors,
//! support counts, extrapolation flags and direction coverage.

use nalgebra::{Point2, Vector2};
use serde::{Deserialize, Serialize};

use super::IoError;
use crate::projcal::{DirectionCoverage, DistortionGrid};

pub const GRID_FORMAT: &str = "fringefree-grid/1";

#[derive(Debug, Serialize, Deserialize)]
struct GridFile {
    format: String,
    spacing: f64,
    origin: [f64; 2],
    nx: usize,
    ny: usize,
    values: Vec<[f64; 2]>,
    support: Vec<u32>,
    extrapolated: Vec<bool>,
    coverage: DirectionCoverage,
}

pub fn grid_to_json(grid: &DistortionGrid) -> String {
    let (nx, ny) = grid.dims();
    let file = GridFile {
        format: GRID_FORMAT.to_string(),
        spacing: grid.spacing(),
        origin: [grid.origin().x, grid.origin().y],
        nx,
        ny,
        values: grid.values().iter().map(|v| [v.x, v.y]).collect(),
        support: grid.support().to_vec(),
        extrapolated: grid.extrapolated().to_vec(),
        coverage: grid.coverage(),
    };
    serde_json::to_string_pretty(&file).expect("grid serializes")
}

pub fn grid_from_json(text: &str) -> Result<DistortionGrid, IoError> {
    let f: GridFile = serde_json::from_str(text)?;
    if f.format != GRID_FORMAT {
        return Err(IoError::format(
            "distortion grid",
            format!("format tag {:?}, expected {GRID_FORMAT:?}", f.format),
        ));
    }
    DistortionGrid::from_parts(
        f.spacing,
        Point2::new(f.origin[0], f.origin[1]),
        f.nx,
        f.ny,
        f.values.iter().map(|v| Vector2::new(v[0], v[1])).collect(),
        f.support,
        f.extrapolated,
        f.coverage,
    )
    .map_err(|reason| IoError::format("distortion grid", reason))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let values: Vec<_> = (0..6).map(|i| Vector2::new(i as f64 * 0.1, -0.3)).collect();
        let g = DistortionGrid::from_parts(
            32.0,
            Point2::new(0.0, 0.0),
            3,
            2,
            values,
            vec![1, 2, 3, 0, 0, 1],
            vec![false, false, false, true, true, false],
            DirectionCoverage::XOnly,
        )
        .unwrap();
        assert_eq!(grid_from_json(&grid_to_json(&g)).unwrap(), g);
    }
}
