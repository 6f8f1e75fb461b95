//! Projector distortion-grid calibration from three plane measurements,
//! and the calibration quality measures cpd_mn and epipolar line error.
//!
//! Cameras are assumed calibrated and the projector carries an initial
//! pinhole-plus-lens calibration. The planes are reconstructed in CC mode,
//! which does not involve the projector model, so their points are
//! trusted. Projecting them through the projector model and comparing with
//! the projector coordinate each camera pixel actually observed gives one
//! correction vector per point.

mod grid;

pub use grid::{DirectionCoverage, DistortionGrid, Residual};

use std::sync::Arc;

use nalgebra::{Matrix2, Point2, Point3, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correspond::{intersect_projector_column, MeasurementVolume, SensorRig};
use crate::geometry::{epipolar_line, point_line_distance, GeometryError};
use crate::phase::{CoordinateMap, FringeConfig};
use crate::unwrap::reconstruct_graycode;

pub const DEFAULT_GRID_SPACING_PX: f64 = 32.0;
/// Nodes smaller than this are reported as "no correction needed".
pub const NEGLIGIBLE_CORRECTION_PX: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjcalError {
    #[error("plane capture failed: {0}")]
    SimulationFailed(String),
    #[error("calibration point lies behind the projector")]
    PointBehindProjector,
    #[error("no residual samples fall on the projector image")]
    EmptyResiduals,
    #[error("no correspondences to evaluate")]
    EmptyInput,
    #[error("point clouds differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlaneLabel {
    Near,
    Center,
    Far,
}

impl PlaneLabel {
    pub const ALL: [PlaneLabel; 3] = [PlaneLabel::Near, PlaneLabel::Center, PlaneLabel::Far];

    /// Plane depth along camera 1's axis: `d_min`, the middle, `d_min + mvd`.
    pub fn depth(self, mv: &MeasurementVolume) -> f64 {
        match self {
            PlaneLabel::Near => mv.d_min,
            PlaneLabel::Center => mv.d_min + 0.5 * mv.mvd,
            PlaneLabel::Far => mv.d_min + mv.mvd,
        }
    }
}

/// Absolute projector coordinates observed by both cameras for one scene.
#[derive(Debug, Clone)]
pub struct PlaneCapture {
    pub x1: CoordinateMap,
    pub x2: CoordinateMap,
    /// Present when a second, rotated fringe sequence was captured.
    pub y: Option<(CoordinateMap, CoordinateMap)>,
}

/// Anything that can image a flat plate normal to camera 1's axis.
pub trait PlaneSource {
    fn capture_plane(&self, depth: f64) -> Result<PlaneCapture, String>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneMeasurement {
    pub label: PlaneLabel,
    pub depth: f64,
    /// Camera-1 pixel of each point.
    pub pixels: Vec<[u32; 2]>,
    /// CC-mode points, mm.
    pub cc_points: Vec<Point3<f64>>,
    /// Projector x observed at each pixel.
    pub measured_x: Vec<f64>,
    /// Projector y observed at each pixel, when the rotated sequence exists.
    pub measured_y: Option<Vec<f64>>,
    /// Camera-2 correspondence from 2D phase matching, when available.
    pub c2_points: Option<Vec<Option<Point2<f64>>>>,
}

impl PlaneMeasurement {
    pub fn len(&self) -> usize {
        self.cc_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cc_points.is_empty()
    }

    pub fn coverage(&self) -> DirectionCoverage {
        if self.measured_y.is_some() {
            DirectionCoverage::Both
        } else {
            DirectionCoverage::XOnly
        }
    }
}

/// Reconstructs the three calibration planes and records, per point, the
/// projector coordinates camera 1 observed.
pub fn measure_planes(
    rig: &SensorRig,
    mv: &MeasurementVolume,
    cfg: &FringeConfig,
    source: &dyn PlaneSource,
) -> Result<Vec<PlaneMeasurement>, ProjcalError> {
    PlaneLabel::ALL
        .iter()
        .map(|&label| {
            let depth = label.depth(mv);
            let capture = source
                .capture_plane(depth)
                .map_err(ProjcalError::SimulationFailed)?;
            measure_capture(label, depth, &capture, rig, mv, cfg)
        })
        .collect()
}

/// Builds a [`PlaneMeasurement`] from one capture.
pub fn measure_capture(
    label: PlaneLabel,
    depth: f64,
    capture: &PlaneCapture,
    rig: &SensorRig,
    mv: &MeasurementVolume,
    cfg: &FringeConfig,
) -> Result<PlaneMeasurement, ProjcalError> {
    // The plates sit on the slab faces; a small margin keeps them inside.
    let search = mv.expanded(0.02 * mv.mvd.max(1.0));
    let recon = reconstruct_graycode(&capture.x1, &capture.x2, rig, &search, cfg)
        .map_err(|e| ProjcalError::Other(e.to_string()))?;
    let mut m = PlaneMeasurement {
        label,
        depth,
        pixels: Vec::new(),
        cc_points: Vec::new(),
        measured_x: Vec::new(),
        measured_y: capture.y.as_ref().map(|_| Vec::new()),
        c2_points: capture.y.as_ref().map(|_| Vec::new()),
    };
    for p in &recon.points {
        let (u, v) = (p.pixel[0] as usize, p.pixel[1] as usize);
        let Some(x) = capture.x1.get(u, v) else {
            continue;
        };
        let y = match &capture.y {
            Some((y1, y2)) => {
                let Some(y) = y1.get(u, v) else {
                    continue;
                };
                let c2 = match_2d(&capture.x2, y2, x, y, p.c2, cfg.period_px);
                m.c2_points.as_mut().expect("present with y").push(c2);
                Some(y)
            }
            None => None,
        };
        m.pixels.push(p.pixel);
        m.cc_points.push(p.point);
        m.measured_x.push(x);
        if let (Some(list), Some(y)) = (m.measured_y.as_mut(), y) {
            list.push(y);
        }
    }
    Ok(m)
}

/// Sub-pixel position in camera 2 where both coordinate maps reach `(x, y)`,
/// by Newton iteration on the bilinear interpolants.
fn match_2d(
    x2: &CoordinateMap,
    y2: &CoordinateMap,
    x: f64,
    y: f64,
    start: Point2<f64>,
    period: f64,
) -> Option<Point2<f64>> {
    let spread = 0.5 * period;
    let eval = |p: Point2<f64>| -> Option<Vector2<f64>> {
        Some(Vector2::new(
            x2.sample_difference(p.x, p.y, x, spread)?,
            y2.sample_difference(p.x, p.y, y, spread)?,
        ))
    };
    let mut p = start;
    const H: f64 = 0.25;
    for _ in 0..30 {
        let f = eval(p)?;
        let fx1 = eval(p + Vector2::new(H, 0.0))?;
        let fx0 = eval(p - Vector2::new(H, 0.0))?;
        let fy1 = eval(p + Vector2::new(0.0, H))?;
        let fy0 = eval(p - Vector2::new(0.0, H))?;
        let jac = Matrix2::from_columns(&[(fx1 - fx0) / (2.0 * H), (fy1 - fy0) / (2.0 * H)]);
        let step = jac.try_inverse()? * f;
        p -= step;
        if step.norm() < 1e-9 {
            return eval(p).map(|_| p);
        }
    }
    eval(p).filter(|f| f.norm() < 1e-6).map(|_| p)
}

/// Correction samples relative to the projector model currently in `rig`.
///
/// `ideal` is the lens-only projection of each trusted point. The model
/// prediction is `ideal - g(ideal)` for an installed grid `g` (zero without
/// one), and the sample is `d = prediction - measured`, so that adding `d`
/// to the installed grid reproduces the measurement.
pub fn compute_residuals(
    meas: &PlaneMeasurement,
    rig: &SensorRig,
) -> Result<Vec<Residual>, ProjcalError> {
    let proj = &rig.projector;
    let grid = proj.grid();
    meas.cc_points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let ideal = proj
                .project_lens_only(p)
                .map_err(|_| ProjcalError::PointBehindProjector)?;
            let predicted = match grid {
                Some(g) => ideal - g.sample(&ideal),
                None => ideal,
            };
            let dx = predicted.x - meas.measured_x[i];
            let dy = match &meas.measured_y {
                Some(ys) => predicted.y - ys[i],
                None => 0.0,
            };
            Ok(Residual {
                ideal,
                d: Vector2::new(dx, dy),
            })
        })
        .collect()
}

pub fn build_grid(
    residuals: &[Residual],
    spacing: f64,
    projector_width: usize,
    projector_height: usize,
    coverage: DirectionCoverage,
) -> Result<DistortionGrid, ProjcalError> {
    if residuals.is_empty() {
        return Err(ProjcalError::EmptyResiduals);
    }
    DistortionGrid::from_residuals(residuals, spacing, projector_width, projector_height, coverage)
        .ok_or(ProjcalError::EmptyResiduals)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpipolarError {
    pub mean: f64,
    pub max: f64,
    pub count: usize,
}

/// Perpendicular distance of each camera-2 point to the epipolar line of
/// its camera-1 partner, both given as measured pixels.
pub fn epipolar_line_error(
    rig: &SensorRig,
    correspondences: &[(Point2<f64>, Point2<f64>)],
) -> Result<EpipolarError, ProjcalError> {
    if correspondences.is_empty() {
        return Err(ProjcalError::EmptyInput);
    }
    let mut sum = 0.0;
    let mut max = 0.0f64;
    for (p1, p2) in correspondences {
        let line = epipolar_line(&rig.cam1, &rig.cam2, p1)?;
        let d = point_line_distance(&line, &rig.cam2.undistort_pixel(p2)?);
        sum += d;
        max = max.max(d);
    }
    Ok(EpipolarError {
        mean: sum / correspondences.len() as f64,
        max,
        count: correspondences.len(),
    })
}

/// Mean distance between index-aligned CC and CP points.
pub fn cpd_mean(cc: &[Point3<f64>], cp: &[Point3<f64>]) -> Result<f64, ProjcalError> {
    if cc.len() != cp.len() {
        return Err(ProjcalError::LengthMismatch(cc.len(), cp.len()));
    }
    if cc.is_empty() {
        return Err(ProjcalError::EmptyInput);
    }
    Ok(cc.iter().zip(cp).map(|(a, b)| (a - b).norm()).sum::<f64>() / cc.len() as f64)
}

/// CC/CP point pairs for a measurement under the rig's current projector
/// model. Points whose column misses the volume are skipped.
pub fn cc_cp_pairs(
    meas: &PlaneMeasurement,
    rig: &SensorRig,
    mv: &MeasurementVolume,
) -> (Vec<Point3<f64>>, Vec<Point3<f64>>) {
    let search = mv.expanded(0.1 * mv.mvd.max(1.0));
    let mut cc = Vec::new();
    let mut cp = Vec::new();
    for (i, p) in meas.cc_points.iter().enumerate() {
        let px = Point2::new(meas.pixels[i][0] as f64, meas.pixels[i][1] as f64);
        let Ok(ray) = rig.cam1.back_project(&px) else {
            continue;
        };
        if let Some(q) = intersect_projector_column(&ray, meas.measured_x[i], rig, &search) {
            cc.push(*p);
            cp.push(q);
        }
    }
    (cc, cp)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub mean: f64,
    pub max: f64,
    pub count: usize,
}

impl ResidualStats {
    pub fn of(residuals: &[Residual]) -> Self {
        let n = residuals.len();
        let (sum, max) = residuals
            .iter()
            .map(|r| r.d.norm())
            .fold((0.0, 0.0f64), |(s, m), v| (s + v, m.max(v)));
        Self {
            mean: if n > 0 { sum / n as f64 } else { 0.0 },
            max,
            count: n,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CalibrationReport {
    pub grid: DistortionGrid,
    /// Rig with the grid installed on the projector.
    pub rig: SensorRig,
    pub cpd_before: f64,
    pub cpd_after: f64,
    /// Residuals against the initial model.
    pub residuals_before: ResidualStats,
    /// Residuals of the same measurements against the corrected model.
    pub residuals_after: ResidualStats,
    pub per_plane: Vec<(PlaneLabel, ResidualStats)>,
    /// Present when the rotated fringe sequence was captured.
    pub delta_e: Option<EpipolarError>,
    pub max_node: f64,
}

impl CalibrationReport {
    pub fn correction_needed(&self) -> bool {
        self.max_node >= NEGLIGIBLE_CORRECTION_PX
    }
}

/// Measures the three planes, builds the grid and reports cpd_mn and
/// residuals before and after installing it.
pub fn calibrate_projector(
    rig: &SensorRig,
    mv: &MeasurementVolume,
    cfg: &FringeConfig,
    source: &dyn PlaneSource,
    spacing: f64,
) -> Result<CalibrationReport, ProjcalError> {
    let planes = measure_planes(rig, mv, cfg, source)?;
    calibrate_from_measurements(rig, mv, &planes, spacing)
}

/// The part of [`calibrate_projector`] after the planes are measured.
pub fn calibrate_from_measurements(
    rig: &SensorRig,
    mv: &MeasurementVolume,
    planes: &[PlaneMeasurement],
    spacing: f64,
) -> Result<CalibrationReport, ProjcalError> {
    let coverage = if planes.iter().all(|p| p.coverage() == DirectionCoverage::Both) {
        DirectionCoverage::Both
    } else {
        DirectionCoverage::XOnly
    };
    let mut all = Vec::new();
    let mut per_plane = Vec::new();
    for plane in planes {
        let r = compute_residuals(plane, rig)?;
        per_plane.push((plane.label, ResidualStats::of(&r)));
        all.extend(r);
    }
    let (w, h) = (rig.projector.width(), rig.projector.height());
    let increment = build_grid(&all, spacing, w, h, coverage)?;
    let grid = match rig.projector.grid() {
        Some(g) => g.accumulate(&increment),
        None => increment,
    };
    let corrected = rig.with_projector(
        rig.projector
            .clone()
            .with_grid(Some(Arc::new(grid.clone())))?,
    )
    .map_err(|e| ProjcalError::Other(e.to_string()))?;

    let mut after = Vec::new();
    for plane in planes {
        after.extend(compute_residuals(plane, &corrected)?);
    }

    let cpd = |r: &SensorRig| -> Result<f64, ProjcalError> {
        let mut cc = Vec::new();
        let mut cp = Vec::new();
        for plane in planes {
            let (a, b) = cc_cp_pairs(plane, r, mv);
            cc.extend(a);
            cp.extend(b);
        }
        cpd_mean(&cc, &cp)
    };

    let mut pairs = Vec::new();
    for plane in planes {
        if let Some(c2) = &plane.c2_points {
            for (px, q) in plane.pixels.iter().zip(c2) {
                if let Some(q) = q {
                    pairs.push((Point2::new(px[0] as f64, px[1] as f64), *q));
                }
            }
        }
    }
    let delta_e = if pairs.is_empty() {
        None
    } else {
        Some(epipolar_line_error(rig, &pairs)?)
    };

    let max_node = grid.max_supported_magnitude();
    Ok(CalibrationReport {
        cpd_before: cpd(rig)?,
        cpd_after: cpd(&corrected)?,
        residuals_before: ResidualStats::of(&all),
        residuals_after: ResidualStats::of(&after),
        per_plane,
        delta_e,
        max_node,
        grid,
        rig: corrected,
    })
}
