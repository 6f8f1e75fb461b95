//! Double triangulation: CC candidates are paired with CP candidates, pairs
//! whose projector phases disagree by more than `thr` are rejected, and the
//! survivors are selected per mode.
//!
//! Also hosts the Gray-code reference reconstruction and a neighborhood
//! outlier filter.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use nalgebra::{Point2, Point3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correspond::{
    enumerate_candidates, triangulate_cc, walk_zero_crossings, CandidateSet, MeasurementVolume,
    SensorRig,
};
use crate::geometry::epipolar_segment_for_ray;
use crate::phase::{CoordinateMap, FringeConfig, PhaseMap};

pub const DEFAULT_OUTLIER_RADIUS_MM: f64 = 2.0;
pub const DEFAULT_OUTLIER_MIN_NEIGHBORS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UnwrapError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("threshold must be positive and finite, got {0}")]
    InvalidThreshold(f64),
    #[error("cannot parse threshold {0:?}; expected a number or a multiple of pi such as \"0.04pi\"")]
    ThresholdSyntax(String),
    #[error("unknown match mode {0:?}; expected m1 or m2")]
    UnknownMode(String),
    #[error("outlier radius must be positive, got {0}")]
    InvalidRadius(f64),
}

/// Candidate selection after thresholding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    /// At most one point per pixel: the pair with the smallest phase residual.
    M1,
    /// Every CC candidate with a surviving partner.
    M2,
}

impl fmt::Display for MatchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchMode::M1 => "m1",
            MatchMode::M2 => "m2",
        })
    }
}

impl FromStr for MatchMode {
    type Err = UnwrapError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "m1" => Ok(MatchMode::M1),
            "m2" => Ok(MatchMode::M2),
            _ => Err(UnwrapError::UnknownMode(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchParams {
    /// Maximal projector-phase disagreement, radians.
    pub thr: f64,
    pub mode: MatchMode,
}

impl MatchParams {
    pub fn new(thr: f64, mode: MatchMode) -> Result<Self, UnwrapError> {
        if !(thr > 0.0 && thr.is_finite()) {
            return Err(UnwrapError::InvalidThreshold(thr));
        }
        Ok(Self { thr, mode })
    }
}

/// Parses a threshold in radians: `"0.04pi"`, `"0.04π"`, `"pi"` or a plain number.
pub fn parse_thr(text: &str) -> Result<f64, UnwrapError> {
    let t = text.trim().to_ascii_lowercase();
    let syntax = || UnwrapError::ThresholdSyntax(text.to_string());
    let value = if let Some(head) = t.strip_suffix("pi").or_else(|| t.strip_suffix('π')) {
        let head = head.trim().trim_end_matches('*').trim();
        let factor = if head.is_empty() {
            1.0
        } else {
            head.parse::<f64>().map_err(|_| syntax())?
        };
        factor * PI
    } else {
        t.parse::<f64>().map_err(|_| syntax())?
    };
    if !(value > 0.0 && value.is_finite()) {
        return Err(UnwrapError::InvalidThreshold(value));
    }
    Ok(value)
}

/// Comma-separated list of thresholds, see [`parse_thr`].
pub fn parse_thr_list(text: &str) -> Result<Vec<f64>, UnwrapError> {
    let list: Vec<f64> = text
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(parse_thr)
        .collect::<Result<_, _>>()?;
    if list.is_empty() {
        return Err(UnwrapError::ThresholdSyntax(text.to_string()));
    }
    Ok(list)
}

/// Formats a threshold as a multiple of pi, e.g. `0.04pi`.
pub fn format_thr(thr: f64) -> String {
    let f = thr / PI;
    let rounded = (f * 1e6).round() / 1e6;
    format!("{rounded}pi")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPoint {
    /// The CC-mode point, mm.
    pub point: Point3<f64>,
    /// Distance between the paired CC and CP points, mm.
    pub dst: f64,
    /// Projector-phase disagreement of the pair, radians.
    pub phase_residual: f64,
    pub pixel: [u32; 2],
    /// Sub-pixel camera-2 correspondence.
    pub c2: Point2<f64>,
    /// Fringe period index of the CP partner.
    pub m: u32,
}

/// Pairs every CC candidate with every CP candidate and selects per mode.
///
/// The phase residual is the absolute difference of the two projector
/// coordinates expressed in radians of fringe phase, `2 pi |dx| / period`.
/// It is not wrapped: a pair one period apart is a different fringe.
pub fn match_candidates(
    cands: &CandidateSet,
    cfg: &FringeConfig,
    p: &MatchParams,
) -> Vec<MatchedPoint> {
    // Best partner per CC candidate, ordered by (residual, dst, m).
    let mut best: Vec<(usize, MatchedPoint)> = Vec::new();
    for (i, cc) in cands.cc.iter().enumerate() {
        let Some(xc) = cc.projector_x else {
            continue;
        };
        let mut choice: Option<MatchedPoint> = None;
        for cp in &cands.cp {
            let residual = TAU * (xc - cp.projector_x).abs() / cfg.period_px;
            if !(residual <= p.thr) {
                continue;
            }
            let candidate = MatchedPoint {
                point: cc.point,
                dst: (cc.point - cp.point).norm(),
                phase_residual: residual,
                pixel: cands.pixel,
                c2: cc.c2,
                m: cp.m,
            };
            if choice.as_ref().is_none_or(|c| better(&candidate, c)) {
                choice = Some(candidate);
            }
        }
        if let Some(c) = choice {
            best.push((i, c));
        }
    }
    match p.mode {
        MatchMode::M2 => best.into_iter().map(|(_, m)| m).collect(),
        MatchMode::M1 => best
            .into_iter()
            .map(|(_, m)| m)
            .reduce(|a, b| if better(&b, &a) { b } else { a })
            .into_iter()
            .collect(),
    }
}

fn better(a: &MatchedPoint, b: &MatchedPoint) -> bool {
    (a.phase_residual, a.dst, a.m) < (b.phase_residual, b.dst, b.m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PixelStatus {
    Matched,
    NoCandidates,
    AllRejected,
    InvalidPhase,
    /// Matched, but every point was removed by the outlier filter.
    Filtered,
}

impl PixelStatus {
    pub fn code(self) -> u8 {
        match self {
            PixelStatus::Matched => 0,
            PixelStatus::NoCandidates => 1,
            PixelStatus::AllRejected => 2,
            PixelStatus::InvalidPhase => 3,
            PixelStatus::Filtered => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => PixelStatus::Matched,
            1 => PixelStatus::NoCandidates,
            2 => PixelStatus::AllRejected,
            3 => PixelStatus::InvalidPhase,
            4 => PixelStatus::Filtered,
            _ => return None,
        })
    }
}

/// Point cloud plus one status per camera-1 pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    width: usize,
    height: usize,
    pub points: Vec<MatchedPoint>,
    pub status: Vec<PixelStatus>,
}

impl Reconstruction {
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn status_at(&self, x: usize, y: usize) -> PixelStatus {
        self.status[y * self.width + x]
    }

    pub fn count(&self, s: PixelStatus) -> usize {
        self.status.iter().filter(|&&t| t == s).count()
    }

    pub fn positions(&self) -> Vec<Point3<f64>> {
        self.points.iter().map(|p| p.point).collect()
    }

    /// Drops points whose `keep` flag is false. Pixels left without points
    /// are marked [`PixelStatus::Filtered`].
    pub fn retain(&mut self, keep: &[bool]) {
        assert_eq!(keep.len(), self.points.len(), "mask length");
        let mut remaining = vec![0u32; self.width * self.height];
        let mut kept = Vec::with_capacity(self.points.len());
        for (p, &k) in self.points.iter().zip(keep) {
            if k {
                remaining[p.pixel[1] as usize * self.width + p.pixel[0] as usize] += 1;
                kept.push(*p);
            }
        }
        for (s, &n) in self.status.iter_mut().zip(&remaining) {
            if *s == PixelStatus::Matched && n == 0 {
                *s = PixelStatus::Filtered;
            }
        }
        self.points = kept;
    }

    /// Applies [`filter_outliers`] in place.
    pub fn filter_outliers(&mut self, radius: f64, min_neighbors: usize) -> Result<(), UnwrapError> {
        let keep = filter_outliers(&self.positions(), radius, min_neighbors)?;
        self.retain(&keep);
        Ok(())
    }
}

fn check_maps(map1: &PhaseMap, map2: &PhaseMap, rig: &SensorRig) -> Result<(), UnwrapError> {
    let want1 = (rig.cam1.width(), rig.cam1.height());
    let want2 = (rig.cam2.width(), rig.cam2.height());
    if map1.dims() != want1 {
        return Err(UnwrapError::DimensionMismatch(format!(
            "camera 1 is {want1:?} but its phase map is {:?}",
            map1.dims()
        )));
    }
    if map2.dims() != want2 {
        return Err(UnwrapError::DimensionMismatch(format!(
            "camera 2 is {want2:?} but its phase map is {:?}",
            map2.dims()
        )));
    }
    Ok(())
}

/// Candidate sets for every valid camera-1 pixel, row-major; `None` marks
/// an invalid phase.
pub fn enumerate_all(
    map1: &PhaseMap,
    map2: &PhaseMap,
    rig: &SensorRig,
    mv: &MeasurementVolume,
    cfg: &FringeConfig,
) -> Result<Vec<Option<CandidateSet>>, UnwrapError> {
    check_maps(map1, map2, rig)?;
    let (w, h) = map1.dims();
    Ok((0..w * h)
        .into_par_iter()
        .map(|k| {
            let (x, y) = (k % w, k / w);
            map1.is_valid(x, y).then(|| {
                enumerate_candidates([x as u32, y as u32], map1.phase(x, y), map2, rig, mv, cfg)
            })
        })
        .collect())
}

/// Matches precomputed candidate sets; see [`enumerate_all`].
pub fn match_field(
    cands: &[Option<CandidateSet>],
    width: usize,
    height: usize,
    cfg: &FringeConfig,
    p: &MatchParams,
) -> Result<Reconstruction, UnwrapError> {
    if cands.len() != width * height {
        return Err(UnwrapError::DimensionMismatch(format!(
            "{} candidate sets for a {width}x{height} image",
            cands.len()
        )));
    }
    let per_pixel: Vec<(PixelStatus, Vec<MatchedPoint>)> = cands
        .par_iter()
        .map(|c| match c {
            None => (PixelStatus::InvalidPhase, Vec::new()),
            Some(set) if set.cc.is_empty() || set.cp.is_empty() => {
                (PixelStatus::NoCandidates, Vec::new())
            }
            Some(set) => {
                let m = match_candidates(set, cfg, p);
                if m.is_empty() {
                    (PixelStatus::AllRejected, m)
                } else {
                    (PixelStatus::Matched, m)
                }
            }
        })
        .collect();
    let mut status = Vec::with_capacity(per_pixel.len());
    let mut points = Vec::new();
    for (s, pts) in per_pixel {
        status.push(s);
        points.extend(pts);
    }
    Ok(Reconstruction {
        width,
        height,
        points,
        status,
    })
}

/// Full codeless reconstruction for one threshold and mode.
pub fn reconstruct(
    map1: &PhaseMap,
    map2: &PhaseMap,
    rig: &SensorRig,
    mv: &MeasurementVolume,
    cfg: &FringeConfig,
    p: &MatchParams,
) -> Result<Reconstruction, UnwrapError> {
    let cands = enumerate_all(map1, map2, rig, mv, cfg)?;
    let (w, h) = map1.dims();
    match_field(&cands, w, h, cfg, p)
}

/// Reference reconstruction from absolute projector coordinates (phase plus
/// Gray code). The correspondence is the nearest position on the epipolar
/// segment where camera 2 sees the same absolute coordinate.
pub fn reconstruct_graycode(
    coord1: &CoordinateMap,
    coord2: &CoordinateMap,
    rig: &SensorRig,
    mv: &MeasurementVolume,
    cfg: &FringeConfig,
) -> Result<Reconstruction, UnwrapError> {
    let want1 = (rig.cam1.width(), rig.cam1.height());
    let want2 = (rig.cam2.width(), rig.cam2.height());
    if coord1.dims() != want1 || coord2.dims() != want2 {
        return Err(UnwrapError::DimensionMismatch(format!(
            "coordinate maps {:?}/{:?} vs cameras {want1:?}/{want2:?}",
            coord1.dims(),
            coord2.dims()
        )));
    }
    let (w, h) = want1;
    let max_jump = 0.5 * cfg.period_px;
    let per_pixel: Vec<(PixelStatus, Option<MatchedPoint>)> = (0..w * h)
        .into_par_iter()
        .map(|k| {
            let (x, y) = (k % w, k / w);
            let Some(x1) = coord1.get(x, y) else {
                return (PixelStatus::InvalidPhase, None);
            };
            let px = Point2::new(x as f64, y as f64);
            let found = rig.cam1.back_project(&px).ok().and_then(|ray| {
                let seg = epipolar_segment_for_ray(&rig.cam1, &rig.cam2, &ray, mv).ok()?;
                let first = walk_zero_crossings(&seg, &rig.cam2, max_jump, |u, v| {
                    coord2.sample_difference(u, v, x1, max_jump)
                })
                .into_iter()
                .next()?;
                let cc = triangulate_cc(&ray, &first, rig)?;
                Some(MatchedPoint {
                    point: cc.point,
                    dst: 0.0,
                    phase_residual: 0.0,
                    pixel: [x as u32, y as u32],
                    c2: cc.c2,
                    m: (x1 / cfg.period_px).floor().max(0.0) as u32,
                })
            });
            match found {
                Some(p) => (PixelStatus::Matched, Some(p)),
                None => (PixelStatus::NoCandidates, None),
            }
        })
        .collect();
    let mut status = Vec::with_capacity(per_pixel.len());
    let mut points = Vec::new();
    for (s, p) in per_pixel {
        status.push(s);
        points.extend(p);
    }
    Ok(Reconstruction {
        width: w,
        height: h,
        points,
        status,
    })
}

/// Keep-mask marking points with at least `min_neighbors` other points
/// within `radius`.
pub fn filter_outliers(
    points: &[Point3<f64>],
    radius: f64,
    min_neighbors: usize,
) -> Result<Vec<bool>, UnwrapError> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(UnwrapError::InvalidRadius(radius));
    }
    if min_neighbors == 0 {
        return Ok(vec![true; points.len()]);
    }
    let cell_of = |p: &Point3<f64>| {
        [
            (p.x / radius).floor() as i64,
            (p.y / radius).floor() as i64,
            (p.z / radius).floor() as i64,
        ]
    };
    let mut cells: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        cells.entry(cell_of(p)).or_default().push(i);
    }
    let r2 = radius * radius;
    Ok(points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let c = cell_of(p);
            let mut n = 0usize;
            for dz in -1..=1 {
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let Some(list) = cells.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) else {
                            continue;
                        };
                        for &j in list {
                            if j != i && (points[j] - p).norm_squared() <= r2 {
                                n += 1;
                                if n >= min_neighbors {
                                    return true;
                                }
                            }
                        }
                    }
                }
            }
            false
        })
        .collect())
}
