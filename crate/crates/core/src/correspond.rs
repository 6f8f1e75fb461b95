//! Candidate enumeration for one camera-1 pixel.
//!
//! Camera-camera (CC) candidates are the sub-pixel positions on the
//! epipolar segment in camera 2 whose wrapped phase equals the pixel's
//! phase. Camera-projector (CP) candidates are the intersections of the
//! pixel's viewing ray with every projector column carrying that phase.

use std::f64::consts::{PI, TAU};

use nalgebra::{Point2, Point3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    epipolar_segment_for_ray, ray_depth_interval, triangulate, DeviceKind, EpipolarSegment,
    GeometryError, PinholeDevice, Ray,
};
use crate::phase::{FringeConfig, PhaseMap};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorrespondError {
    #[error("measurement volume must have positive width, height and minimal distance (mvw={mvw}, mvh={mvh}, d_min={d_min}) and mvd >= 0 (mvd={mvd})")]
    NonPositiveVolume {
        mvw: f64,
        mvh: f64,
        mvd: f64,
        d_min: f64,
    },
    #[error("rig needs two cameras and a projector: {0}")]
    InvalidRig(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Depth slab `[d_min, d_min + mvd]` along camera 1's axis, bounded
/// laterally by an `mvw x mvh` box centered on that axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementVolume {
    pub mvw: f64,
    pub mvh: f64,
    pub mvd: f64,
    pub d_min: f64,
}

impl MeasurementVolume {
    pub fn new(mvw: f64, mvh: f64, mvd: f64, d_min: f64) -> Result<Self, CorrespondError> {
        let mv = Self {
            mvw,
            mvh,
            mvd,
            d_min,
        };
        mv.validate()?;
        Ok(mv)
    }

    pub fn validate(&self) -> Result<(), CorrespondError> {
        let ok = self.mvw > 0.0
            && self.mvh > 0.0
            && self.d_min > 0.0
            && self.mvd >= 0.0
            && [self.mvw, self.mvh, self.mvd, self.d_min]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(CorrespondError::NonPositiveVolume {
                mvw: self.mvw,
                mvh: self.mvh,
                mvd: self.mvd,
                d_min: self.d_min,
            })
        }
    }

    pub fn d_max(&self) -> f64 {
        self.d_min + self.mvd
    }

    pub fn contains_depth(&self, depth: f64) -> bool {
        depth >= self.d_min && depth <= self.d_max()
    }

    /// Same box with the depth slab grown by `margin` mm on both sides.
    pub fn expanded(&self, margin: f64) -> Self {
        Self {
            mvd: self.mvd + 2.0 * margin,
            d_min: (self.d_min - margin).max(1e-6),
            ..*self
        }
    }
}

/// Two calibrated cameras and a projector.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorRig {
    pub cam1: PinholeDevice,
    pub cam2: PinholeDevice,
    pub projector: PinholeDevice,
    baseline_cc: f64,
    baseline_cp: f64,
}

impl SensorRig {
    pub fn new(
        cam1: PinholeDevice,
        cam2: PinholeDevice,
        projector: PinholeDevice,
    ) -> Result<Self, CorrespondError> {
        if cam1.kind() != DeviceKind::Camera || cam2.kind() != DeviceKind::Camera {
            return Err(CorrespondError::InvalidRig("cam1 and cam2 must be cameras".into()));
        }
        if projector.kind() != DeviceKind::Projector {
            return Err(CorrespondError::InvalidRig("third device must be a projector".into()));
        }
        let baseline_cc = (cam1.center() - cam2.center()).norm();
        let baseline_cp = (cam1.center() - projector.center()).norm();
        if baseline_cc < 1e-9 || baseline_cp < 1e-9 {
            return Err(CorrespondError::Geometry(GeometryError::CoincidentCenters));
        }
        Ok(Self {
            cam1,
            cam2,
            projector,
            baseline_cc,
            baseline_cp,
        })
    }

    /// `|O1 O2|`, mm.
    pub fn baseline_cc(&self) -> f64 {
        self.baseline_cc
    }

    /// Distance between camera 1 and the projector, mm.
    pub fn baseline_cp(&self) -> f64 {
        self.baseline_cp
    }

    /// Angle at `target` between the lines to camera 1 and camera 2, degrees.
    pub fn tau_cc(&self, target: &Point3<f64>) -> f64 {
        angle_at(target, &self.cam1.center(), &self.cam2.center())
    }

    /// Angle at `target` between the lines to camera 1 and the projector, degrees.
    pub fn tau_cp(&self, target: &Point3<f64>) -> f64 {
        angle_at(target, &self.cam1.center(), &self.projector.center())
    }

    /// Copy of the rig with a different projector model.
    pub fn with_projector(&self, projector: PinholeDevice) -> Result<Self, CorrespondError> {
        Self::new(self.cam1.clone(), self.cam2.clone(), projector)
    }
}

fn angle_at(target: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    (a - target).angle(&(b - target)).to_degrees()
}

/// Upper estimate of the number of candidates along an epipolar segment:
/// `ceil(mvd (N b - mvw) / (mvw d_min))`, clamped at zero.
pub fn predict_candidate_count(
    mv: &MeasurementVolume,
    fringe_count: usize,
    baseline: f64,
) -> Result<u32, CorrespondError> {
    if !(mv.mvw > 0.0 && mv.d_min > 0.0 && mv.mvd >= 0.0) {
        return Err(CorrespondError::NonPositiveVolume {
            mvw: mv.mvw,
            mvh: mv.mvh,
            mvd: mv.mvd,
            d_min: mv.d_min,
        });
    }
    let n = mv.mvd * (fringe_count as f64 * baseline - mv.mvw) / (mv.mvw * mv.d_min);
    if !(n > 0.0) {
        return Ok(0);
    }
    // Guard integer results against round-off just above them.
    Ok((n - 1e-9).ceil().max(0.0) as u32)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcCandidate {
    /// Sub-pixel position in camera 2.
    pub c2: Point2<f64>,
    pub point: Point3<f64>,
    /// Triangulation gap, mm.
    pub gap: f64,
    /// Depth along camera 1's axis, mm.
    pub depth: f64,
    /// Projector x-coordinate of `point` under the rig's projector model.
    pub projector_x: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpCandidate {
    /// Fringe period index.
    pub m: u32,
    pub projector_x: f64,
    pub point: Point3<f64>,
    pub depth: f64,
}

impl CpCandidate {
    /// CP candidates come from a ray/column intersection and have no gap.
    pub const GAP: f64 = 0.0;
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    /// Camera-1 pixel (integer center).
    pub pixel: [u32; 2],
    pub cc: Vec<CcCandidate>,
    pub cp: Vec<CpCandidate>,
}

/// A zero crossing found on an epipolar walk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Crossing {
    pub depth: f64,
    pub pixel: Point2<f64>,
}

/// Walks the segment in at most one-pixel steps and returns every sign
/// change of `f` whose bracketing values sum to less than `max_jump` in
/// magnitude, refined by regula falsi on the sampled function.
pub(crate) fn walk_zero_crossings(
    seg: &EpipolarSegment,
    d2: &PinholeDevice,
    max_jump: f64,
    f: impl Fn(f64, f64) -> Option<f64>,
) -> Vec<Crossing> {
    let mut out = Vec::new();
    if seg.far_depth <= seg.near_depth {
        return out;
    }
    let inv_near = 1.0 / seg.near_depth;
    let inv_far = 1.0 / seg.far_depth;
    let pixel_at = |q: f64| -> Option<Point2<f64>> {
        let depth = 1.0 / q;
        d2.project(&seg.point_at_depth(depth)).ok()
    };
    let eval = |q: f64| -> Option<(Point2<f64>, f64)> {
        let px = pixel_at(q)?;
        Some((px, f(px.x, px.y)?))
    };

    let mut steps = (seg.length().ceil() as usize).max(1);
    let samples: Vec<Option<(Point2<f64>, f64)>>;
    let mut qs: Vec<f64>;
    loop {
        qs = (0..=steps)
            .map(|i| inv_near + (inv_far - inv_near) * i as f64 / steps as f64)
            .collect();
        let pixels: Vec<Option<Point2<f64>>> = qs.iter().map(|&q| pixel_at(q)).collect();
        let max_step = pixels
            .windows(2)
            .filter_map(|w| Some((w[1]? - w[0]?).norm()))
            .fold(0.0, f64::max);
        if max_step <= 1.0 + 1e-9 || steps > 1 << 16 {
            samples = pixels
                .into_iter()
                .map(|p| p.and_then(|p| Some((p, f(p.x, p.y)?))))
                .collect();
            break;
        }
        steps = (steps as f64 * max_step * 1.05).ceil() as usize;
    }

    for i in 0..steps {
        let (Some((_, fa)), Some((_, fb))) = (samples[i], samples[i + 1]) else {
            continue;
        };
        if (fa >= 0.0) == (fb >= 0.0) || fa.abs() + fb.abs() >= max_jump {
            continue;
        }
        let (q, px) = refine_root(qs[i], fa, qs[i + 1], fb, &eval);
        out.push(Crossing {
            depth: 1.0 / q,
            pixel: px,
        });
    }
    out
}

/// Illinois regula falsi inside a sign-changing bracket.
fn refine_root(
    mut qa: f64,
    mut fa: f64,
    mut qb: f64,
    mut fb: f64,
    eval: &impl Fn(f64) -> Option<(Point2<f64>, f64)>,
) -> (f64, Point2<f64>) {
    let mut best_q = qa - fa * (qb - qa) / (fb - fa);
    let mut side = 0i8;
    for _ in 0..60 {
        let q = qa - fa * (qb - qa) / (fb - fa);
        let Some((_, fq)) = eval(q) else {
            break;
        };
        best_q = q;
        if fq == 0.0 || (qb - qa).abs() < 1e-18 {
            break;
        }
        if (fq >= 0.0) == (fa >= 0.0) {
            qa = q;
            fa = fq;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            qb = q;
            fb = fq;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
        if fq.abs() < 1e-14 {
            break;
        }
    }
    let px = eval(best_q)
        .map(|(p, _)| p)
        .unwrap_or_else(|| Point2::new(f64::NAN, f64::NAN));
    (best_q, px)
}

/// Sub-pixel camera-2 positions whose wrapped phase equals `phi1`,
/// triangulated against the camera-1 ray of `pixel`.
pub fn find_cc_candidates(
    pixel: &Point2<f64>,
    phi1: f64,
    map2: &PhaseMap,
    rig: &SensorRig,
    mv: &MeasurementVolume,
) -> Vec<CcCandidate> {
    let Ok(ray) = rig.cam1.back_project(pixel) else {
        return Vec::new();
    };
    cc_candidates_for_ray(&ray, phi1, map2, rig, mv)
}

pub(crate) fn cc_candidates_for_ray(
    ray: &Ray,
    phi1: f64,
    map2: &PhaseMap,
    rig: &SensorRig,
    mv: &MeasurementVolume,
) -> Vec<CcCandidate> {
    let Ok(seg) = epipolar_segment_for_ray(&rig.cam1, &rig.cam2, ray, mv) else {
        return Vec::new();
    };
    walk_zero_crossings(&seg, &rig.cam2, PI, |u, v| {
        map2.sample_wrapped_difference(u, v, phi1)
    })
    .into_iter()
    .filter_map(|c| triangulate_cc(ray, &c, rig))
    .collect()
}

pub(crate) fn triangulate_cc(ray: &Ray, c: &Crossing, rig: &SensorRig) -> Option<CcCandidate> {
    if !c.pixel.x.is_finite() {
        return None;
    }
    let ray2 = rig.cam2.back_project(&c.pixel).ok()?;
    let tri = triangulate(ray, &ray2).ok()?;
    Some(CcCandidate {
        c2: c.pixel,
        point: tri.point,
        gap: tri.gap,
        depth: rig.cam1.depth_of(&tri.point),
        projector_x: rig.projector.project(&tri.point).ok().map(|p| p.x),
    })
}

/// Intersections of the camera-1 ray of `pixel` with every projector column
/// `x_p = (m + phi / 2 pi) * period` inside the depth slab.
///
/// Each column is the surface of points the projector maps to that x
/// coordinate; for a distortion-free projector it is a plane through the
/// projector center. The intersection is found by root finding along the ray.
pub fn find_cp_candidates(
    pixel: &Point2<f64>,
    phi1: f64,
    rig: &SensorRig,
    mv: &MeasurementVolume,
    cfg: &FringeConfig,
) -> Vec<CpCandidate> {
    let Ok(ray) = rig.cam1.back_project(pixel) else {
        return Vec::new();
    };
    cp_candidates_for_ray(&ray, phi1, rig, mv, cfg)
}

pub(crate) fn cp_candidates_for_ray(
    ray: &Ray,
    phi1: f64,
    rig: &SensorRig,
    mv: &MeasurementVolume,
    cfg: &FringeConfig,
) -> Vec<CpCandidate> {
    let mut out = Vec::new();
    let Some(search) = ColumnSearch::new(ray, rig, mv) else {
        return out;
    };
    let (x_lo, x_hi) = search.x_range();
    let offset = phi1 / TAU;
    let width = rig.projector.width() as f64;
    let m_lo = ((x_lo / cfg.period_px - offset).ceil()).max(0.0);
    let m_hi = ((x_hi / cfg.period_px - offset).floor()).min(cfg.fringe_count as f64 - 1.0);
    if !(m_lo <= m_hi) {
        return out;
    }
    for m in (m_lo as u32)..=(m_hi as u32) {
        let target = (m as f64 + offset) * cfg.period_px;
        if !(0.0..width).contains(&target) {
            continue;
        }
        if let Some((point, depth)) = search.solve(target) {
            out.push(CpCandidate {
                m,
                projector_x: target,
                point,
                depth,
            });
        }
    }
    out
}

/// Intersection of a camera-1 ray with the projector column `x_p`, limited
/// to the measurement volume.
pub fn intersect_projector_column(
    ray: &Ray,
    projector_x: f64,
    rig: &SensorRig,
    mv: &MeasurementVolume,
) -> Option<Point3<f64>> {
    ColumnSearch::new(ray, rig, mv)?.solve(projector_x).map(|(p, _)| p)
}

/// The part of a camera-1 ray inside the volume and in front of the
/// projector, parameterized by inverse camera-1 depth.
struct ColumnSearch<'a> {
    ray: &'a Ray,
    projector: &'a PinholeDevice,
    depth_per_unit: f64,
    q_near: f64,
    q_far: f64,
    x_near: f64,
    x_far: f64,
}

impl<'a> ColumnSearch<'a> {
    fn new(ray: &'a Ray, rig: &'a SensorRig, mv: &MeasurementVolume) -> Option<Self> {
        let (mut near, mut far) = ray_depth_interval(&rig.cam1, ray, mv).ok()?;
        let proj = &rig.projector;
        let depth_per_unit = rig.cam1.pose().direction_to_device(&ray.direction).z;
        let point_at = |depth: f64| ray.at(depth / depth_per_unit);

        const MIN_PROJECTOR_DEPTH: f64 = 1e-3;
        let zn = proj.depth_of(&point_at(near));
        let zf = proj.depth_of(&point_at(far));
        if zn < MIN_PROJECTOR_DEPTH && zf < MIN_PROJECTOR_DEPTH {
            return None;
        }
        if zn < MIN_PROJECTOR_DEPTH || zf < MIN_PROJECTOR_DEPTH {
            let t = (MIN_PROJECTOR_DEPTH - zn) / (zf - zn);
            let edge = near + (far - near) * t;
            if zn < MIN_PROJECTOR_DEPTH {
                near = edge;
            } else {
                far = edge;
            }
        }
        let mut s = Self {
            ray,
            projector: proj,
            depth_per_unit,
            q_near: 1.0 / near,
            q_far: 1.0 / far,
            x_near: 0.0,
            x_far: 0.0,
        };
        s.x_near = s.x_at(s.q_near)?;
        s.x_far = s.x_at(s.q_far)?;
        Some(s)
    }

    fn point_at_q(&self, q: f64) -> Point3<f64> {
        self.ray.at(1.0 / (q * self.depth_per_unit))
    }

    fn x_at(&self, q: f64) -> Option<f64> {
        self.projector.project(&self.point_at_q(q)).ok().map(|p| p.x)
    }

    fn x_range(&self) -> (f64, f64) {
        (self.x_near.min(self.x_far), self.x_near.max(self.x_far))
    }

    fn solve(&self, target: f64) -> Option<(Point3<f64>, f64)> {
        let g = |q: f64| self.x_at(q).map(|x| x - target);
        let q = solve_bracketed(
            self.q_near,
            self.x_near - target,
            self.q_far,
            self.x_far - target,
            &g,
        )?;
        Some((self.point_at_q(q), 1.0 / q))
    }
}

fn solve_bracketed(
    mut a: f64,
    mut fa: f64,
    mut b: f64,
    mut fb: f64,
    g: &impl Fn(f64) -> Option<f64>,
) -> Option<f64> {
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if (fa > 0.0) == (fb > 0.0) {
        return None;
    }
    let mut side = 0i8;
    let mut x = a;
    for _ in 0..100 {
        x = a - fa * (b - a) / (fb - fa);
        let fx = g(x)?;
        if fx.abs() < 1e-11 || (b - a).abs() < 1e-18 {
            return Some(x);
        }
        if (fx > 0.0) == (fa > 0.0) {
            a = x;
            fa = fx;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = x;
            fb = fx;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    Some(x)
}

/// Both candidate lists for one camera-1 pixel.
pub fn enumerate_candidates(
    pixel: [u32; 2],
    phi1: f64,
    map2: &PhaseMap,
    rig: &SensorRig,
    mv: &MeasurementVolume,
    cfg: &FringeConfig,
) -> CandidateSet {
    let px = Point2::new(pixel[0] as f64, pixel[1] as f64);
    match rig.cam1.back_project(&px) {
        Ok(ray) => CandidateSet {
            pixel,
            cc: cc_candidates_for_ray(&ray, phi1, map2, rig, mv),
            cp: cp_candidates_for_ray(&ray, phi1, rig, mv, cfg),
        },
        Err(_) => CandidateSet {
            pixel,
            cc: Vec::new(),
            cp: Vec::new(),
        },
    }
}
