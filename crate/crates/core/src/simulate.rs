//! Synthetic fringe-projection captures with ground truth.
//!
//! Camera rays are cast against parametric surfaces. A hit that the
//! projector illuminates gets the fringe intensity of its true projector
//! coordinate; shadowed hits and misses get the ambient level. All noise
//! comes from per-row ChaCha streams derived from one seed, so results do
//! not depend on thread scheduling.

use std::sync::Arc;

use nalgebra::{Point2, Point3, Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correspond::{SensorRig, MeasurementVolume};
use crate::geometry::{LensDistortion, PinholeDevice};
use crate::image::Image;
use crate::phase::{
    decode_absolute, graycode_bits_of, FringeConfig, ImageStack, PhaseError, PhaseMap,
    CoordinateMap, DEFAULT_GRAYCODE_MIN_CONTRAST, DEFAULT_MODULATION_THRESHOLD,
};
use crate::projcal::{PlaneCapture, PlaneSource};
use crate::unwrap::Reconstruction;

/// Ray-march step along the optical axis, mm.
const MARCH_STEP_MM: f64 = 0.25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("degenerate rig: {0}")]
    DegenerateRig(String),
    #[error("invalid render configuration: {0}")]
    InvalidConfig(String),
    #[error("cloud and reference are empty or mismatched: {0}")]
    EmptyReference(String),
    #[error(transparent)]
    Phase(#[from] PhaseError),
}

/// Truncated square pyramid standing on the plane `z = base_z`, pointing
/// toward `-z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PyramidStump {
    pub center_x: f64,
    pub center_y: f64,
    pub base_z: f64,
    /// Base edge length, mm.
    pub base: f64,
    /// Top edge length, mm.
    pub top: f64,
    pub height: f64,
    /// Whether the base plane extends beyond the footprint.
    #[serde(default)]
    pub background: bool,
}

impl Default for PyramidStump {
    fn default() -> Self {
        Self {
            center_x: 0.0,
            center_y: 0.0,
            base_z: 580.0,
            base: 120.0,
            top: 100.0,
            height: 40.0,
            background: true,
        }
    }
}

impl PyramidStump {
    fn elevation(&self, x: f64, y: f64) -> Option<f64> {
        let r = (x - self.center_x).abs().max((y - self.center_y).abs());
        let half_base = 0.5 * self.base;
        let half_top = 0.5 * self.top;
        if r > half_base {
            return self.background.then_some(0.0);
        }
        if r <= half_top {
            return Some(self.height);
        }
        Some(self.height * (half_base - r) / (half_base - half_top))
    }
}

/// Steep-sided bump `height * exp(-(r / radius)^sharpness)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    pub height: f64,
    #[serde(default = "default_sharpness")]
    pub sharpness: f64,
}

fn default_sharpness() -> f64 {
    2.0
}

/// Free-form relief over the plane `z = base_z`, limited to a square of
/// edge `extent` around `(center_x, center_y)` unless `background` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heightfield {
    pub center_x: f64,
    pub center_y: f64,
    pub base_z: f64,
    pub extent: f64,
    pub bumps: Vec<Bump>,
    #[serde(default)]
    pub background: bool,
}

impl Heightfield {
    /// A bust-sized relief: a broad dome with several tall narrow
    /// protrusions that occlude each other between the two cameras.
    pub fn bust_like(center_x: f64, center_y: f64, base_z: f64) -> Self {
        let b = |x: f64, y: f64, radius: f64, height: f64, sharpness: f64| Bump {
            x: center_x + x,
            y: center_y + y,
            radius,
            height,
            sharpness,
        };
        Self {
            center_x,
            center_y,
            base_z,
            extent: 160.0,
            bumps: vec![
                b(0.0, 0.0, 55.0, 25.0, 2.0),
                b(-30.0, -25.0, 9.0, 30.0, 6.0),
                b(25.0, -20.0, 7.0, 35.0, 6.0),
                b(-15.0, 30.0, 12.0, 28.0, 5.0),
                b(35.0, 30.0, 6.0, 22.0, 8.0),
                b(5.0, -45.0, 10.0, 18.0, 4.0),
                b(-45.0, 10.0, 8.0, 26.0, 8.0),
            ],
            background: true,
        }
    }

    fn elevation(&self, x: f64, y: f64) -> Option<f64> {
        let half = 0.5 * self.extent;
        let inside = (x - self.center_x).abs() <= half && (y - self.center_y).abs() <= half;
        if !inside {
            return self.background.then_some(0.0);
        }
        Some(
            self.bumps
                .iter()
                .map(|b| {
                    let r = ((x - b.x).powi(2) + (y - b.y).powi(2)).sqrt() / b.radius;
                    b.height * (-r.powf(b.sharpness)).exp()
                })
                .sum(),
        )
    }

    /// Upper bound on the elevation. The maximum lies at a lattice point or
    /// at a stationary point, where the error of the nearest lattice sample
    /// is bounded by the curvature: `|f''| <= sum h s^2 / a^2` per bump.
    fn max_elevation(&self) -> f64 {
        let h = 0.25;
        let half = 0.5 * self.extent;
        let n = (self.extent / h).ceil() as usize;
        let mut max = 0.0f64;
        for j in 0..=n {
            for i in 0..=n {
                let x = self.center_x - half + i as f64 * h;
                let y = self.center_y - half + j as f64 * h;
                max = max.max(self.elevation(x, y).unwrap_or(0.0));
            }
        }
        let curvature: f64 = self
            .bumps
            .iter()
            .map(|b| b.height.abs() * b.sharpness.max(2.0).powi(2) / (b.radius * b.radius))
            .sum();
        max + 0.5 * curvature * 0.5 * h * h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scene {
    Plane {
        point: [f64; 3],
        normal: [f64; 3],
    },
    PyramidStump(PyramidStump),
    Heightfield(Heightfield),
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Hit {
    t: f64,
    point: Point3<f64>,
}

impl Scene {
    /// Plane normal to the optical axis of `device` at the given depth.
    pub fn facing_plane(device: &PinholeDevice, depth: f64) -> Self {
        let axis = device.pose().direction_to_world(&Vector3::z());
        let p = device.center() + axis * depth;
        Scene::Plane {
            point: [p.x, p.y, p.z],
            normal: [axis.x, axis.y, axis.z],
        }
    }

    /// Elevation surface as `(base_z, elevation fn)`.
    fn relief(&self) -> Option<(f64, Box<dyn Fn(f64, f64) -> Option<f64> + Sync + '_>)> {
        match self {
            Scene::Plane { .. } => None,
            Scene::PyramidStump(s) => Some((s.base_z, Box::new(|x, y| s.elevation(x, y)))),
            Scene::Heightfield(h) => Some((h.base_z, Box::new(|x, y| h.elevation(x, y)))),
        }
    }

    /// Bound on the relief height, expensive for heightfields; computed once per render.
    fn elevation_bound(&self) -> f64 {
        match self {
            Scene::Plane { .. } => 0.0,
            Scene::PyramidStump(s) => s.height.max(0.0),
            Scene::Heightfield(h) => h.max_elevation(),
        }
    }

    /// Signed gap `z - surface_z` at a point, positive behind the surface.
    fn behind(&self, p: &Point3<f64>) -> Option<f64> {
        match self {
            Scene::Plane { point, normal } => {
                let n = Vector3::from(*normal);
                Some((p - Point3::from(*point)).dot(&n))
            }
            _ => {
                let (base_z, elev) = self.relief()?;
                Some(p.z - (base_z - elev(p.x, p.y)?))
            }
        }
    }

    #[cfg(test)]
    fn cast(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<Hit> {
        self.cast_below(self.elevation_bound(), origin, dir)
    }

    #[cfg(test)]
    fn occluded(&self, p: &Point3<f64>, eye: &Point3<f64>) -> bool {
        self.occluded_below(self.elevation_bound(), p, eye)
    }

    /// First surface hit; `max_elev` bounds the relief height.
    fn cast_below(&self, max_elev: f64, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<Hit> {
        match self {
            Scene::Plane { point, normal } => {
                let n = Vector3::from(*normal);
                let denom = dir.dot(&n);
                if denom.abs() < 1e-12 {
                    return None;
                }
                let t = (Point3::from(*point) - origin).dot(&n) / denom;
                (t > 0.0).then(|| Hit {
                    t,
                    point: origin + dir * t,
                })
            }
            _ => {
                let (base_z, _) = self.relief()?;
                if !(dir.z > 0.0) {
                    return None;
                }
                let t0 = ((base_z - max_elev - 1.0 - origin.z) / dir.z).max(0.0);
                let t1 = (base_z + 1.0 - origin.z) / dir.z;
                if t1 <= t0 {
                    return None;
                }
                let dt = MARCH_STEP_MM / dir.z;
                let f = |t: f64| self.behind(&(origin + dir * t));
                let mut prev_t = t0;
                let mut prev = f(t0);
                let steps = ((t1 - t0) / dt).ceil() as usize;
                for i in 1..=steps {
                    let t = (t0 + i as f64 * dt).min(t1);
                    let cur = f(t);
                    if let (Some(a), Some(b)) = (prev, cur) {
                        if a < 0.0 && b >= 0.0 {
                            let t = bisect(prev_t, t, &f);
                            return Some(Hit {
                                t,
                                point: origin + dir * t,
                            });
                        }
                    }
                    prev_t = t;
                    prev = cur;
                }
                None
            }
        }
    }

    /// True when the straight segment from the surface point `p` to `eye`
    /// passes through the solid.
    fn occluded_below(&self, max_elev: f64, p: &Point3<f64>, eye: &Point3<f64>) -> bool {
        let to_eye = eye - p;
        let dist = to_eye.norm();
        let u = to_eye / dist;
        match self {
            Scene::Plane { .. } => {
                // The eye must be on the same side as the incoming rays.
                self.behind(eye).is_some_and(|s| s > 0.0)
            }
            _ => {
                let Some((base_z, _)) = self.relief() else {
                    return false;
                };
                if self.behind(eye).is_some_and(|s| s > 0.0) {
                    return true;
                }
                let top = base_z - max_elev - 1e-6;
                let end = if u.z < 0.0 {
                    ((top - p.z) / u.z).min(dist)
                } else {
                    dist
                };
                let start = 1e-4;
                let steps = ((end - start) / MARCH_STEP_MM).ceil().max(1.0) as usize;
                (0..=steps).any(|i| {
                    let t = start + (end - start) * i as f64 / steps as f64;
                    self.behind(&(p + u * t)).is_some_and(|s| s > 1e-7)
                })
            }
        }
    }
}

fn bisect(mut lo: f64, mut hi: f64, f: &impl Fn(f64) -> Option<f64>) -> f64 {
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        match f(mid) {
            Some(v) if v >= 0.0 => hi = mid,
            Some(_) => lo = mid,
            None => break,
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    /// Ambient intensity A.
    pub ambient: f64,
    /// Fringe modulation B.
    pub modulation: f64,
    pub noise_sigma: f64,
    /// Added to the projector's modeled lens to form the true projector.
    #[serde(default)]
    pub injected_projector_distortion: LensDistortion,
    /// Error of the modeled projector principal point, px. With the
    /// principal point off the chip a lens term alone barely moves the
    /// chip center, so this carries the low-order part of the error.
    #[serde(default)]
    pub injected_principal_point_shift: [f64; 2],
    /// Smooth image-plane error no lens function describes.
    #[serde(default)]
    pub injected_projector_ripple: Option<ProjectorRipple>,
    /// Also render horizontal fringes and their Gray code.
    #[serde(default)]
    pub enable_second_direction: bool,
    /// Round intensities to 8 bits.
    #[serde(default)]
    pub quantize_8bit: bool,
    #[serde(default)]
    pub seed: u64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            ambient: 0.5,
            modulation: 0.3,
            noise_sigma: 0.0,
            injected_projector_distortion: LensDistortion::default(),
            injected_principal_point_shift: [0.0; 2],
            injected_projector_ripple: None,
            enable_second_direction: false,
            quantize_8bit: false,
            seed: 0,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let (a, b) = (self.ambient, self.modulation);
        if !(a - b >= 0.0 && a + b <= 1.0 && b >= 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "need 0 <= A - B and A + B <= 1, got A={a}, B={b}"
            )));
        }
        if let Some(r) = &self.injected_projector_ripple {
            r.validate()?;
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma <= 1.0) {
            return Err(SimError::InvalidConfig(format!(
                "noise sigma must lie in [0, 1], got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

/// Sinusoidal displacement of the true projector image relative to its model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectorRipple {
    /// Peak displacement along chip x and y, px.
    pub amplitude: [f64; 2],
    pub period_px: f64,
    /// Direction of travel, degrees from the chip x axis.
    pub angle_deg: f64,
}

impl ProjectorRipple {
    /// Node spacing of the grid that carries the ripple into the true device.
    const SAMPLE_SPACING_PX: f64 = 4.0;

    /// Offset of the true image point from the modeled one at chip position `p`.
    pub fn displacement(&self, p: &Point2<f64>) -> Vector2<f64> {
        let (s, c) = self.angle_deg.to_radians().sin_cos();
        let arg = std::f64::consts::TAU * (p.x * c + p.y * s) / self.period_px;
        Vector2::new(self.amplitude[0] * arg.sin(), self.amplitude[1] * arg.cos())
    }

    fn validate(&self) -> Result<(), SimError> {
        let ok = self.period_px > 0.0
            && self.period_px.is_finite()
            && self.angle_deg.is_finite()
            && self.amplitude.iter().all(|a| a.is_finite());
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidConfig(format!("bad projector ripple {self:?}")))
        }
    }
}

/// Per-pixel truth for camera 1.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub width: usize,
    pub height: usize,
    pub hits: Vec<Option<Point3<f64>>>,
    /// Hit visible from camera 2 and inside its image.
    pub visible_cam2: Vec<bool>,
    /// Hit illuminated by the projector chip.
    pub lit: Vec<bool>,
}

impl GroundTruth {
    pub fn hit(&self, x: usize, y: usize) -> Option<Point3<f64>> {
        self.hits[y * self.width + x]
    }

    pub fn hit_count(&self) -> usize {
        self.hits.iter().filter(|h| h.is_some()).count()
    }

    /// Hits that the projector does not reach.
    pub fn shadowed_count(&self) -> usize {
        self.hits
            .iter()
            .zip(&self.lit)
            .filter(|(h, &l)| h.is_some() && !l)
            .count()
    }
}

/// Everything one camera records.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraCapture {
    pub fringes: ImageStack,
    /// Gray-code frames, most significant bit first.
    pub graycode: Vec<Image>,
    pub fringes_y: Option<ImageStack>,
    pub graycode_y: Option<Vec<Image>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    pub cam1: CameraCapture,
    pub cam2: CameraCapture,
    pub truth: GroundTruth,
}

/// Projector actually present in the simulated sensor: the modeled device
/// plus the injected errors, without any correction grid.
pub fn true_projector(rig: &SensorRig, rc: &RenderConfig) -> Result<PinholeDevice, SimError> {
    let p = &rig.projector;
    let mut k = *p.intrinsics();
    k.cx += rc.injected_principal_point_shift[0];
    k.cy += rc.injected_principal_point_shift[1];
    PinholeDevice::projector(
        k,
        p.pose().clone(),
        p.lens().plus(&rc.injected_projector_distortion),
    )
    .and_then(|d| {
        // The device subtracts its grid, so the grid holds the negated ripple.
        let grid = rc.injected_projector_ripple.map(|r| {
            Arc::new(crate::projcal::DistortionGrid::from_fn(
                ProjectorRipple::SAMPLE_SPACING_PX,
                d.width(),
                d.height(),
                |q| -r.displacement(q),
            ))
        });
        d.with_grid(grid)
    })
    .map_err(|e| SimError::DegenerateRig(e.to_string()))
}

/// What one camera pixel sees.
#[derive(Debug, Clone, Copy)]
struct PixelSample {
    hit: Option<Point3<f64>>,
    /// True projector coordinate when lit.
    projector: Option<Point2<f64>>,
}

fn trace_camera(
    scene: &Scene,
    max_elev: f64,
    cam: &PinholeDevice,
    projector: &PinholeDevice,
) -> Vec<PixelSample> {
    let (w, h) = (cam.width(), cam.height());
    let proj_w = projector.width() as f64;
    let proj_h = projector.height() as f64;
    (0..w * h)
        .into_par_iter()
        .map(|k| {
            let px = Point2::new((k % w) as f64, (k / w) as f64);
            let none = PixelSample {
                hit: None,
                projector: None,
            };
            let Ok(ray) = cam.back_project(&px) else {
                return none;
            };
            let Some(hit) = scene.cast_below(max_elev, &ray.origin, &ray.direction) else {
                return none;
            };
            let lit = projector
                .project(&hit.point)
                .ok()
                .filter(|q| q.x >= 0.0 && q.x < proj_w && q.y >= 0.0 && q.y < proj_h)
                .filter(|_| !scene.occluded_below(max_elev, &hit.point, &projector.center()));
            PixelSample {
                hit: Some(hit.point),
                projector: lit,
            }
        })
        .collect()
}

struct FrameWriter<'a> {
    rc: &'a RenderConfig,
    camera_index: u64,
    width: usize,
    height: usize,
}

impl FrameWriter<'_> {
    /// One frame from per-pixel clean intensities, with noise stream `frame_id`.
    fn frame(&self, frame_id: u64, clean: impl Fn(usize) -> f64 + Sync) -> Image {
        let (w, h) = (self.width, self.height);
        let sigma = self.rc.noise_sigma;
        let noise = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE)).expect("finite sigma");
        let rows: Vec<Vec<f64>> = (0..h)
            .into_par_iter()
            .map(|y| {
                let mut rng = ChaCha8Rng::seed_from_u64(self.rc.seed);
                rng.set_stream((self.camera_index << 48) | (frame_id << 24) | y as u64);
                (0..w)
                    .map(|x| {
                        let mut v = clean(y * w + x);
                        if sigma > 0.0 {
                            v += noise.sample(&mut rng);
                        }
                        if self.rc.quantize_8bit {
                            v = (v.clamp(0.0, 1.0) * 255.0).round() / 255.0;
                        }
                        v
                    })
                    .collect()
            })
            .collect();
        Image::from_vec(w, h, rows.concat()).expect("row lengths")
    }
}

fn render_direction(
    samples: &[PixelSample],
    writer: &FrameWriter,
    cfg: &FringeConfig,
    axis_y: bool,
    frame_base: u64,
) -> Result<(ImageStack, Vec<Image>), SimError> {
    let rc = writer.rc;
    let coord = |k: usize| -> Option<f64> {
        samples[k].projector.map(|q| if axis_y { q.y } else { q.x })
    };
    let k_steps = cfg.steps;
    let frames: Vec<Image> = (0..k_steps)
        .map(|k| {
            let shift = std::f64::consts::TAU * k as f64 / k_steps as f64;
            writer.frame(frame_base + k as u64, |i| match coord(i) {
                Some(c) => rc.ambient + rc.modulation * (cfg.coordinate_to_phase(c) - shift).cos(),
                None => rc.ambient,
            })
        })
        .collect();
    let bits = cfg.graycode_bits();
    let half = 0.5 * cfg.period_px;
    let words = cfg.graycode_word_count() as u32;
    let gc: Vec<Image> = (0..bits)
        .map(|b| {
            writer.frame(frame_base + 1000 + b as u64, |i| match coord(i) {
                Some(c) => {
                    let word = ((c / half).floor().max(0.0) as u32).min(words - 1);
                    if graycode_bits_of(word, bits)[b] {
                        rc.ambient + rc.modulation
                    } else {
                        rc.ambient - rc.modulation
                    }
                }
                None => rc.ambient,
            })
        })
        .collect();
    Ok((ImageStack::new(frames)?, gc))
}

fn render_camera(
    samples: &[PixelSample],
    cam: &PinholeDevice,
    camera_index: u64,
    cfg: &FringeConfig,
    cfg_y: Option<&FringeConfig>,
    rc: &RenderConfig,
) -> Result<CameraCapture, SimError> {
    let writer = FrameWriter {
        rc,
        camera_index,
        width: cam.width(),
        height: cam.height(),
    };
    let (fringes, graycode) = render_direction(samples, &writer, cfg, false, 0)?;
    let (fringes_y, graycode_y) = match cfg_y {
        Some(cy) => {
            let (f, g) = render_direction(samples, &writer, cy, true, 1 << 16)?;
            (Some(f), Some(g))
        }
        None => (None, None),
    };
    Ok(CameraCapture {
        fringes,
        graycode,
        fringes_y,
        graycode_y,
    })
}

/// Fringe configuration of the rotated sequence for this projector.
pub fn second_direction(cfg: &FringeConfig, projector: &PinholeDevice) -> Result<FringeConfig, SimError> {
    Ok(cfg.rotated(projector.height())?)
}

/// Renders both cameras and camera 1's ground truth.
pub fn render(
    scene: &Scene,
    rig: &SensorRig,
    cfg: &FringeConfig,
    rc: &RenderConfig,
) -> Result<RenderOutput, SimError> {
    rc.validate()?;
    cfg.validate()?;
    let projector = true_projector(rig, rc)?;
    for cam in [&rig.cam1, &rig.cam2] {
        if (cam.center() - projector.center()).norm() < 1e-9 {
            return Err(SimError::DegenerateRig(
                "projector and camera share a projection center".into(),
            ));
        }
    }
    let cfg_y = if rc.enable_second_direction {
        Some(second_direction(cfg, &projector)?)
    } else {
        None
    };
    let max_elev = scene.elevation_bound();
    let s1 = trace_camera(scene, max_elev, &rig.cam1, &projector);
    let s2 = trace_camera(scene, max_elev, &rig.cam2, &projector);
    let cam1 = render_camera(&s1, &rig.cam1, 1, cfg, cfg_y.as_ref(), rc)?;
    let cam2 = render_camera(&s2, &rig.cam2, 2, cfg, cfg_y.as_ref(), rc)?;

    let c2 = rig.cam2.center();
    let visible_cam2 = s1
        .par_iter()
        .map(|s| {
            s.hit.is_some_and(|p| {
                rig.cam2.project(&p).is_ok_and(|q| rig.cam2.contains_pixel(&q))
                    && !scene.occluded_below(max_elev, &p, &c2)
            })
        })
        .collect();
    let truth = GroundTruth {
        width: rig.cam1.width(),
        height: rig.cam1.height(),
        hits: s1.iter().map(|s| s.hit).collect(),
        visible_cam2,
        lit: s1.iter().map(|s| s.projector.is_some()).collect(),
    };
    Ok(RenderOutput { cam1, cam2, truth })
}

/// Decoded maps of one camera.
#[derive(Debug, Clone)]
pub struct DecodedCamera {
    pub phase: PhaseMap,
    pub coords: CoordinateMap,
    pub phase_y: Option<PhaseMap>,
    pub coords_y: Option<CoordinateMap>,
}

pub fn decode_camera(
    cap: &CameraCapture,
    cfg: &FringeConfig,
    cfg_y: Option<&FringeConfig>,
    modulation_threshold: f64,
    min_contrast: f64,
) -> Result<DecodedCamera, SimError> {
    let (phase, coords) = decode_absolute(&cap.fringes, &cap.graycode, cfg, modulation_threshold, min_contrast)?;
    let (phase_y, coords_y) = match (&cap.fringes_y, &cap.graycode_y, cfg_y) {
        (Some(f), Some(g), Some(c)) => {
            let (p, k) = decode_absolute(f, g, c, modulation_threshold, min_contrast)?;
            (Some(p), Some(k))
        }
        _ => (None, None),
    };
    Ok(DecodedCamera {
        phase,
        coords,
        phase_y,
        coords_y,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Completeness, percent of the reference count.
    pub com: f64,
    /// False positives, percent of the reference count.
    pub fp: f64,
    /// RMS 3D error of true points, mm.
    pub rms: f64,
    pub true_points: usize,
    pub false_points: usize,
    pub reference_points: usize,
}

/// Distance from ground truth within which a point counts as true, mm.
/// A wrong fringe order moves a point by tens of millimetres on the desk rig,
/// phase noise by hundredths.
pub const DEFAULT_TRUE_POINT_TOL_MM: f64 = 1.0;

/// Scores a cloud against ground truth, relative to a reference cloud's size.
pub fn evaluate(
    cloud: &Reconstruction,
    reference: &Reconstruction,
    gt: &GroundTruth,
    tol_mm: f64,
) -> Result<Metrics, SimError> {
    let n = reference.points.len();
    if n == 0 {
        return Err(SimError::EmptyReference("reference cloud is empty".into()));
    }
    if cloud.dims() != (gt.width, gt.height) {
        return Err(SimError::EmptyReference(format!(
            "cloud is {:?}, ground truth is {}x{}",
            cloud.dims(),
            gt.width,
            gt.height
        )));
    }
    let mut true_points = 0usize;
    let mut sq = 0.0;
    for p in &cloud.points {
        let truth = gt.hit(p.pixel[0] as usize, p.pixel[1] as usize);
        match truth.map(|t| (p.point - t).norm()) {
            Some(e) if e <= tol_mm => {
                true_points += 1;
                sq += e * e;
            }
            _ => {}
        }
    }
    let false_points = cloud.points.len() - true_points;
    Ok(Metrics {
        com: 100.0 * true_points as f64 / n as f64,
        fp: 100.0 * false_points as f64 / n as f64,
        rms: if true_points > 0 {
            (sq / true_points as f64).sqrt()
        } else {
            0.0
        },
        true_points,
        false_points,
        reference_points: n,
    })
}

/// Simulated sensor that images calibration plates.
#[derive(Debug, Clone)]
pub struct SimulatedSensor {
    /// Nominal rig, as calibrated.
    pub rig: SensorRig,
    pub cfg: FringeConfig,
    pub render: RenderConfig,
    pub modulation_threshold: f64,
    pub min_contrast: f64,
}

impl SimulatedSensor {
    pub fn new(rig: SensorRig, cfg: FringeConfig, render: RenderConfig) -> Self {
        Self {
            rig,
            cfg,
            render,
            modulation_threshold: DEFAULT_MODULATION_THRESHOLD,
            min_contrast: DEFAULT_GRAYCODE_MIN_CONTRAST,
        }
    }
}

impl PlaneSource for SimulatedSensor {
    fn capture_plane(&self, depth: f64) -> Result<PlaneCapture, String> {
        let scene = Scene::facing_plane(&self.rig.cam1, depth);
        let out = render(&scene, &self.rig, &self.cfg, &self.render).map_err(|e| e.to_string())?;
        let cfg_y = if self.render.enable_second_direction {
            Some(second_direction(&self.cfg, &self.rig.projector).map_err(|e| e.to_string())?)
        } else {
            None
        };
        let decode = |c: &CameraCapture| {
            decode_camera(c, &self.cfg, cfg_y.as_ref(), self.modulation_threshold, self.min_contrast)
                .map_err(|e| e.to_string())
        };
        let d1 = decode(&out.cam1)?;
        let d2 = decode(&out.cam2)?;
        let y = match (d1.coords_y, d2.coords_y) {
            (Some(a), Some(b)) => Some((a, b)),
            _ => None,
        };
        Ok(PlaneCapture {
            x1: d1.coords,
            x2: d2.coords,
            y,
        })
    }
}

/// Rig copy whose projector carries `grid` (or none).
pub fn rig_with_grid(
    rig: &SensorRig,
    grid: Option<Arc<crate::projcal::DistortionGrid>>,
) -> Result<SensorRig, SimError> {
    let proj = rig
        .projector
        .clone()
        .with_grid(grid)
        .map_err(|e| SimError::DegenerateRig(e.to_string()))?;
    rig.with_projector(proj)
        .map_err(|e| SimError::DegenerateRig(e.to_string()))
}

/// Largest displacement, px, between the modeled and the true projector
/// over the part of the chip that lights the volume.
pub fn injected_displacement(
    rig: &SensorRig,
    rc: &RenderConfig,
    mv: &MeasurementVolume,
) -> Result<f64, SimError> {
    let model = &rig.projector;
    let truth = true_projector(rig, rc)?;
    let (w, h) = (model.width(), model.height());
    let mut max = 0.0f64;
    let cam = &rig.cam1;
    for depth in [mv.d_min, mv.d_min + 0.5 * mv.mvd, mv.d_min + mv.mvd] {
        for j in 0..=24 {
            for i in 0..=32 {
                let px = Point2::new(
                    i as f64 * (cam.width() - 1) as f64 / 32.0,
                    j as f64 * (cam.height() - 1) as f64 / 24.0,
                );
                let Ok(ray) = cam.back_project(&px) else {
                    continue;
                };
                let dz = cam.pose().direction_to_device(&ray.direction).z;
                let p = ray.at(depth / dz);
                let (Ok(a), Ok(b)) = (model.project(&p), truth.project(&p)) else {
                    continue;
                };
                if a.x >= 0.0 && a.y >= 0.0 && a.x < w as f64 && a.y < h as f64 {
                    max = max.max((a - b).norm());
                }
            }
        }
    }
    Ok(max)
}
