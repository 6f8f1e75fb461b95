//! Rectified rig and exact phase maps of a fronto-parallel plane.

#![allow(dead_code)]

use fringefree::correspond::SensorRig;
use fringefree::geometry::*;
use fringefree::image::Image;
use fringefree::phase::*;
use nalgebra::{Matrix3, Point2, Point3};

pub const PLANE_Z: f64 = 560.0;

pub fn at(center: [f64; 3]) -> Pose {
    Pose::from_center(Matrix3::identity(), Point3::from(center)).unwrap()
}

/// Rectified 640x480 cameras `b` mm apart with a 640 px projector at
/// `proj_x`, all looking down +z.
pub fn rectified_rig(b: f64, proj_x: f64) -> SensorRig {
    let k = Intrinsics::new(1000.0, 1000.0, 320.0, 240.0, 640, 480).unwrap();
    let cam = |x| PinholeDevice::camera(k, at([x, 0.0, 0.0]), LensDistortion::default()).unwrap();
    let proj = PinholeDevice::projector(k, at([proj_x, 0.0, 0.0]), LensDistortion::default()).unwrap();
    SensorRig::new(cam(0.0), cam(b), proj).unwrap()
}

pub fn fringes() -> FringeConfig {
    FringeConfig::new(16.0, 16, 640, FringeOrientation::Vertical).unwrap()
}

pub fn plane_hit(ray: &Ray) -> Point3<f64> {
    ray.at((PLANE_Z - ray.origin.z) / ray.direction.z)
}

/// Projector x-coordinate lighting pixel `(x, y)` of `cam`, if on the chip.
pub fn lit_coordinate(cam: &PinholeDevice, rig: &SensorRig, x: usize, y: usize) -> Option<f64> {
    let p = plane_hit(&cam.back_project(&Point2::new(x as f64, y as f64)).unwrap());
    let xp = rig.projector.project(&p).unwrap().x;
    (0.0..rig.projector.width() as f64).contains(&xp).then_some(xp)
}

/// Wrapped phase each pixel of `cam` sees on the plane.
pub fn plane_phase_map(cam: &PinholeDevice, rig: &SensorRig, cfg: &FringeConfig) -> PhaseMap {
    let (w, h) = (cam.width(), cam.height());
    let mut phase = vec![0.0; w * h];
    let mut valid = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            if let Some(xp) = lit_coordinate(cam, rig, x, y) {
                phase[y * w + x] = wrap_to_tau(cfg.coordinate_to_phase(xp));
                valid[y * w + x] = true;
            }
        }
    }
    PhaseMap::from_parts(w, h, phase, vec![0.3; w * h], valid).unwrap()
}

/// Absolute coordinates of the plane, decoded through real Gray-code planes.
pub fn plane_coordinate_map(cam: &PinholeDevice, rig: &SensorRig, cfg: &FringeConfig) -> CoordinateMap {
    let phase = plane_phase_map(cam, rig, cfg);
    let (w, h) = (cam.width(), cam.height());
    let bits = cfg.graycode_bits();
    let half = 0.5 * cfg.period_px;
    let words: Vec<Option<u32>> = (0..w * h)
        .map(|k| lit_coordinate(cam, rig, k % w, k / w).map(|xp| (xp / half).floor() as u32))
        .collect();
    let frames: Vec<Image> = (0..bits)
        .map(|b| {
            Image::from_fn(w, h, |x, y| match words[y * w + x] {
                Some(word) if graycode_bits_of(word, bits)[b] => 0.8,
                Some(_) => 0.2,
                None => 0.5,
            })
        })
        .collect();
    let code = decode_graycode(&frames, &Image::new(w, h, 0.5), cfg.graycode_word_count(), 0.05).unwrap();
    absolute_coordinates(&phase, &code, cfg).unwrap()
}

/// Camera-1 phase, the true camera-2 position and the surface point.
pub fn truth(rig: &SensorRig, cfg: &FringeConfig, px: Point2<f64>) -> (f64, Point2<f64>, Point3<f64>) {
    let p = plane_hit(&rig.cam1.back_project(&px).unwrap());
    let xp = rig.projector.project(&p).unwrap().x;
    (wrap_to_tau(cfg.coordinate_to_phase(xp)), rig.cam2.project(&p).unwrap(), p)
}

/// Camera-1 pixels whose surface point is lit and lands at least one pixel
/// inside camera 2, so bilinear sampling has all four neighbors.
pub fn observable(rig: &SensorRig, x: usize, y: usize) -> bool {
    let Some(xp) = lit_coordinate(&rig.cam1, rig, x, y) else {
        return false;
    };
    let p = plane_hit(&rig.cam1.back_project(&Point2::new(x as f64, y as f64)).unwrap());
    let c2 = rig.cam2.project(&p).unwrap();
    let (w, h) = (rig.cam2.width() as f64, rig.cam2.height() as f64);
    xp >= 1.0 && xp <= rig.projector.width() as f64 - 2.0 && c2.x >= 1.0 && c2.x <= w - 2.0 && c2.y >= 1.0 && c2.y <= h - 2.0
}
