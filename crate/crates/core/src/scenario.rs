//! A desk-scale reference sensor used by the examples, the CLI defaults and
//! the tests.
//!
//! World frame: `z` points from the sensor toward the scene, `y` down, mm.
//! Both cameras converge on a point 560 mm in front of the sensor with
//! about 14 degrees between them. The projector sits above the cameras with
//! its optical axis parallel to `z`; its principal point lies above the
//! chip, as is usual for projectors. Horizontally it is placed off-center
//! so that camera 1 and the projector subtend about 8 degrees: the ratio of
//! the two horizontal baselines, about 0.58, keeps CC candidates one or
//! more fringe periods away from the truth at least 0.25 pi away from every
//! CP candidate. A centered projector (ratio 0.5) would make every second
//! false CC candidate coincide with a CP candidate.

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::correspond::{MeasurementVolume, SensorRig};
use crate::geometry::{Intrinsics, LensDistortion, PinholeDevice, Pose};
use crate::phase::{FringeConfig, FringeOrientation};
use crate::simulate::{Heightfield, ProjectorRipple, PyramidStump, RenderConfig, Scene};

/// Point both cameras look at, mm.
pub const TARGET_DEPTH: f64 = 560.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeskSetup {
    /// Camera resolution as a fraction of 640x480. Focal length scales along.
    pub camera_scale: f64,
    /// Half the camera baseline, mm.
    pub half_baseline: f64,
    /// Projector center, mm.
    pub projector_center: [f64; 3],
    pub projector_width: u32,
    pub projector_height: u32,
    pub projector_focal: f64,
}

impl Default for DeskSetup {
    fn default() -> Self {
        Self {
            camera_scale: 1.0,
            half_baseline: 67.0,
            projector_center: [10.0, -150.0, 0.0],
            projector_width: 640,
            projector_height: 480,
            projector_focal: 1000.0,
        }
    }
}

impl DeskSetup {
    pub fn with_camera_scale(scale: f64) -> Self {
        Self {
            camera_scale: scale,
            ..Self::default()
        }
    }

    fn camera(&self, x: f64) -> PinholeDevice {
        let s = self.camera_scale;
        let w = (640.0 * s).round() as u32;
        let h = (480.0 * s).round() as u32;
        let k = Intrinsics::new(
            1000.0 * s,
            1000.0 * s,
            0.5 * (w as f64 - 1.0),
            0.5 * (h as f64 - 1.0),
            w,
            h,
        )
        .expect("valid camera intrinsics");
        let pose = Pose::look_at(
            Point3::new(x, 0.0, 0.0),
            Point3::new(0.0, 0.0, TARGET_DEPTH),
            -Vector3::y(),
        )
        .expect("valid camera pose");
        PinholeDevice::camera(k, pose, LensDistortion::default()).expect("camera")
    }

    /// Projector whose principal point makes `(0, 0, TARGET_DEPTH)` land in
    /// the chip center.
    pub fn projector(&self) -> PinholeDevice {
        let [px, py, pz] = self.projector_center;
        let f = self.projector_focal;
        let (w, h) = (self.projector_width, self.projector_height);
        let z = TARGET_DEPTH - pz;
        let cx = 0.5 * w as f64 + f * px / z;
        let cy = 0.5 * h as f64 + f * py / z;
        let k = Intrinsics::new(f, f, cx, cy, w, h).expect("valid projector intrinsics");
        let pose = Pose::from_center(Matrix3::identity(), Point3::new(px, py, pz)).expect("pose");
        PinholeDevice::projector(k, pose, LensDistortion::default()).expect("projector")
    }

    pub fn rig(&self) -> SensorRig {
        SensorRig::new(
            self.camera(-self.half_baseline),
            self.camera(self.half_baseline),
            self.projector(),
        )
        .expect("rig")
    }

    pub fn volume(&self) -> MeasurementVolume {
        MeasurementVolume::new(400.0, 300.0, 110.0, 505.0).expect("volume")
    }

    /// 16 steps, period 16 px.
    pub fn fringe_config(&self) -> FringeConfig {
        FringeConfig::new(16.0, 16, self.projector_width as usize, FringeOrientation::Vertical)
            .expect("fringe config")
    }

    /// 120 x 120 x 40 mm stump with a 60 x 60 mm top on a background plate
    /// at 580 mm. Every face is visible from all three devices.
    pub fn stump(&self) -> Scene {
        Scene::PyramidStump(PyramidStump {
            top: 60.0,
            ..PyramidStump::default()
        })
    }

    pub fn heightfield(&self) -> Scene {
        Scene::Heightfield(Heightfield::bust_like(0.0, 0.0, 580.0))
    }

    pub fn render_config(&self, noise_sigma: f64, seed: u64) -> RenderConfig {
        RenderConfig {
            noise_sigma,
            seed,
            ..RenderConfig::default()
        }
    }

    /// Render settings for a sensor whose projector model is off by the
    /// errors below: the lit part of the chip moves by up to about 2 px.
    pub fn miscalibrated_render_config(&self, noise_sigma: f64, seed: u64) -> RenderConfig {
        RenderConfig {
            injected_projector_distortion: Self::injected_distortion(),
            injected_projector_ripple: Some(Self::injected_ripple()),
            ..self.render_config(noise_sigma, seed)
        }
    }

    /// Image-plane error of the miscalibrated projector beyond its lens model.
    pub fn injected_ripple() -> ProjectorRipple {
        ProjectorRipple {
            amplitude: [1.1, 0.5],
            period_px: 500.0,
            angle_deg: 30.0,
        }
    }

    /// Lens error of the miscalibrated projector.
    pub fn injected_distortion() -> LensDistortion {
        LensDistortion {
            k1: 0.002,
            k2: 0.0,
            k3: 0.0,
            p1: -0.0004,
            p2: 0.0015,
        }
    }
}
