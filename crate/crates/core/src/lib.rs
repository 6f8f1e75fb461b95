//! Phase unwrapping without Gray code for fringe-projection stereo sensors.
//!
//! A sensor with two cameras and a projector records one sinusoidal fringe
//! sequence. For every camera-1 pixel, the wrapped phase alone yields two
//! candidate lists: camera-camera (CC) points, from equal phase along the
//! epipolar segment in camera 2, and camera-projector (CP) points, from
//! intersecting the pixel's ray with every projector column of that phase.
//! Only the true surface point appears in both. [`unwrap::reconstruct`]
//! pairs the lists and keeps pairs whose projector phases agree.
//!
//! The CP side depends on an accurate projector model, so [`projcal`]
//! estimates a grid of correction vectors from three plane measurements.
//! [`simulate`] renders synthetic captures with ground truth and
//! [`scenario::DeskSetup`] provides a ready-made desk-scale sensor.
//!
//! ```no_run
//! use fringefree::prelude::*;
//!
//! let setup = DeskSetup::with_camera_scale(0.5);
//! let rig = setup.rig();
//! let cfg = setup.fringe_config();
//! let out = render(&setup.stump(), &rig, &cfg, &setup.render_config(0.005, 1)).unwrap();
//! let map1 = decode_phase(&out.cam1.fringes, &cfg, DEFAULT_MODULATION_THRESHOLD).unwrap();
//! let map2 = decode_phase(&out.cam2.fringes, &cfg, DEFAULT_MODULATION_THRESHOLD).unwrap();
//! let p = MatchParams::new(0.1 * std::f64::consts::PI, MatchMode::M1).unwrap();
//! let cloud = reconstruct(&map1, &map2, &rig, &setup.volume(), &cfg, &p).unwrap();
//! println!("{} points", cloud.points.len());
//! ```

pub mod correspond;
pub mod geometry;
pub mod image;
pub mod io;
pub mod phase;
pub mod projcal;
pub mod scenario;
pub mod simulate;
pub mod unwrap;

pub mod prelude {
    pub use crate::correspond::{
        enumerate_candidates, find_cc_candidates, find_cp_candidates, predict_candidate_count,
        CandidateSet, MeasurementVolume, SensorRig,
    };
    pub use crate::geometry::{
        epipolar_line, epipolar_segment, triangulate, Intrinsics, LensDistortion, PinholeDevice,
        Pose, Ray,
    };
    pub use crate::image::Image;
    pub use crate::phase::{
        decode_absolute, decode_phase, FringeConfig, FringeOrientation, ImageStack, PhaseMap,
        DEFAULT_GRAYCODE_MIN_CONTRAST, DEFAULT_MODULATION_THRESHOLD,
    };
    pub use crate::projcal::{calibrate_projector, DistortionGrid};
    pub use crate::scenario::DeskSetup;
    pub use crate::simulate::{evaluate, render, RenderConfig, Scene};
    pub use crate::unwrap::{
        filter_outliers, reconstruct, reconstruct_graycode, MatchMode, MatchParams,
    };
}
