//! Injects a projector lens error, calibrates the distortion grid from three
//! simulated plates and compares stump reconstructions with and without the
//! grid.
//!
//! `cargo run --release --example calibration_study -- [camera_scale] [noise]`

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use fringefree::prelude::*;
use fringefree::projcal::DEFAULT_GRID_SPACING_PX;
use fringefree::simulate::{decode_camera, injected_displacement, rig_with_grid, SimulatedSensor};
use fringefree::unwrap::{enumerate_all, match_field};

fn main() {
    let mut args = std::env::args().skip(1);
    let scale: f64 = args.next().map(|s| s.parse().expect("scale")).unwrap_or(1.0);
    let noise: f64 = args.next().map(|s| s.parse().expect("noise")).unwrap_or(0.005);
    let setup = DeskSetup::with_camera_scale(scale);
    let rig = setup.rig();
    let cfg = setup.fringe_config();
    let mv = setup.volume();
    let mut rc = setup.miscalibrated_render_config(noise, 11);
    println!("injected displacement {:.3} px", injected_displacement(&rig, &rc, &mv).unwrap());
    rc.enable_second_direction = true;

    let t = Instant::now();
    let sensor = SimulatedSensor::new(rig.clone(), cfg, rc);
    let report = calibrate_projector(&rig, &mv, &cfg, &sensor, DEFAULT_GRID_SPACING_PX).unwrap();
    println!("calibration {:.2?}", t.elapsed());
    println!(
        "cpd {:.4} -> {:.4} mm, residuals {:.4} -> {:.4} px, max node {:.3}",
        report.cpd_before,
        report.cpd_after,
        report.residuals_before.mean,
        report.residuals_after.mean,
        report.max_node
    );
    if let Some(e) = report.delta_e {
        println!("delta E mean {:.4} max {:.4} px over {}", e.mean, e.max, e.count);
    }

    rc.enable_second_direction = false;
    let out = render(&setup.stump(), &rig, &cfg, &rc).unwrap();
    let d1 = decode_camera(&out.cam1, &cfg, None, DEFAULT_MODULATION_THRESHOLD, DEFAULT_GRAYCODE_MIN_CONTRAST).unwrap();
    let d2 = decode_camera(&out.cam2, &cfg, None, DEFAULT_MODULATION_THRESHOLD, DEFAULT_GRAYCODE_MIN_CONTRAST).unwrap();
    let reference = reconstruct_graycode(&d1.coords, &d2.coords, &rig, &mv, &cfg).unwrap();
    let gm = evaluate(&reference, &reference, &out.truth, 1.0).unwrap();
    println!("reference: {} points, rms {:.4}", reference.points.len(), gm.rms);

    let corrected = rig_with_grid(&rig, Some(Arc::new(report.grid.clone()))).unwrap();
    let (w, h) = d1.phase.dims();
    for (label, r) in [("corrected", &corrected), ("uncorrected", &rig)] {
        let cands = enumerate_all(&d1.phase, &d2.phase, r, &mv, &cfg).unwrap();
        for mode in [MatchMode::M1, MatchMode::M2] {
            for thr in [0.1, 0.04, 0.02, 0.01] {
                let p = MatchParams::new(thr * PI, mode).unwrap();
                let cloud = match_field(&cands, w, h, &cfg, &p).unwrap();
                let m = evaluate(&cloud, &reference, &out.truth, 1.0).unwrap();
                println!("{label} {mode} {thr}pi: com {:.2} fp {:.3} rms {:.4}", m.com, m.fp, m.rms);
            }
        }
    }
}
