//! Renders a scene on the desk rig and prints a threshold sweep for both
//! matching modes next to the Gray-code reference.
//!
//! `cargo run --release --example stump_sweep -- [stump|heightfield] [camera_scale] [noise]`

use std::f64::consts::PI;
use std::time::Instant;

use fringefree::prelude::*;
use fringefree::simulate::decode_camera;
use fringefree::unwrap::{enumerate_all, match_field};

fn main() {
    let mut args = std::env::args().skip(1);
    let scene_name = args.next().unwrap_or_else(|| "stump".into());
    let scale: f64 = args.next().map(|s| s.parse().expect("scale")).unwrap_or(1.0);
    let noise: f64 = args.next().map(|s| s.parse().expect("noise")).unwrap_or(0.005);
    let setup = DeskSetup::with_camera_scale(scale);
    let rig = setup.rig();
    let cfg = setup.fringe_config();
    let mv = setup.volume();
    let scene = match scene_name.as_str() {
        "stump" => setup.stump(),
        "heightfield" => setup.heightfield(),
        other => panic!("unknown scene {other}"),
    };

    let t = Instant::now();
    let out = render(&scene, &rig, &cfg, &setup.render_config(noise, 7)).unwrap();
    println!("render {:.2?}", t.elapsed());

    let t = Instant::now();
    let decode = |c| decode_camera(c, &cfg, None, DEFAULT_MODULATION_THRESHOLD, DEFAULT_GRAYCODE_MIN_CONTRAST).unwrap();
    let (d1, d2) = (decode(&out.cam1), decode(&out.cam2));
    let reference = reconstruct_graycode(&d1.coords, &d2.coords, &rig, &mv, &cfg).unwrap();
    println!("decode + reference {:.2?}: {} points", t.elapsed(), reference.points.len());

    let t = Instant::now();
    let cands = enumerate_all(&d1.phase, &d2.phase, &rig, &mv, &cfg).unwrap();
    println!("candidates {:.2?}", t.elapsed());
    let (w, h) = d1.phase.dims();
    for mode in [MatchMode::M1, MatchMode::M2] {
        for thr in [0.1, 0.04, 0.02, 0.01] {
            let p = MatchParams::new(thr * PI, mode).unwrap();
            let cloud = match_field(&cands, w, h, &cfg, &p).unwrap();
            let m = evaluate(&cloud, &reference, &out.truth, 1.0).unwrap();
            println!("{mode} {thr}pi: com {:.2} fp {:.3} rms {:.4}", m.com, m.fp, m.rms);
        }
    }
}
