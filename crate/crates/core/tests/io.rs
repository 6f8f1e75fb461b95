use fringefree::image::Image;
use fringefree::io::*;
use fringefree::projcal::DistortionGrid;
use fringefree::scenario::DeskSetup;
use fringefree::simulate::GroundTruth;
use fringefree::unwrap::MatchMode;
use nalgebra::{Point2, Point3, Vector2};
use proptest::prelude::*;

fn vertex() -> impl Strategy<Value = PlyVertex> {
    (
        (-1e4..1e4f64, -1e4..1e4f64, 0.0..2e3f64),
        (0.0..10.0f32, 0.0..1.0f32),
        (any::<u8>(), 0..4096u32, 0..4096u32),
    )
        .prop_map(|((x, y, z), (dst, r), (status, u, v))| PlyVertex {
            x,
            y,
            z,
            dst: dst as f64,
            phase_residual: r as f64,
            status,
            pixel_u: u,
            pixel_v: v,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pgm_16_bit_round_trip(w in 1usize..20, h in 1usize..20, seed in any::<u64>()) {
        let img = Image::from_fn(w, h, |x, y| ((x * 31 + y * 17) as u64 ^ seed) as f64 % 1000.0 / 999.0);
        let back = decode_pgm(&encode_pgm(&img, BitDepth::Sixteen)).unwrap();
        prop_assert_eq!(back.width(), w);
        prop_assert_eq!(back.height(), h);
        for (a, b) in img.data().iter().zip(back.data()) {
            prop_assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-12);
        }
    }

    #[test]
    fn pgm_decoder_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
        let _ = decode_pgm(&bytes);
        let mut framed = b"P5\n3 2\n255\n".to_vec();
        framed.extend_from_slice(&bytes);
        prop_assert_eq!(decode_pgm(&framed).is_ok(), bytes.len() >= 6);
    }

    #[test]
    fn ply_round_trip(vs in proptest::collection::vec(vertex(), 0..40)) {
        prop_assert_eq!(&decode_ply(&encode_ply(&vs, PlyFormat::BinaryLittleEndian)).unwrap(), &vs);
        prop_assert_eq!(&decode_ply(&encode_ply(&vs, PlyFormat::Ascii)).unwrap(), &vs);
    }

    #[test]
    fn ply_decoder_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
        let _ = decode_ply(&bytes);
        let mut framed = b"ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n".to_vec();
        framed.extend_from_slice(&bytes);
        prop_assert_eq!(decode_ply(&framed).is_ok(), bytes.len() >= 24);
    }

    #[test]
    fn ground_truth_round_trip(w in 1usize..12, h in 1usize..12, seed in any::<u32>()) {
        let n = w * h;
        let f = |k: usize| (k as u32).wrapping_mul(2654435761) ^ seed;
        let gt = GroundTruth {
            width: w,
            height: h,
            hits: (0..n)
                .map(|k| (f(k) % 5 != 0).then(|| Point3::new(k as f64 * 0.5, -(k as f64), 580.0 + (f(k) % 100) as f64 * 0.25)))
                .collect(),
            lit: (0..n).map(|k| f(k) & 1 == 1).collect(),
            visible_cam2: (0..n).map(|k| f(k) & 2 == 2).collect(),
        };
        prop_assert_eq!(decode_ground_truth(&encode_ground_truth(&gt)).unwrap(), gt);
    }

    #[test]
    fn ground_truth_decoder_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..128)) {
        let _ = decode_ground_truth(&bytes);
    }

    #[test]
    fn json_parsers_never_panic(text in "\\PC{0,200}") {
        let _ = parse_calib(&text);
        let _ = parse_sidecar(&text);
        let _ = grid_from_json(&text);
    }
}

#[test]
fn pgm_examples() {
    let img = decode_pgm(b"P5\n2 1\n65535\n\xff\xff\x80\x00").unwrap();
    assert_eq!(img.data()[0], 1.0);
    assert!((img.data()[1] - 32768.0 / 65535.0).abs() < 1e-15);
    assert!(decode_pgm(b"P5\n2 1\n0\n\x00\x00").is_err());
    assert!(decode_pgm(b"P5\n0 1\n255\n").is_err());
    assert!(decode_pgm(b"P2\n2 1\n3\n1 4\n").is_err());
    let bright = Image::from_fn(2, 2, |x, _| 2.0 * x as f64 - 0.5);
    let back = decode_pgm(&encode_pgm(&bright, BitDepth::Eight)).unwrap();
    assert_eq!(back.data(), &[0.0, 1.0, 0.0, 1.0]);
}

#[test]
fn ply_header_is_readable() {
    let bytes = encode_ply(&[PlyVertex::default()], PlyFormat::BinaryLittleEndian);
    let text = String::from_utf8_lossy(&bytes);
    for p in ["x", "y", "z", "dst", "phase_residual", "status"] {
        assert!(text.lines().any(|l| l.starts_with("property") && l.ends_with(&format!(" {p}"))), "{p}");
    }
    assert!(decode_ply(b"ply\nformat binary_big_endian 1.0\nelement vertex 0\nproperty float x\nend_header\n").is_err());
    assert!(decode_ply(b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nend_header\n1 2\n").is_err());
}

#[test]
fn calibration_with_grid_file() {
    let dir = tempfile::tempdir().unwrap();
    let rig = DeskSetup::default().rig();
    let (w, h) = (rig.projector.width(), rig.projector.height());
    let grid = DistortionGrid::from_fn(32.0, w, h, |p| Vector2::new(0.001 * p.x, -0.5));
    std::fs::create_dir(dir.path().join("grids")).unwrap();
    write_file(&dir.path().join("grids/proj.json"), grid_to_json(&grid).as_bytes()).unwrap();
    let calib = rig_to_calib(&rig, Some("grids/proj.json".into()));
    let path = dir.path().join("calib.json");
    write_file(&path, write_calib(&calib).as_bytes()).unwrap();

    let back = read_calib(&path).unwrap();
    let g = back.projector.grid().expect("grid loaded");
    assert_eq!(**g, grid);
    let px = Point2::new(100.0, 200.0);
    let d = g.sample(&px);
    assert!((d - Vector2::new(0.1, -0.5)).norm() < 1e-12);
    assert!(!rig.projector.back_project(&px).unwrap().direction.relative_eq(
        &back.projector.back_project(&px).unwrap().direction,
        1e-12,
        1e-12
    ));

    std::fs::remove_file(dir.path().join("grids/proj.json")).unwrap();
    assert!(matches!(read_calib(&path), Err(IoError::File { .. })));
    assert!(matches!(read_calib(&dir.path().join("nope.json")), Err(IoError::File { .. })));
}

#[test]
fn calibration_rejects_bad_devices() {
    let rig = DeskSetup::default().rig();
    let mut calib = rig_to_calib(&rig, None);
    calib.cam1.pose.rotation = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0];
    assert!(calib.rig_without_grids().is_err());
    let mut calib = rig_to_calib(&rig, None);
    calib.cam2.distortion_grid = Some("g.json".into());
    assert!(calib.rig_without_grids().is_err());
    let mut calib = rig_to_calib(&rig, None);
    calib.cam2 = calib.cam1.clone();
    assert!(calib.rig_without_grids().is_err());
    assert!(matches!(parse_calib("{"), Err(IoError::Json(_))));
}

#[test]
fn grid_files_are_validated() {
    let grid = DistortionGrid::from_fn(32.0, 64, 64, |_| Vector2::new(0.5, 0.25));
    let text = grid_to_json(&grid);
    assert_eq!(grid_from_json(&text).unwrap(), grid);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let mut short = v.clone();
    short["values"].as_array_mut().unwrap().pop();
    assert!(grid_from_json(&short.to_string()).is_err());
    let mut zero = v.clone();
    zero["spacing"] = 0.0.into();
    assert!(grid_from_json(&zero.to_string()).is_err());
    let mut tag = v;
    tag["format"] = "grid/0".into();
    assert!(grid_from_json(&tag.to_string()).is_err());
}

#[test]
fn sidecar_examples() {
    let text = r#"{"format": "fringefree-stack/1", "steps": 4, "period_px": 16, "fringe_count": 40,
        "width": 640, "height": 480, "bit_depth": 8,
        "frames": ["f0.pgm", "f1.pgm", "f2.pgm", "f3.pgm"], "graycode": ["g0.pgm"]}"#;
    let s = parse_sidecar(text).unwrap();
    let cfg = s.fringe_config().unwrap();
    assert_eq!((cfg.steps, cfg.fringe_count), (4, 40));
    assert_eq!(s.graycode.len(), 1);
    assert!(parse_sidecar(&text.replace("\"bit_depth\": 8", "\"bit_depth\": 12")).is_err());
    assert!(parse_sidecar(&text.replace("\"steps\": 4", "\"steps\": 2")).is_err());
    assert!(parse_sidecar(&text.replace("\"period_px\": 16", "\"period_px\": -1")).is_err());
}

#[test]
fn sweep_csv_round_trips_through_a_reader() {
    let rows: Vec<SweepRow> = [0.1, 0.01]
        .iter()
        .map(|&t| SweepRow {
            label: "stump".into(),
            mode: MatchMode::M2,
            thr_pi: t,
            com: 99.5,
            fp: 0.25,
            rms: 0.03,
            points: 1234,
        })
        .collect();
    let mut buf = Vec::new();
    write_sweep_csv(&mut buf, &rows).unwrap();
    let mut r = csv::Reader::from_reader(buf.as_slice());
    let got: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(got.len(), 2);
    assert_eq!(&got[1][1], "m2");
    assert_eq!(got[1][2].parse::<f64>().unwrap(), 0.01);
    assert_eq!(got[0][6].parse::<usize>().unwrap(), 1234);
}

#[test]
fn fuzz_seeds_decode() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus");
    let seeds = |target: &str| -> Vec<Vec<u8>> {
        let mut files: Vec<_> = std::fs::read_dir(root.join(target)).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        assert!(!files.is_empty(), "{target}");
        files.iter().map(|p| std::fs::read(p).unwrap()).collect()
    };
    let text = |b: &[u8]| String::from_utf8(b.to_vec()).unwrap();
    for b in seeds("pgm_decode") {
        decode_pgm(&b).unwrap();
    }
    for b in seeds("ply_read") {
        assert!(!decode_ply(&b).unwrap().is_empty());
    }
    for b in seeds("calib_json") {
        parse_calib(&text(&b)).unwrap();
    }
    for b in seeds("grid_json") {
        grid_from_json(&text(&b)).unwrap();
    }
    for b in seeds("sidecar_json") {
        parse_sidecar(&text(&b)).unwrap().fringe_config().unwrap();
    }
    for b in seeds("ground_truth") {
        decode_ground_truth(&b).unwrap();
    }
    for b in seeds("thr_list") {
        fringefree::unwrap::parse_thr_list(&text(&b)).unwrap();
    }
}
