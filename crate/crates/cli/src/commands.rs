use std::path::Path;

use fringefree::correspond::{predict_candidate_count, CandidateSet};
use fringefree::image::Image;
use fringefree::io::{
    encode_pgm, encode_ply, grid_to_json, rig_to_calib, write_calib, write_file, write_sweep_csv,
    BitDepth, IoError, PlyFormat, PlyVertex, SweepRow,
};
use fringefree::phase::FringeConfig;
use fringefree::projcal::{
    calibrate_projector, epipolar_line_error, measure_capture, CalibrationReport, PlaneCapture,
    PlaneLabel, PlaneSource, DEFAULT_GRID_SPACING_PX,
};
use fringefree::simulate::{
    evaluate, render, second_direction, GroundTruth, Metrics, SimulatedSensor,
    DEFAULT_TRUE_POINT_TOL_MM,
};
use fringefree::unwrap::{
    enumerate_all, format_thr, match_field, reconstruct_graycode, MatchMode, MatchParams,
    MatchedPoint, PixelStatus, Reconstruction,
};
use nalgebra::Point2;
use serde::Serialize;
use serde_json::json;

use crate::config::{CliError, PlaneDirs, RunConfig};
use crate::stacks::{
    create_dir, decode, has_camera, read_camera, read_ground_truth, write_camera,
    write_ground_truth, Decoded, GROUND_TRUTH_FILE,
};

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    write_file(path, text.as_bytes())?;
    Ok(())
}

fn missing(path: &Path) -> CliError {
    CliError::Io(IoError::File {
        path: path.display().to_string(),
        source: std::io::ErrorKind::NotFound.into(),
    })
}

pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let scene = cfg
        .scene
        .as_ref()
        .ok_or_else(|| CliError::Config("simulate needs a \"scene\" file".into()))?;
    let out = render(scene, &cfg.rig, &cfg.fringes, &cfg.render).map_err(CliError::numerical)?;
    let cfg_y = if cfg.render.enable_second_direction {
        Some(second_direction(&cfg.fringes, &cfg.rig.projector).map_err(CliError::numerical)?)
    } else {
        None
    };
    create_dir(&cfg.out)?;
    write_camera(&cfg.out, "cam1", &out.cam1, &cfg.fringes, cfg_y.as_ref(), cfg.bit_depth)?;
    write_camera(&cfg.out, "cam2", &out.cam2, &cfg.fringes, cfg_y.as_ref(), cfg.bit_depth)?;
    write_ground_truth(&cfg.out, &out.truth)?;

    let gt = &out.truth;
    let hits = gt.hit_count();
    let shadowed = gt.shadowed_count();
    let occluded = gt
        .hits
        .iter()
        .zip(&gt.visible_cam2)
        .filter(|(h, &v)| h.is_some() && !v)
        .count();
    let frac = |n: usize| if hits > 0 { n as f64 / hits as f64 } else { 0.0 };
    write_json(
        &cfg.out.join("simulation.json"),
        &json!({
            "label": cfg.label,
            "seed": cfg.seed,
            "width": gt.width,
            "height": gt.height,
            "surface_hits": hits,
            "shadowed": shadowed,
            "shadowed_fraction": frac(shadowed),
            "occluded_from_cam2": occluded,
            "second_direction": cfg_y.is_some(),
        }),
    )?;
    println!(
        "{}: camera 1 {}x{} px, {hits} on the surface, {shadowed} shadowed ({:.2}%), {occluded} hidden from camera 2",
        cfg.label,
        gt.width,
        gt.height,
        100.0 * frac(shadowed)
    );
    println!("stacks written to {}", cfg.out.display());
    Ok(())
}

/// Plates captured beforehand, one stack directory per plane.
struct CapturedPlanes<'a> {
    cfg: &'a RunConfig,
    dirs: &'a PlaneDirs,
}

impl PlaneSource for CapturedPlanes<'_> {
    fn capture_plane(&self, depth: f64) -> Result<PlaneCapture, String> {
        let mv = &self.cfg.volume;
        let label = PlaneLabel::ALL
            .into_iter()
            .find(|l| (l.depth(mv) - depth).abs() < 1e-9)
            .ok_or_else(|| format!("no plate captured at depth {depth}"))?;
        let dir = match label {
            PlaneLabel::Near => &self.dirs.near,
            PlaneLabel::Center => &self.dirs.center,
            PlaneLabel::Far => &self.dirs.far,
        };
        let load = |camera: &str| -> Result<Decoded, String> {
            let rec = read_camera(dir, camera).map_err(|e| e.to_string())?;
            if rec.x.cfg != self.cfg.fringes {
                return Err(format!("{}: fringe settings differ from the run config", dir.display()));
            }
            decode(&rec, &self.cfg.matching).map_err(|e| e.to_string())
        };
        let (d1, d2) = (load("cam1")?, load("cam2")?);
        let no_code = || format!("{}: plates need Gray-code frames", dir.display());
        Ok(PlaneCapture {
            x1: d1.coords.ok_or_else(no_code)?,
            x2: d2.coords.ok_or_else(no_code)?,
            y: d1.coords_y.zip(d2.coords_y),
        })
    }
}

fn report_json(report: &CalibrationReport) -> serde_json::Value {
    let per_plane: Vec<_> = report
        .per_plane
        .iter()
        .map(|(label, s)| json!({"plane": label, "mean_px": s.mean, "max_px": s.max, "count": s.count}))
        .collect();
    json!({
        "cpd_mn_before_mm": report.cpd_before,
        "cpd_mn_after_mm": report.cpd_after,
        "residuals_before_px": report.residuals_before,
        "residuals_after_px": report.residuals_after,
        "per_plane": per_plane,
        "delta_e_px": report.delta_e,
        "max_node_px": report.max_node,
        "correction_needed": report.correction_needed(),
        "grid_spacing_px": report.grid.spacing(),
    })
}

pub fn calibrate_projector_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let report = match &cfg.planes {
        Some(dirs) => {
            for dir in [&dirs.near, &dirs.center, &dirs.far] {
                for camera in ["cam1", "cam2"] {
                    if !has_camera(dir, camera) {
                        return Err(missing(&dir.join(camera).join("stack.json")));
                    }
                }
            }
            let source = CapturedPlanes { cfg, dirs };
            calibrate_projector(&cfg.rig, &cfg.volume, &cfg.fringes, &source, DEFAULT_GRID_SPACING_PX)
        }
        None => {
            let sensor = SimulatedSensor::new(cfg.rig.clone(), cfg.fringes, cfg.render);
            calibrate_projector(&cfg.rig, &cfg.volume, &cfg.fringes, &sensor, DEFAULT_GRID_SPACING_PX)
        }
    }
    .map_err(CliError::numerical)?;

    create_dir(&cfg.out)?;
    write_file(&cfg.out.join("grid.json"), grid_to_json(&report.grid).as_bytes())?;
    let calib = rig_to_calib(&report.rig, Some("grid.json".into()));
    write_file(&cfg.out.join("calib.json"), write_calib(&calib).as_bytes())?;
    write_json(&cfg.out.join("calibration_report.json"), &report_json(&report))?;

    println!(
        "cpd_mn {:.4} -> {:.4} mm over three plates",
        report.cpd_before, report.cpd_after
    );
    println!(
        "projector residual mean {:.4} -> {:.4} px ({} samples)",
        report.residuals_before.mean, report.residuals_after.mean, report.residuals_before.count
    );
    if let Some(e) = report.delta_e {
        println!("delta E mean {:.4} px, max {:.4} px", e.mean, e.max);
    }
    if report.correction_needed() {
        println!("correction grid written, largest node {:.4} px", report.max_node);
    } else {
        println!("no correction needed (largest node {:.1e} px)", report.max_node);
    }
    Ok(())
}

/// Decoded maps of both cameras plus the settings they were recorded with.
struct Capture {
    fringes: FringeConfig,
    d1: Decoded,
    d2: Decoded,
    dims: (usize, usize),
}

fn load_capture(cfg: &RunConfig) -> Result<Capture, CliError> {
    for camera in ["cam1", "cam2"] {
        if !has_camera(&cfg.stacks, camera) {
            return Err(missing(&cfg.stacks.join(camera).join("stack.json")));
        }
    }
    let r1 = read_camera(&cfg.stacks, "cam1")?;
    let r2 = read_camera(&cfg.stacks, "cam2")?;
    if r1.x.cfg != r2.x.cfg {
        return Err(CliError::Io(IoError::Format {
            what: "image stack",
            reason: "camera 1 and camera 2 sidecars describe different fringes".into(),
        }));
    }
    let d1 = decode(&r1, &cfg.matching)?;
    let d2 = decode(&r2, &cfg.matching)?;
    let dims = d1.phase.dims();
    Ok(Capture {
        fringes: r1.x.cfg,
        d1,
        d2,
        dims,
    })
}

fn candidates(cfg: &RunConfig, cap: &Capture) -> Result<Vec<Option<CandidateSet>>, CliError> {
    enumerate_all(&cap.d1.phase, &cap.d2.phase, &cfg.rig, &cfg.volume, &cap.fringes)
        .map_err(CliError::numerical)
}

fn run_match(
    cfg: &RunConfig,
    cap: &Capture,
    cands: &[Option<CandidateSet>],
    thr: f64,
    mode: MatchMode,
) -> Result<Reconstruction, CliError> {
    let p = MatchParams::new(thr, mode).map_err(|e| CliError::Config(e.to_string()))?;
    let mut r = match_field(cands, cap.dims.0, cap.dims.1, &cap.fringes, &p).map_err(CliError::numerical)?;
    if let Some((radius, k)) = cfg.matching.outlier_filter {
        r.filter_outliers(radius, k).map_err(CliError::numerical)?;
    }
    Ok(r)
}

fn graycode_reference(cfg: &RunConfig, cap: &Capture) -> Result<Option<Reconstruction>, CliError> {
    match (&cap.d1.coords, &cap.d2.coords) {
        (Some(c1), Some(c2)) => reconstruct_graycode(c1, c2, &cfg.rig, &cfg.volume, &cap.fringes)
            .map(Some)
            .map_err(CliError::numerical),
        _ => Ok(None),
    }
}

fn mean_dst(points: &[MatchedPoint]) -> Option<f64> {
    (!points.is_empty()).then(|| points.iter().map(|p| p.dst).sum::<f64>() / points.len() as f64)
}

fn vertices(r: &Reconstruction) -> Vec<PlyVertex> {
    r.points
        .iter()
        .map(|p| PlyVertex {
            x: p.point.x,
            y: p.point.y,
            z: p.point.z,
            dst: p.dst,
            phase_residual: p.phase_residual,
            status: PixelStatus::Matched.code(),
            pixel_u: p.pixel[0],
            pixel_v: p.pixel[1],
        })
        .collect()
}

/// Status codes as an 8-bit image: gray level `k` is status code `k`.
fn status_image(r: &Reconstruction) -> Image {
    let (w, h) = r.dims();
    Image::from_fn(w, h, |x, y| r.status_at(x, y).code() as f64 / 255.0)
}

fn status_counts(r: &Reconstruction) -> serde_json::Value {
    json!({
        "matched": r.count(PixelStatus::Matched),
        "no_candidates": r.count(PixelStatus::NoCandidates),
        "all_rejected": r.count(PixelStatus::AllRejected),
        "invalid_phase": r.count(PixelStatus::InvalidPhase),
        "filtered": r.count(PixelStatus::Filtered),
    })
}

fn score(
    r: &Reconstruction,
    reference: Option<&Reconstruction>,
    gt: Option<&GroundTruth>,
) -> Result<Option<Metrics>, CliError> {
    match (reference, gt) {
        (Some(reference), Some(gt)) if !reference.points.is_empty() => {
            evaluate(r, reference, gt, DEFAULT_TRUE_POINT_TOL_MM)
                .map(Some)
                .map_err(CliError::numerical)
        }
        _ => Ok(None),
    }
}

pub fn reconstruct_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let cap = load_capture(cfg)?;
    let cands = candidates(cfg, &cap)?;
    let thr = cfg.matching.thr[0];
    let mode = cfg.matching.mode;
    if cfg.matching.thr.len() > 1 {
        eprintln!("reconstruct uses the first threshold, {}", format_thr(thr));
    }
    let r = run_match(cfg, &cap, &cands, thr, mode)?;
    let reference = graycode_reference(cfg, &cap)?;
    let gt = read_ground_truth(&cfg.stacks)?;

    create_dir(&cfg.out)?;
    write_file(&cfg.out.join("cloud.ply"), &encode_ply(&vertices(&r), PlyFormat::BinaryLittleEndian))?;
    write_file(&cfg.out.join("status.pgm"), &encode_pgm(&status_image(&r), BitDepth::Eight))?;
    if let Some(reference) = &reference {
        write_file(
            &cfg.out.join("reference.ply"),
            &encode_ply(&vertices(reference), PlyFormat::BinaryLittleEndian),
        )?;
    }
    let metrics = score(&r, reference.as_ref(), gt.as_ref())?;
    let cc: usize = cands.iter().flatten().map(|s| s.cc.len()).sum();
    let cp: usize = cands.iter().flatten().map(|s| s.cp.len()).sum();
    let valid = cands.iter().flatten().count().max(1);
    write_json(
        &cfg.out.join("metrics.json"),
        &json!({
            "label": cfg.label,
            "mode": mode,
            "thr": thr,
            "thr_pi": thr / std::f64::consts::PI,
            "outlier_filter": cfg.matching.outlier_filter.is_some(),
            "points": r.points.len(),
            "pixels": status_counts(&r),
            "cpd_mn": mean_dst(&r.points),
            "mean_cc_candidates": cc as f64 / valid as f64,
            "mean_cp_candidates": cp as f64 / valid as f64,
            "reference_points": reference.as_ref().map(|g| g.points.len()),
            "com": metrics.map(|m| m.com),
            "fp": metrics.map(|m| m.fp),
            "rms": metrics.map(|m| m.rms),
        }),
    )?;
    println!(
        "{} points ({mode}, thr {}), {} pixels without a match",
        r.points.len(),
        format_thr(thr),
        r.status.len() - r.count(PixelStatus::Matched)
    );
    if let Some(g) = &reference {
        println!("Gray-code reference: {} points", g.points.len());
    }
    if let Some(m) = metrics {
        println!("com {:.2}%, fp {:.3}%, rms {:.4} mm", m.com, m.fp, m.rms);
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepEntry {
    mode: MatchMode,
    thr: String,
    com: f64,
    fp: f64,
    rms: f64,
    points: usize,
    true_points: usize,
    false_points: usize,
    cpd_mn: Option<f64>,
}

pub fn evaluate_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let cap = load_capture(cfg)?;
    let gt = read_ground_truth(&cfg.stacks)?.ok_or_else(|| missing(&cfg.stacks.join(GROUND_TRUTH_FILE)))?;
    let reference = graycode_reference(cfg, &cap)?
        .ok_or_else(|| CliError::Config("evaluate needs Gray-code frames for the reference cloud".into()))?;
    if reference.points.is_empty() {
        return Err(CliError::Numerical("the Gray-code reference cloud is empty".into()));
    }
    let ref_metrics = evaluate(&reference, &reference, &gt, DEFAULT_TRUE_POINT_TOL_MM).map_err(CliError::numerical)?;
    let cands = candidates(cfg, &cap)?;

    let mut rows = Vec::new();
    let mut entries = Vec::new();
    for mode in [MatchMode::M1, MatchMode::M2] {
        for &thr in &cfg.matching.thr {
            let r = run_match(cfg, &cap, &cands, thr, mode)?;
            let m = evaluate(&r, &reference, &gt, DEFAULT_TRUE_POINT_TOL_MM).map_err(CliError::numerical)?;
            rows.push(SweepRow {
                label: cfg.label.clone(),
                mode,
                thr_pi: thr / std::f64::consts::PI,
                com: m.com,
                fp: m.fp,
                rms: m.rms,
                points: r.points.len(),
            });
            entries.push(SweepEntry {
                mode,
                thr: format_thr(thr),
                com: m.com,
                fp: m.fp,
                rms: m.rms,
                points: r.points.len(),
                true_points: m.true_points,
                false_points: m.false_points,
                cpd_mn: mean_dst(&r.points),
            });
        }
    }

    let delta_e = match (&cap.d1.coords, &cap.d2.coords, &cap.d1.coords_y, &cap.d2.coords_y) {
        (Some(x1), Some(x2), Some(y1), Some(y2)) => {
            let capture = PlaneCapture {
                x1: x1.clone(),
                x2: x2.clone(),
                y: Some((y1.clone(), y2.clone())),
            };
            let m = measure_capture(PlaneLabel::Center, 0.0, &capture, &cfg.rig, &cfg.volume, &cap.fringes)
                .map_err(CliError::numerical)?;
            let pairs: Vec<_> = m
                .pixels
                .iter()
                .zip(m.c2_points.iter().flatten())
                .filter_map(|(p, q)| q.map(|q| (Point2::new(p[0] as f64, p[1] as f64), q)))
                .collect();
            if pairs.is_empty() {
                None
            } else {
                Some(epipolar_line_error(&cfg.rig, &pairs).map_err(CliError::numerical)?)
            }
        }
        _ => None,
    };

    create_dir(&cfg.out)?;
    let mut csv = Vec::new();
    write_sweep_csv(&mut csv, &rows)?;
    write_file(&cfg.out.join("sweep.csv"), &csv)?;
    let n = cfg.matching.thr.len();
    let primary = &entries[if cfg.matching.mode == MatchMode::M1 { 0 } else { n }];
    write_json(
        &cfg.out.join("metrics.json"),
        &json!({
            "label": cfg.label,
            "mode": cfg.matching.mode,
            "thr": primary.thr,
            "com": primary.com,
            "fp": primary.fp,
            "rms": primary.rms,
            "cpd_mn": {"m1": entries[0].cpd_mn, "m2": entries[n].cpd_mn},
            "delta_e_px": delta_e,
            "outlier_filter": cfg.matching.outlier_filter.is_some(),
            "reference": ref_metrics,
            "per_thr": entries,
        }),
    )?;

    println!(
        "Gray-code reference: {} points, rms {:.4} mm",
        ref_metrics.reference_points, ref_metrics.rms
    );
    println!("{:<5}{:>10}{:>9}{:>9}{:>10}", "mode", "thr", "com %", "fp %", "rms mm");
    for e in &entries {
        println!("{:<5}{:>10}{:>9.2}{:>9.3}{:>10.4}", e.mode.to_string(), e.thr, e.com, e.fp, e.rms);
    }
    if let Some(e) = delta_e {
        println!("delta E mean {:.4} px over {} points", e.mean, e.count);
    }
    Ok(())
}

pub fn predict_candidates(cfg: &RunConfig) -> Result<(), CliError> {
    let observed = if has_camera(&cfg.stacks, "cam1") && has_camera(&cfg.stacks, "cam2") {
        let cap = load_capture(cfg)?;
        let cands = candidates(cfg, &cap)?;
        Some((cap.fringes, cands))
    } else {
        None
    };
    let n = observed.as_ref().map_or(cfg.fringes.fringe_count, |o| o.0.fringe_count);
    let b_cc = cfg.baseline_cc.unwrap_or_else(|| cfg.rig.baseline_cc());
    let b_cp = cfg.baseline_cp.unwrap_or_else(|| cfg.rig.baseline_cp());
    let predict = |b| predict_candidate_count(&cfg.volume, n, b).map_err(|e| CliError::Config(e.to_string()));
    let (n_cc, n_cp) = (predict(b_cc)?, predict(b_cp)?);
    println!("n_cc {n_cc}");
    println!("n_cp {n_cp}");
    let mv = &cfg.volume;
    println!(
        "from N = {n}, b_cc = {b_cc:.3} mm, b_cp = {b_cp:.3} mm, mvw = {} mm, mvd = {} mm, d_min = {} mm",
        mv.mvw, mv.mvd, mv.d_min
    );

    if let Some((_, cands)) = observed {
        let sets: Vec<&CandidateSet> = cands.iter().flatten().collect();
        let max_cc = sets.iter().map(|s| s.cc.len()).max().unwrap_or(0);
        let max_cp = sets.iter().map(|s| s.cp.len()).max().unwrap_or(0);
        let top = max_cc.max(max_cp);
        let mut hist = vec![(0usize, 0usize); top + 1];
        for s in &sets {
            hist[s.cc.len()].0 += 1;
            hist[s.cp.len()].1 += 1;
        }
        println!("observed candidates per pixel over {} valid pixels:", sets.len());
        println!("{:>6}{:>10}{:>10}", "count", "CC", "CP");
        for (k, (a, b)) in hist.iter().enumerate() {
            println!("{k:>6}{a:>10}{b:>10}");
        }
        println!("max observed: CC {max_cc} (predicted {n_cc}), CP {max_cp} (predicted {n_cp})");
    }
    Ok(())
}
