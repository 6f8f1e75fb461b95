use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use fringefree::correspond::SensorRig;
use fringefree::geometry::{LensDistortion, PinholeDevice};
use fringefree::projcal::*;
use fringefree::scenario::DeskSetup;
use fringefree::simulate::{rig_with_grid, RenderConfig, SimulatedSensor};
use nalgebra::{Point2, Point3, Rotation2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;

const K1: f64 = 0.05;

/// Point seen by `cam` at pixel `px` at the given axial depth.
fn point_at_depth(cam: &PinholeDevice, px: Point2<f64>, depth: f64) -> Point3<f64> {
    let ray = cam.back_project(&px).unwrap();
    ray.origin + ray.direction * (depth / cam.depth_of(&(ray.origin + ray.direction)))
}

/// Radial-only projection written out by hand: `x = c + f n (1 + k1 |n|^2)`.
fn radial_projection(proj: &PinholeDevice, p: &Point3<f64>, k1: f64) -> Point2<f64> {
    let q = proj.pose().to_device(p);
    let k = proj.intrinsics();
    let (nx, ny) = (q.x / q.z, q.y / q.z);
    let s = 1.0 + k1 * (nx * nx + ny * ny);
    Point2::new(k.cx + k.fx * nx * s, k.cy + k.fy * ny * s)
}

/// Plane measurement with exact points and projector coordinates produced
/// by `observe`.
fn synthetic_plane(
    rig: &SensorRig,
    label: PlaneLabel,
    depth: f64,
    step: usize,
    observe: impl Fn(&Point3<f64>) -> Point2<f64>,
) -> PlaneMeasurement {
    let mut m = PlaneMeasurement {
        label,
        depth,
        pixels: Vec::new(),
        cc_points: Vec::new(),
        measured_x: Vec::new(),
        measured_y: Some(Vec::new()),
        c2_points: None,
    };
    for y in (0..rig.cam1.height()).step_by(step) {
        for x in (0..rig.cam1.width()).step_by(step) {
            let p = point_at_depth(&rig.cam1, Point2::new(x as f64, y as f64), depth);
            let q = observe(&p);
            if !(0.0..rig.projector.width() as f64).contains(&q.x) || !(0.0..rig.projector.height() as f64).contains(&q.y) {
                continue;
            }
            m.pixels.push([x as u32, y as u32]);
            m.cc_points.push(p);
            m.measured_x.push(q.x);
            m.measured_y.as_mut().unwrap().push(q.y);
        }
    }
    m
}

/// Nodes whose eight neighbors are all measured, so their weighted mean
/// sees samples on every side.
fn interior_nodes(g: &DistortionGrid) -> Vec<bool> {
    let (nx, ny) = g.dims();
    let measured = |i: usize, j: usize| !g.extrapolated()[j * nx + i];
    let mut out = vec![false; nx * ny];
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            out[j * nx + i] = (j - 1..=j + 1).all(|b| (i - 1..=i + 1).all(|a| measured(a, b)));
        }
    }
    out
}

/// Whether all four corners of the cell holding `p` are interior nodes.
fn in_interior_cell(g: &DistortionGrid, interior: &[bool], p: &Point2<f64>) -> bool {
    let (nx, ny) = g.dims();
    let i = ((p.x - g.origin().x) / g.spacing()).floor();
    let j = ((p.y - g.origin().y) / g.spacing()).floor();
    if i < 0.0 || j < 0.0 || i as usize + 1 >= nx || j as usize + 1 >= ny {
        return false;
    }
    let (i, j) = (i as usize, j as usize);
    interior[j * nx + i] && interior[j * nx + i + 1] && interior[(j + 1) * nx + i] && interior[(j + 1) * nx + i + 1]
}

fn sensor(setup: &DeskSetup, rc: RenderConfig) -> SimulatedSensor {
    SimulatedSensor::new(setup.rig(), setup.fringe_config(), rc)
}

#[test]
fn exact_model_leaves_no_residual() {
    let setup = DeskSetup::with_camera_scale(0.5);
    let rig = setup.rig();
    let mv = setup.volume();
    let rc = RenderConfig {
        enable_second_direction: true,
        ..setup.render_config(0.0, 1)
    };
    let report = calibrate_projector(&rig, &mv, &setup.fringe_config(), &sensor(&setup, rc), DEFAULT_GRID_SPACING_PX)
        .unwrap();
    assert!(report.residuals_before.mean < 1e-3, "{:?}", report.residuals_before);
    assert!(report.residuals_before.count > 10_000);
    assert!(report.cpd_before < 1e-2, "{}", report.cpd_before);
    assert!(report.max_node < NEGLIGIBLE_CORRECTION_PX, "{}", report.max_node);
    assert!(!report.correction_needed());
    let e = report.delta_e.unwrap();
    assert!(e.mean < 1e-2, "{e:?}");
}

#[test]
fn radial_lens_error_is_measured() {
    let setup = DeskSetup::with_camera_scale(0.5);
    let rig = setup.rig();
    let mv = setup.volume();
    let cfg = setup.fringe_config();
    let rc = RenderConfig {
        injected_projector_distortion: LensDistortion::radial(K1),
        ..setup.render_config(0.0, 2)
    };
    let planes = measure_planes(&rig, &mv, &cfg, &sensor(&setup, rc)).unwrap();
    let mut per_plane = Vec::new();
    for plane in &planes {
        let residuals = compute_residuals(plane, &rig).unwrap();
        let mut worst = 0.0f64;
        for (r, p) in residuals.iter().zip(&plane.cc_points) {
            let expected = r.ideal.x - radial_projection(&rig.projector, p, K1).x;
            worst = worst.max((r.d.x - expected).abs());
        }
        assert!(worst < 0.05, "{:?}: {worst}", plane.label);
        per_plane.push(residuals);
    }
    // The error lives on the projector chip, so near and far plates agree
    // wherever they light the same projector pixels.
    let mut far_cells: HashMap<(i64, i64), Vec<&Residual>> = HashMap::new();
    for r in &per_plane[2] {
        far_cells.entry((r.ideal.x.floor() as i64, r.ideal.y.floor() as i64)).or_default().push(r);
    }
    let mut compared = 0;
    for r in &per_plane[0] {
        let (cx, cy) = (r.ideal.x.floor() as i64, r.ideal.y.floor() as i64);
        for dy in -1..=1 {
            for dx in -1..=1 {
                for f in far_cells.get(&(cx + dx, cy + dy)).into_iter().flatten() {
                    if (f.ideal - r.ideal).norm() < 0.5 {
                        compared += 1;
                        assert!((f.d.x - r.d.x).abs() < 0.1, "{}: {} vs {}", r.ideal, r.d.x, f.d.x);
                    }
                }
            }
        }
    }
    assert!(compared > 1000, "{compared}");
}

#[test]
fn principal_point_shift_is_a_constant_correction() {
    let setup = DeskSetup::with_camera_scale(0.5);
    let rig = setup.rig();
    let rc = RenderConfig {
        injected_principal_point_shift: [1.0, 0.0],
        enable_second_direction: true,
        ..setup.render_config(0.0, 3)
    };
    let report = calibrate_projector(&rig, &setup.volume(), &setup.fringe_config(), &sensor(&setup, rc), DEFAULT_GRID_SPACING_PX)
        .unwrap();
    let g = &report.grid;
    for (v, &s) in g.values().iter().zip(g.support()) {
        if s >= 4 {
            assert!((v - Vector2::new(-1.0, 0.0)).norm() < 0.02, "{v}");
        }
    }
    assert!(report.residuals_after.mean < 0.02, "{:?}", report.residuals_after);
    assert!(report.correction_needed());
}

#[test]
fn grid_reproduces_a_linear_field() {
    let field = |p: &Point2<f64>| Vector2::new(0.002 * p.x - 0.5, -0.001 * p.y + 0.0005 * p.x);
    // A lattice symmetric about every node: the weighted mean of a linear
    // field is then the field's value at the node.
    let residuals: Vec<Residual> = (0..=120)
        .flat_map(|j| (0..=160).map(move |i| Point2::new(i as f64 * 4.0, j as f64 * 4.0)))
        .map(|ideal| Residual { ideal, d: field(&ideal) })
        .collect();
    let g = build_grid(&residuals, 32.0, 640, 480, DirectionCoverage::Both).unwrap();
    assert_eq!(g.dims(), (21, 16));
    for j in 0..16 {
        for i in 0..21 {
            let p = g.node_position(i, j);
            if p.x <= 640.0 && p.y <= 480.0 {
                assert!(g.support()[j * 21 + i] > 0);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    // Border nodes only see samples on one side.
    for _ in 0..1000 {
        let p = Point2::new(rng.random_range(32.0..608.0), rng.random_range(32.0..448.0));
        assert!((g.sample(&p) - field(&p)).norm() < 1e-9, "{p}");
    }
    let x_only = build_grid(&residuals, 32.0, 640, 480, DirectionCoverage::XOnly).unwrap();
    assert!(x_only.values().iter().all(|v| v.y == 0.0));
}

#[test]
fn radial_grid_interpolates_the_lens() {
    let setup = DeskSetup::default();
    let rig = setup.rig();
    let mv = setup.volume();
    let planes: Vec<_> = PlaneLabel::ALL
        .iter()
        .map(|&l| synthetic_plane(&rig, l, l.depth(&mv), 4, |p| radial_projection(&rig.projector, p, K1)))
        .collect();
    let residuals: Vec<Residual> = planes.iter().flat_map(|p| compute_residuals(p, &rig).unwrap()).collect();
    let g = build_grid(&residuals, DEFAULT_GRID_SPACING_PX, 640, 480, DirectionCoverage::Both).unwrap();
    let truth = |p: &Point3<f64>| rig.projector.project_pinhole(p).unwrap() - radial_projection(&rig.projector, p, K1);
    let interior = interior_nodes(&g);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    let mut checked = 0;
    while checked < 1000 {
        let l = PlaneLabel::ALL[rng.random_range(0..3)];
        let px = Point2::new(rng.random_range(0.0..639.0), rng.random_range(0.0..479.0));
        let p = point_at_depth(&rig.cam1, px, l.depth(&mv));
        let ideal = rig.projector.project_lens_only(&p).unwrap();
        if !in_interior_cell(&g, &interior, &ideal) {
            continue;
        }
        checked += 1;
        worst = worst.max((g.sample(&ideal) - truth(&p)).norm());
    }
    assert!(worst < 0.1, "{worst}");
}

#[test]
fn synthetic_shift_gives_minus_one() {
    let setup = DeskSetup::default();
    let rig = setup.rig();
    let mv = setup.volume();
    let plane = synthetic_plane(&rig, PlaneLabel::Center, PlaneLabel::Center.depth(&mv), 8, |p| {
        rig.projector.project(p).unwrap() + Vector2::new(1.0, 0.0)
    });
    for r in compute_residuals(&plane, &rig).unwrap() {
        assert!((r.d - Vector2::new(-1.0, 0.0)).norm() < 1e-9);
    }
}

#[test]
fn grid_nodes_are_exact() {
    let f = |p: &Point2<f64>| Vector2::new((p.x * 0.01).sin(), (p.y * 0.02).cos());
    let g = DistortionGrid::from_fn(16.0, 100, 60, f);
    let (nx, ny) = g.dims();
    assert_eq!((nx, ny), (8, 5));
    for j in 0..ny {
        for i in 0..nx {
            let p = g.node_position(i, j);
            assert_eq!(g.sample(&p), f(&p));
        }
    }
    let doubled = g.accumulate(&g);
    assert_eq!(doubled.node(3, 2), g.node(3, 2) * 2.0);
}

#[test]
fn epipolar_error_examples() {
    let rig = common::rectified_rig(100.0, 50.0);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let exact: Vec<(Point2<f64>, Point2<f64>)> = (0..4000)
        .map(|_| {
            let p1 = Point2::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0));
            let p = point_at_depth(&rig.cam1, p1, rng.random_range(500.0..700.0));
            (p1, rig.cam2.project(&p).unwrap())
        })
        .collect();
    assert!(epipolar_line_error(&rig, &exact).unwrap().max < 1e-9);

    let jittered: Vec<_> = exact
        .iter()
        .map(|(a, b)| (*a, b + Vector2::new(0.0, rng.random_range(-0.5..0.5))))
        .collect();
    let e = epipolar_line_error(&rig, &jittered).unwrap();
    assert!((e.mean - 0.25).abs() < 0.01, "{e:?}");
    assert!(e.max <= 0.5);

    // Camera 2 rolled by 0.1 degrees about its axis after calibration.
    let roll = Rotation2::new(0.1 * PI / 180.0);
    let c = Vector2::new(320.0, 240.0);
    let rolled: Vec<_> = exact
        .iter()
        .map(|(a, b)| (*a, Point2::from(roll * (b.coords - c) + c)))
        .collect();
    let expected = rolled.iter().zip(&exact).map(|((_, r), (_, b))| (r.y - b.y).abs()).sum::<f64>() / exact.len() as f64;
    let e = epipolar_line_error(&rig, &rolled).unwrap();
    assert!((e.mean - expected).abs() < 1e-6 * expected.max(1.0), "{} vs {expected}", e.mean);
    assert!(e.mean > 0.2);
    assert!(epipolar_line_error(&rig, &[]).is_err());
}

#[test]
fn calibration_removes_injected_error_and_is_idempotent() {
    let setup = DeskSetup::with_camera_scale(0.5);
    let rig = setup.rig();
    let mv = setup.volume();
    let cfg = setup.fringe_config();
    let rc = RenderConfig {
        enable_second_direction: true,
        ..setup.miscalibrated_render_config(0.005, 11)
    };
    let source = sensor(&setup, rc);
    let first = calibrate_projector(&rig, &mv, &cfg, &source, DEFAULT_GRID_SPACING_PX).unwrap();
    assert!(first.cpd_after <= first.cpd_before / 3.0, "{} -> {}", first.cpd_before, first.cpd_after);
    assert!(first.residuals_after.mean < first.residuals_before.mean / 3.0);
    let e = first.delta_e.unwrap();
    assert!(e.mean < 0.1, "{e:?}");

    let corrected = rig_with_grid(&rig, Some(Arc::new(first.grid.clone()))).unwrap();
    let second = calibrate_projector(&corrected, &mv, &cfg, &source, DEFAULT_GRID_SPACING_PX).unwrap();
    assert!(
        second.residuals_before.mean < 0.25 * first.residuals_before.mean,
        "{} vs {}",
        second.residuals_before.mean,
        first.residuals_before.mean
    );
    assert!(second.cpd_before < 0.25 * first.cpd_before);
}
