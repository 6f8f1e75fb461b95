//! Run configuration: one JSON file naming the rig, scene, render settings
//! and matching parameters. Relative paths resolve against the file's
//! directory.
//!
//! ```json
//! {
//!   "seed": 11,
//!   "calibration": "calib.json",
//!   "scene": "scenes/stump.json",
//!   "render": "render/miscalibrated.json",
//!   "match": {"mode": "m1", "thr": ["0.1pi", "0.04pi"], "outlier_filter": true},
//!   "stacks": "runs/stump",
//!   "out": "runs/stump/out"
//! }
//! ```
//!
//! Without `calibration` the built-in desk rig is used, shaped by `desk`.

use std::fmt;
use std::path::{Path, PathBuf};

use fringefree::correspond::{MeasurementVolume, SensorRig};
use fringefree::io::{read_calib, read_file, BitDepth, IoError};
use fringefree::phase::{
    FringeConfig, FringeOrientation, DEFAULT_GRAYCODE_MIN_CONTRAST, DEFAULT_MODULATION_THRESHOLD,
};
use fringefree::scenario::{DeskSetup, TARGET_DEPTH};
use fringefree::simulate::{RenderConfig, Scene};
use fringefree::unwrap::{
    parse_thr, MatchMode, DEFAULT_OUTLIER_MIN_NEIGHBORS, DEFAULT_OUTLIER_RADIUS_MM,
};
use nalgebra::Vector3;
use serde::Deserialize;

#[derive(Debug)]
pub enum CliError {
    /// Missing, unreadable or inconsistent configuration.
    Config(String),
    /// Reading image stacks or writing outputs failed.
    Io(IoError),
    /// The pipeline itself failed on valid input.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    pub fn numerical(e: impl fmt::Display) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Io(e)
    }
}

fn default_thr() -> Vec<String> {
    ["0.1pi", "0.04pi", "0.02pi", "0.01pi"].map(String::from).to_vec()
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatchSection {
    #[serde(default = "default_mode")]
    mode: MatchMode,
    #[serde(default = "default_thr")]
    thr: Vec<String>,
    #[serde(default = "yes")]
    outlier_filter: bool,
    #[serde(default)]
    outlier_radius_mm: Option<f64>,
    #[serde(default)]
    outlier_min_neighbors: Option<usize>,
    #[serde(default)]
    modulation_threshold: Option<f64>,
    #[serde(default)]
    graycode_min_contrast: Option<f64>,
}

fn default_mode() -> MatchMode {
    MatchMode::M1
}

impl Default for MatchSection {
    fn default() -> Self {
        Self {
            mode: default_mode(),
            thr: default_thr(),
            outlier_filter: true,
            outlier_radius_mm: None,
            outlier_min_neighbors: None,
            modulation_threshold: None,
            graycode_min_contrast: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    calibration: Option<PathBuf>,
    #[serde(default)]
    desk: DeskSetup,
    #[serde(default)]
    scene: Option<PathBuf>,
    #[serde(default)]
    render: Option<PathBuf>,
    #[serde(default)]
    fringes: Option<FringeConfig>,
    #[serde(default)]
    volume: Option<MeasurementVolume>,
    #[serde(default, rename = "match")]
    matching: MatchSection,
    #[serde(default)]
    stacks: Option<PathBuf>,
    #[serde(default)]
    out: Option<PathBuf>,
    /// Captured calibration plates, one stack directory per plane.
    #[serde(default)]
    planes: Option<PlaneDirs>,
    /// Baselines for the candidate-count estimate, overriding the rig's.
    #[serde(default)]
    baseline_cc_mm: Option<f64>,
    #[serde(default)]
    baseline_cp_mm: Option<f64>,
    #[serde(default)]
    bit_depth: Option<u8>,
}

/// Stack directories of the three captured calibration plates.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneDirs {
    pub near: PathBuf,
    pub center: PathBuf,
    pub far: PathBuf,
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub mode: Option<MatchMode>,
    pub thr: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub no_outlier_filter: bool,
}

#[derive(Debug, Clone)]
pub struct Matching {
    pub mode: MatchMode,
    /// Thresholds in radians, never empty.
    pub thr: Vec<f64>,
    /// Radius and neighbor count, when filtering is on.
    pub outlier_filter: Option<(f64, usize)>,
    pub modulation_threshold: f64,
    pub graycode_min_contrast: f64,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub label: String,
    pub seed: u64,
    pub rig: SensorRig,
    pub volume: MeasurementVolume,
    pub fringes: FringeConfig,
    /// Seeded from `seed`.
    pub render: RenderConfig,
    pub scene: Option<Scene>,
    pub matching: Matching,
    pub stacks: PathBuf,
    pub out: PathBuf,
    pub planes: Option<PlaneDirs>,
    pub baseline_cc: Option<f64>,
    pub baseline_cp: Option<f64>,
    pub bit_depth: BitDepth,
}

/// The desk rig, after checking the fields its constructors assume.
fn desk_rig(d: &DeskSetup) -> Result<SensorRig, CliError> {
    let ok = d.camera_scale > 0.0
        && d.camera_scale <= 4.0
        && d.half_baseline > 0.0
        && d.half_baseline.is_finite()
        && d.projector_focal > 0.0
        && d.projector_focal.is_finite()
        && d.projector_width > 1
        && d.projector_height > 1
        && d.projector_center.iter().all(|v| v.is_finite())
        && d.projector_center[2] < TARGET_DEPTH
        && [-d.half_baseline, d.half_baseline]
            .iter()
            .all(|&x| (Vector3::new(x, 0.0, 0.0) - Vector3::from(d.projector_center)).norm() > 1e-6);
    if !ok {
        return Err(CliError::Config(format!("desk setup does not form a valid rig: {d:?}")));
    }
    Ok(d.rig())
}

fn read_text(what: &str, path: &Path) -> Result<String, CliError> {
    let bytes = read_file(path).map_err(|e| CliError::Config(format!("{what} file {e}")))?;
    String::from_utf8(bytes)
        .map_err(|_| CliError::Config(format!("{what} file {}: not UTF-8", path.display())))
}

fn parse_json<T: serde::de::DeserializeOwned>(what: &str, path: &Path) -> Result<T, CliError> {
    let text = read_text(what, path)?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{what} file {}: {e}", path.display())))
}

impl RunConfig {
    pub fn load(path: &Path, ov: &Overrides) -> Result<Self, CliError> {
        let file: ConfigFile = parse_json("config", path)?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        let resolve = |p: &Path| base.join(p);

        let rig = match &file.calibration {
            Some(p) => {
                let p = resolve(p);
                read_calib(&p).map_err(|e| match e {
                    IoError::File { .. } => CliError::Config(format!("calibration file {e}")),
                    e => CliError::Config(format!("calibration file {}: {e}", p.display())),
                })?
            }
            None => desk_rig(&file.desk)?,
        };
        let volume = file.volume.unwrap_or_else(|| file.desk.volume());
        volume
            .validate()
            .map_err(|e| CliError::Config(format!("volume: {e}")))?;
        let fringes = match file.fringes {
            Some(f) => f,
            None => FringeConfig::new(16.0, 16, rig.projector.width(), FringeOrientation::Vertical)
                .map_err(|e| CliError::Config(format!("fringes: {e}")))?,
        };
        fringes
            .validate()
            .map_err(|e| CliError::Config(format!("fringes: {e}")))?;

        let mut render: RenderConfig = match &file.render {
            Some(p) => parse_json("render", &resolve(p))?,
            None => RenderConfig::default(),
        };
        let seed = ov.seed.or(file.seed).unwrap_or(render.seed);
        render.seed = seed;
        render
            .validate()
            .map_err(|e| CliError::Config(format!("render: {e}")))?;
        let scene = match &file.scene {
            Some(p) => Some(parse_json::<Scene>("scene", &resolve(p))?),
            None => None,
        };

        let m = &file.matching;
        let thr = match &ov.thr {
            Some(t) => t.clone(),
            None => m
                .thr
                .iter()
                .map(|t| parse_thr(t).map_err(|e| CliError::Config(e.to_string())))
                .collect::<Result<Vec<_>, _>>()?,
        };
        if thr.is_empty() {
            return Err(CliError::Config("threshold list is empty".into()));
        }
        let radius = m.outlier_radius_mm.unwrap_or(DEFAULT_OUTLIER_RADIUS_MM);
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(CliError::Config(format!("outlier radius must be positive, got {radius}")));
        }
        let matching = Matching {
            mode: ov.mode.unwrap_or(m.mode),
            thr,
            outlier_filter: (m.outlier_filter && !ov.no_outlier_filter).then(|| {
                (
                    radius,
                    m.outlier_min_neighbors.unwrap_or(DEFAULT_OUTLIER_MIN_NEIGHBORS),
                )
            }),
            modulation_threshold: m.modulation_threshold.unwrap_or(DEFAULT_MODULATION_THRESHOLD),
            graycode_min_contrast: m.graycode_min_contrast.unwrap_or(DEFAULT_GRAYCODE_MIN_CONTRAST),
        };

        let out = match (&ov.out, &file.out) {
            (Some(o), _) => o.clone(),
            (None, Some(o)) => resolve(o),
            (None, None) => base.join("out"),
        };
        let stacks = file.stacks.as_deref().map(resolve).unwrap_or_else(|| out.clone());
        let bit_depth = match file.bit_depth.unwrap_or(16) {
            8 => BitDepth::Eight,
            16 => BitDepth::Sixteen,
            b => return Err(CliError::Config(format!("bit_depth must be 8 or 16, got {b}"))),
        };
        for b in [file.baseline_cc_mm, file.baseline_cp_mm].into_iter().flatten() {
            if !(b > 0.0 && b.is_finite()) {
                return Err(CliError::Config(format!("baselines must be positive, got {b}")));
            }
        }
        let planes = file.planes.map(|p| PlaneDirs {
            near: resolve(&p.near),
            center: resolve(&p.center),
            far: resolve(&p.far),
        });
        Ok(Self {
            label: file.label.unwrap_or_else(|| "scene".into()),
            seed,
            rig,
            volume,
            fringes,
            render,
            scene,
            matching,
            stacks,
            out,
            planes,
            baseline_cc: file.baseline_cc_mm,
            baseline_cp: file.baseline_cp_mm,
            bit_depth,
        })
    }
}
