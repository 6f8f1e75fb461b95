//! Image stacks on disk.
//!
//! A stack directory holds `cam1/` and `cam2/`, each with a `stack.json`
//! sidecar and its PGM frames, plus `cam1-y/` and `cam2-y/` when the
//! rotated sequence was captured. Simulated runs add `ground_truth.bin`.

use std::path::{Path, PathBuf};

use fringefree::image::Image;
use fringefree::io::{
    decode_ground_truth, decode_pgm, encode_ground_truth, encode_pgm, parse_sidecar, read_file,
    write_file, BitDepth, IoError, StackSidecar, STACK_FORMAT,
};
use fringefree::phase::{
    decode_absolute, decode_phase, CoordinateMap, FringeConfig, ImageStack, PhaseMap,
};
use fringefree::simulate::{CameraCapture, GroundTruth};

use crate::config::{CliError, Matching};

pub const GROUND_TRUTH_FILE: &str = "ground_truth.bin";

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|source| {
        CliError::Io(IoError::File {
            path: path.display().to_string(),
            source,
        })
    })
}

fn bad(path: &Path, reason: String) -> CliError {
    CliError::Io(IoError::Format {
        what: "image stack",
        reason: format!("{}: {reason}", path.display()),
    })
}

/// One fringe sequence with its Gray code.
#[derive(Debug, Clone)]
pub struct Sequence {
    pub cfg: FringeConfig,
    pub fringes: ImageStack,
    pub graycode: Vec<Image>,
}

/// Both sequences one camera recorded.
#[derive(Debug, Clone)]
pub struct Recorded {
    pub x: Sequence,
    pub y: Option<Sequence>,
}

fn write_sequence(
    dir: &Path,
    seq: &Sequence,
    depth: BitDepth,
) -> Result<(), CliError> {
    create_dir(dir)?;
    let (w, h) = seq.fringes.dims();
    let mut frames = Vec::new();
    for (k, img) in seq.fringes.frames().iter().enumerate() {
        let name = format!("fringe_{k:02}.pgm");
        write_file(&dir.join(&name), &encode_pgm(img, depth))?;
        frames.push(name);
    }
    let mut graycode = Vec::new();
    for (k, img) in seq.graycode.iter().enumerate() {
        let name = format!("gray_{k:02}.pgm");
        write_file(&dir.join(&name), &encode_pgm(img, depth))?;
        graycode.push(name);
    }
    let sidecar = StackSidecar {
        format: STACK_FORMAT.into(),
        steps: seq.cfg.steps,
        period_px: seq.cfg.period_px,
        fringe_count: seq.cfg.fringe_count,
        orientation: seq.cfg.orientation,
        width: w,
        height: h,
        bit_depth: match depth {
            BitDepth::Eight => 8,
            BitDepth::Sixteen => 16,
        },
        frames,
        graycode,
    };
    let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    write_file(&dir.join("stack.json"), text.as_bytes())?;
    Ok(())
}

fn read_image(dir: &Path, name: &str, dims: (usize, usize)) -> Result<Image, CliError> {
    let path = dir.join(name);
    let img = decode_pgm(&read_file(&path)?)?;
    if img.dims() != dims {
        return Err(bad(
            &path,
            format!("image is {:?}, sidecar says {dims:?}", img.dims()),
        ));
    }
    Ok(img)
}

fn read_sequence(dir: &Path) -> Result<Sequence, CliError> {
    let path = dir.join("stack.json");
    let text = String::from_utf8(read_file(&path)?)
        .map_err(|_| bad(&path, "sidecar is not UTF-8".into()))?;
    let sidecar = parse_sidecar(&text)?;
    let cfg = sidecar.fringe_config()?;
    let dims = (sidecar.width, sidecar.height);
    let frames = sidecar
        .frames
        .iter()
        .map(|n| read_image(dir, n, dims))
        .collect::<Result<Vec<_>, _>>()?;
    let graycode = sidecar
        .graycode
        .iter()
        .map(|n| read_image(dir, n, dims))
        .collect::<Result<Vec<_>, _>>()?;
    let fringes = ImageStack::new(frames).map_err(|e| bad(&path, e.to_string()))?;
    Ok(Sequence {
        cfg,
        fringes,
        graycode,
    })
}

fn camera_dirs(stacks: &Path, camera: &str) -> (PathBuf, PathBuf) {
    (stacks.join(camera), stacks.join(format!("{camera}-y")))
}

pub fn write_camera(
    stacks: &Path,
    camera: &str,
    cap: &CameraCapture,
    cfg: &FringeConfig,
    cfg_y: Option<&FringeConfig>,
    depth: BitDepth,
) -> Result<(), CliError> {
    let (x_dir, y_dir) = camera_dirs(stacks, camera);
    let x = Sequence {
        cfg: *cfg,
        fringes: cap.fringes.clone(),
        graycode: cap.graycode.clone(),
    };
    write_sequence(&x_dir, &x, depth)?;
    if let (Some(f), Some(g), Some(c)) = (&cap.fringes_y, &cap.graycode_y, cfg_y) {
        let y = Sequence {
            cfg: *c,
            fringes: f.clone(),
            graycode: g.clone(),
        };
        write_sequence(&y_dir, &y, depth)?;
    }
    Ok(())
}

/// Reads a camera's sequences; the rotated one is optional.
pub fn read_camera(stacks: &Path, camera: &str) -> Result<Recorded, CliError> {
    let (x_dir, y_dir) = camera_dirs(stacks, camera);
    let x = read_sequence(&x_dir)?;
    let y = if y_dir.join("stack.json").exists() {
        Some(read_sequence(&y_dir)?)
    } else {
        None
    };
    Ok(Recorded { x, y })
}

pub fn has_camera(stacks: &Path, camera: &str) -> bool {
    stacks.join(camera).join("stack.json").exists()
}

pub fn write_ground_truth(stacks: &Path, gt: &GroundTruth) -> Result<(), CliError> {
    write_file(&stacks.join(GROUND_TRUTH_FILE), &encode_ground_truth(gt))?;
    Ok(())
}

pub fn read_ground_truth(stacks: &Path) -> Result<Option<GroundTruth>, CliError> {
    let path = stacks.join(GROUND_TRUTH_FILE);
    if !path.exists() {
        return Ok(None);
    }
    Ok(Some(decode_ground_truth(&read_file(&path)?)?))
}

/// Decoded maps of one camera. Absolute coordinates need Gray code.
#[derive(Debug, Clone)]
pub struct Decoded {
    pub phase: PhaseMap,
    pub coords: Option<CoordinateMap>,
    pub coords_y: Option<CoordinateMap>,
}

fn decode_sequence(
    seq: &Sequence,
    m: &Matching,
) -> Result<(PhaseMap, Option<CoordinateMap>), CliError> {
    if seq.graycode.is_empty() {
        let phase =
            decode_phase(&seq.fringes, &seq.cfg, m.modulation_threshold).map_err(CliError::numerical)?;
        return Ok((phase, None));
    }
    let (phase, coords) = decode_absolute(
        &seq.fringes,
        &seq.graycode,
        &seq.cfg,
        m.modulation_threshold,
        m.graycode_min_contrast,
    )
    .map_err(CliError::numerical)?;
    Ok((phase, Some(coords)))
}

pub fn decode(rec: &Recorded, m: &Matching) -> Result<Decoded, CliError> {
    let (phase, coords) = decode_sequence(&rec.x, m)?;
    let coords_y = match &rec.y {
        Some(y) => decode_sequence(y, m)?.1,
        None => None,
    };
    Ok(Decoded {
        phase,
        coords,
        coords_y,
    })
}
