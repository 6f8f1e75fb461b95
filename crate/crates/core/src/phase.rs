//! Wrapped-phase decoding of K-step sinusoidal stacks, Gray-code decoding
//! for the reference pipeline, and conversion to projector coordinates.
//!
//! Frame `k` of a K-step stack shows the pattern shifted by `+2 pi k / K`:
//! `I_k = A + B cos(phi - 2 pi k / K)`. Decoding returns `phi` in `[0, 2 pi)`.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{bilinear_cell, Image};

/// Modulation below which a pixel is considered unlit.
pub const DEFAULT_MODULATION_THRESHOLD: f64 = 0.02;
/// Minimal `|I - reference|` for a Gray-code bit to count as decided.
pub const DEFAULT_GRAYCODE_MIN_CONTRAST: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhaseError {
    #[error("stack holds {found} frames but the fringe configuration expects {expected}")]
    StackSizeMismatch { expected: usize, found: usize },
    #[error("expected {expected} Gray-code bit planes, found {found}")]
    BitPlaneCountMismatch { expected: usize, found: usize },
    #[error("fringe index {index} outside [0, {count})")]
    IndexOutOfRange { index: i64, count: usize },
    #[error("image dimensions differ: {0}")]
    DimensionMismatch(String),
    #[error("invalid fringe configuration: {0}")]
    InvalidConfig(String),
}

/// Which projector coordinate the fringes encode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FringeOrientation {
    /// Intensity varies along projector x (vertical stripes).
    #[default]
    Vertical,
    /// Intensity varies along projector y.
    Horizontal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeConfig {
    /// Fringe period on the projector chip, pixels.
    pub period_px: f64,
    /// Number of phase steps K.
    pub steps: usize,
    /// Number of fringe periods N covering the encoded projector axis.
    pub fringe_count: usize,
    #[serde(default)]
    pub orientation: FringeOrientation,
}

impl FringeConfig {
    /// Configuration covering a projector axis of `projector_extent` pixels.
    pub fn new(
        period_px: f64,
        steps: usize,
        projector_extent: usize,
        orientation: FringeOrientation,
    ) -> Result<Self, PhaseError> {
        let fringe_count = if period_px > 0.0 {
            (projector_extent as f64 / period_px).ceil() as usize
        } else {
            0
        };
        let cfg = Self {
            period_px,
            steps,
            fringe_count,
            orientation,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PhaseError> {
        if !(self.period_px >= 2.0 && self.period_px.is_finite()) {
            return Err(PhaseError::InvalidConfig(format!(
                "fringe period must be at least 2 px, got {}",
                self.period_px
            )));
        }
        if self.steps < 3 {
            return Err(PhaseError::InvalidConfig(format!(
                "at least 3 phase steps required, got {}",
                self.steps
            )));
        }
        if self.fringe_count < 1 {
            return Err(PhaseError::InvalidConfig("fringe count must be at least 1".into()));
        }
        Ok(())
    }

    /// Same fringes rotated by 90 degrees over an axis of `projector_extent` pixels.
    pub fn rotated(&self, projector_extent: usize) -> Result<Self, PhaseError> {
        let orientation = match self.orientation {
            FringeOrientation::Vertical => FringeOrientation::Horizontal,
            FringeOrientation::Horizontal => FringeOrientation::Vertical,
        };
        Self::new(self.period_px, self.steps, projector_extent, orientation)
    }

    /// Projector coordinate along the encoded axis to absolute phase.
    pub fn coordinate_to_phase(&self, coordinate: f64) -> f64 {
        TAU * coordinate / self.period_px
    }

    /// Number of Gray-code words projected by the reference sequence.
    ///
    /// The reference code resolves half periods, so it has `2 N` words.
    pub fn graycode_word_count(&self) -> usize {
        2 * self.fringe_count
    }

    pub fn graycode_bits(&self) -> usize {
        graycode_bit_count(self.graycode_word_count())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageStack {
    frames: Vec<Image>,
}

impl ImageStack {
    pub fn new(frames: Vec<Image>) -> Result<Self, PhaseError> {
        if let Some(first) = frames.first() {
            let dims = first.dims();
            if let Some(bad) = frames.iter().position(|f| f.dims() != dims) {
                return Err(PhaseError::DimensionMismatch(format!(
                    "frame {bad} is {:?}, frame 0 is {dims:?}",
                    frames[bad].dims()
                )));
            }
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[Image] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames.first().map(Image::dims).unwrap_or((0, 0))
    }

    /// Per-pixel mean over all frames; equals the ambient term `A` for a full stack.
    pub fn mean_image(&self) -> Image {
        let (w, h) = self.dims();
        let mut out = Image::new(w, h, 0.0);
        if self.frames.is_empty() {
            return out;
        }
        let inv = 1.0 / self.frames.len() as f64;
        for f in &self.frames {
            for (o, v) in out.data_mut().iter_mut().zip(f.data()) {
                *o += v * inv;
            }
        }
        out
    }
}

/// Wrapped phase, modulation and validity per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMap {
    width: usize,
    height: usize,
    phase: Vec<f64>,
    modulation: Vec<f64>,
    valid: Vec<bool>,
}

impl PhaseMap {
    pub fn from_parts(
        width: usize,
        height: usize,
        phase: Vec<f64>,
        modulation: Vec<f64>,
        valid: Vec<bool>,
    ) -> Result<Self, PhaseError> {
        let n = width * height;
        if phase.len() != n || modulation.len() != n || valid.len() != n {
            return Err(PhaseError::DimensionMismatch(format!(
                "phase map arrays must have {n} entries"
            )));
        }
        Ok(Self {
            width,
            height,
            phase,
            modulation,
            valid,
        })
    }

    /// A map with every pixel invalid.
    pub fn invalid(width: usize, height: usize) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            phase: vec![0.0; n],
            modulation: vec![0.0; n],
            valid: vec![false; n],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn phase(&self, x: usize, y: usize) -> f64 {
        self.phase[y * self.width + x]
    }

    #[inline]
    pub fn modulation(&self, x: usize, y: usize) -> f64 {
        self.modulation[y * self.width + x]
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[y * self.width + x]
    }

    pub fn phases(&self) -> &[f64] {
        &self.phase
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Bilinear interpolation of `wrap(phase - reference)` into `(-pi, pi]`.
    ///
    /// Returns `None` outside the image, next to invalid pixels, or where the
    /// four neighbors straddle a phase jump (their differences span more than pi).
    pub fn sample_wrapped_difference(&self, u: f64, v: f64, reference: f64) -> Option<f64> {
        let (x0, y0, fx, fy) = bilinear_cell(self.width, self.height, u, v)?;
        let mut d = [0.0; 4];
        let mut lo = f64::MAX;
        let mut hi = f64::MIN;
        for (slot, (dx, dy)) in [(0, 0), (1, 0), (0, 1), (1, 1)].into_iter().enumerate() {
            let k = (y0 + dy) * self.width + x0 + dx;
            if !self.valid[k] {
                return None;
            }
            let w = wrap_to_pi(self.phase[k] - reference);
            lo = lo.min(w);
            hi = hi.max(w);
            d[slot] = w;
        }
        if hi - lo > PI {
            return None;
        }
        Some(
            (d[0] * (1.0 - fx) + d[1] * fx) * (1.0 - fy) + (d[2] * (1.0 - fx) + d[3] * fx) * fy,
        )
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_to_pi(a: f64) -> f64 {
    let mut w = a.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}

/// Wraps an angle into `[0, 2 pi)`.
pub fn wrap_to_tau(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Phase and modulation of one pixel's intensity sequence.
pub fn decode_pixel(samples: impl IntoIterator<Item = f64>, steps: usize) -> (f64, f64) {
    let mut s = 0.0;
    let mut c = 0.0;
    for (k, intensity) in samples.into_iter().enumerate() {
        let shift = TAU * k as f64 / steps as f64;
        s += intensity * shift.sin();
        c += intensity * shift.cos();
    }
    let phase = wrap_to_tau(s.atan2(c));
    let modulation = 2.0 / steps as f64 * s.hypot(c);
    (phase, modulation)
}

pub fn decode_phase(
    stack: &ImageStack,
    cfg: &FringeConfig,
    modulation_threshold: f64,
) -> Result<PhaseMap, PhaseError> {
    if stack.len() != cfg.steps {
        return Err(PhaseError::StackSizeMismatch {
            expected: cfg.steps,
            found: stack.len(),
        });
    }
    let (width, height) = stack.dims();
    let k = cfg.steps;
    let (sin_t, cos_t): (Vec<f64>, Vec<f64>) = (0..k)
        .map(|i| {
            let a = TAU * i as f64 / k as f64;
            (a.sin(), a.cos())
        })
        .unzip();
    let frames = stack.frames();
    let decoded: Vec<(f64, f64)> = (0..width * height)
        .into_par_iter()
        .map(|idx| {
            let mut s = 0.0;
            let mut c = 0.0;
            for i in 0..k {
                let v = frames[i].data()[idx];
                s += v * sin_t[i];
                c += v * cos_t[i];
            }
            (wrap_to_tau(s.atan2(c)), 2.0 / k as f64 * s.hypot(c))
        })
        .collect();
    let (phase, modulation): (Vec<f64>, Vec<f64>) = decoded.into_iter().unzip();
    let valid = modulation
        .iter()
        .map(|&b| b >= modulation_threshold && b > 0.0)
        .collect();
    Ok(PhaseMap {
        width,
        height,
        phase,
        modulation,
        valid,
    })
}

/// `ceil(log2(words))`, at least one bit.
pub fn graycode_bit_count(words: usize) -> usize {
    if words <= 2 {
        1
    } else {
        (usize::BITS - (words - 1).leading_zeros()) as usize
    }
}

pub fn gray_encode(index: u32) -> u32 {
    index ^ (index >> 1)
}

pub fn gray_decode(mut code: u32) -> u32 {
    let mut shift = code >> 1;
    while shift != 0 {
        code ^= shift;
        shift >>= 1;
    }
    code
}

/// Bits of the Gray word for `index`, most significant first.
pub fn graycode_bits_of(index: u32, bits: usize) -> Vec<bool> {
    let g = gray_encode(index);
    (0..bits).rev().map(|b| (g >> b) & 1 == 1).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrayCodeMap {
    width: usize,
    height: usize,
    index: Vec<u32>,
    valid: Vec<bool>,
    word_count: usize,
}

impl GrayCodeMap {
    pub fn invalid(width: usize, height: usize, word_count: usize) -> Self {
        Self {
            width,
            height,
            index: vec![0; width * height],
            valid: vec![false; width * height],
            word_count,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn word_count(&self) -> usize {
        self.word_count
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> Option<u32> {
        let k = y * self.width + x;
        self.valid[k].then_some(self.index[k])
    }
}

/// Decodes thresholded Gray-code frames (most significant bit first).
///
/// A bit is `1` when the frame is brighter than `reference` at that pixel;
/// pixels where any bit differs from the reference by less than
/// `min_contrast`, or whose word exceeds `word_count`, are invalid.
pub fn decode_graycode(
    bit_frames: &[Image],
    reference: &Image,
    word_count: usize,
    min_contrast: f64,
) -> Result<GrayCodeMap, PhaseError> {
    let bits = graycode_bit_count(word_count);
    if bit_frames.len() != bits {
        return Err(PhaseError::BitPlaneCountMismatch {
            expected: bits,
            found: bit_frames.len(),
        });
    }
    let dims = reference.dims();
    if let Some(bad) = bit_frames.iter().find(|f| f.dims() != dims) {
        return Err(PhaseError::DimensionMismatch(format!(
            "bit plane is {:?}, reference is {dims:?}",
            bad.dims()
        )));
    }
    let (width, height) = dims;
    let mut index = vec![0; width * height];
    let mut valid = vec![false; width * height];
    for k in 0..width * height {
        let r = reference.data()[k];
        let mut code = 0u32;
        let mut ok = true;
        for frame in bit_frames {
            let diff = frame.data()[k] - r;
            if !(diff.abs() >= min_contrast) {
                ok = false;
                break;
            }
            code = (code << 1) | u32::from(diff > 0.0);
        }
        let m = gray_decode(code);
        if ok && (m as usize) < word_count {
            index[k] = m;
            valid[k] = true;
        }
    }
    Ok(GrayCodeMap {
        width,
        height,
        index,
        valid,
        word_count,
    })
}

/// `x_p = (m + phi / 2 pi) * period`.
pub fn absolute_projector_x(phi: f64, index: i64, cfg: &FringeConfig) -> Result<f64, PhaseError> {
    if index < 0 || index as usize >= cfg.fringe_count {
        return Err(PhaseError::IndexOutOfRange {
            index,
            count: cfg.fringe_count,
        });
    }
    Ok((index as f64 + phi / TAU) * cfg.period_px)
}

/// Fringe index from a half-period Gray word and the wrapped phase.
///
/// Near a period boundary the code word and the wrapped phase can disagree
/// by one half period; the phase quadrant decides which neighbor is meant.
pub fn fringe_index_from_half_period(phi: f64, half_index: u32) -> i64 {
    let h = half_index as i64;
    if phi < 0.5 * PI {
        (h + 1).div_euclid(2)
    } else if phi < 1.5 * PI {
        h.div_euclid(2)
    } else {
        (h - 1).div_euclid(2)
    }
}

/// Absolute projector coordinate per pixel, or invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl CoordinateMap {
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        let k = y * self.width + x;
        self.valid[k].then_some(self.values[k])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Bilinear interpolation of `value - reference`; `None` next to invalid
    /// pixels or where neighbors span more than `max_spread`.
    pub fn sample_difference(&self, u: f64, v: f64, reference: f64, max_spread: f64) -> Option<f64> {
        let (x0, y0, fx, fy) = bilinear_cell(self.width, self.height, u, v)?;
        let mut d = [0.0; 4];
        let mut lo = f64::MAX;
        let mut hi = f64::MIN;
        for (slot, (dx, dy)) in [(0, 0), (1, 0), (0, 1), (1, 1)].into_iter().enumerate() {
            let k = (y0 + dy) * self.width + x0 + dx;
            if !self.valid[k] {
                return None;
            }
            let w = self.values[k] - reference;
            lo = lo.min(w);
            hi = hi.max(w);
            d[slot] = w;
        }
        if hi - lo > max_spread {
            return None;
        }
        Some(
            (d[0] * (1.0 - fx) + d[1] * fx) * (1.0 - fy) + (d[2] * (1.0 - fx) + d[3] * fx) * fy,
        )
    }

    /// Bilinear interpolation of the coordinate itself.
    pub fn sample(&self, u: f64, v: f64, max_spread: f64) -> Option<f64> {
        self.sample_difference(u, v, 0.0, max_spread)
    }
}

/// Combines wrapped phase with the half-period Gray code into absolute
/// projector coordinates along the fringe axis.
pub fn absolute_coordinates(
    phase: &PhaseMap,
    code: &GrayCodeMap,
    cfg: &FringeConfig,
) -> Result<CoordinateMap, PhaseError> {
    if phase.dims() != code.dims() {
        return Err(PhaseError::DimensionMismatch(format!(
            "phase map {:?} vs Gray-code map {:?}",
            phase.dims(),
            code.dims()
        )));
    }
    let (width, height) = phase.dims();
    let mut values = vec![0.0; width * height];
    let mut valid = vec![false; width * height];
    for y in 0..height {
        for x in 0..width {
            if !phase.is_valid(x, y) {
                continue;
            }
            let Some(h) = code.index(x, y) else {
                continue;
            };
            let phi = phase.phase(x, y);
            let m = fringe_index_from_half_period(phi, h);
            if let Ok(xp) = absolute_projector_x(phi, m, cfg) {
                values[y * width + x] = xp;
                valid[y * width + x] = true;
            }
        }
    }
    Ok(CoordinateMap {
        width,
        height,
        values,
        valid,
    })
}

/// Decodes a fringe stack together with its Gray-code frames, using the
/// stack mean as the binarization reference.
pub fn decode_absolute(
    stack: &ImageStack,
    bit_frames: &[Image],
    cfg: &FringeConfig,
    modulation_threshold: f64,
    min_contrast: f64,
) -> Result<(PhaseMap, CoordinateMap), PhaseError> {
    let phase = decode_phase(stack, cfg, modulation_threshold)?;
    let code = decode_graycode(
        bit_frames,
        &stack.mean_image(),
        cfg.graycode_word_count(),
        min_contrast,
    )?;
    let coords = absolute_coordinates(&phase, &code, cfg)?;
    Ok((phase, coords))
}
