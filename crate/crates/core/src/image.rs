//! Dense single-channel images with continuous sub-pixel sampling.
//!
//! Pixel centers sit at integer coordinates: pixel `(x, y)` covers
//! `[x - 0.5, x + 0.5] x [y - 0.5, y + 0.5]`.

/// A row-major grayscale image of `f64` intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, fill: f64) -> Self {
        Self {
            width,
            height,
            data: vec![fill; width * height],
        }
    }

    /// Wraps an existing buffer. Returns `None` when the length does not match.
    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Option<Self> {
        (data.len() == width * height).then_some(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
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
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

/// Locates the bilinear cell for a continuous coordinate.
///
/// Returns the top-left pixel of the 2x2 neighborhood and the fractional
/// offsets, or `None` when the coordinate lies outside `[0, w-1] x [0, h-1]`.
#[inline]
pub(crate) fn bilinear_cell(
    width: usize,
    height: usize,
    u: f64,
    v: f64,
) -> Option<(usize, usize, f64, f64)> {
    if width < 2 || height < 2 || !u.is_finite() || !v.is_finite() {
        return None;
    }
    let max_u = (width - 1) as f64;
    let max_v = (height - 1) as f64;
    if u < 0.0 || v < 0.0 || u > max_u || v > max_v {
        return None;
    }
    let x0 = (u.floor() as usize).min(width - 2);
    let y0 = (v.floor() as usize).min(height - 2);
    Some((x0, y0, u - x0 as f64, v - y0 as f64))
}
