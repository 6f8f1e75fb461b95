//! Netpbm graymaps: binary `P5` (8 or 16 bit, big-endian) and ASCII `P2`.
//! Intensities map linearly from `[0, maxval]` to `[0, 1]`.

use super::IoError;
use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    fn maxval(self) -> u32 {
        match self {
            BitDepth::Eight => 255,
            BitDepth::Sixteen => 65535,
        }
    }
}

/// Binary `P5` encoding; values are clamped to `[0, 1]` and rounded.
pub fn encode_pgm(image: &Image, depth: BitDepth) -> Vec<u8> {
    let maxval = depth.maxval();
    let mut out = format!("P5\n{} {}\n{}\n", image.width(), image.height(), maxval).into_bytes();
    for &v in image.data() {
        let q = (v.clamp(0.0, 1.0) * maxval as f64).round() as u32;
        match depth {
            BitDepth::Eight => out.push(q as u8),
            BitDepth::Sixteen => out.extend_from_slice(&(q as u16).to_be_bytes()),
        }
    }
    out
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u64, IoError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let digits = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap_or("");
        digits
            .parse::<u64>()
            .map_err(|_| IoError::format("PGM", format!("expected {what}")))
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Image, IoError> {
    if bytes.len() < 2 || bytes[0] != b'P' || !(bytes[1] == b'5' || bytes[1] == b'2') {
        return Err(IoError::format("PGM", "missing P5/P2 magic"));
    }
    let binary = bytes[1] == b'5';
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(IoError::format("PGM", "zero dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(IoError::format("PGM", format!("maxval {maxval} outside 1..=65535")));
    }
    let n = width
        .checked_mul(height)
        .filter(|&n| n <= (1 << 28))
        .ok_or_else(|| IoError::format("PGM", "image too large"))? as usize;
    let scale = 1.0 / maxval as f64;
    let mut data = Vec::with_capacity(n.min(bytes.len()));
    if binary {
        // Exactly one whitespace byte separates the header from the raster.
        if h.pos >= bytes.len() || !bytes[h.pos].is_ascii_whitespace() {
            return Err(IoError::format("PGM", "missing raster"));
        }
        let raster = &bytes[h.pos + 1..];
        let wide = maxval > 255;
        let need = if wide { 2 * n } else { n };
        if raster.len() < need {
            return Err(IoError::format(
                "PGM",
                format!("raster holds {} bytes, need {need}", raster.len()),
            ));
        }
        if wide {
            for c in raster[..need].chunks_exact(2) {
                data.push(u16::from_be_bytes([c[0], c[1]]) as f64 * scale);
            }
        } else {
            data.extend(raster[..n].iter().map(|&b| b as f64 * scale));
        }
    } else {
        for _ in 0..n {
            let v = h.number("sample")?;
            if v > maxval {
                return Err(IoError::format("PGM", format!("sample {v} exceeds maxval")));
            }
            data.push(v as f64 * scale);
        }
    }
    Image::from_vec(width as usize, height as usize, data)
        .ok_or_else(|| IoError::format("PGM", "raster size"))
}
