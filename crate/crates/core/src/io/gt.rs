//! Binary ground truth.
//!
//! Layout: `u32` little-endian header length, UTF-8 JSON header
//! `{"format": "fringefree-gt/1", "width": W, "height": H}`, then `W*H`
//! little-endian `f32` triples `x y z` (NaN for a miss), then `W*H` flag
//! bytes (bit 0: lit by the projector, bit 1: visible from camera 2).

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::IoError;
use crate::simulate::GroundTruth;

pub const GT_FORMAT: &str = "fringefree-gt/1";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    width: usize,
    height: usize,
}

pub fn encode_ground_truth(gt: &GroundTruth) -> Vec<u8> {
    let header = serde_json::to_vec(&Header {
        format: GT_FORMAT.into(),
        width: gt.width,
        height: gt.height,
    })
    .expect("header serializes");
    let n = gt.width * gt.height;
    let mut out = Vec::with_capacity(4 + header.len() + 13 * n);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for h in &gt.hits {
        let p = h.map(|p| [p.x as f32, p.y as f32, p.z as f32]).unwrap_or([f32::NAN; 3]);
        for v in p {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for k in 0..n {
        out.push(u8::from(gt.lit[k]) | (u8::from(gt.visible_cam2[k]) << 1));
    }
    out
}

pub fn decode_ground_truth(bytes: &[u8]) -> Result<GroundTruth, IoError> {
    let bad = |r: &str| IoError::format("ground truth", r.to_string());
    if bytes.len() < 4 {
        return Err(bad("too short"));
    }
    let hlen = u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as usize;
    let header_end = 4usize.checked_add(hlen).ok_or_else(|| bad("header length"))?;
    let header_bytes = bytes.get(4..header_end).ok_or_else(|| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(header_bytes)?;
    if header.format != GT_FORMAT {
        return Err(bad("unknown format tag"));
    }
    let n = header
        .width
        .checked_mul(header.height)
        .ok_or_else(|| bad("dimensions overflow"))?;
    let need = n.checked_mul(13).ok_or_else(|| bad("dimensions overflow"))?;
    let body = &bytes[header_end..];
    if body.len() != need {
        return Err(bad(&format!("body holds {} bytes, need {need}", body.len())));
    }
    let (points, flags) = body.split_at(12 * n);
    let f = |c: &[u8]| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64;
    let hits = points
        .chunks_exact(12)
        .map(|c| {
            let p = Point3::new(f(&c[0..4]), f(&c[4..8]), f(&c[8..12]));
            (p.x.is_finite() && p.y.is_finite() && p.z.is_finite()).then_some(p)
        })
        .collect();
    Ok(GroundTruth {
        width: header.width,
        height: header.height,
        hits,
        lit: flags.iter().map(|b| b & 1 != 0).collect(),
        visible_cam2: flags.iter().map(|b| b & 2 != 0).collect(),
    })
}
