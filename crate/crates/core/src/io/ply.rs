//! PLY point clouds with per-vertex match attributes.
//!
//! Written vertices carry `x y z dst phase_residual status pixel_u pixel_v`.
//! The reader accepts any property order and skips unknown properties; only
//! `x`, `y` and `z` are required.

use super::IoError;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlyVertex {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub dst: f64,
    pub phase_residual: f64,
    pub status: u8,
    pub pixel_u: u32,
    pub pixel_v: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

const PROPERTIES: [(&str, &str); 8] = [
    ("double", "x"),
    ("double", "y"),
    ("double", "z"),
    ("float", "dst"),
    ("float", "phase_residual"),
    ("uchar", "status"),
    ("uint", "pixel_u"),
    ("uint", "pixel_v"),
];

pub fn encode_ply(vertices: &[PlyVertex], format: PlyFormat) -> Vec<u8> {
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    let mut out = format!("ply\nformat {fmt} 1.0\ncomment fringefree point cloud\nelement vertex {}\n", vertices.len());
    for (ty, name) in PROPERTIES {
        out.push_str(&format!("property {ty} {name}\n"));
    }
    out.push_str("end_header\n");
    let mut bytes = out.into_bytes();
    for v in vertices {
        match format {
            PlyFormat::Ascii => {
                bytes.extend_from_slice(
                    format!(
                        "{} {} {} {} {} {} {} {}\n",
                        v.x, v.y, v.z, v.dst as f32, v.phase_residual as f32, v.status, v.pixel_u, v.pixel_v
                    )
                    .as_bytes(),
                );
            }
            PlyFormat::BinaryLittleEndian => {
                bytes.extend_from_slice(&v.x.to_le_bytes());
                bytes.extend_from_slice(&v.y.to_le_bytes());
                bytes.extend_from_slice(&v.z.to_le_bytes());
                bytes.extend_from_slice(&(v.dst as f32).to_le_bytes());
                bytes.extend_from_slice(&(v.phase_residual as f32).to_le_bytes());
                bytes.push(v.status);
                bytes.extend_from_slice(&v.pixel_u.to_le_bytes());
                bytes.extend_from_slice(&v.pixel_v.to_le_bytes());
            }
        }
    }
    bytes
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]]),
        }
    }
}

fn assign(v: &mut PlyVertex, name: &str, value: f64) {
    match name {
        "x" => v.x = value,
        "y" => v.y = value,
        "z" => v.z = value,
        "dst" => v.dst = value,
        "phase_residual" => v.phase_residual = value,
        "status" => v.status = value.clamp(0.0, 255.0) as u8,
        "pixel_u" => v.pixel_u = value.clamp(0.0, u32::MAX as f64) as u32,
        "pixel_v" => v.pixel_v = value.clamp(0.0, u32::MAX as f64) as u32,
        _ => {}
    }
}

pub fn decode_ply(bytes: &[u8]) -> Result<Vec<PlyVertex>, IoError> {
    const END: &[u8] = b"end_header";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| IoError::format("PLY", "missing end_header"))?;
    let mut body = end + END.len();
    if bytes.get(body) == Some(&b'\r') {
        body += 1;
    }
    if bytes.get(body) != Some(&b'\n') {
        return Err(IoError::format("PLY", "end_header must end its line"));
    }
    body += 1;
    let header = std::str::from_utf8(&bytes[..end])
        .map_err(|_| IoError::format("PLY", "header is not UTF-8"))?;
    let mut lines = header.lines().map(str::trim);
    if lines.next() != Some("ply") {
        return Err(IoError::format("PLY", "missing magic"));
    }
    let mut format = None;
    let mut count: Option<usize> = None;
    let mut in_vertex = false;
    let mut seen_other_element = false;
    let mut props: Vec<(Scalar, String)> = Vec::new();
    for line in lines {
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            [] | ["comment", ..] | ["obj_info", ..] => {}
            ["format", f, "1.0"] => {
                format = Some(match *f {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    other => {
                        return Err(IoError::format("PLY", format!("unsupported format {other}")))
                    }
                })
            }
            ["element", "vertex", n] => {
                if count.is_some() || seen_other_element {
                    return Err(IoError::format("PLY", "vertex must be the first and only element"));
                }
                count = Some(n.parse().map_err(|_| IoError::format("PLY", "bad vertex count"))?);
                in_vertex = true;
            }
            ["element", ..] => {
                seen_other_element = true;
                in_vertex = false;
            }
            ["property", "list", ..] if in_vertex => {
                return Err(IoError::format("PLY", "list properties on vertices are not supported"))
            }
            ["property", ty, name] if in_vertex => {
                let s = Scalar::parse(ty)
                    .ok_or_else(|| IoError::format("PLY", format!("unknown type {ty}")))?;
                props.push((s, name.to_string()));
            }
            ["property", ..] => {}
            _ => return Err(IoError::format("PLY", format!("unexpected header line {line:?}"))),
        }
    }
    let format = format.ok_or_else(|| IoError::format("PLY", "missing format line"))?;
    let count = count.ok_or_else(|| IoError::format("PLY", "missing vertex element"))?;
    for required in ["x", "y", "z"] {
        if !props.iter().any(|(_, n)| n == required) {
            return Err(IoError::format("PLY", format!("missing property {required}")));
        }
    }
    let data = &bytes[body..];
    let mut out = Vec::with_capacity(count.min(data.len()));
    match format {
        PlyFormat::BinaryLittleEndian => {
            let stride: usize = props.iter().map(|(s, _)| s.size()).sum();
            let need = stride
                .checked_mul(count)
                .ok_or_else(|| IoError::format("PLY", "vertex count overflow"))?;
            if data.len() < need {
                return Err(IoError::format(
                    "PLY",
                    format!("body holds {} bytes, need {need}", data.len()),
                ));
            }
            for chunk in data[..need].chunks_exact(stride.max(1)).take(count) {
                let mut v = PlyVertex::default();
                let mut off = 0;
                for (s, name) in &props {
                    assign(&mut v, name, s.read_le(&chunk[off..off + s.size()]));
                    off += s.size();
                }
                out.push(v);
            }
        }
        PlyFormat::Ascii => {
            let text = std::str::from_utf8(data)
                .map_err(|_| IoError::format("PLY", "ASCII body is not UTF-8"))?;
            let mut tokens = text.split_ascii_whitespace();
            for _ in 0..count {
                let mut v = PlyVertex::default();
                for (s, name) in &props {
                    let t = tokens
                        .next()
                        .ok_or_else(|| IoError::format("PLY", "truncated ASCII body"))?;
                    let bad = |_| IoError::format("PLY", format!("bad number {t:?}"));
                    // Parse at the declared precision so ASCII and binary agree.
                    let value = match s {
                        Scalar::F32 => t.parse::<f32>().map_err(bad)? as f64,
                        _ => t.parse::<f64>().map_err(bad)?,
                    };
                    assign(&mut v, name, value);
                }
                out.push(v);
            }
        }
    }
    Ok(out)
}
