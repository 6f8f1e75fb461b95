//! CSV reports: candidate dumps and threshold sweeps.

use std::io::Write;

use serde::Serialize;

use super::IoError;
use crate::correspond::CandidateSet;
use crate::unwrap::MatchMode;

#[derive(Serialize)]
struct CandidateRow {
    pixel_u: u32,
    pixel_v: u32,
    mode: &'static str,
    /// Camera-2 `u,v` for CC, projector x for CP.
    coord: String,
    m: Option<u32>,
    #[serde(rename = "X")]
    x: f64,
    #[serde(rename = "Y")]
    y: f64,
    #[serde(rename = "Z")]
    z: f64,
    gap: f64,
}

pub fn write_candidates_csv<'a, W: Write>(
    out: W,
    sets: impl IntoIterator<Item = &'a CandidateSet>,
) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    for set in sets {
        let [u, v] = set.pixel;
        for c in &set.cc {
            w.serialize(CandidateRow {
                pixel_u: u,
                pixel_v: v,
                mode: "CC",
                coord: format!("{:.4} {:.4}", c.c2.x, c.c2.y),
                m: None,
                x: c.point.x,
                y: c.point.y,
                z: c.point.z,
                gap: c.gap,
            })?;
        }
        for c in &set.cp {
            w.serialize(CandidateRow {
                pixel_u: u,
                pixel_v: v,
                mode: "CP",
                coord: format!("{:.4}", c.projector_x),
                m: Some(c.m),
                x: c.point.x,
                y: c.point.y,
                z: c.point.z,
                gap: 0.0,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row of a threshold sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub label: String,
    pub mode: MatchMode,
    /// Threshold as a multiple of pi.
    pub thr_pi: f64,
    pub com: f64,
    pub fp: f64,
    pub rms: f64,
    pub points: usize,
}

pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
