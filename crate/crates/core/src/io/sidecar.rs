//! Columnar binary score sidecar.
//!
//! Layout (all little-endian):
//!
//! ```text
//! bytes 0..4    magic "ECSC"
//! bytes 4..8    version (u32, = 1)
//! bytes 8..12   row count n (u32)
//! bytes 12..16  column count (u32, = 9)
//! then 9 columns of n values each, in order:
//!   point index (u32), T_e, T_c, D_e.x, D_e.y, D_e.z, D_c.x, D_c.y, D_c.z (f32)
//! ```
//!
//! Points absent from the file score zero with zero offsets.

use std::io::Write;

use super::{le_f32, le_u32};
use crate::detection::PointScores;
use crate::error::{Error, Result};
use crate::geometry::Vec3;

pub const MAGIC: &[u8; 4] = b"ECSC";
pub const VERSION: u32 = 1;
pub const COLUMNS: u32 = 9;
const HEADER: usize = 16;

/// Writes every point of `scores` (indices `0..n`).
pub fn write_sidecar(w: impl Write, scores: &PointScores) -> Result<()> {
    let indices: Vec<usize> = (0..scores.len()).collect();
    write_sidecar_rows(w, scores, &indices)
}

/// Writes only the listed rows.
pub fn write_sidecar_rows(mut w: impl Write, scores: &PointScores, indices: &[usize]) -> Result<()> {
    scores.validate()?;
    let n = u32::try_from(indices.len()).map_err(|_| Error::InvalidInput("too many rows".into()))?;
    let mut buf = Vec::with_capacity(HEADER + indices.len() * 36);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&n.to_le_bytes());
    buf.extend_from_slice(&COLUMNS.to_le_bytes());
    for &i in indices {
        let i = u32::try_from(i).map_err(|_| Error::InvalidInput("index exceeds u32".into()))?;
        buf.extend_from_slice(&i.to_le_bytes());
    }
    let mut column = |f: &dyn Fn(usize) -> f64| {
        for &i in indices {
            buf.extend_from_slice(&(f(i) as f32).to_le_bytes());
        }
    };
    column(&|i| scores.edge_prob[i]);
    column(&|i| scores.corner_prob[i]);
    for k in 0..3 {
        column(&|i| scores.edge_offset[i][k]);
    }
    for k in 0..3 {
        column(&|i| scores.corner_offset[i][k]);
    }
    w.write_all(&buf)?;
    Ok(())
}

fn perr(msg: &str) -> Error {
    Error::Parse(format!("sidecar: {msg}"))
}

/// Decodes a sidecar into scores for a cloud of `n_points` points.
pub fn read_sidecar(bytes: &[u8], n_points: usize) -> Result<PointScores> {
    if bytes.len() < HEADER || &bytes[..4] != MAGIC {
        return Err(perr("missing magic"));
    }
    let version = le_u32(bytes, 4).ok_or_else(|| perr("truncated header"))?;
    let rows = le_u32(bytes, 8).ok_or_else(|| perr("truncated header"))? as usize;
    let cols = le_u32(bytes, 12).ok_or_else(|| perr("truncated header"))?;
    if version != VERSION || cols != COLUMNS {
        return Err(perr("unsupported version or column count"));
    }
    let expected = rows
        .checked_mul(4 * COLUMNS as usize)
        .and_then(|b| b.checked_add(HEADER))
        .ok_or_else(|| perr("row count overflows"))?;
    if bytes.len() != expected {
        return Err(perr("size does not match row count"));
    }
    let col = |c: usize, r: usize| HEADER + 4 * (c * rows + r);
    let mut scores = PointScores::zeros(n_points);
    let mut seen = vec![false; n_points];
    for r in 0..rows {
        let idx = le_u32(bytes, col(0, r)).ok_or_else(|| perr("truncated"))? as usize;
        if idx >= n_points {
            return Err(perr("point index out of range"));
        }
        if std::mem::replace(&mut seen[idx], true) {
            return Err(perr("duplicate point index"));
        }
        let v = |c: usize| le_f32(bytes, col(c, r)).map(f64::from).ok_or_else(|| perr("truncated"));
        let te = v(1)?;
        let tc = v(2)?;
        let de = Vec3::new(v(3)?, v(4)?, v(5)?);
        let dc = Vec3::new(v(6)?, v(7)?, v(8)?);
        scores.edge_prob[idx] = te;
        scores.corner_prob[idx] = tc;
        scores.edge_offset[idx] = de;
        scores.corner_offset[idx] = dc;
    }
    scores.validate().map_err(|e| perr(&e.to_string()))?;
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_scores() -> PointScores {
        PointScores {
            edge_prob: vec![0.25, 1.0, 0.0],
            corner_prob: vec![0.0, 0.5, 0.75],
            edge_offset: vec![Vec3::new(0.5, 0., -1.), Vec3::zeros(), Vec3::new(2., 3., 4.)],
            corner_offset: vec![Vec3::zeros(), Vec3::new(0.125, 0.25, 0.), Vec3::zeros()],
        }
    }

    #[test]
    fn round_trip_of_f32_exact_values() {
        let s = sample_scores();
        let mut buf = Vec::new();
        write_sidecar(&mut buf, &s).unwrap();
        assert_eq!(buf.len(), 16 + 3 * 36);
        assert_eq!(read_sidecar(&buf, 3).unwrap(), s);
    }

    #[test]
    fn partial_rows_fill_zeros() {
        let s = sample_scores();
        let mut buf = Vec::new();
        write_sidecar_rows(&mut buf, &s, &[2]).unwrap();
        let back = read_sidecar(&buf, 5).unwrap();
        assert_eq!(back.corner_prob, vec![0.0, 0.0, 0.75, 0.0, 0.0]);
        assert_eq!(back.edge_offset[2], Vec3::new(2., 3., 4.));
    }

    #[test]
    fn rejects_corrupt_files() {
        let mut buf = Vec::new();
        write_sidecar(&mut buf, &sample_scores()).unwrap();
        assert!(read_sidecar(&buf[..buf.len() - 2], 3).is_err());
        assert!(read_sidecar(&buf, 2).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_sidecar(&bad, 3).is_err());
        // probability 2.0 in the T_e column
        let mut bad = buf.clone();
        bad[16 + 12..16 + 16].copy_from_slice(&2.0f32.to_le_bytes());
        assert!(read_sidecar(&bad, 3).is_err());
    }
}
