//! Similarity-matrix debug dump: 16-byte header (`b"ECSIMMAT"`, then `M` as
//! little-endian u64) followed by `M×M` row-major little-endian f32 values.

use std::io::Write;

use super::le_f32;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"ECSIMMAT";

pub fn write_simmat(mut w: impl Write, m: usize, values: &[f64]) -> Result<()> {
    if values.len() != m * m {
        return Err(Error::LengthMismatch {
            expected: m * m,
            actual: values.len(),
        });
    }
    let mut buf = Vec::with_capacity(16 + 4 * values.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(m as u64).to_le_bytes());
    for v in values {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Returns `(M, row-major values)`.
pub fn read_simmat(bytes: &[u8]) -> Result<(usize, Vec<f32>)> {
    let perr = |m: &str| Error::Parse(format!("similarity matrix: {m}"));
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(perr("missing magic"));
    }
    let mut raw = [0u8; 8];
    raw.copy_from_slice(&bytes[8..16]);
    let m = usize::try_from(u64::from_le_bytes(raw)).map_err(|_| perr("size overflows"))?;
    let expected = m
        .checked_mul(m)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(16))
        .ok_or_else(|| perr("size overflows"))?;
    if bytes.len() != expected {
        return Err(perr("size does not match header"));
    }
    let values = (0..m * m)
        .map(|k| le_f32(bytes, 16 + 4 * k).unwrap_or(f32::NAN))
        .collect();
    Ok((m, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let vals = vec![0.0, 1.5, 1.5, 0.0];
        let mut buf = Vec::new();
        write_simmat(&mut buf, 2, &vals).unwrap();
        assert_eq!(buf.len(), 16 + 16);
        let (m, back) = read_simmat(&buf).unwrap();
        assert_eq!(m, 2);
        assert_eq!(back, vec![0.0, 1.5, 1.5, 0.0]);
    }

    #[test]
    fn rejects_wrong_sizes() {
        let mut buf = Vec::new();
        write_simmat(&mut buf, 1, &[0.0]).unwrap();
        buf.push(0);
        assert!(read_simmat(&buf).is_err());
        let mut huge = MAGIC.to_vec();
        huge.extend_from_slice(&u64::MAX.to_le_bytes());
        assert!(read_simmat(&huge).is_err());
    }
}
