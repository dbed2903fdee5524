//! `LTM1` binary matrix files and `(i, j, value)` CSV export.
//!
//! Layout: the four bytes `LTM1`, `n` as a little-endian `u64`, one flag byte
//! (`0` dense packed triangle, `1` Toeplitz coefficients), then the payload as
//! little-endian IEEE-754 doubles: `n(n+1)/2` values for dense, `n` for Toeplitz.

use std::io::{Read, Write};

use super::{LowerTriangular, ToeplitzLT};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"LTM1";
const FLAG_DENSE: u8 = 0;
const FLAG_TOEPLITZ: u8 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum StoredMatrix {
    Dense(LowerTriangular),
    Toeplitz(ToeplitzLT),
}

impl StoredMatrix {
    pub fn n(&self) -> usize {
        match self {
            StoredMatrix::Dense(m) => m.n(),
            StoredMatrix::Toeplitz(t) => t.n(),
        }
    }

    pub fn to_lower(&self) -> LowerTriangular {
        match self {
            StoredMatrix::Dense(m) => m.clone(),
            StoredMatrix::Toeplitz(t) => t.materialize(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            StoredMatrix::Dense(m) => m.get(i, j),
            StoredMatrix::Toeplitz(t) => t.get(i, j),
        }
    }
}

pub fn write_matrix<W: Write>(mut w: W, m: &StoredMatrix) -> Result<()> {
    let (flag, payload) = match m {
        StoredMatrix::Dense(d) => (FLAG_DENSE, d.packed()),
        StoredMatrix::Toeplitz(t) => (FLAG_TOEPLITZ, t.coeffs()),
    };
    w.write_all(MAGIC)?;
    w.write_all(&(m.n() as u64).to_le_bytes())?;
    w.write_all(&[flag])?;
    let mut buf = Vec::with_capacity(payload.len() * 8);
    for v in payload {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_matrix<R: Read>(mut r: R) -> Result<StoredMatrix> {
    let mut header = [0u8; 13];
    r.read_exact(&mut header)
        .map_err(|_| Error::Format("truncated header".into()))?;
    if &header[..4] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let n = u64::from_le_bytes(header[4..12].try_into().unwrap());
    let n = usize::try_from(n).map_err(|_| Error::Format("n does not fit in usize".into()))?;
    if n == 0 {
        return Err(Error::Format("n must be positive".into()));
    }
    let flag = header[12];
    let count = match flag {
        FLAG_DENSE => n
            .checked_mul(n + 1)
            .map(|v| v / 2)
            .ok_or_else(|| Error::Format("n too large".into()))?,
        FLAG_TOEPLITZ => n,
        other => return Err(Error::Format(format!("unknown flag {other}"))),
    };
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(Error::Format(format!(
            "expected {} payload bytes, found {}",
            count * 8,
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(match flag {
        FLAG_DENSE => StoredMatrix::Dense(LowerTriangular::from_packed(n, values)?),
        _ => StoredMatrix::Toeplitz(ToeplitzLT::new(values)?),
    })
}

/// Writes `i,j,value` rows (1-based indices) for every entry on or below the diagonal.
pub fn write_csv<W: Write>(mut w: W, m: &LowerTriangular) -> Result<()> {
    writeln!(w, "i,j,value")?;
    for i in 0..m.n() {
        for (j, v) in m.row(i).iter().enumerate() {
            writeln!(w, "{},{},{}", i + 1, j + 1, v)?;
        }
    }
    Ok(())
}
