//! Lower-triangular and lower-triangular Toeplitz linear algebra.
//!
//! [`LowerTriangular`] stores the triangle packed row-major: row `i` holds
//! entries `(i, 0..=i)` at offset `i * (i + 1) / 2`. Dense kernels are
//! `O(n^3)` and intended for `n <= 4096`; [`ToeplitzLT`] covers the Toeplitz
//! inputs in `O(n^2)`.
//!
//! Determinism: every output entry is produced by one sequential dot product
//! in a fixed order, so parallel and sequential builds agree bit-for-bit.

mod io;
mod toeplitz;

pub use io::{read_matrix, write_csv, write_matrix, StoredMatrix};
#[cfg(test)]
pub(crate) use toeplitz::convolve;
pub use toeplitz::ToeplitzLT;

use crate::error::{Error, Result};
use crate::par;

/// Divisors below this magnitude abort the triangular square root.
const SQRT_BREAKDOWN: f64 = 1e-300;

#[derive(Clone, Debug, PartialEq)]
pub struct LowerTriangular {
    n: usize,
    data: Vec<f64>,
}

#[inline]
fn offset(i: usize) -> usize {
    i * (i + 1) / 2
}

fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

impl LowerTriangular {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; packed_len(n)],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[offset(i) + i] = 1.0;
        }
        m
    }

    /// The prefix-sum matrix `A_1` (all ones on and below the diagonal).
    pub fn ones(n: usize) -> Self {
        Self {
            n,
            data: vec![1.0; packed_len(n)],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(packed_len(n));
        for i in 0..n {
            for j in 0..=i {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn from_packed(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != packed_len(n) {
            return Err(Error::DimensionMismatch {
                left: packed_len(n),
                right: data.len(),
            });
        }
        Ok(Self { n, data })
    }

    /// Builds from full rows, ignoring anything above the diagonal.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(packed_len(n));
        for (i, row) in rows.iter().enumerate() {
            if row.len() < i + 1 {
                return Err(Error::DimensionMismatch {
                    left: i + 1,
                    right: row.len(),
                });
            }
            data.extend_from_slice(&row[..=i]);
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Packed row-major storage.
    pub fn packed(&self) -> &[f64] {
        &self.data
    }

    /// Entry `(i, j)`; zero above the diagonal.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.n && j < self.n, "index ({i}, {j}) out of range");
        if j > i {
            0.0
        } else {
            self.data[offset(i) + j]
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(
            j <= i && i < self.n,
            "({i}, {j}) is not in the lower triangle"
        );
        self.data[offset(i) + j] = value;
    }

    /// Row `i`, entries `0..=i`.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[offset(i)..offset(i) + i + 1]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.data[offset(i) + i]).collect()
    }

    /// Column `j`, rows `j..n` (the structurally nonzero part).
    pub fn column(&self, j: usize) -> Vec<f64> {
        (j..self.n).map(|i| self.data[offset(i) + j]).collect()
    }

    /// All columns, each restricted to rows `j..n`.
    pub fn columns(&self) -> Vec<Vec<f64>> {
        let mut cols: Vec<Vec<f64>> = (0..self.n)
            .map(|j| Vec::with_capacity(self.n - j))
            .collect();
        for i in 0..self.n {
            for (j, &v) in self.row(i).iter().enumerate() {
                cols[j].push(v);
            }
        }
        cols
    }

    /// First entry below zero, as `(row, col, value)`.
    pub fn first_negative(&self) -> Option<(usize, usize, f64)> {
        for i in 0..self.n {
            for (j, &v) in self.row(i).iter().enumerate() {
                if v < 0.0 {
                    return Some((i, j, v));
                }
            }
        }
        None
    }

    fn check_same_n(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: other.n,
            });
        }
        Ok(())
    }

    fn check_positive_diagonal(&self) -> Result<()> {
        for i in 0..self.n {
            let d = self.data[offset(i) + i];
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NonPositiveDiagonal { index: i, value: d });
            }
        }
        Ok(())
    }

    /// Exact triangular product `self * other`.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.check_same_n(other)?;
        let mut out = Self::zeros(self.n);
        let rows = par::packed_rows_mut(&mut out.data, self.n);
        par::for_each_slice(rows, |i, out_row| {
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row[..=k].iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        });
        Ok(out)
    }

    /// Inverse by forward substitution, one independent column at a time.
    pub fn inverse(&self) -> Result<Self> {
        self.check_positive_diagonal()?;
        let n = self.n;
        let cols = par::map_range(n, |j| {
            let mut x = Vec::with_capacity(n - j);
            x.push(1.0 / self.get(j, j));
            for i in j + 1..n {
                let row = &self.row(i)[j..i];
                let s: f64 = row.iter().zip(&x).map(|(a, b)| a * b).sum();
                x.push(-s / self.get(i, i));
            }
            x
        });
        Ok(Self::from_columns(n, &cols))
    }

    fn from_columns(n: usize, cols: &[Vec<f64>]) -> Self {
        Self::from_fn(n, |i, j| cols[j][i - j])
    }

    /// Principal square root: the unique lower-triangular `S` with positive
    /// diagonal and `S * S = self`.
    ///
    /// Sweeps subdiagonals outward:
    /// `S_ij = (A_ij - sum_{j<k<i} S_ik S_kj) / (S_ii + S_jj)`.
    pub fn sqrt(&self) -> Result<Self> {
        self.check_positive_diagonal()?;
        let n = self.n;
        let mut s = Self::zeros(n);
        // Column-major mirror of S so both dot-product operands are contiguous.
        let mut cols: Vec<Vec<f64>> = (0..n).map(|j| vec![0.0; n - j]).collect();
        for i in 0..n {
            let v = self.get(i, i).sqrt();
            s.data[offset(i) + i] = v;
            cols[i][0] = v;
        }
        for d in 1..n {
            let diag = par::map_range(n - d, |j| {
                let i = j + d;
                let row = &s.row(i)[j + 1..i];
                let col = &cols[j][1..d];
                let acc: f64 = row.iter().zip(col).map(|(a, b)| a * b).sum();
                let divisor = s.data[offset(i) + i] + s.data[offset(j) + j];
                if divisor.abs() < SQRT_BREAKDOWN {
                    return Err(Error::SqrtBreakdown {
                        row: i,
                        col: j,
                        divisor,
                    });
                }
                Ok((self.get(i, j) - acc) / divisor)
            });
            for (j, v) in diag.into_iter().enumerate() {
                let v = v?;
                s.data[offset(j + d) + j] = v;
                cols[j][d] = v;
            }
        }
        Ok(s)
    }

    /// Solves `X * c = self` for lower-triangular `X` (right division).
    pub fn solve_right(&self, c: &Self) -> Result<Self> {
        self.check_same_n(c)?;
        c.check_positive_diagonal()?;
        let n = self.n;
        let c_cols = c.columns();
        let mut out = Self::zeros(n);
        let rows = par::packed_rows_mut(&mut out.data, n);
        par::for_each_slice(rows, |i, x| {
            let a = self.row(i);
            for j in (0..=i).rev() {
                // sum_{k=j+1..=i} x_k C_kj
                let s: f64 = x[j + 1..=i]
                    .iter()
                    .zip(&c_cols[j][1..=i - j])
                    .map(|(p, q)| p * q)
                    .sum();
                x[j] = (a[j] - s) / c_cols[j][0];
            }
        });
        Ok(out)
    }

    /// Keeps subdiagonals `0..p`; entries with `i - j >= p` become zero.
    pub fn band(&self, p: usize) -> Result<Self> {
        if p < 1 || p > self.n {
            return Err(Error::BandwidthOutOfRange { p, n: self.n });
        }
        Ok(Self::from_fn(self.n, |i, j| {
            if i - j < p {
                self.get(i, j)
            } else {
                0.0
            }
        }))
    }

    /// Smallest `p` such that `band(p)` leaves the matrix unchanged.
    pub fn bandwidth(&self) -> usize {
        let mut p = 1;
        for i in 0..self.n {
            for (j, &v) in self.row(i).iter().enumerate() {
                if v != 0.0 {
                    p = p.max(i - j + 1);
                }
            }
        }
        p
    }

    /// `diag(scale) * self`.
    pub fn scale_rows(&self, scale: &[f64]) -> Result<Self> {
        if scale.len() != self.n {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: scale.len(),
            });
        }
        let mut out = self.clone();
        for (i, &s) in scale.iter().enumerate() {
            for v in &mut out.data[offset(i)..offset(i) + i + 1] {
                *v *= s;
            }
        }
        Ok(out)
    }

    /// `self * diag(scale)`.
    pub fn scale_cols(&self, scale: &[f64]) -> Result<Self> {
        if scale.len() != self.n {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: scale.len(),
            });
        }
        let mut out = self.clone();
        for i in 0..self.n {
            for (v, s) in out.data[offset(i)..offset(i) + i + 1].iter_mut().zip(scale) {
                *v *= s;
            }
        }
        Ok(out)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    /// `A_1 * self`: row `m` of the result is the sum of rows `0..=m`. `O(n^2)`.
    pub fn prefix_sum_rows(&self) -> Self {
        let mut out = self.clone();
        for i in 1..self.n {
            let (head, tail) = out.data.split_at_mut(offset(i));
            let prev = &head[offset(i - 1)..];
            for (o, p) in tail[..i].iter_mut().zip(prev) {
                *o += p;
            }
        }
        out
    }

    /// Euclidean norm of each column.
    pub fn col_norms(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.n];
        for i in 0..self.n {
            for (a, v) in acc.iter_mut().zip(self.row(i)) {
                *a += v * v;
            }
        }
        acc.into_iter().map(f64::sqrt).collect()
    }

    /// Euclidean norm of each row.
    pub fn row_norms(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `||.||_{1->2}`: the largest column norm.
    pub fn max_col_norm(&self) -> f64 {
        self.col_norms().into_iter().fold(0.0, f64::max)
    }

    /// `||.||_{2->inf}`: the largest row norm.
    pub fn max_row_norm(&self) -> f64 {
        self.row_norms().into_iter().fold(0.0, f64::max)
    }

    /// Largest elementwise `|self - other|`.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_same_n(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Dense row-major `n x n` copy, zeros above the diagonal.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| {
                let mut row = vec![0.0; self.n];
                row[..=i].copy_from_slice(self.row(i));
                row
            })
            .collect()
    }
}
