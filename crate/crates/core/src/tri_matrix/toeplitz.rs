use super::LowerTriangular;
use crate::error::{Error, Result};

/// Lower-triangular Toeplitz matrix, entry `(i, j) = coeffs[i - j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ToeplitzLT {
    coeffs: Vec<f64>,
}

impl ToeplitzLT {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidParameter(
                "Toeplitz matrix needs at least one coefficient".into(),
            ));
        }
        Ok(Self { coeffs })
    }

    pub fn identity(n: usize) -> Self {
        let mut coeffs = vec![0.0; n.max(1)];
        coeffs[0] = 1.0;
        Self { coeffs }
    }

    /// The prefix-sum matrix `A_1`.
    pub fn ones(n: usize) -> Self {
        Self {
            coeffs: vec![1.0; n.max(1)],
        }
    }

    pub fn n(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.coeffs[i - j]
        }
    }

    pub fn materialize(&self) -> LowerTriangular {
        LowerTriangular::from_fn(self.n(), |i, j| self.coeffs[i - j])
    }

    /// Reads the first column of `m`, failing if `m` is not Toeplitz within `tol`.
    pub fn from_lower(m: &LowerTriangular, tol: f64) -> Result<Self> {
        let coeffs = m.column(0);
        for i in 0..m.n() {
            for (j, &v) in m.row(i).iter().enumerate() {
                if (v - coeffs[i - j]).abs() > tol {
                    return Err(Error::InvalidParameter(format!(
                        "matrix is not Toeplitz at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { coeffs })
    }

    /// Product of two Toeplitz matrices: truncated convolution of coefficients.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        if self.n() != other.n() {
            return Err(Error::DimensionMismatch {
                left: self.n(),
                right: other.n(),
            });
        }
        Ok(Self {
            coeffs: convolve(&self.coeffs, &other.coeffs),
        })
    }

    /// Square-root series: `s_0 = sqrt(c_0)`,
    /// `s_k = (c_k - sum_{0<j<k} s_j s_{k-j}) / (2 s_0)`.
    pub fn sqrt(&self) -> Result<Self> {
        let c = &self.coeffs;
        if !(c[0] > 0.0) {
            return Err(Error::NonPositiveDiagonal {
                index: 0,
                value: c[0],
            });
        }
        let mut s = Vec::with_capacity(c.len());
        s.push(c[0].sqrt());
        let two_s0 = 2.0 * s[0];
        for k in 1..c.len() {
            let acc: f64 = (1..k).map(|j| s[j] * s[k - j]).sum();
            s.push((c[k] - acc) / two_s0);
        }
        Ok(Self { coeffs: s })
    }

    /// Series reciprocal: `s_0 = 1/c_0`, `s_k = -(sum_{j=1..k} c_j s_{k-j}) / c_0`.
    pub fn inverse(&self) -> Result<Self> {
        let c = &self.coeffs;
        if c[0] == 0.0 {
            return Err(Error::ZeroLeadingCoefficient);
        }
        let mut s = Vec::with_capacity(c.len());
        s.push(1.0 / c[0]);
        for k in 1..c.len() {
            let acc: f64 = (1..=k).map(|j| c[j] * s[k - j]).sum();
            s.push(-acc / c[0]);
        }
        Ok(Self { coeffs: s })
    }

    /// Keeps coefficients `0..p`.
    pub fn band(&self, p: usize) -> Result<Self> {
        let n = self.n();
        if p < 1 || p > n {
            return Err(Error::BandwidthOutOfRange { p, n });
        }
        let mut coeffs = self.coeffs.clone();
        coeffs[p..].iter_mut().for_each(|v| *v = 0.0);
        Ok(Self { coeffs })
    }

    /// Column `j` holds `coeffs[0..n-j]`.
    pub fn col_norms(&self) -> Vec<f64> {
        let mut rows = self.row_norms();
        rows.reverse();
        rows
    }

    /// Row `i` holds `coeffs[0..=i]` (reversed).
    pub fn row_norms(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.coeffs
            .iter()
            .map(|c| {
                acc += c * c;
                acc.sqrt()
            })
            .collect()
    }

    pub fn frobenius(&self) -> f64 {
        let n = self.n();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(t, c)| (n - t) as f64 * c * c)
            .sum::<f64>()
            .sqrt()
    }
}

/// `(a * b)_k = sum_{j<=k} a_j b_{k-j}`, truncated to `min(len)`.
pub(crate) fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().min(b.len());
    (0..n)
        .map(|k| (0..=k).map(|j| a[j] * b[k - j]).sum())
        .collect()
}
