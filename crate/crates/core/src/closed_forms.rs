//! Explicit coefficient formulas.
//!
//! * `r_j = binom(2j, j) / 4^j`, the series of `(1 - x)^{-1/2}`, i.e. `A_1^{1/2}`.
//! * `r~_j`, the series of `(1 - x)^{1/2}`, i.e. `A_1^{-1/2}`.
//! * `C_alpha = (A_chi^Toep)^{1/2}` for exponential decay `chi_t = alpha^{t-1}`,
//!   with coefficients `alpha^j r_j`.
//! * The column-scaled Toeplitz square root of the exponential workload
//!   `A_chi` and its inverse (q-Pochhammer products).
//! * `B_alpha = A_chi C_alpha^{-1}`.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::tri_matrix::{LowerTriangular, ToeplitzLT};

/// Above this `alpha` the q-Pochhammer ratios are accumulated in log space.
const LOG_SPACE_ALPHA: f64 = 0.999;

/// `r_0 .. r_{n-1}` via `r_j = r_{j-1} (2j - 1) / (2j)`.
pub fn prefix_sqrt_coeffs(n: usize) -> Vec<f64> {
    let mut r = Vec::with_capacity(n);
    let mut cur = 1.0;
    for j in 0..n {
        if j > 0 {
            cur *= (2 * j - 1) as f64 / (2 * j) as f64;
        }
        r.push(cur);
    }
    r
}

/// `r~_0 = 1`, `r~_t = -r_t / (2t - 1)`.
pub fn prefix_inv_sqrt_coeffs(n: usize) -> Vec<f64> {
    prefix_sqrt_coeffs(n)
        .into_iter()
        .enumerate()
        .map(|(t, r)| if t == 0 { 1.0 } else { -r / (2 * t - 1) as f64 })
        .collect()
}

/// Exponential decay `chi_t = beta^{(t-1)/(n-1)} = alpha^{t-1}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExpDecayParams {
    n: usize,
    beta: f64,
    alpha: f64,
}

impl ExpDecayParams {
    pub fn new(n: usize, beta: f64) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("n must be at least 2, got {n}")));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(invalid(format!("beta must lie in (0, 1), got {beta}")));
        }
        Ok(Self {
            n,
            beta,
            alpha: beta.powf(1.0 / (n - 1) as f64),
        })
    }

    /// Parametrize by the per-step decay; `alpha = 0` is allowed here.
    pub fn from_alpha(n: usize, alpha: f64) -> Result<Self> {
        if n < 1 {
            return Err(invalid("n must be positive"));
        }
        if !(0.0..1.0).contains(&alpha) {
            return Err(invalid(format!("alpha must lie in [0, 1), got {alpha}")));
        }
        Ok(Self {
            n,
            beta: alpha.powi(n as i32 - 1),
            alpha,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `alpha^0 .. alpha^{n-1}`.
    pub fn chi(&self) -> Vec<f64> {
        (0..self.n).map(|t| self.alpha.powi(t as i32)).collect()
    }

    fn require_positive_alpha(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// `C_alpha`: coefficients `alpha^j r_j`.
pub fn c_alpha(params: &ExpDecayParams) -> ToeplitzLT {
    weighted(params.alpha, prefix_sqrt_coeffs(params.n))
}

/// `C_alpha^{-1}`: coefficients `alpha^j r~_j`.
pub fn c_alpha_inverse(params: &ExpDecayParams) -> ToeplitzLT {
    weighted(params.alpha, prefix_inv_sqrt_coeffs(params.n))
}

fn weighted(alpha: f64, mut coeffs: Vec<f64>) -> ToeplitzLT {
    let mut pow = 1.0;
    for c in coeffs.iter_mut() {
        *c *= pow;
        pow *= alpha;
    }
    ToeplitzLT::new(coeffs).expect("n >= 1")
}

/// Toeplitz matrix with per-column scaling: entry `(m, l) = colscale[l] * coeffs[m - l]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledToeplitzLT {
    coeffs: Vec<f64>,
    colscale: Vec<f64>,
}

impl ScaledToeplitzLT {
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn colscale(&self) -> &[f64] {
        &self.colscale
    }

    pub fn n(&self) -> usize {
        self.coeffs.len()
    }

    pub fn get(&self, m: usize, l: usize) -> f64 {
        if l > m {
            0.0
        } else {
            self.colscale[l] * self.coeffs[m - l]
        }
    }

    pub fn materialize(&self) -> LowerTriangular {
        LowerTriangular::from_fn(self.n(), |m, l| self.colscale[l] * self.coeffs[m - l])
    }
}

/// `g_d = prod_{k=1..d} (1 - alpha^{k-1/2}) / (1 - alpha^k)` for `d < n`.
pub fn sqrt_product_coeffs(alpha: f64, n: usize) -> Vec<f64> {
    let ln_a = alpha.ln();
    // 1 - alpha^x, accurate for alpha near 1
    let one_minus_pow = |x: f64| -(x * ln_a).exp_m1();
    let mut g = Vec::with_capacity(n);
    if alpha > LOG_SPACE_ALPHA {
        let mut acc = 0.0;
        for d in 0..n {
            if d > 0 {
                let k = d as f64;
                acc += one_minus_pow(k - 0.5).ln() - one_minus_pow(k).ln();
            }
            g.push(acc.exp());
        }
    } else {
        let mut acc = 1.0;
        for d in 0..n {
            if d > 0 {
                let k = d as f64;
                acc *= one_minus_pow(k - 0.5) / one_minus_pow(k);
            }
            g.push(acc);
        }
    }
    g
}

/// Square root of the exponential workload `A_chi` (`chi_t = alpha^{t-1}`):
/// `(A_chi^{1/2})_{m,l} = alpha^{(l-1)/2} g_{m-l}`.
pub fn exp_workload_sqrt(params: &ExpDecayParams) -> Result<ScaledToeplitzLT> {
    params.require_positive_alpha()?;
    let half_ln = 0.5 * params.alpha.ln();
    Ok(ScaledToeplitzLT {
        coeffs: sqrt_product_coeffs(params.alpha, params.n),
        colscale: (0..params.n).map(|l| (l as f64 * half_ln).exp()).collect(),
    })
}

/// Inverse of [`exp_workload_sqrt`].
///
/// With `q = alpha^{1/2}`: entry `(m, l) = q^{-(l-1)} h_{m-l}` where `h_0 = 1`
/// and `h_d = -(1 - q) g_d / (q (1 - q^{2d-1}))`.
pub fn exp_workload_inv_sqrt(params: &ExpDecayParams) -> Result<ScaledToeplitzLT> {
    params.require_positive_alpha()?;
    let ln_q = 0.5 * params.alpha.ln();
    let q = ln_q.exp();
    let g = sqrt_product_coeffs(params.alpha, params.n);
    let coeffs = g
        .iter()
        .enumerate()
        .map(|(d, &gd)| {
            if d == 0 {
                1.0
            } else {
                // (1 - q^{2d-1}) / (1 - q), stable as q -> 1
                let geom = ((2 * d - 1) as f64 * ln_q).exp_m1() / ln_q.exp_m1();
                -gd / (q * geom)
            }
        })
        .collect();
    Ok(ScaledToeplitzLT {
        coeffs,
        colscale: (0..params.n).map(|l| (-(l as f64) * ln_q).exp()).collect(),
    })
}

/// `B_alpha = A_chi C_alpha^{-1}` with closed-form cross-checks.
#[derive(Clone, Debug)]
pub struct BAlpha {
    /// Right triangular solve of `X C_alpha = A_chi`.
    pub b: LowerTriangular,
    /// Max deviation of `alpha^{2m-l} r_{m-l} + alpha^l (1 - alpha^2) sum_{t<m-l} alpha^{2t} r_t`
    /// (column weight `alpha^l`) from the solve.
    pub printed_deviation: f64,
    /// Same closed form with column weight `alpha^{l-1}`, matching `chi_l = alpha^{l-1}`.
    pub shifted_deviation: f64,
}

/// Closed form of `B_alpha` with column weight `alpha^{l-1}` (1-based `l`).
pub fn b_alpha_closed_form(params: &ExpDecayParams) -> LowerTriangular {
    let n = params.n;
    let a = params.alpha;
    let a2 = a * a;
    let r = prefix_sqrt_coeffs(n);
    // inner[d] = alpha^{2d} r_d + (1 - alpha^2) sum_{t<d} alpha^{2t} r_t
    let mut inner = Vec::with_capacity(n);
    let mut partial = 0.0;
    let mut pow = 1.0;
    for rd in &r {
        inner.push(pow * rd + (1.0 - a2) * partial);
        partial += pow * rd;
        pow *= a2;
    }
    let colw: Vec<f64> = (0..n).map(|l| a.powi(l as i32)).collect();
    LowerTriangular::from_fn(n, |m, l| colw[l] * inner[m - l])
}

pub fn b_alpha(params: &ExpDecayParams) -> Result<BAlpha> {
    let chi = params.chi();
    let a_chi = LowerTriangular::from_fn(params.n, |_, l| chi[l]);
    let b = a_chi.solve_right(&c_alpha(params).materialize())?;
    let shifted = b_alpha_closed_form(params);
    let printed = shifted.scaled(params.alpha);
    Ok(BAlpha {
        shifted_deviation: shifted.max_abs_diff(&b)?,
        printed_deviation: printed.max_abs_diff(&b)?,
        b,
    })
}

/// `ln (a; q)_inf = sum_k ln(1 - a q^k)`, truncated once `a q^k < 1e-16`.
pub fn ln_q_pochhammer_inf(a: f64, q: f64) -> f64 {
    assert!((0.0..1.0).contains(&q), "q must lie in [0, 1)");
    let mut acc = 0.0;
    let mut term = a;
    while term.abs() >= 1e-16 {
        acc += (-term).ln_1p();
        term *= q;
    }
    acc
}

/// `ln Gamma_q(x) = (1 - x) ln(1 - q) + ln (q; q)_inf - ln (q^x; q)_inf`.
pub fn ln_q_gamma(x: f64, q: f64) -> f64 {
    (1.0 - x) * (-q).ln_1p() + ln_q_pochhammer_inf(q, q) - ln_q_pochhammer_inf(q.powf(x), q)
}

/// Lower bound for `g_d`: `max(r_d, sqrt(1 - alpha) / Gamma_alpha(1/2))`.
///
/// The second term is the `d -> inf` limit of the product.
pub fn sqrt_coeff_lower_bound(d: usize, alpha: f64) -> f64 {
    let r_d = prefix_sqrt_coeffs(d + 1)[d];
    let limit = (0.5 * (-alpha).ln_1p() - ln_q_gamma(0.5, alpha)).exp();
    r_d.max(limit)
}
