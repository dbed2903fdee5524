//! Sensitivity and the MaxSE / MeanSE / multi-epoch error functionals.
//!
//! Adjacency is zero-out style: one user's gradient rows change, each by an
//! l2 difference of at most 1. For a participation pattern `pi` and unit
//! directions `u_i`, `||sum_{i in pi} C[:,i] u_i^T||_F^2 = sum_{i,j} <C_i, C_j> <u_i, u_j>`.
//! When `C` is entrywise nonnegative every Gram entry `<C_i, C_j>` is
//! nonnegative, so the sum is maximized by aligned directions and the
//! sensitivity reduces to `max_pi ||sum_{i in pi} C[:,i]||_2`. General-sign
//! matrices are rejected.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::factorizations::Factorization;
use crate::par;
use crate::schedules::ScheduleKind;
use crate::tri_matrix::LowerTriangular;

/// Largest dimension accepted by [`SensitivityMode::Exact`].
pub const EXACT_MAX_N: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ParticipationSchema {
    Single,
    /// Consecutive participations at least `b` steps apart, at most `k` of them.
    MinSep {
        b: usize,
        k: usize,
    },
}

impl ParticipationSchema {
    /// The b-min-separated schema with the maximal `k = ceil(n / b)`.
    pub fn min_sep(n: usize, b: usize) -> Result<Self> {
        if b == 0 || n == 0 {
            return Err(invalid("separation b and dimension n must be positive"));
        }
        Ok(ParticipationSchema::MinSep {
            b,
            k: n.div_ceil(b),
        })
    }

    /// Checks `b >= 1` and `1 <= k <= ceil(n / b)`.
    pub fn validate(self, n: usize) -> Result<()> {
        match self {
            ParticipationSchema::Single => Ok(()),
            ParticipationSchema::MinSep { b, k } => {
                if b == 0 {
                    return Err(invalid("separation b must be at least 1"));
                }
                let k_max = n.div_ceil(b);
                if k == 0 || k > k_max {
                    return Err(invalid(format!(
                        "k = {k} participations outside [1, {k_max}] for n = {n}, b = {b}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn b(self) -> Option<usize> {
        match self {
            ParticipationSchema::Single => None,
            ParticipationSchema::MinSep { b, .. } => Some(b),
        }
    }

    pub fn k(self) -> Option<usize> {
        match self {
            ParticipationSchema::Single => None,
            ParticipationSchema::MinSep { k, .. } => Some(k),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitivityMode {
    /// Enumerate every admissible pattern (`n <= 24`).
    Exact,
    /// Single columns and arithmetic patterns `{s, s+b, s+2b, ...}`.
    Heuristic,
}

impl SensitivityMode {
    pub fn name(self) -> &'static str {
        match self {
            SensitivityMode::Exact => "exact",
            SensitivityMode::Heuristic => "heuristic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(SensitivityMode::Exact),
            "heuristic" => Ok(SensitivityMode::Heuristic),
            other => Err(invalid(format!("unknown sensitivity mode '{other}'"))),
        }
    }
}

impl fmt::Display for SensitivityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `||C||_{1->2}`, the largest column norm.
pub fn sensitivity_single(c: &LowerTriangular) -> f64 {
    c.max_col_norm()
}

pub fn sensitivity_multi(
    c: &LowerTriangular,
    schema: ParticipationSchema,
    mode: SensitivityMode,
) -> Result<f64> {
    let n = c.n();
    schema.validate(n)?;
    let (b, k) = match schema {
        ParticipationSchema::Single => return Ok(sensitivity_single(c)),
        ParticipationSchema::MinSep { b, k } => (b, k),
    };
    if let Some((row, col, value)) = c.first_negative() {
        return Err(Error::NegativeEntry { row, col, value });
    }
    let cols = PaddedColumns::new(c);
    match mode {
        SensitivityMode::Exact => {
            if n > EXACT_MAX_N {
                return Err(Error::ExactEnumerationTooLarge {
                    n,
                    max: EXACT_MAX_N,
                });
            }
            let per_start = par::map_range(n, |start| {
                let mut stack = vec![vec![0.0; n]; k + 1];
                let mut best = 0.0f64;
                enumerate(&cols, b, k, start, 1, &mut stack, &mut best);
                best
            });
            Ok(per_start.into_iter().fold(0.0, f64::max).sqrt())
        }
        SensitivityMode::Heuristic => {
            let mut best = (0..n).map(|j| sq_norm(cols.col(j))).fold(0.0, f64::max);
            let mut acc = vec![0.0; n];
            let mut next = vec![0.0; n];
            for s in 0..b.min(n) {
                acc.fill(0.0);
                for start in (s..n).step_by(b).take(k) {
                    add_column(&acc, &cols, start, &mut next);
                    std::mem::swap(&mut acc, &mut next);
                    best = best.max(sq_norm(&acc));
                }
            }
            Ok(best.sqrt())
        }
    }
}

/// Columns of `C` stored as full-length vectors.
struct PaddedColumns {
    n: usize,
    data: Vec<f64>,
}

impl PaddedColumns {
    fn new(c: &LowerTriangular) -> Self {
        let n = c.n();
        let mut data = vec![0.0; n * n];
        for j in 0..n {
            for i in j..n {
                data[j * n + i] = c.get(i, j);
            }
        }
        Self { n, data }
    }

    fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }
}

// Exact and heuristic modes share this kernel so that equal patterns give
// bit-identical sums.
fn add_column(acc: &[f64], cols: &PaddedColumns, j: usize, out: &mut [f64]) {
    for ((o, a), c) in out.iter_mut().zip(acc).zip(cols.col(j)) {
        *o = a + c;
    }
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn enumerate(
    cols: &PaddedColumns,
    b: usize,
    k: usize,
    j: usize,
    depth: usize,
    stack: &mut [Vec<f64>],
    best: &mut f64,
) {
    let (prev, rest) = stack.split_at_mut(depth);
    add_column(&prev[depth - 1], cols, j, &mut rest[0]);
    *best = best.max(sq_norm(&rest[0]));
    if depth == k {
        return;
    }
    for next in (j + b)..cols.n {
        enumerate(cols, b, k, next, depth + 1, stack, best);
    }
}

/// `||C||_F / sqrt(2b)`, a lower bound on `sens_{k,b}(C)` for `k = ceil(n/b)`.
pub fn sens_lower_frobenius(c: &LowerTriangular, b: usize) -> Result<f64> {
    if b == 0 {
        return Err(invalid("separation b must be at least 1"));
    }
    Ok(c.frobenius() / (2.0 * b as f64).sqrt())
}

/// `||B||_{2->inf} * ||C||_{1->2}`.
pub fn max_se(f: &Factorization) -> f64 {
    max_se_of(f.b(), f.c())
}

/// `||B||_F / sqrt(n) * ||C||_{1->2}`.
pub fn mean_se(f: &Factorization) -> f64 {
    mean_se_of(f.b(), f.c())
}

pub fn max_se_of(b: &LowerTriangular, c: &LowerTriangular) -> f64 {
    b.max_row_norm() * sensitivity_single(c)
}

pub fn mean_se_of(b: &LowerTriangular, c: &LowerTriangular) -> f64 {
    b.frobenius() / (b.n() as f64).sqrt() * sensitivity_single(c)
}

/// `||B||_F / sqrt(n) * sens_{k,b}(C)`.
pub fn multi_error(
    b: &LowerTriangular,
    c: &LowerTriangular,
    schema: ParticipationSchema,
    mode: SensitivityMode,
) -> Result<f64> {
    if b.n() != c.n() {
        return Err(Error::DimensionMismatch {
            left: b.n(),
            right: c.n(),
        });
    }
    Ok(b.frobenius() / (b.n() as f64).sqrt() * sensitivity_multi(c, schema, mode)?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorReport {
    pub strategy: String,
    pub bandwidth: Option<usize>,
    pub schedule: ScheduleKind,
    pub n: usize,
    pub beta: f64,
    pub gamma: Option<f64>,
    pub schema: ParticipationSchema,
    pub sensitivity: f64,
    pub maxse: f64,
    pub meanse: f64,
    pub multi_error: Option<f64>,
}

impl ErrorReport {
    /// Evaluates `f`; `multi_error` is filled for min-separation schemas.
    pub fn evaluate(
        f: &Factorization,
        schema: ParticipationSchema,
        mode: SensitivityMode,
    ) -> Result<Self> {
        let multi = match schema {
            ParticipationSchema::Single => None,
            _ => Some(multi_error(f.b(), f.c(), schema, mode)?),
        };
        let s = f.schedule();
        Ok(Self {
            strategy: f.strategy().name(),
            bandwidth: f.strategy().bandwidth(),
            schedule: s.kind(),
            n: f.n(),
            beta: s.beta(),
            gamma: s.gamma(),
            schema,
            sensitivity: sensitivity_single(f.c()),
            maxse: max_se(f),
            meanse: mean_se(f),
            multi_error: multi,
        })
    }

    /// Rescales the error fields by `sigma_eps_delta * zeta`.
    pub fn dp_scale(mut self, sigma_eps_delta: f64, zeta: f64) -> Result<Self> {
        if !(sigma_eps_delta > 0.0 && zeta > 0.0) {
            return Err(invalid("noise multiplier and clip norm must be positive"));
        }
        let s = sigma_eps_delta * zeta;
        self.maxse *= s;
        self.meanse *= s;
        self.multi_error = self.multi_error.map(|e| e * s);
        Ok(self)
    }
}
