//! The factorization catalog `A_chi = B * C`.
//!
//! | strategy         | B                           | C                        |
//! |------------------|-----------------------------|--------------------------|
//! | `PrefixScaled`   | `A_1^{1/2}`                 | `A_1^{1/2} D`            |
//! | `IdentityRight`  | `A_chi`                     | `I`                      |
//! | `IdentityLeft`   | `I`                         | `A_chi`                  |
//! | `SquareRoot`     | `A_chi^{1/2}`               | `A_chi^{1/2}`            |
//! | `LrAware`        | `A_chi (A_chi^Toep)^{-1/2}` | `(A_chi^Toep)^{1/2}`     |
//! | `PrefixSqrt`     | `A_1 D A_1^{-1/2}`          | `A_1^{1/2}`              |
//! | `Bisr`           | `A_chi M`                   | `M^{-1}`                 |
//!
//! For BISR, `M = band(A^{-1/2}, p)` with `A = A_1` (prefix base) or
//! `A = A_chi` (learning-rate base); `C^{-1} = M` is banded, which is what the
//! streaming noise generator needs.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::closed_forms::{
    c_alpha, c_alpha_inverse, prefix_inv_sqrt_coeffs, prefix_sqrt_coeffs, ExpDecayParams,
};
use crate::error::{invalid, Error, Result};
use crate::schedules::{Schedule, ScheduleKind};
use crate::tri_matrix::{read_matrix, write_matrix, LowerTriangular, StoredMatrix, ToeplitzLT};
use crate::workload::{build_workload, Workload};

/// Per-dimension residual budget: `max |BC - A_chi| <= RESIDUAL_TOL * n`.
pub const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BisrBase {
    /// Band `A_1^{-1/2}` (learning rate ignored).
    PrefixWorkload,
    /// Band `A_chi^{-1/2}`.
    LrWorkload,
}

impl BisrBase {
    pub fn short_name(self) -> &'static str {
        match self {
            BisrBase::PrefixWorkload => "prefix",
            BisrBase::LrWorkload => "lr",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "prefix" | "prefix_workload" => Ok(BisrBase::PrefixWorkload),
            "lr" | "lr_workload" => Ok(BisrBase::LrWorkload),
            other => Err(invalid(format!("unknown BISR base '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Strategy {
    PrefixScaled,
    IdentityRight,
    IdentityLeft,
    SquareRoot,
    LrAware,
    PrefixSqrt,
    Bisr { bandwidth: usize, base: BisrBase },
}

impl Strategy {
    /// The six single-epoch strategies, in table order (a)-(f).
    pub const SINGLE_EPOCH: [Strategy; 6] = [
        Strategy::PrefixScaled,
        Strategy::IdentityRight,
        Strategy::IdentityLeft,
        Strategy::SquareRoot,
        Strategy::LrAware,
        Strategy::PrefixSqrt,
    ];

    pub fn name(self) -> String {
        match self {
            Strategy::PrefixScaled => "prefix_scaled".into(),
            Strategy::IdentityRight => "identity_right".into(),
            Strategy::IdentityLeft => "identity_left".into(),
            Strategy::SquareRoot => "square_root".into(),
            Strategy::LrAware => "lr_aware".into(),
            Strategy::PrefixSqrt => "prefix_sqrt".into(),
            Strategy::Bisr { base, .. } => format!("bisr_{}", base.short_name()),
        }
    }

    pub fn bandwidth(self) -> Option<usize> {
        match self {
            Strategy::Bisr { bandwidth, .. } => Some(bandwidth),
            _ => None,
        }
    }

    /// Parses a strategy name (or table letter `a`-`f`). BISR names
    /// (`bisr`, `bisr_prefix`, `bisr_lr`) take their width from `bandwidth`
    /// and, for plain `bisr`, their base from `base`.
    pub fn parse(name: &str, bandwidth: Option<usize>, base: Option<BisrBase>) -> Result<Self> {
        let simple = match name {
            "prefix_scaled" | "a" => Some(Strategy::PrefixScaled),
            "identity_right" | "b" => Some(Strategy::IdentityRight),
            "identity_left" | "c" => Some(Strategy::IdentityLeft),
            "square_root" | "d" => Some(Strategy::SquareRoot),
            "lr_aware" | "e" => Some(Strategy::LrAware),
            "prefix_sqrt" | "f" => Some(Strategy::PrefixSqrt),
            _ => None,
        };
        if let Some(s) = simple {
            return Ok(s);
        }
        let base = match name {
            "bisr" => base.unwrap_or(BisrBase::PrefixWorkload),
            "bisr_prefix" => BisrBase::PrefixWorkload,
            "bisr_lr" => BisrBase::LrWorkload,
            other => return Err(invalid(format!("unknown strategy '{other}'"))),
        };
        let bandwidth = bandwidth.ok_or_else(|| invalid("BISR requires a bandwidth"))?;
        Ok(Strategy::Bisr { bandwidth, base })
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// An immutable factorization `B * C = A_chi`.
#[derive(Clone, Debug)]
pub struct Factorization {
    strategy: Strategy,
    schedule: Schedule,
    b: LowerTriangular,
    c: LowerTriangular,
    residual: f64,
    banded_inverse: Option<StoredMatrix>,
}

pub fn factorize(w: &Workload, strategy: Strategy) -> Result<Factorization> {
    let n = w.n();
    let chi = w.chi();
    let mut banded_inverse = None;
    let (b, c) = match strategy {
        Strategy::PrefixScaled => {
            let half = ToeplitzLT::new(prefix_sqrt_coeffs(n))?.materialize();
            let c = half.scale_cols(chi)?;
            (half, c)
        }
        Strategy::IdentityRight => (w.a_chi().clone(), LowerTriangular::identity(n)),
        Strategy::IdentityLeft => (LowerTriangular::identity(n), w.a_chi().clone()),
        Strategy::SquareRoot => {
            let s = w.a_chi().sqrt()?;
            (s.clone(), s)
        }
        Strategy::LrAware => {
            let (c, c_inv) = lr_aware_correlation(w)?;
            (workload_times_toeplitz(chi, &c_inv)?, c.materialize())
        }
        Strategy::PrefixSqrt => {
            let inv_half = ToeplitzLT::new(prefix_inv_sqrt_coeffs(n))?;
            let b = workload_times_toeplitz(chi, &inv_half)?;
            (b, ToeplitzLT::new(prefix_sqrt_coeffs(n))?.materialize())
        }
        Strategy::Bisr { bandwidth, base } => {
            if bandwidth < 1 || bandwidth > n {
                return Err(Error::BandwidthOutOfRange { p: bandwidth, n });
            }
            match base {
                BisrBase::PrefixWorkload => {
                    let m = ToeplitzLT::new(prefix_inv_sqrt_coeffs(n))?.band(bandwidth)?;
                    let c = m.inverse()?.materialize();
                    let b = workload_times_toeplitz(chi, &m)?;
                    banded_inverse = Some(StoredMatrix::Toeplitz(m));
                    (b, c)
                }
                BisrBase::LrWorkload => {
                    let m = w.a_chi().sqrt()?.inverse()?.band(bandwidth)?;
                    let c = m.inverse()?;
                    let b = m.scale_rows(chi)?.prefix_sum_rows();
                    banded_inverse = Some(StoredMatrix::Dense(m));
                    (b, c)
                }
            }
        }
    };
    Factorization::assemble(strategy, w, b, c, banded_inverse)
}

/// `(A_chi^Toep)^{1/2}` and its inverse; closed form for exponential decay.
fn lr_aware_correlation(w: &Workload) -> Result<(ToeplitzLT, ToeplitzLT)> {
    let s = w.schedule();
    if s.kind() == ScheduleKind::Exponential && s.beta() < 1.0 {
        let params = ExpDecayParams::new(s.n(), s.beta())?;
        Ok((c_alpha(&params), c_alpha_inverse(&params)))
    } else {
        let c = w.a_toep().sqrt()?;
        let c_inv = c.inverse()?;
        Ok((c, c_inv))
    }
}

/// `A_1 * diag(chi) * T` in `O(n^2)`.
fn workload_times_toeplitz(chi: &[f64], t: &ToeplitzLT) -> Result<LowerTriangular> {
    Ok(t.materialize().scale_rows(chi)?.prefix_sum_rows())
}

impl Factorization {
    fn assemble(
        strategy: Strategy,
        w: &Workload,
        b: LowerTriangular,
        c: LowerTriangular,
        banded_inverse: Option<StoredMatrix>,
    ) -> Result<Self> {
        let n = w.n();
        let residual = b.multiply(&c)?.max_abs_diff(w.a_chi())?;
        let tol = RESIDUAL_TOL * n as f64;
        if !(residual <= tol) {
            return Err(Error::ResidualTooLarge { residual, tol });
        }
        for m in [&b, &c] {
            if let Some((index, value)) = m
                .diagonal()
                .into_iter()
                .enumerate()
                .find(|(_, v)| !(*v > 0.0))
            {
                return Err(Error::NonPositiveDiagonal { index, value });
            }
        }
        Ok(Self {
            strategy,
            schedule: w.schedule().clone(),
            b,
            c,
            residual,
            banded_inverse,
        })
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn workload(&self) -> Workload {
        build_workload(&self.schedule)
    }

    pub fn n(&self) -> usize {
        self.b.n()
    }

    pub fn b(&self) -> &LowerTriangular {
        &self.b
    }

    pub fn c(&self) -> &LowerTriangular {
        &self.c
    }

    /// `max |BC - A_chi|` measured at construction.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// The banded `C^{-1}` of a BISR factorization.
    pub fn banded_inverse(&self) -> Option<&StoredMatrix> {
        self.banded_inverse.as_ref()
    }

    /// Writes `metadata.json`, `B.ltm`, `C.ltm` and, for BISR, `M.ltm` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let meta = Metadata {
            strategy: self.strategy,
            schedule: self.schedule.clone(),
            n: self.n(),
            residual: self.residual,
            has_banded_inverse: self.banded_inverse.is_some(),
        };
        serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join(METADATA))?), &meta)?;
        write_matrix(
            BufWriter::new(File::create(dir.join("B.ltm"))?),
            &StoredMatrix::Dense(self.b.clone()),
        )?;
        write_matrix(
            BufWriter::new(File::create(dir.join("C.ltm"))?),
            &StoredMatrix::Dense(self.c.clone()),
        )?;
        if let Some(m) = &self.banded_inverse {
            write_matrix(BufWriter::new(File::create(dir.join("M.ltm"))?), m)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta: Metadata =
            serde_json::from_reader(BufReader::new(File::open(dir.join(METADATA))?))?;
        let read = |name: &str| -> Result<StoredMatrix> {
            read_matrix(BufReader::new(File::open(dir.join(name))?))
        };
        let b = read("B.ltm")?.to_lower();
        let c = read("C.ltm")?.to_lower();
        let banded_inverse = if meta.has_banded_inverse {
            Some(read("M.ltm")?)
        } else {
            None
        };
        for got in [b.n(), c.n(), meta.schedule.n()] {
            if got != meta.n {
                return Err(Error::DimensionMismatch {
                    left: meta.n,
                    right: got,
                });
            }
        }
        Ok(Self {
            strategy: meta.strategy,
            schedule: meta.schedule,
            b,
            c,
            residual: meta.residual,
            banded_inverse,
        })
    }
}

const METADATA: &str = "metadata.json";

#[derive(Serialize, Deserialize)]
struct Metadata {
    strategy: Strategy,
    schedule: Schedule,
    n: usize,
    residual: f64,
    has_banded_inverse: bool,
}
