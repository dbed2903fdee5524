//! Streaming correlated noise `C^{-1} Z` and a small DP-SGD simulator.
//!
//! Noise row `z_i` is drawn from a ChaCha8 generator keyed by the seed with
//! stream number `i`, so any consumer can regenerate row `i` of `Z` without
//! drawing rows `0..i`. Banded and dense streams built from one seed therefore
//! see the identical `Z`.

use std::collections::VecDeque;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::factorizations::Factorization;
use crate::metrics::sensitivity_single;
use crate::par;
use crate::tri_matrix::{LowerTriangular, StoredMatrix};

/// Counter-based source of i.i.d. `N(0, sigma^2)` rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GaussianRows {
    seed: u64,
}

impl GaussianRows {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn row(&self, index: usize, d: usize, sigma: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        (0..d)
            .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    /// Rows `0..n` stacked.
    pub fn matrix(&self, n: usize, d: usize, sigma: f64) -> Vec<Vec<f64>> {
        par::map_range(n, |i| self.row(i, d, sigma))
    }
}

#[derive(Clone, Debug)]
enum Mode {
    /// `C^{-1}` with at most `p` nonzero diagonals; keeps the last `p` rows of `Z`.
    Banded {
        m: StoredMatrix,
        p: usize,
        buffer: VecDeque<Vec<f64>>,
    },
    /// Full `C^{-1}`; keeps every past row of `Z`.
    Dense {
        cinv: LowerTriangular,
        history: Vec<Vec<f64>>,
    },
}

/// Produces the rows of `C^{-1} Z` one step at a time.
#[derive(Clone, Debug)]
pub struct NoiseStream {
    mode: Mode,
    n: usize,
    d: usize,
    sigma: f64,
    source: GaussianRows,
    step: usize,
}

fn stored_bandwidth(m: &StoredMatrix) -> usize {
    match m {
        StoredMatrix::Dense(l) => l.bandwidth(),
        StoredMatrix::Toeplitz(t) => t
            .coeffs()
            .iter()
            .rposition(|&v| v != 0.0)
            .map_or(1, |i| i + 1),
    }
}

impl NoiseStream {
    /// Streams with a banded `M = C^{-1}` of declared width `p`.
    pub fn banded(m: StoredMatrix, p: usize, d: usize, sigma: f64, seed: u64) -> Result<Self> {
        let n = m.n();
        if p < 1 || p > n {
            return Err(Error::BandwidthOutOfRange { p, n });
        }
        let actual = stored_bandwidth(&m);
        if actual > p {
            return Err(invalid(format!(
                "matrix has bandwidth {actual}, declared {p}"
            )));
        }
        Self::build(
            Mode::Banded {
                m,
                p,
                buffer: VecDeque::with_capacity(p),
            },
            n,
            d,
            sigma,
            seed,
        )
    }

    pub fn dense(cinv: LowerTriangular, d: usize, sigma: f64, seed: u64) -> Result<Self> {
        let n = cinv.n();
        Self::build(
            Mode::Dense {
                cinv,
                history: Vec::with_capacity(n),
            },
            n,
            d,
            sigma,
            seed,
        )
    }

    /// Banded when `f` carries a banded inverse, dense otherwise.
    pub fn for_factorization(f: &Factorization, d: usize, sigma: f64, seed: u64) -> Result<Self> {
        match (f.banded_inverse(), f.strategy().bandwidth()) {
            (Some(m), Some(p)) => Self::banded(m.clone(), p, d, sigma, seed),
            _ => Self::dense(f.c().inverse()?, d, sigma, seed),
        }
    }

    fn build(mode: Mode, n: usize, d: usize, sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(invalid(format!(
                "noise scale {sigma} must be finite and nonnegative"
            )));
        }
        Ok(Self {
            mode,
            n,
            d,
            sigma,
            source: GaussianRows::new(seed),
            step: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Number of raw noise rows currently held.
    pub fn buffer_len(&self) -> usize {
        match &self.mode {
            Mode::Banded { buffer, .. } => buffer.len(),
            Mode::Dense { history, .. } => history.len(),
        }
    }

    /// Row `step` of `C^{-1} Z`.
    pub fn next_noise(&mut self) -> Result<Vec<f64>> {
        let i = self.step;
        if i >= self.n {
            return Err(Error::StreamExhausted(self.n));
        }
        let z = self.source.row(i, self.d, self.sigma);
        let mut out = vec![0.0; self.d];
        match &mut self.mode {
            Mode::Banded { m, p, buffer } => {
                if buffer.len() == *p {
                    buffer.pop_back();
                }
                buffer.push_front(z);
                for (t, row) in buffer.iter().enumerate() {
                    axpy(m.get(i, i - t), row, &mut out);
                }
            }
            Mode::Dense { cinv, history } => {
                history.push(z);
                for (j, row) in history.iter().enumerate() {
                    axpy(cinv.get(i, j), row, &mut out);
                }
            }
        }
        self.step += 1;
        Ok(out)
    }
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `g * min(1, zeta / ||g||)`; the zero vector is returned unchanged.
pub fn clip(g: &[f64], zeta: f64) -> Vec<f64> {
    let n = norm(g);
    if n <= zeta || n == 0.0 {
        g.to_vec()
    } else {
        let s = zeta / n;
        g.iter().map(|x| x * s).collect()
    }
}

/// Synthetic training problems.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Objective {
    /// `0.5 * sum_i h_i (theta_i - opt_i)^2` with diagonal curvature `h`.
    /// Every example in a batch has the same gradient.
    Quadratic {
        curvature: Vec<f64>,
        optimum: Vec<f64>,
    },
    /// Least squares on `samples` Gaussian rows `x` with targets
    /// `x . w + noise * eps`, generated from `data_seed`.
    LinearRegression {
        data_seed: u64,
        samples: usize,
        dims: usize,
        #[serde(default)]
        noise: f64,
    },
    /// State-independent gradients: step `i` uses the fixed vector `g_i`
    /// (standard normal, from `data_seed`) for every example; loss `<g_i, theta>`.
    Linear { data_seed: u64, dims: usize },
}

impl Objective {
    pub fn dims(&self) -> usize {
        match self {
            Objective::Quadratic { curvature, .. } => curvature.len(),
            Objective::LinearRegression { dims, .. } | Objective::Linear { dims, .. } => *dims,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Objective::Quadratic { curvature, optimum } => {
                if curvature.is_empty() || curvature.len() != optimum.len() {
                    return Err(invalid(
                        "quadratic curvature and optimum must be nonempty and equal length",
                    ));
                }
                if curvature.iter().any(|h| !(*h >= 0.0)) {
                    return Err(invalid("quadratic curvature must be nonnegative"));
                }
            }
            Objective::LinearRegression {
                samples,
                dims,
                noise,
                ..
            } => {
                if *samples == 0 || *dims == 0 || !(*noise >= 0.0) {
                    return Err(invalid(
                        "linear regression needs samples, dims >= 1 and noise >= 0",
                    ));
                }
            }
            Objective::Linear { dims, .. } => {
                if *dims == 0 {
                    return Err(invalid("linear objective needs dims >= 1"));
                }
            }
        }
        Ok(())
    }
}

/// Materialized data of an [`Objective`].
enum Problem<'a> {
    Quadratic { h: &'a [f64], opt: &'a [f64] },
    Regression { x: Vec<Vec<f64>>, y: Vec<f64> },
    Linear { g: Vec<Vec<f64>> },
}

impl<'a> Problem<'a> {
    fn new(obj: &'a Objective, steps: usize) -> Self {
        match obj {
            Objective::Quadratic { curvature, optimum } => Problem::Quadratic {
                h: curvature,
                opt: optimum,
            },
            Objective::LinearRegression {
                data_seed,
                samples,
                dims,
                noise,
            } => {
                let src = GaussianRows::new(*data_seed);
                let w = src.row(0, *dims, 1.0);
                let mut x = Vec::with_capacity(*samples);
                let mut y = Vec::with_capacity(*samples);
                for s in 0..*samples {
                    let mut row = src.row(1 + s, *dims + 1, 1.0);
                    let eps = row.pop().unwrap_or(0.0);
                    y.push(dot(&row, &w) + noise * eps);
                    x.push(row);
                }
                Problem::Regression { x, y }
            }
            Objective::Linear { data_seed, dims } => Problem::Linear {
                g: GaussianRows::new(*data_seed).matrix(steps, *dims, 1.0),
            },
        }
    }

    /// Gradient of example `j` of the batch at step `i`.
    fn gradient(&self, theta: &[f64], i: usize, j: usize, batch: usize) -> Vec<f64> {
        match self {
            Problem::Quadratic { h, opt } => theta
                .iter()
                .zip(*h)
                .zip(*opt)
                .map(|((t, h), o)| h * (t - o))
                .collect(),
            Problem::Regression { x, y } => {
                let s = (i * batch + j) % x.len();
                let r = dot(&x[s], theta) - y[s];
                x[s].iter().map(|v| r * v).collect()
            }
            Problem::Linear { g } => g[i].clone(),
        }
    }

    fn loss(&self, theta: &[f64], i: usize) -> f64 {
        match self {
            Problem::Quadratic { h, opt } => {
                0.5 * theta
                    .iter()
                    .zip(*h)
                    .zip(*opt)
                    .map(|((t, h), o)| h * (t - o).powi(2))
                    .sum::<f64>()
            }
            Problem::Regression { x, y } => {
                let total: f64 = x
                    .iter()
                    .zip(y)
                    .map(|(r, y)| (dot(r, theta) - y).powi(2))
                    .sum();
                0.5 * total / x.len() as f64
            }
            Problem::Linear { g } => dot(&g[i], theta),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub objective: Objective,
    pub eta: f64,
    pub zeta: f64,
    pub batch: usize,
    pub steps: usize,
    pub sigma_eps_delta: f64,
    pub noise_seed: u64,
    /// Starting point; zeros when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<Vec<f64>>,
}

impl SimConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.objective.validate()?;
        if !(self.eta > 0.0 && self.zeta > 0.0) {
            return Err(invalid("eta and zeta must be positive"));
        }
        if self.batch == 0 || self.steps == 0 {
            return Err(invalid("batch and steps must be positive"));
        }
        if !(self.sigma_eps_delta >= 0.0 && self.sigma_eps_delta.is_finite()) {
            return Err(invalid("sigma_eps_delta must be finite and nonnegative"));
        }
        if let Some(t) = &self.theta0 {
            if t.len() != self.objective.dims() {
                return Err(Error::DimensionMismatch {
                    left: self.objective.dims(),
                    right: t.len(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    /// `theta_1 .. theta_n`.
    pub theta: Vec<Vec<f64>>,
    /// Loss at each `theta_i`.
    pub losses: Vec<f64>,
    /// `||[C^{-1} Z]_i||` for each step.
    pub noise_norms: Vec<f64>,
}

impl Trajectory {
    /// CSV with header `step,loss,theta_norm,noise_norm`, steps 1-based.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "step,loss,theta_norm,noise_norm")?;
        for (i, ((theta, loss), noise)) in self
            .theta
            .iter()
            .zip(&self.losses)
            .zip(&self.noise_norms)
            .enumerate()
        {
            writeln!(w, "{},{},{},{}", i + 1, loss, norm(theta), noise)?;
        }
        Ok(())
    }
}

/// Runs DP-SGD with correlated noise from `f`; noise scale
/// `sigma = sens(C) * sigma_eps_delta * zeta`.
pub fn dp_sgd_run(cfg: &SimConfig, f: &Factorization) -> Result<Trajectory> {
    cfg.validate()?;
    let n = f.n();
    if cfg.steps != n {
        return Err(Error::DimensionMismatch {
            left: cfg.steps,
            right: n,
        });
    }
    let d = cfg.objective.dims();
    let sigma = sensitivity_single(f.c()) * cfg.sigma_eps_delta * cfg.zeta;
    let mut stream = NoiseStream::for_factorization(f, d, sigma, cfg.noise_seed)?;
    let problem = Problem::new(&cfg.objective, n);
    let chi = f.schedule().values();
    let mut theta = cfg.theta0.clone().unwrap_or_else(|| vec![0.0; d]);
    let mut out = Trajectory {
        theta: Vec::with_capacity(n),
        losses: Vec::with_capacity(n),
        noise_norms: Vec::with_capacity(n),
    };
    for i in 0..n {
        let mut x = vec![0.0; d];
        for j in 0..cfg.batch {
            let g = clip(&problem.gradient(&theta, i, j, cfg.batch), cfg.zeta);
            axpy(1.0, &g, &mut x);
        }
        let noise = stream.next_noise()?;
        let step = chi[i] * cfg.eta / cfg.batch as f64;
        for ((t, xi), zi) in theta.iter_mut().zip(&x).zip(&noise) {
            *t -= step * (xi + zi);
        }
        out.losses.push(problem.loss(&theta, i));
        out.noise_norms.push(norm(&noise));
        out.theta.push(theta.clone());
    }
    Ok(out)
}

/// Root-mean-square estimate of `sqrt(E ||A_chi G - B(CG + Z)||_F^2 / n)`
/// with `d = 1` over `draws` noise matrices; `Z` has scale
/// `sens(C) * sigma_eps_delta * zeta`. The error equals `A_chi C^{-1} Z`,
/// independent of `G`.
pub fn empirical_mean_se(
    f: &Factorization,
    sigma_eps_delta: f64,
    zeta: f64,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    if draws == 0 {
        return Err(invalid("need at least one draw"));
    }
    let n = f.n();
    let sigma = sensitivity_single(f.c()) * sigma_eps_delta * zeta;
    let cinv = match f.banded_inverse() {
        Some(m) => m.to_lower(),
        None => f.c().inverse()?,
    };
    let chi = f.schedule().values();
    let mut seeder = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..draws).map(|_| seeder.random()).collect();
    let per_draw: Vec<Result<f64>> = par::map_range(draws, |s| {
        let mut stream = NoiseStream::dense(cinv.clone(), 1, sigma, seeds[s])?;
        let (mut acc, mut sq) = (0.0, 0.0);
        for &c in chi {
            acc += c * stream.next_noise()?[0];
            sq += acc * acc;
        }
        Ok(sq / n as f64)
    });
    let mut total = 0.0;
    for v in per_draw {
        total += v?;
    }
    Ok((total / draws as f64).sqrt())
}
