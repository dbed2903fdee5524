//! Self-check suite. Every check is deterministic for a fixed seed.
//!
//! The checks that depend on the square-root coefficients `r_j` read them
//! from one table, which `--r-table` can replace to confirm that a bad table
//! is caught and named.

use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use lrmf::bounds::lb_single;
use lrmf::closed_forms::{exp_workload_sqrt, prefix_sqrt_coeffs, ExpDecayParams};
use lrmf::metrics::{max_se, mean_se, sensitivity_multi, ParticipationSchema, SensitivityMode};
use lrmf::noise_engine::{
    dp_sgd_run, empirical_mean_se, GaussianRows, NoiseStream, Objective, SimConfig,
};
use lrmf::{
    build_workload, factorize, make_schedule, BisrBase, LowerTriangular, ScheduleKind, Strategy,
    ToeplitzLT,
};
use serde::Serialize;

use crate::output::{self, write_rows, Row};
use crate::{read_numbers, usage, CliError, Format};

const TABLE_LEN: usize = 256;

#[derive(Args, Debug)]
pub struct VerifyCmd {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Replacement `r_j` table (whitespace or comma separated, at least 16 values).
    #[arg(long)]
    pub r_table: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub n: usize,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn check(name: &'static str, n: usize, value: f64, tolerance: f64) -> Check {
    Check {
        name,
        n,
        value,
        tolerance,
        pass: value <= tolerance,
    }
}

fn max_abs(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(
        0.0,
        |m, v| if v.is_nan() { f64::NAN } else { m.max(v.abs()) },
    )
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    (0..a.len())
        .map(|d| (0..=d).map(|j| a[j] * b[d - j]).sum())
        .collect()
}

fn table_checks(r: &[f64]) -> Vec<Check> {
    let n = r.len();
    let recurrence = max_abs((1..n).map(|j| {
        let want = r[j - 1] * (2 * j - 1) as f64 / (2 * j) as f64;
        (r[j] - want) / want
    }));
    let head = (r[0] - 1.0).abs();
    let bound_violations = (1..n)
        .filter(|&j| {
            let (jf, pi) = (j as f64, std::f64::consts::PI);
            !(r[j] >= 1.0 / (pi * (jf + 1.0)).sqrt() && r[j] <= 1.0 / (pi * jf).sqrt())
        })
        .count();
    let squared = max_abs(convolve(r, r).into_iter().map(|v| v - 1.0));
    let r_tilde: Vec<f64> = (0..n).map(|t| -r[t] / (2.0 * t as f64 - 1.0)).collect();
    let impulse = max_abs(
        convolve(r, &r_tilde)
            .into_iter()
            .enumerate()
            .map(|(d, v)| v - f64::from(d == 0)),
    );
    // C_alpha built from the table: coefficients alpha^j r_j.
    let p = ExpDecayParams::new(n, 0.1).expect("valid");
    let c: Vec<f64> = r
        .iter()
        .enumerate()
        .map(|(j, v)| p.alpha().powi(j as i32) * v)
        .collect();
    let chi = p.chi();
    let c_alpha = max_abs(convolve(&c, &c).into_iter().zip(&chi).map(|(v, x)| v - x));
    vec![
        check("r_head", n, head, 0.0),
        check("r_recurrence", n, recurrence, 1e-14),
        check("r_bounds", n, bound_violations as f64, 0.0),
        check("r_squares_to_prefix_sum", n, squared, 1e-12),
        check("r_inverse_impulse", n, impulse, 1e-12),
        check("c_alpha_squares_to_toeplitz_workload", n, c_alpha, 1e-9),
    ]
}

fn library_checks(seed: u64) -> Vec<Check> {
    let mut out = Vec::new();

    let p = ExpDecayParams::new(128, 0.1).expect("valid");
    let w =
        build_workload(&make_schedule(ScheduleKind::Exponential, 128, 0.1, None).expect("valid"));
    let s = exp_workload_sqrt(&p).expect("alpha in (0,1)").materialize();
    let err = s
        .multiply(&s)
        .and_then(|m| m.max_abs_diff(w.a_chi()))
        .unwrap_or(f64::NAN);
    out.push(check("exp_sqrt_closed_form", 128, err, 1e-9));

    let mut residual = 0.0f64;
    let mut lb_gap = 0.0f64;
    for kind in ScheduleKind::ALL {
        let gamma = (kind == ScheduleKind::Polynomial).then_some(2.0);
        let beta = if kind == ScheduleKind::Constant {
            1.0
        } else {
            0.05
        };
        let sched = make_schedule(kind, 64, beta, gamma).expect("valid");
        let w = build_workload(&sched);
        let lb = lb_single(&sched);
        let mut strategies = Strategy::SINGLE_EPOCH.to_vec();
        for base in [BisrBase::PrefixWorkload, BisrBase::LrWorkload] {
            strategies.push(Strategy::Bisr { bandwidth: 8, base });
        }
        for st in strategies {
            match factorize(&w, st) {
                Ok(f) => {
                    residual = residual.max(f.residual() / 64.0);
                    lb_gap = lb_gap
                        .max(lb.lb_maxse - max_se(&f))
                        .max(lb.lb_meanse - mean_se(&f));
                }
                Err(_) => residual = f64::NAN,
            }
        }
    }
    out.push(check("factorization_residuals", 64, residual, 1e-9));
    out.push(check("lower_bound_dominance", 64, lb_gap, 0.0));

    let w =
        build_workload(&make_schedule(ScheduleKind::Exponential, 1024, 0.1, None).expect("valid"));
    let left = factorize(&w, Strategy::IdentityLeft).expect("exact");
    let root = 1024f64.sqrt();
    out.push(check(
        "identity_left_errors",
        1024,
        (max_se(&left) - root)
            .abs()
            .max((mean_se(&left) - root).abs()),
        1e-10,
    ));
    let right = factorize(&w, Strategy::IdentityRight).expect("exact");
    let a2 = ExpDecayParams::new(1024, 0.1)
        .expect("valid")
        .alpha()
        .powi(2);
    let nf = 1024.0;
    let closed = ((a2.powf(nf + 1.0) - a2 * (nf + 1.0) + nf) / (nf * (1.0 - a2).powi(2))).sqrt();
    out.push(check(
        "identity_right_meanse",
        1024,
        (mean_se(&right) - closed).abs(),
        1e-10,
    ));

    let ones = LowerTriangular::ones(4);
    let sens = sensitivity_multi(
        &ones,
        ParticipationSchema::MinSep { b: 2, k: 2 },
        SensitivityMode::Exact,
    )
    .unwrap_or(f64::NAN);
    out.push(check(
        "multi_sensitivity_example",
        4,
        (sens - 10f64.sqrt()).abs(),
        1e-14,
    ));

    let mut gap = 0.0f64;
    for b in [2usize, 3, 5] {
        for coeffs in [prefix_sqrt_coeffs(16), vec![1.0; 16]] {
            let c = ToeplitzLT::new(coeffs).expect("nonempty").materialize();
            let schema = ParticipationSchema::min_sep(16, b).expect("valid");
            let e = sensitivity_multi(&c, schema, SensitivityMode::Exact).unwrap_or(f64::NAN);
            let h = sensitivity_multi(&c, schema, SensitivityMode::Heuristic).unwrap_or(f64::NAN);
            gap = gap.max((e - h).abs());
        }
    }
    out.push(check("exact_vs_heuristic_sensitivity", 16, gap, 0.0));

    let w =
        build_workload(&make_schedule(ScheduleKind::Exponential, 64, 0.1, None).expect("valid"));
    let f = factorize(
        &w,
        Strategy::Bisr {
            bandwidth: 4,
            base: BisrBase::LrWorkload,
        },
    )
    .expect("valid");
    let cinv = f.c().inverse().expect("positive diagonal");
    let z = GaussianRows::new(seed).matrix(64, 4, 1.0);
    let mut stream = NoiseStream::for_factorization(&f, 4, 1.0, seed).expect("banded");
    let mut err = 0.0f64;
    for i in 0..64 {
        let row = stream.next_noise().expect("64 rows");
        for (k, v) in row.iter().enumerate() {
            let want: f64 = (0..=i).map(|j| cinv.get(i, j) * z[j][k]).sum();
            err = err.max((v - want).abs());
        }
        if stream.buffer_len() > 4 {
            err = f64::INFINITY;
        }
    }
    out.push(check("streaming_equals_dense", 64, err, 1e-8));

    let f = factorize(&w, Strategy::LrAware).expect("valid");
    let emp = empirical_mean_se(&f, 1.0, 1.0, 4000, seed).unwrap_or(f64::NAN);
    out.push(check(
        "monte_carlo_meanse",
        64,
        (emp / mean_se(&f) - 1.0).abs(),
        0.05,
    ));

    let cfg = SimConfig {
        objective: Objective::Linear {
            data_seed: seed,
            dims: 3,
        },
        eta: 0.5,
        zeta: 1e6,
        batch: 1,
        steps: 64,
        sigma_eps_delta: 0.0,
        noise_seed: seed,
        theta0: None,
    };
    let g = GaussianRows::new(seed).matrix(64, 3, 1.0);
    let err = match dp_sgd_run(&cfg, &f) {
        Ok(t) => max_abs(t.theta.iter().enumerate().flat_map(|(i, row)| {
            let (w, g) = (&w, &g);
            row.iter().enumerate().map(move |(k, v)| {
                v + 0.5 * (0..=i).map(|j| w.a_chi().get(i, j) * g[j][k]).sum::<f64>()
            })
        })),
        Err(_) => f64::NAN,
    };
    out.push(check("simulator_stacking_identity", 64, err, 1e-10));
    out
}

/// Runs every check; `r_table` replaces the computed square-root coefficients.
pub fn run_checks(seed: u64, r_table: Option<Vec<f64>>) -> Vec<Check> {
    let r = r_table.unwrap_or_else(|| prefix_sqrt_coeffs(TABLE_LEN));
    let mut checks = table_checks(&r);
    checks.extend(library_checks(seed));
    checks
}

pub fn cmd_verify(c: &VerifyCmd) -> Result<(), CliError> {
    let table = match &c.r_table {
        Some(p) => {
            let t = read_numbers(p)?;
            if t.len() < 16 {
                return Err(usage(format!(
                    "r table needs at least 16 values, got {}",
                    t.len()
                )));
            }
            Some(t)
        }
        None => None,
    };
    let checks = run_checks(c.seed, table);
    let mut w = output::open(c.out.as_deref())?;
    match c.format {
        Format::Csv => {
            let rows: Vec<Row> = checks
                .iter()
                .map(|k| Row {
                    n: Some(k.n),
                    metric: k.name.to_string(),
                    value: Some(k.value),
                    status: if k.pass { "pass" } else { "fail" }.to_string(),
                    ..Row::default()
                })
                .collect();
            write_rows(&mut w, &rows)?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, &checks)?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    let failed: Vec<&str> = checks.iter().filter(|k| !k.pass).map(|k| k.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        eprintln!("failed checks: {}", failed.join(", "));
        Err(CliError::VerifyFailed(failed.len()))
    }
}
