//! Grid evaluation. Grid points run in parallel; rows are assembled in grid
//! order afterwards, so output bytes do not depend on scheduling.

use std::path::PathBuf;

use clap::Args;
use lrmf::bounds::{lb_multi, lb_single};
use lrmf::metrics::{max_se, mean_se, multi_error, sensitivity_single, ParticipationSchema};
use lrmf::{build_workload, factorize, make_schedule, Schedule, ScheduleKind, Strategy};
use serde::Deserialize;

use crate::output::{self, write_rows, Row};
use crate::{read_spec, schema_for, usage, CliError, SensArg};

#[derive(Args, Debug)]
pub struct SweepCmd {
    /// JSON sweep spec; list flags are ignored when given.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub schedule: Vec<ScheduleKind>,
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub beta: Vec<f64>,
    /// Exponent for polynomial schedules.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub strategy: Vec<String>,
    /// Band width for BISR strategies.
    #[arg(long)]
    pub bandwidth: Option<usize>,
    /// Separations of the min-separation schemas to evaluate.
    #[arg(long, value_delimiter = ',')]
    pub b: Vec<usize>,
    /// Participation caps, paired with --b; defaults to ceil(n / b).
    #[arg(long, value_delimiter = ',')]
    pub k: Vec<usize>,
    #[arg(long, value_enum, default_value_t = SensArg::Heuristic)]
    pub sens: SensArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaSpec {
    pub b: usize,
    #[serde(default)]
    pub k: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub n_list: Vec<usize>,
    pub beta_list: Vec<f64>,
    pub schedules: Vec<ScheduleKind>,
    #[serde(default)]
    pub gamma: Option<f64>,
    pub strategies: Vec<String>,
    #[serde(default)]
    pub bandwidth: Option<usize>,
    #[serde(default)]
    pub schemas: Vec<SchemaSpec>,
    #[serde(default = "default_sens")]
    pub sens: SensArg,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_sens() -> SensArg {
    SensArg::Heuristic
}

impl SweepCmd {
    pub fn to_spec(&self) -> Result<SweepSpec, CliError> {
        if let Some(path) = &self.spec {
            return read_spec(path);
        }
        if !self.k.is_empty() && self.k.len() != self.b.len() {
            return Err(usage("--k must pair one value with each --b"));
        }
        let schemas = self
            .b
            .iter()
            .enumerate()
            .map(|(i, &b)| SchemaSpec {
                b,
                k: self.k.get(i).copied(),
            })
            .collect();
        Ok(SweepSpec {
            n_list: self.n.clone(),
            beta_list: self.beta.clone(),
            schedules: self.schedule.clone(),
            gamma: self.gamma,
            strategies: self.strategy.clone(),
            bandwidth: self.bandwidth,
            schemas,
            sens: self.sens,
            out: self.out.clone(),
        })
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        for (name, empty) in [
            ("n", self.n_list.is_empty()),
            ("beta", self.beta_list.is_empty()),
            ("schedule", self.schedules.is_empty()),
            ("strategy", self.strategies.is_empty()),
        ] {
            if empty {
                return Err(usage(format!("sweep needs a nonempty {name} list")));
            }
        }
        if self.schedules.contains(&ScheduleKind::Polynomial) && self.gamma.is_none() {
            return Err(usage("polynomial schedules need --gamma"));
        }
        for s in &self.strategies {
            Strategy::parse(s, Some(self.bandwidth.unwrap_or(1)), None)?;
            if s.starts_with("bisr") && self.bandwidth.is_none() {
                return Err(usage(format!("strategy {s} needs --bandwidth")));
            }
        }
        Ok(())
    }

    /// Distinct schedules in grid order; the constant schedule ignores beta.
    fn schedules(&self) -> Vec<Result<Schedule, (ScheduleKind, usize, f64, String)>> {
        let mut out = Vec::new();
        for &n in &self.n_list {
            for &kind in &self.schedules {
                let betas: &[f64] = if kind == ScheduleKind::Constant {
                    &[1.0]
                } else {
                    &self.beta_list
                };
                for &beta in betas {
                    let gamma = (kind == ScheduleKind::Polynomial)
                        .then_some(self.gamma)
                        .flatten();
                    out.push(
                        make_schedule(kind, n, beta, gamma)
                            .map_err(|e| (kind, n, beta, e.to_string())),
                    );
                }
            }
        }
        out
    }
}

enum Task {
    Bounds(Schedule),
    Point(Schedule, String),
    Invalid(ScheduleKind, usize, f64, String),
}

fn schemas(spec: &SweepSpec, n: usize) -> Vec<Result<ParticipationSchema, String>> {
    spec.schemas
        .iter()
        .map(|s| schema_for(n, Some(s.b), s.k).map_err(|e| format!("b={} k={:?}: {e}", s.b, s.k)))
        .collect()
}

fn bound_rows(spec: &SweepSpec, s: &Schedule) -> Vec<Row> {
    let mut base = Row::for_schedule(s);
    base.strategy = "lower_bound".into();
    let lb = lb_single(s);
    let mut rows = vec![
        base.clone().metric("lb_maxse", lb.lb_maxse),
        base.clone().metric("lb_meanse", lb.lb_meanse),
    ];
    for (schema, raw) in schemas(spec, s.n()).into_iter().zip(&spec.schemas) {
        let row = match schema {
            Ok(schema) => match lb_multi(s, schema) {
                Ok(v) => base.clone().with_schema(schema).metric("lb_multi", v),
                Err(e) => base.clone().with_schema(schema).failed("lb_multi", e),
            },
            Err(e) => {
                let mut r = base.clone().failed("lb_multi", e);
                r.schema_b = Some(raw.b);
                r.schema_k = raw.k;
                r
            }
        };
        rows.push(row);
    }
    rows
}

fn point_rows(spec: &SweepSpec, s: &Schedule, name: &str) -> Vec<Row> {
    let mut base = Row::for_schedule(s);
    base.strategy = name.to_string();
    let strategy = match Strategy::parse(name, spec.bandwidth, None) {
        Ok(st) => st,
        Err(e) => return vec![base.failed("factorize", e)],
    };
    base.strategy = strategy.name();
    base.bandwidth = strategy.bandwidth();
    let f = match factorize(&build_workload(s), strategy) {
        Ok(f) => f,
        Err(e) => return vec![base.failed("factorize", e)],
    };
    let mut rows = vec![
        base.clone()
            .metric("sensitivity", sensitivity_single(f.c())),
        base.clone().metric("maxse", max_se(&f)),
        base.clone().metric("meanse", mean_se(&f)),
    ];
    for (schema, raw) in schemas(spec, s.n()).into_iter().zip(&spec.schemas) {
        let row = match schema {
            Ok(schema) => match multi_error(f.b(), f.c(), schema, spec.sens.into()) {
                Ok(v) => base.clone().with_schema(schema).metric("multi_error", v),
                Err(e) => base.clone().with_schema(schema).failed("multi_error", e),
            },
            Err(e) => {
                let mut r = base.clone().failed("multi_error", e);
                r.schema_b = Some(raw.b);
                r.schema_k = raw.k;
                r
            }
        };
        rows.push(row);
    }
    rows
}

fn run_task(spec: &SweepSpec, task: &Task) -> Vec<Row> {
    match task {
        Task::Bounds(s) => bound_rows(spec, s),
        Task::Point(s, name) => point_rows(spec, s, name),
        Task::Invalid(kind, n, beta, msg) => vec![Row {
            n: Some(*n),
            beta: Some(*beta),
            schedule: kind.name().to_string(),
            ..Row::default()
        }
        .failed("schedule", msg)],
    }
}

/// All rows of the sweep, in grid order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<Row>, CliError> {
    spec.validate()?;
    let mut tasks = Vec::new();
    for s in spec.schedules() {
        match s {
            Ok(s) => {
                tasks.push(Task::Bounds(s.clone()));
                for name in &spec.strategies {
                    tasks.push(Task::Point(s.clone(), name.clone()));
                }
            }
            Err((kind, n, beta, msg)) => tasks.push(Task::Invalid(kind, n, beta, msg)),
        }
    }
    #[cfg(feature = "parallel")]
    let chunks: Vec<Vec<Row>> = {
        use rayon::prelude::*;
        tasks.par_iter().map(|t| run_task(spec, t)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let chunks: Vec<Vec<Row>> = tasks.iter().map(|t| run_task(spec, t)).collect();
    Ok(chunks.into_iter().flatten().collect())
}

pub fn cmd_sweep(c: &SweepCmd) -> Result<(), CliError> {
    let spec = c.to_spec()?;
    let rows = run_sweep(&spec)?;
    let out = c.out.clone().or(spec.out.clone());
    let mut w = output::open(out.as_deref())?;
    write_rows(&mut w, &rows)?;
    w.flush()?;
    Ok(())
}
