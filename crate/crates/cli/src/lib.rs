//! Command-line front-end: build schedules and factorizations, evaluate
//! errors and bounds, run the simulator, sweep grids and self-verify.
//!
//! Exit codes: 0 success, 1 verification failure, 2 invalid flags or
//! parameters, 3 numeric or I/O failure.

pub mod output;
pub mod sweep;
pub mod verify;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use lrmf::bounds::bound_report;
use lrmf::metrics::{ErrorReport, ParticipationSchema, SensitivityMode};
use lrmf::noise_engine::{dp_sgd_run, SimConfig};
use lrmf::{
    build_workload, factorize, make_schedule, BisrBase, Factorization, Schedule, ScheduleKind,
    Strategy,
};

use output::{write_rows, Row};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] lrmf::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0} verification check(s) failed")]
    VerifyFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use lrmf::Error as E;
        match self {
            CliError::VerifyFailed(_) => 1,
            CliError::Usage(_) | CliError::Json(_) => 2,
            CliError::Lib(
                E::InvalidParameter(_)
                | E::BandwidthOutOfRange { .. }
                | E::SchemaOutOfRange { .. }
                | E::ExactEnumerationTooLarge { .. }
                | E::DimensionMismatch { .. }
                | E::Json(_),
            ) => 2,
            _ => 3,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Parser, Debug)]
#[command(
    name = "lrmf",
    version,
    about = "Matrix-factorization mechanisms for DP-SGD with learning-rate schedules"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print the learning-rate sequence.
    Schedule(ScheduleCmd),
    /// Build a factorization, report its residual and optionally save it.
    Factorize(FactorizeCmd),
    /// Sensitivity, MaxSE, MeanSE and multi-participation error.
    Errors(ErrorsCmd),
    /// Lower bounds for a schedule.
    Bounds(BoundsCmd),
    /// Run the DP-SGD simulator from a JSON config.
    Simulate(SimulateCmd),
    /// Evaluate a grid of points; one CSV row per metric.
    Sweep(sweep::SweepCmd),
    /// Run the built-in identity and oracle checks.
    Verify(verify::VerifyCmd),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct ScheduleOpts {
    #[arg(long)]
    pub schedule: ScheduleKind,
    #[arg(long)]
    pub n: usize,
    /// Final learning rate chi_n; defaults to 1 for the constant schedule.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Polynomial exponent.
    #[arg(long)]
    pub gamma: Option<f64>,
}

impl ScheduleOpts {
    pub fn build(&self) -> Result<Schedule, CliError> {
        let beta = match (self.schedule, self.beta) {
            (_, Some(b)) => b,
            (ScheduleKind::Constant, None) => 1.0,
            (k, None) => return Err(usage(format!("--beta is required for the {k} schedule"))),
        };
        Ok(make_schedule(self.schedule, self.n, beta, self.gamma)?)
    }
}

#[derive(Args, Debug, Clone)]
pub struct StrategyOpts {
    /// prefix_scaled, identity_right, identity_left, square_root, lr_aware,
    /// prefix_sqrt (or a-f), bisr, bisr_prefix, bisr_lr.
    #[arg(long)]
    pub strategy: String,
    /// BISR band width p.
    #[arg(long)]
    pub bandwidth: Option<usize>,
    /// BISR base for plain `bisr`: prefix or lr.
    #[arg(long)]
    pub base: Option<String>,
}

impl StrategyOpts {
    pub fn parse(&self) -> Result<Strategy, CliError> {
        let base = self.base.as_deref().map(BisrBase::parse).transpose()?;
        Ok(Strategy::parse(&self.strategy, self.bandwidth, base)?)
    }
}

#[derive(Args, Debug, Clone)]
pub struct SchemaOpts {
    /// Minimum separation between participations.
    #[arg(long)]
    pub b: Option<usize>,
    /// Maximum participations; defaults to ceil(n / b).
    #[arg(long, requires = "b")]
    pub k: Option<usize>,
    #[arg(long, value_enum, default_value_t = SensArg::Heuristic)]
    pub sens: SensArg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensArg {
    Exact,
    Heuristic,
}

impl From<SensArg> for SensitivityMode {
    fn from(s: SensArg) -> Self {
        match s {
            SensArg::Exact => SensitivityMode::Exact,
            SensArg::Heuristic => SensitivityMode::Heuristic,
        }
    }
}

impl SchemaOpts {
    pub fn schema(&self, n: usize) -> Result<ParticipationSchema, CliError> {
        schema_for(n, self.b, self.k)
    }
}

pub fn schema_for(
    n: usize,
    b: Option<usize>,
    k: Option<usize>,
) -> Result<ParticipationSchema, CliError> {
    let schema = match (b, k) {
        (None, _) => ParticipationSchema::Single,
        (Some(b), None) => ParticipationSchema::min_sep(n, b)?,
        (Some(b), Some(k)) => ParticipationSchema::MinSep { b, k },
    };
    schema.validate(n)?;
    Ok(schema)
}

#[derive(Args, Debug, Clone)]
pub struct OutOpts {
    /// Output file; relative paths honor LRMF_OUT_DIR. Defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct ScheduleCmd {
    #[command(flatten)]
    pub schedule: ScheduleOpts,
    #[command(flatten)]
    pub out: OutOpts,
}

#[derive(Args, Debug)]
pub struct FactorizeCmd {
    #[command(flatten)]
    pub schedule: ScheduleOpts,
    #[command(flatten)]
    pub strategy: StrategyOpts,
    /// Directory for metadata.json, B.ltm, C.ltm (and M.ltm for BISR).
    /// Relative paths honor LRMF_OUT_DIR; with only the variable set, a
    /// subdirectory named after the point is used. The summary row goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct ErrorsCmd {
    #[command(flatten)]
    pub schedule: ScheduleOpts,
    #[command(flatten)]
    pub strategy: StrategyOpts,
    #[command(flatten)]
    pub schema: SchemaOpts,
    #[command(flatten)]
    pub out: OutOpts,
}

#[derive(Args, Debug)]
pub struct BoundsCmd {
    #[command(flatten)]
    pub schedule: ScheduleOpts,
    #[arg(long)]
    pub b: Option<usize>,
    #[arg(long, requires = "b")]
    pub k: Option<usize>,
    #[command(flatten)]
    pub out: OutOpts,
}

#[derive(Args, Debug)]
pub struct SimulateCmd {
    /// Simulator config (JSON); `steps` must equal --n.
    #[arg(long)]
    pub config: PathBuf,
    /// Load a saved factorization instead of building one from flags.
    #[arg(long, conflicts_with_all = ["schedule", "strategy"])]
    pub factorization: Option<PathBuf>,
    #[arg(long)]
    pub schedule: Option<ScheduleKind>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub bandwidth: Option<usize>,
    #[arg(long)]
    pub base: Option<String>,
    /// Overrides the config's noise seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trajectory output (step, loss, theta_norm, noise_norm).
    #[command(flatten)]
    pub out: OutOpts,
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("lrmf: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Schedule(c) => cmd_schedule(&c),
        Command::Factorize(c) => cmd_factorize(&c),
        Command::Errors(c) => cmd_errors(&c),
        Command::Bounds(c) => cmd_bounds(&c),
        Command::Simulate(c) => cmd_simulate(&c),
        Command::Sweep(c) => sweep::cmd_sweep(&c),
        Command::Verify(c) => verify::cmd_verify(&c),
    }
}

fn emit<T: serde::Serialize>(out: &OutOpts, rows: &[Row], json: &T) -> Result<(), CliError> {
    let mut w = output::open(out.out.as_deref())?;
    match out.format {
        Format::Csv => write_rows(&mut w, rows)?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, json)?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_schedule(c: &ScheduleCmd) -> Result<(), CliError> {
    let s = c.schedule.build()?;
    let rows: Vec<Row> = s
        .values()
        .iter()
        .enumerate()
        .map(|(t, &v)| Row::for_schedule(&s).metric(format!("chi_{}", t + 1), v))
        .collect();
    emit(&c.out, &rows, &s)
}

fn strategy_row(s: &Schedule, st: Strategy) -> Row {
    let mut r = Row::for_schedule(s);
    r.strategy = st.name();
    r.bandwidth = st.bandwidth();
    r
}

pub fn cmd_factorize(c: &FactorizeCmd) -> Result<(), CliError> {
    let s = c.schedule.build()?;
    let st = c.strategy.parse()?;
    let f = factorize(&build_workload(&s), st)?;
    let dir = match (&c.out, std::env::var_os(output::OUT_DIR_ENV)) {
        (Some(d), _) => Some(output::resolve(d)),
        (None, Some(env)) if !env.is_empty() => {
            Some(PathBuf::from(env).join(format!("{}_{}_n{}", st.name(), s.kind(), s.n())))
        }
        _ => None,
    };
    if let Some(dir) = &dir {
        f.save(dir)?;
    }
    let row = strategy_row(&s, st).metric("residual", f.residual());
    let stdout = OutOpts {
        out: None,
        format: c.format,
    };
    emit(
        &stdout,
        std::slice::from_ref(&row),
        &serde_json::json!({
            "strategy": st,
            "schedule": s,
            "residual": f.residual(),
        }),
    )
}

pub fn cmd_errors(c: &ErrorsCmd) -> Result<(), CliError> {
    let s = c.schedule.build()?;
    let st = c.strategy.parse()?;
    let schema = c.schema.schema(s.n())?;
    let f = factorize(&build_workload(&s), st)?;
    let report = ErrorReport::evaluate(&f, schema, c.schema.sens.into())?;
    let base = strategy_row(&s, st);
    let mut rows = vec![
        base.clone().metric("sensitivity", report.sensitivity),
        base.clone().metric("maxse", report.maxse),
        base.clone().metric("meanse", report.meanse),
    ];
    if let Some(e) = report.multi_error {
        rows.push(base.with_schema(schema).metric("multi_error", e));
    }
    emit(&c.out, &rows, &report)
}

pub fn cmd_bounds(c: &BoundsCmd) -> Result<(), CliError> {
    let s = c.schedule.build()?;
    let schema = schema_for(s.n(), c.b, c.k)?;
    let r = bound_report(&s, schema)?;
    let mut base = Row::for_schedule(&s);
    base.strategy = "lower_bound".into();
    let mut rows = vec![
        base.clone().metric("lb_maxse", r.lb_maxse),
        base.clone().metric("lb_meanse", r.lb_meanse),
    ];
    if let Some(m) = &r.multi {
        rows.push(base.with_schema(schema).metric("lb_multi", m.value));
    }
    emit(&c.out, &rows, &r)
}

fn load_or_build(c: &SimulateCmd) -> Result<Factorization, CliError> {
    if let Some(dir) = &c.factorization {
        return Ok(Factorization::load(dir)?);
    }
    let (Some(schedule), Some(n), Some(strategy)) = (c.schedule, c.n, c.strategy.clone()) else {
        return Err(usage(
            "simulate needs --factorization or --schedule, --n and --strategy",
        ));
    };
    let s = ScheduleOpts {
        schedule,
        n,
        beta: c.beta,
        gamma: c.gamma,
    }
    .build()?;
    let st = StrategyOpts {
        strategy,
        bandwidth: c.bandwidth,
        base: c.base.clone(),
    }
    .parse()?;
    Ok(factorize(&build_workload(&s), st)?)
}

pub fn cmd_simulate(c: &SimulateCmd) -> Result<(), CliError> {
    let mut cfg = SimConfig::from_json(&fs::read_to_string(&c.config)?)?;
    if let Some(seed) = c.seed {
        cfg.noise_seed = seed;
    }
    let f = load_or_build(c)?;
    let traj = dp_sgd_run(&cfg, &f)?;
    let mut w = output::open(c.out.out.as_deref())?;
    match c.out.format {
        Format::Csv => traj.write_csv(&mut w)?,
        Format::Json => {
            serde_json::to_writer(&mut w, &traj)?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn read_spec<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Reads a whitespace- or comma-separated list of numbers.
pub fn read_numbers(path: &Path) -> Result<Vec<f64>, CliError> {
    fs::read_to_string(path)?
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| usage(format!("{}: bad number '{t}': {e}", path.display())))
        })
        .collect()
}
