//! The frozen CSV row layout shared by every tabular command, plus output
//! path resolution.

use std::env;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use lrmf::metrics::ParticipationSchema;
use lrmf::Schedule;
use serde::Serialize;

use crate::CliError;

/// Relative `--out` paths are resolved under this directory when it is set.
pub const OUT_DIR_ENV: &str = "LRMF_OUT_DIR";

pub const HEADER: [&str; 11] = [
    "n",
    "beta",
    "gamma",
    "schedule",
    "strategy",
    "schema_b",
    "schema_k",
    "bandwidth",
    "metric",
    "value",
    "status",
];

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Row {
    pub n: Option<usize>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub schedule: String,
    pub strategy: String,
    pub schema_b: Option<usize>,
    pub schema_k: Option<usize>,
    pub bandwidth: Option<usize>,
    pub metric: String,
    pub value: Option<f64>,
    pub status: String,
}

impl Row {
    /// A row keyed by a schedule; metric and value are filled by the caller.
    pub fn for_schedule(s: &Schedule) -> Self {
        Row {
            n: Some(s.n()),
            beta: Some(s.beta()),
            gamma: s.gamma(),
            schedule: s.kind().name().to_string(),
            status: "ok".into(),
            ..Row::default()
        }
    }

    pub fn with_schema(mut self, schema: ParticipationSchema) -> Self {
        self.schema_b = schema.b();
        self.schema_k = schema.k();
        self
    }

    pub fn metric(mut self, metric: impl Into<String>, value: f64) -> Self {
        self.metric = metric.into();
        self.value = Some(value);
        self
    }

    pub fn failed(mut self, metric: impl Into<String>, err: impl std::fmt::Display) -> Self {
        self.metric = metric.into();
        self.value = None;
        self.status = format!("error: {err}");
        self
    }
}

pub fn write_rows<W: Write>(w: W, rows: &[Row]) -> Result<(), CliError> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(HEADER)?;
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn resolve(path: &Path) -> PathBuf {
    match env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() && !dir.is_empty() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    }
}

/// The resolved file for `--out`, or stdout.
pub fn open(out: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match out {
        None => Ok(Box::new(io::stdout().lock())),
        Some(p) => {
            let p = resolve(p);
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            Ok(Box::new(BufWriter::new(File::create(p)?)))
        }
    }
}
