//! Result rendering (JSON or CSV) and manifests.

use std::io::Write;
use std::path::PathBuf;

use serde_json::{json, Value};

use vglass::paths::StepPath;
use vglass::symcone::SymMatrix;
use vglass::varforms::VariationalResult;

use crate::config::{Config, Format};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Status {
    Pass,
    /// Domain-level negative answer, such as a hypothesis counterexample.
    Fail(String),
    /// Optimizer ran out of budget or formulas disagree.
    Warn(String),
}

impl Status {
    pub fn exit_code(&self) -> u8 {
        match self {
            Status::Pass => 0,
            Status::Fail(_) => 2,
            Status::Warn(_) => 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

pub struct Outcome {
    pub json: Value,
    pub table: Table,
    pub status: Status,
}

pub fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        json!("nan")
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

pub fn cell(v: f64) -> String {
    format!("{v}")
}

pub fn matrix(m: &SymMatrix<f64>) -> Value {
    json!(m.to_rows())
}

pub fn path(p: &StepPath<f64>) -> Value {
    json!({
        "grid": p.grid(),
        "values": p.values().iter().map(|v| v.to_rows()).collect::<Vec<_>>(),
    })
}

pub fn variational(r: &VariationalResult<f64>, trace: bool) -> Value {
    let mut v = json!({
        "value": num(r.value),
        "std_error": num(r.std_error),
        "converged": r.converged,
        "diverged": r.diverged,
        "evals": r.evals,
        "path": path(&r.path),
    });
    if let Some(y) = &r.y {
        v["y"] = matrix(y);
    }
    if let Some(z) = &r.z {
        v["z"] = matrix(z);
    }
    if trace {
        v["trace"] = json!(r.trace.iter().map(|&t| num(t)).collect::<Vec<_>>());
    }
    v
}

fn render(cfg: &Config, o: &Outcome) -> Result<Vec<u8>, CliError> {
    match cfg.output.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&o.json).expect("serializable");
            s.push('\n');
            Ok(s.into_bytes())
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&o.table.header).map_err(|e| CliError::Io(e.to_string()))?;
            for r in &o.table.rows {
                w.write_record(r).map_err(|e| CliError::Io(e.to_string()))?;
            }
            w.into_inner().map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

pub fn manifest_path(out: &std::path::Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Writes the result and the manifest (the resolved configuration). Without an output
/// file the result goes to standard output and the manifest to standard error.
pub fn emit(cfg: &Config, o: &Outcome) -> Result<(), CliError> {
    let body = render(cfg, o)?;
    let mut manifest = serde_json::to_string_pretty(cfg).expect("serializable");
    manifest.push('\n');
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    match &cfg.output.path {
        Some(p) => {
            std::fs::write(p, &body).map_err(io)?;
            std::fs::write(manifest_path(p), manifest).map_err(io)?;
        }
        None => {
            std::io::stdout().write_all(&body).map_err(io)?;
            std::io::stderr().write_all(manifest.as_bytes()).map_err(io)?;
        }
    }
    match &o.status {
        Status::Pass => {}
        Status::Fail(m) => eprintln!("vglass: {m}"),
        Status::Warn(m) => eprintln!("vglass: warning: {m}"),
    }
    Ok(())
}
