//! Trace CSV and summary JSON writers.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use bwopt::io::PointFile;
use bwopt::{ConvergenceTrace, GaussianMeasure, Termination};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::exit::{CliError, CliResult};

pub const TRACE_COLUMNS: [&str; 7] = [
    "iter",
    "objective",
    "grad_norm_sq",
    "lambda_min",
    "lambda_max",
    "w2sq_to_ref",
    "wall_ns",
];

/// Writes the trace row by row in iteration order. `ref_offset` is added to
/// every `w2sq_to_ref` value; it carries the squared mean gap when the
/// solver only sees covariances.
pub fn write_trace(path: &Path, trace: &ConvergenceTrace, ref_offset: f64) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let fail = |e: csv::Error| CliError::io(path, e);
    w.write_record(TRACE_COLUMNS).map_err(fail)?;
    for r in &trace.records {
        let w2 = r.w2sq_to_ref.map(|v| (v + ref_offset).to_string()).unwrap_or_default();
        w.write_record([
            r.iter.to_string(),
            r.objective.to_string(),
            r.grad_norm_sq.to_string(),
            r.lambda_min.to_string(),
            r.lambda_max.to_string(),
            w2,
            r.wall_ns.to_string(),
        ])
        .map_err(fail)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub command: String,
    pub solver: String,
    pub seed: u64,
    pub input: Value,
    pub config: Value,
    pub iterations: usize,
    pub termination: Termination,
    pub exit_code: u8,
    pub final_objective: f64,
    pub final_grad_norm_sq: f64,
    pub final_point: PointFile,
    #[serde(default)]
    pub extra: Value,
}

impl Summary {
    #[allow(clippy::too_many_arguments)]
    pub fn from_run(
        command: &str,
        solver: &str,
        seed: u64,
        input: Value,
        config: Value,
        point: &GaussianMeasure,
        trace: &ConvergenceTrace,
        exit_code: u8,
    ) -> Self {
        let last = trace.last();
        Self {
            command: command.into(),
            solver: solver.into(),
            seed,
            input,
            config,
            iterations: trace.iterations,
            termination: trace.termination,
            exit_code,
            final_objective: last.objective,
            final_grad_norm_sq: last.grad_norm_sq,
            final_point: PointFile::from_measure(point),
            extra: Value::Null,
        }
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("summary serializes");
    let mut f = File::create(path).map_err(|e| CliError::io(path, e))?;
    writeln!(f, "{text}").map_err(|e| CliError::io(path, e))
}
