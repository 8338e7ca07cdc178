//! Checks for trace CSVs and summary JSONs.

use std::fs;
use std::path::Path;

use bwopt::Termination;

use crate::exit::{code, CliError, CliResult};
use crate::output::{Summary, TRACE_COLUMNS};

/// Last `iter` of a well-formed trace.
pub fn check_trace(path: &Path) -> Result<usize, String> {
    let mut r = csv::Reader::from_path(path).map_err(|e| e.to_string())?;
    let header = r.headers().map_err(|e| e.to_string())?.clone();
    if header.iter().ne(TRACE_COLUMNS) {
        return Err(format!("header is {:?}, expected {:?}", header.iter().collect::<Vec<_>>(), TRACE_COLUMNS));
    }
    let mut prev: Option<usize> = None;
    let mut has_ref = None;
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let line = row + 2;
        let num = |i: usize| -> Result<f64, String> {
            let v: f64 = rec[i].parse().map_err(|_| format!("line {line}: {} = {:?} is not a number", TRACE_COLUMNS[i], &rec[i]))?;
            if v.is_finite() { Ok(v) } else { Err(format!("line {line}: {} is not finite", TRACE_COLUMNS[i])) }
        };
        let iter: usize = rec[0].parse().map_err(|_| format!("line {line}: bad iter {:?}", &rec[0]))?;
        rec[6].parse::<u64>().map_err(|_| format!("line {line}: bad wall_ns {:?}", &rec[6]))?;
        num(1)?;
        if num(2)? < 0.0 {
            return Err(format!("line {line}: negative grad_norm_sq"));
        }
        let (lo, hi) = (num(3)?, num(4)?);
        if !(lo > 0.0 && lo <= hi) {
            return Err(format!("line {line}: need 0 < lambda_min <= lambda_max, found {lo}, {hi}"));
        }
        let this_ref = !rec[5].is_empty();
        if this_ref {
            num(5)?;
        }
        if *has_ref.get_or_insert(this_ref) != this_ref {
            return Err(format!("line {line}: w2sq_to_ref present on some rows only"));
        }
        match prev {
            None if iter != 0 => return Err(format!("line {line}: first iter is {iter}, expected 0")),
            Some(pi) if iter <= pi => return Err(format!("line {line}: iter {iter} does not increase")),
            _ => {}
        }
        prev = Some(iter);
    }
    prev.ok_or_else(|| "trace has no rows".to_string())
}

pub fn check_summary(path: &Path) -> Result<Summary, String> {
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    let s: Summary = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    s.final_point.to_measure().map_err(|e| format!("final_point: {e}"))?;
    let expected = match s.termination {
        Termination::Converged => [code::OK].as_slice(),
        Termination::BudgetExhausted => [code::OK, code::BUDGET_EXHAUSTED].as_slice(),
    };
    if !expected.contains(&s.exit_code) {
        return Err(format!("exit_code {} does not match termination {:?}", s.exit_code, s.termination));
    }
    Ok(s)
}

pub fn run(trace: Option<&Path>, summary: Option<&Path>) -> CliResult<u8> {
    if trace.is_none() && summary.is_none() {
        return Err(CliError::new(code::USAGE, "validate needs --trace and/or --summary"));
    }
    let fail = |path: &Path, e: String| CliError::new(code::VALIDATION, format!("{}: {e}", path.display()));
    let last_iter = trace.map(|p| check_trace(p).map_err(|e| fail(p, e))).transpose()?;
    if let Some(path) = summary {
        let s = check_summary(path).map_err(|e| fail(path, e))?;
        if let Some(last) = last_iter {
            if last != s.iterations {
                return Err(fail(path, format!("iterations = {} but the trace ends at iter {last}", s.iterations)));
            }
        }
    }
    println!("ok");
    Ok(code::OK)
}
