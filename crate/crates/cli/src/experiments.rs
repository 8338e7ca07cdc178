//! `dim-sweep`, `robustness` and `sdp-export`.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;
use std::time::Instant;

use bwopt::barycenter::{bary_gd_step, bary_objective, reference_barycenter, variance_of};
use bwopt::datasets::{generate, scale_fraction, GenSpec};
use bwopt::geometry::bures_distance_sq;
use bwopt::median::{run_median_gd, MedianConfig};
use bwopt::sdp::{plug_in_solution, SdpProblem};
use bwopt::{DiscreteDistribution, SpdMatrix};
use serde_json::json;

use crate::exit::{code, CliError, CliResult};
use crate::input::{derive_seed, load, DATASET_LABEL};
use crate::output::write_json;
use crate::Source;

fn table_writer(out: Option<&Path>) -> CliResult<csv::Writer<Box<dyn Write>>> {
    let sink: Box<dyn Write> = match out {
        Some(path) => Box::new(File::create(path).map_err(|e| CliError::io(path, e))?),
        None => Box::new(io::stdout()),
    };
    Ok(csv::Writer::from_writer(sink))
}

fn table_error(out: Option<&Path>, e: impl std::fmt::Display) -> CliError {
    CliError::io(out.unwrap_or(Path::new("<stdout>")), e)
}

#[allow(clippy::too_many_arguments)]
pub fn dim_sweep(
    dims: &[usize],
    n: usize,
    kappa: f64,
    r: i32,
    method: u8,
    max_iters: usize,
    out: Option<&Path>,
    seed: u64,
) -> CliResult<u8> {
    let mut w = table_writer(out)?;
    w.write_record(["d", "passes", "reached", "variance", "final_w2sq", "seconds"])
        .map_err(|e| table_error(out, e))?;
    let mut passes = Vec::new();
    let mut all_reached = true;
    for &d in dims {
        let spec = GenSpec::new(method, n, d, 1.0, kappa, derive_seed(seed, &format!("dim-sweep/d={d}")));
        let p = generate(&spec)?;
        let start = Instant::now();
        let star = reference_barycenter(&p)?;
        let variance = variance_of(&p, &star)?;
        let target = 10f64.powi(-r) * variance;
        let mut sigma = p.covariance(0).clone();
        let mut w2 = bures_distance_sq(&sigma, &star)?;
        let mut t = 0;
        while w2 > target && t < max_iters {
            sigma = bary_gd_step(&sigma, &p)?;
            w2 = bures_distance_sq(&sigma, &star)?;
            t += 1;
        }
        let reached = w2 <= target;
        all_reached &= reached;
        passes.push(t);
        w.write_record([
            d.to_string(),
            t.to_string(),
            reached.to_string(),
            variance.to_string(),
            w2.to_string(),
            start.elapsed().as_secs_f64().to_string(),
        ])
        .map_err(|e| table_error(out, e))?;
    }
    w.flush().map_err(|e| table_error(out, e))?;
    if let (Some(lo), Some(hi)) = (passes.iter().min(), passes.iter().max()) {
        eprintln!("passes max/min = {:.3}", *hi as f64 / (*lo).max(1) as f64);
    }
    Ok(if all_reached { code::OK } else { code::BUDGET_EXHAUSTED })
}

fn median_of(p: &DiscreteDistribution, epsilon: f64, max_iters: Option<usize>) -> CliResult<SpdMatrix> {
    // start from the last atom, which `scale_fraction` never touches
    let sigma0 = p.covariance(p.len() - 1);
    let cfg = match max_iters {
        Some(max_iters) => MedianConfig { max_iters, ..MedianConfig::new(epsilon) },
        None => MedianConfig::for_guarantee(p, sigma0, epsilon)?,
    };
    Ok(run_median_gd(p, sigma0, &cfg)?.0)
}

/// Scales the first `⌊fraction · n⌋` covariances by each factor and reports
/// how far the median and the barycenter move. Means are dropped.
pub fn robustness(
    source: &Source,
    fraction: f64,
    factors: &[f64],
    epsilon: f64,
    max_iters: Option<usize>,
    out: Option<&Path>,
    seed: u64,
) -> CliResult<u8> {
    let p = load(source.input.as_ref(), source.gen.as_ref(), seed, DATASET_LABEL)?.dist.centered();
    let base_median = median_of(&p, epsilon, max_iters)?;
    let base_bary = reference_barycenter(&p)?;
    let mut w = table_writer(out)?;
    w.write_record(["perturbation", "median_shift", "barycenter_shift"])
        .map_err(|e| table_error(out, e))?;
    let mut last = None;
    for &s in factors {
        let q = scale_fraction(&p, fraction, s)?;
        let median_shift = bures_distance_sq(&median_of(&q, epsilon, max_iters)?, &base_median)?.sqrt();
        let bary_shift = bures_distance_sq(&reference_barycenter(&q)?, &base_bary)?.sqrt();
        w.write_record([s.to_string(), median_shift.to_string(), bary_shift.to_string()])
            .map_err(|e| table_error(out, e))?;
        last = Some((s, median_shift, bary_shift));
    }
    w.flush().map_err(|e| table_error(out, e))?;
    if let Some((s, m, b)) = last {
        eprintln!("at factor {s}: median shift {m:.4e}, barycenter shift {b:.4e}");
    }
    Ok(code::OK)
}

/// Writes the SDP for the atom covariances (means are dropped). With
/// `check`, solves by GD and reports the plug-in point's objective and
/// smallest slack eigenvalue.
pub fn sdp_export(source: &Source, out: &Path, check: bool, summary: Option<&Path>, seed: u64) -> CliResult<u8> {
    let loaded = load(source.input.as_ref(), source.gen.as_ref(), seed, DATASET_LABEL)?;
    let p = loaded.dist.centered();
    let sdp = SdpProblem::build(&p);
    let mut f = File::create(out).map_err(|e| CliError::io(out, e))?;
    sdp.write_sdpa(&mut f).map_err(|e| CliError::io(out, e))?;
    println!("wrote {} variables, {} blocks to {}", sdp.num_vars(), sdp.atoms, out.display());
    if !check {
        return Ok(code::OK);
    }
    let star = reference_barycenter(&p)?;
    let x = plug_in_solution(&p, &star)?;
    let traces: f64 = p.weights().iter().zip(p.covariances()).map(|(w, c)| w * c.trace()).sum();
    let report = json!({
        "input": loaded.source,
        "num_vars": sdp.num_vars(),
        "blocks": sdp.atoms,
        "objective": sdp.objective(&x),
        "expected_objective": 2.0 * bary_objective(&star, &p)? - traces,
        "min_slack_eigenvalue": sdp.min_slack_eigenvalue(&x)?,
    });
    match summary {
        Some(path) => write_json(path, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report).expect("report serializes")),
    }
    Ok(code::OK)
}
