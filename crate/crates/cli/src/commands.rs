//! Solver commands and `gen-data`.

use std::path::Path;

use bwopt::barycenter::{
    default_sgd_theta, noncentered_split, reassemble, run_bary_gd, run_bary_sgd, SolverConfig,
};
use bwopt::euclidean::{run_egd, run_esgd, EuclideanConfig};
use bwopt::io::write_dataset;
use bwopt::median::{
    augment_noncentered, augment_point, run_median_gd, run_median_gd_noncentered, MedianConfig,
};
use bwopt::regularized::{default_step, reg_mean, resolve_kappa, run_rbary_gd, RegConfig};
use bwopt::{ConvergenceTrace, DiscreteDistribution, GaussianMeasure, SpdMatrix, Termination};
use nalgebra::DVector;
use serde_json::{json, Value};

use crate::exit::{code, CliResult};
use crate::input::{derive_seed, load, load_point, GenArg, Loaded, DATASET_LABEL};
use crate::output::{write_json, write_trace, Summary};
use crate::{RunOpts, Source};

/// A loaded problem with the optional start and reference points.
struct Setup {
    loaded: Loaded,
    start: Option<GaussianMeasure>,
    reference: Option<GaussianMeasure>,
}

impl Setup {
    fn new(source: &Source, run: &RunOpts, seed: u64, label: &str) -> CliResult<Self> {
        let loaded = load(source.input.as_ref(), source.gen.as_ref(), seed, label)?;
        let d = loaded.dist.dim();
        Ok(Self {
            start: load_point(run.start.as_deref(), d)?,
            reference: load_point(run.reference.as_deref(), d)?,
            loaded,
        })
    }

    fn dist(&self) -> &DiscreteDistribution {
        &self.loaded.dist
    }

    fn start_measure(&self) -> GaussianMeasure {
        self.start.clone().unwrap_or_else(|| self.dist().atoms()[0].clone())
    }

    fn start_cov(&self) -> SpdMatrix {
        self.start_measure().cov
    }

    fn reference_cov(&self) -> Option<SpdMatrix> {
        self.reference.as_ref().map(|g| g.cov.clone())
    }

    /// Squared mean gap to the reference, for solvers whose mean is fixed.
    fn reference_offset(&self, mean: &DVector<f64>) -> f64 {
        self.reference.as_ref().map_or(0.0, |g| (mean - &g.mean).norm_squared())
    }
}

/// Budget exhaustion is an error only when a gradient tolerance was set;
/// with tolerance 0 the budget is the stopping rule.
fn exit_code(trace: &ConvergenceTrace, grad_tol: f64) -> u8 {
    if trace.termination == Termination::BudgetExhausted && grad_tol > 0.0 {
        code::BUDGET_EXHAUSTED
    } else {
        code::OK
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    command: &str,
    solver: &str,
    setup: &Setup,
    run: &RunOpts,
    seed: u64,
    config: Value,
    point: &GaussianMeasure,
    trace: &ConvergenceTrace,
    grad_tol: f64,
    ref_offset: f64,
    extra: Value,
) -> CliResult<u8> {
    let status = exit_code(trace, grad_tol);
    if let Some(path) = &run.out_trace {
        write_trace(path, trace, ref_offset)?;
    }
    let mut summary = Summary::from_run(command, solver, seed, setup.loaded.source.clone(), config, point, trace, status);
    summary.extra = extra;
    if let Some(path) = &run.out_summary {
        write_json(path, &summary)?;
    }
    let last = trace.last();
    println!(
        "{solver}: {} iterations, objective {:.12e}, grad_norm_sq {:.3e}, {}",
        trace.iterations,
        last.objective,
        last.grad_norm_sq,
        match trace.termination {
            Termination::Converged => "converged",
            Termination::BudgetExhausted => "budget exhausted",
        }
    );
    Ok(status)
}

pub fn barycenter(source: &Source, run: &RunOpts, sgd: bool, seed: u64) -> CliResult<u8> {
    let setup = Setup::new(source, run, seed, DATASET_LABEL)?;
    let (mean, centered) = noncentered_split(setup.dist());
    let max_iters = run.max_iters.unwrap_or(1000);
    let (solver, mut cfg, schedule) = if sgd {
        let cfg = SolverConfig::sgd(&centered, max_iters, derive_seed(seed, "barycenter/sgd"));
        let theta = default_sgd_theta(&centered);
        ("sgd", cfg, json!({"inverse_t": {"theta": theta}}))
    } else {
        let cfg = SolverConfig { max_iters, ..SolverConfig::default() };
        ("gd", cfg, json!("unit"))
    };
    if let Some(tol) = run.grad_tol {
        cfg.grad_tol = tol;
    }
    cfg.reference = setup.reference_cov();
    let sigma0 = setup.start_cov();
    let (out, trace) = if sgd {
        run_bary_sgd(&centered, &sigma0, &cfg)?
    } else {
        run_bary_gd(&centered, &sigma0, &cfg)?
    };
    let config = json!({
        "max_iters": cfg.max_iters,
        "grad_tol": cfg.grad_tol,
        "rng_seed": cfg.rng_seed,
        "step_schedule": schedule,
    });
    let offset = setup.reference_offset(&mean);
    let point = reassemble(mean, out)?;
    finish("barycenter", solver, &setup, run, seed, config, &point, &trace, cfg.grad_tol, offset, Value::Null)
}

pub fn rbarycenter(
    source: &Source,
    run: &RunOpts,
    gamma: f64,
    kappa: Option<f64>,
    step: Option<f64>,
    seed: u64,
) -> CliResult<u8> {
    let setup = Setup::new(source, run, seed, DATASET_LABEL)?;
    let (_, centered) = noncentered_split(setup.dist());
    let mean = reg_mean(setup.dist(), gamma)?;
    let cfg = RegConfig {
        kappa,
        step,
        max_iters: run.max_iters.unwrap_or(10_000),
        grad_tol: run.grad_tol.unwrap_or(1e-10),
        reference: setup.reference_cov(),
        ..RegConfig::new(gamma)
    };
    let (out, trace) = run_rbary_gd(&centered, &setup.start_cov(), &cfg)?;
    let kappa = resolve_kappa(&centered, kappa)?;
    let config = json!({
        "gamma": gamma,
        "kappa": kappa,
        "step": step.unwrap_or_else(|| default_step(gamma, kappa)),
        "max_iters": cfg.max_iters,
        "grad_tol": cfg.grad_tol,
    });
    let offset = setup.reference_offset(&mean);
    let point = reassemble(mean, out)?;
    finish("rbarycenter", "rgd", &setup, run, seed, config, &point, &trace, cfg.grad_tol, offset, Value::Null)
}

pub fn median(source: &Source, run: &RunOpts, epsilon: f64, seed: u64) -> CliResult<u8> {
    let setup = Setup::new(source, run, seed, DATASET_LABEL)?;
    let p = setup.dist();
    let configure = |lifted: &DiscreteDistribution, sigma0: &SpdMatrix| -> CliResult<MedianConfig> {
        let mut cfg = match run.max_iters {
            Some(max_iters) => MedianConfig { max_iters, ..MedianConfig::new(epsilon) },
            None => MedianConfig::for_guarantee(lifted, sigma0, epsilon)?,
        };
        if let Some(tol) = run.grad_tol {
            cfg.grad_tol = tol;
        }
        Ok(cfg)
    };
    let (point, trace, cfg, offset, lifted) = if p.is_centered() {
        let sigma0 = setup.start_cov();
        let mut cfg = configure(p, &sigma0)?;
        cfg.reference = setup.reference_cov();
        let (out, trace) = run_median_gd(p, &sigma0, &cfg)?;
        let offset = setup.reference_offset(&DVector::zeros(p.dim()));
        (GaussianMeasure::centered(out), trace, cfg, offset, false)
    } else {
        let start = setup.start_measure();
        let (lifted, c) = augment_noncentered(p)?;
        let mut cfg = configure(&lifted, &augment_point(&start, c)?)?;
        // the lift is an isometry, so the lifted reference gives the full W₂²
        cfg.reference = setup.reference.as_ref().map(|g| augment_point(g, c)).transpose()?;
        let (out, trace) = run_median_gd_noncentered(p, &start, &cfg)?;
        (out, trace, cfg, 0.0, true)
    };
    let config = json!({
        "epsilon": epsilon,
        "max_iters": cfg.max_iters,
        "grad_tol": cfg.grad_tol,
        "lifted": lifted,
    });
    let extra = json!({"final_unsmoothed_objective": trace.last().unsmoothed_objective});
    finish("median", "smoothed_gd", &setup, run, seed, config, &point, &trace, cfg.grad_tol, offset, extra)
}

pub fn euclidean(
    source: &Source,
    run: &RunOpts,
    stochastic: bool,
    step: Option<f64>,
    bounds: (Option<f64>, Option<f64>),
    seed: u64,
) -> CliResult<u8> {
    let setup = Setup::new(source, run, seed, DATASET_LABEL)?;
    let (mean, centered) = noncentered_split(setup.dist());
    let fitted = EuclideanConfig::fitted(&centered);
    let cfg = EuclideanConfig {
        max_iters: run.max_iters.unwrap_or(1000),
        grad_tol: run.grad_tol.unwrap_or(if stochastic { 0.0 } else { 1e-10 }),
        rng_seed: derive_seed(seed, "euclidean/esgd"),
        step_override: step,
        reference: setup.reference_cov(),
        ..EuclideanConfig::new(bounds.0.unwrap_or(fitted.lambda_min), bounds.1.unwrap_or(fitted.lambda_max))
    };
    let sigma0 = setup.start_cov();
    let (solver, (out, trace), step_echo) = if stochastic {
        let numerator = cfg.esgd_step(0);
        ("esgd", run_esgd(&centered, &sigma0, &cfg)?, json!({"c_over_n_plus_1": numerator}))
    } else {
        ("egd", run_egd(&centered, &sigma0, &cfg)?, json!({"constant": cfg.egd_step()}))
    };
    let config = json!({
        "lambda_min": cfg.lambda_min,
        "lambda_max": cfg.lambda_max,
        "max_iters": cfg.max_iters,
        "grad_tol": cfg.grad_tol,
        "rng_seed": cfg.rng_seed,
        "step": step_echo,
    });
    let offset = setup.reference_offset(&mean);
    let point = reassemble(mean, out)?;
    finish("euclidean", solver, &setup, run, seed, config, &point, &trace, cfg.grad_tol, offset, Value::Null)
}

pub fn gen_data(gen: &GenArg, out: &Path, seed: u64) -> CliResult<u8> {
    let (p, meta) = gen.generate(seed, DATASET_LABEL)?;
    write_dataset(out, &p, meta)?;
    println!("wrote {} atoms in dimension {} to {}", p.len(), p.dim(), out.display());
    Ok(code::OK)
}
