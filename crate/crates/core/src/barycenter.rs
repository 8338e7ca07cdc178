//! Bures-Wasserstein barycenters by Riemannian gradient descent.
//!
//! The barycenter functional is `F(Σ) = ½ Σᵢ wᵢ W₂²(Σ, Σᵢ)` with
//! Bures-Wasserstein gradient `∇F(Σ) = I − Σᵢ wᵢ T(Σ → Σᵢ)`. A unit gradient
//! step lands on `S Σ S` with `S = Σᵢ wᵢ T(Σ → Σᵢ)`, the classical fixed-point
//! iteration. The stochastic variant moves along the geodesic toward one
//! sampled atom at a time.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distribution::DiscreteDistribution;
use crate::error::{check_dim, BwError, Result};
use crate::geometry::{
    congruence, tangent_norm_sq_raw, transport_eval, BaseFactors, GaussianMeasure, SpdMatrix,
    TangentMap,
};
use crate::parallel::{scalar_sum, transport_field, weighted_sum};
use crate::trace::{ConvergenceTrace, TraceBuilder};

/// Gradient-norm target of the reference solver.
pub const REFERENCE_GRAD_TOL: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    /// `η_t = 1`.
    Unit,
    /// `η_t = θ / (t + θ)`.
    InverseT { theta: f64 },
    /// `η_t = η`.
    Fixed { eta: f64 },
}

impl StepSchedule {
    /// Step size for iteration `t ≥ 1`.
    pub fn eta(&self, t: usize) -> f64 {
        match *self {
            StepSchedule::Unit => 1.0,
            StepSchedule::InverseT { theta } => theta / (t as f64 + theta),
            StepSchedule::Fixed { eta } => eta,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            StepSchedule::Unit => Ok(()),
            StepSchedule::InverseT { theta } if theta > 0.0 && theta.is_finite() => Ok(()),
            StepSchedule::InverseT { theta } => Err(BwError::InvalidParameter {
                name: "theta",
                value: theta,
                reason: "must be positive",
            }),
            StepSchedule::Fixed { eta } if eta > 0.0 && eta <= 1.0 => Ok(()),
            StepSchedule::Fixed { eta } => Err(BwError::InvalidParameter {
                name: "eta",
                value: eta,
                reason: "must lie in (0, 1]",
            }),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub rng_seed: u64,
    pub step_schedule: StepSchedule,
    /// Record every `trace_stride`-th iterate (plus the first and last).
    pub trace_stride: usize,
    /// Point against which `w2sq_to_ref` is traced.
    pub reference: Option<SpdMatrix>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            grad_tol: 1e-10,
            rng_seed: 0,
            step_schedule: StepSchedule::Unit,
            trace_stride: 1,
            reference: None,
        }
    }
}

impl SolverConfig {
    /// SGD defaults: `η_t = θ/(t + θ)` with `θ = ⌈8κ³⌉`, no gradient stopping.
    pub fn sgd(p: &DiscreteDistribution, max_iters: usize, rng_seed: u64) -> Self {
        Self {
            max_iters,
            grad_tol: 0.0,
            rng_seed,
            step_schedule: StepSchedule::InverseT {
                theta: default_sgd_theta(p),
            },
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(BwError::InvalidParameter {
                name: "max_iters",
                value: self.max_iters as f64,
                reason: "must be at least 1",
            });
        }
        if !(self.grad_tol >= 0.0) {
            return Err(BwError::InvalidParameter {
                name: "grad_tol",
                value: self.grad_tol,
                reason: "must be nonnegative",
            });
        }
        if self.trace_stride < 1 {
            return Err(BwError::InvalidParameter {
                name: "trace_stride",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        self.step_schedule.validate()
    }
}

/// `θ = ⌈8κ³⌉`.
pub fn default_sgd_theta(p: &DiscreteDistribution) -> f64 {
    (8.0 * condition_diagnostics(p).kappa.powi(3)).ceil()
}

/// Objective, mean transport map and gradient at one point.
pub(crate) struct BaryEval {
    pub objective: f64,
    pub mean_map: DMatrix<f64>,
    pub grad_norm_sq: f64,
}

pub(crate) fn evaluate(sigma: &SpdMatrix, p: &DiscreteDistribution) -> Result<BaryEval> {
    check_dim(sigma.dim(), p.dim())?;
    let field = transport_field(sigma, p)?;
    let w = p.weights();
    let mean_map = weighted_sum(w.iter().copied().zip(field.iter().map(|e| &e.map)));
    let dist: Vec<f64> = field.iter().zip(w).map(|(e, w)| w * e.w2sq).collect();
    let grad = DMatrix::identity(sigma.dim(), sigma.dim()) - &mean_map;
    Ok(BaryEval {
        objective: 0.5 * scalar_sum(&dist),
        grad_norm_sq: tangent_norm_sq_raw(&grad, sigma.matrix()),
        mean_map,
    })
}

/// `F(Σ) = ½ Σᵢ wᵢ W₂²(Σ, Σᵢ)` over the atom covariances.
pub fn bary_objective(sigma: &SpdMatrix, p: &DiscreteDistribution) -> Result<f64> {
    Ok(evaluate(sigma, p)?.objective)
}

/// `∇F(Σ) = I − Σᵢ wᵢ T(Σ → Σᵢ)`.
pub fn bary_gradient(sigma: &SpdMatrix, p: &DiscreteDistribution) -> Result<TangentMap> {
    let eval = evaluate(sigma, p)?;
    let d = sigma.dim();
    Ok(TangentMap::from_symmetric(
        DMatrix::identity(d, d) - eval.mean_map,
    ))
}

fn relaxed_step(sigma: &SpdMatrix, mean_map: &DMatrix<f64>, eta: f64) -> Result<SpdMatrix> {
    let d = sigma.dim();
    let s = DMatrix::identity(d, d) * (1.0 - eta) + mean_map * eta;
    SpdMatrix::new(congruence(&s, sigma.matrix()))
}

/// One fixed-point step `Σ⁺ = S Σ S`, `S = Σᵢ wᵢ T(Σ → Σᵢ)`.
pub fn bary_gd_step(sigma: &SpdMatrix, p: &DiscreteDistribution) -> Result<SpdMatrix> {
    let eval = evaluate(sigma, p)?;
    relaxed_step(sigma, &eval.mean_map, 1.0)
}

/// Riemannian gradient descent from `sigma0`, stopping when
/// `‖∇F‖_Σ ≤ grad_tol` or after `max_iters` steps.
pub fn run_bary_gd(
    p: &DiscreteDistribution,
    sigma0: &SpdMatrix,
    cfg: &SolverConfig,
) -> Result<(SpdMatrix, ConvergenceTrace)> {
    cfg.validate()?;
    check_dim(p.dim(), sigma0.dim())?;
    let mut sigma = sigma0.clone();
    let mut trace = TraceBuilder::new(cfg.reference.as_ref());
    let mut t = 0;
    loop {
        let eval = evaluate(&sigma, p).map_err(|e| e.at(t))?;
        let converged = eval.grad_norm_sq.sqrt() <= cfg.grad_tol;
        let last = converged || t == cfg.max_iters;
        if last || t % cfg.trace_stride == 0 {
            trace
                .record(t, &sigma, eval.objective, eval.grad_norm_sq, None)
                .map_err(|e| e.at(t))?;
        }
        if last {
            return Ok((sigma, trace.finish(t, converged)));
        }
        t += 1;
        let eta = cfg.step_schedule.eta(t);
        sigma = relaxed_step(&sigma, &eval.mean_map, eta).map_err(|e| e.at(t))?;
    }
}

/// One stochastic step: the point at parameter `eta` on the geodesic from
/// `sigma` toward the sample `k`.
pub fn bary_sgd_step(sigma: &SpdMatrix, k: &SpdMatrix, eta: f64) -> Result<SpdMatrix> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(BwError::InvalidParameter {
            name: "eta",
            value: eta,
            reason: "must lie in (0, 1]",
        });
    }
    check_dim(sigma.dim(), k.dim())?;
    let map = transport_eval(&BaseFactors::new(sigma), k)?.map;
    relaxed_step(sigma, &map, eta)
}

/// Riemannian SGD with i.i.d. samples drawn from `p`'s weights. The sample
/// stream depends only on `rng_seed`.
pub fn run_bary_sgd(
    p: &DiscreteDistribution,
    sigma0: &SpdMatrix,
    cfg: &SolverConfig,
) -> Result<(SpdMatrix, ConvergenceTrace)> {
    cfg.validate()?;
    check_dim(p.dim(), sigma0.dim())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut sigma = sigma0.clone();
    let mut trace = TraceBuilder::new(cfg.reference.as_ref());
    let mut t = 0;
    loop {
        let last_budget = t == cfg.max_iters;
        if t == 0 || last_budget || t % cfg.trace_stride == 0 {
            let eval = evaluate(&sigma, p).map_err(|e| e.at(t))?;
            trace
                .record(t, &sigma, eval.objective, eval.grad_norm_sq, None)
                .map_err(|e| e.at(t))?;
            let converged = eval.grad_norm_sq.sqrt() <= cfg.grad_tol;
            if converged || last_budget {
                return Ok((sigma, trace.finish(t, converged)));
            }
        }
        t += 1;
        let k = p.covariance(p.index_for(rng.random::<f64>()));
        sigma = bary_sgd_step(&sigma, k, cfg.step_schedule.eta(t)).map_err(|e| e.at(t))?;
    }
}

/// High-accuracy barycenter used as the "distance to optimum" oracle: GD
/// from the first atom to `‖∇F‖_Σ ≤ 1e-13`, or the smallest-gradient iterate
/// once rounding stalls progress.
pub fn reference_barycenter(p: &DiscreteDistribution) -> Result<SpdMatrix> {
    const MAX_ITERS: usize = 20_000;
    const PATIENCE: usize = 50;
    let mut sigma = p.covariance(0).clone();
    let mut best = (f64::INFINITY, sigma.clone());
    let mut since_best = 0;
    for t in 0..MAX_ITERS {
        let eval = evaluate(&sigma, p).map_err(|e| e.at(t))?;
        let g = eval.grad_norm_sq.sqrt();
        if g < best.0 {
            best = (g, sigma.clone());
            since_best = 0;
        } else {
            since_best += 1;
        }
        if g <= REFERENCE_GRAD_TOL || since_best >= PATIENCE {
            break;
        }
        sigma = relaxed_step(&sigma, &eval.mean_map, 1.0).map_err(|e| e.at(t + 1))?;
    }
    Ok(best.1)
}

/// Conditioning summary of a distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conditioning {
    /// `λ_max / λ_min` over the union of atom spectra.
    pub kappa: f64,
    /// Largest per-atom condition number.
    pub kappa_star: f64,
    /// `(Σ wᵢ √λ_max(Σᵢ) / Σ wᵢ √λ_min(Σᵢ))²`.
    pub kappa_bar: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

pub fn condition_diagnostics(p: &DiscreteDistribution) -> Conditioning {
    let (lambda_min, lambda_max) = p.spectral_bounds();
    let kappa_star = p
        .covariances()
        .map(SpdMatrix::condition_number)
        .fold(1.0, f64::max);
    let (root_max, root_min) = p
        .covariances()
        .zip(p.weights())
        .fold((0.0, 0.0), |(hi, lo), (c, w)| {
            (hi + w * c.lambda_max().sqrt(), lo + w * c.lambda_min().sqrt())
        });
    Conditioning {
        kappa: lambda_max / lambda_min,
        kappa_star,
        kappa_bar: (root_max / root_min).powi(2),
        lambda_min,
        lambda_max,
    }
}

/// `var P = 2 F(Σ*)`.
pub fn variance_of(p: &DiscreteDistribution, sigma_star: &SpdMatrix) -> Result<f64> {
    Ok(2.0 * bary_objective(sigma_star, p)?)
}

/// Splits a non-centered problem into the barycenter mean (the weighted
/// average of atom means) and the centered distribution.
pub fn noncentered_split(p: &DiscreteDistribution) -> (DVector<f64>, DiscreteDistribution) {
    (p.mean_of_means(), p.centered())
}

/// Attaches a mean to a centered solution.
pub fn reassemble(mean: DVector<f64>, cov: SpdMatrix) -> Result<GaussianMeasure> {
    GaussianMeasure::new(mean, cov)
}
