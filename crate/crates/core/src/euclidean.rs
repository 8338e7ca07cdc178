//! Euclidean projected-gradient baselines for the barycenter problem.
//!
//! Iterates live in `K = {Σ : spec(Σ) ⊂ [λ_min, λ_max]}` and every step is
//! followed by the Frobenius projection onto `K`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::barycenter::bary_objective;
use crate::distribution::DiscreteDistribution;
use crate::error::{check_dim, BwError, Result};
use crate::geometry::{geometric_mean, project_spectrum, SpdMatrix};
use crate::parallel::weighted_sum;
use crate::trace::{ConvergenceTrace, TraceBuilder};

#[derive(Clone, Debug)]
pub struct EuclideanConfig {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub rng_seed: u64,
    /// Replaces the theoretical step: the constant step for EGD, the
    /// numerator `c` of `c/(n + 1)` for ESGD.
    pub step_override: Option<f64>,
    pub trace_stride: usize,
    pub reference: Option<SpdMatrix>,
}

impl EuclideanConfig {
    pub fn new(lambda_min: f64, lambda_max: f64) -> Self {
        Self {
            lambda_min,
            lambda_max,
            max_iters: 1000,
            grad_tol: 1e-10,
            rng_seed: 0,
            step_override: None,
            trace_stride: 1,
            reference: None,
        }
    }

    /// Box spanned by the atom spectra.
    pub fn fitted(p: &DiscreteDistribution) -> Self {
        let (lo, hi) = p.spectral_bounds();
        Self::new(lo, hi)
    }

    fn validate(&self, p: &DiscreteDistribution, sigma0: &SpdMatrix) -> Result<()> {
        if !(self.lambda_min > 0.0) || !(self.lambda_min <= self.lambda_max) || !self.lambda_max.is_finite() {
            return Err(BwError::InvalidParameter {
                name: "lambda_min",
                value: self.lambda_min,
                reason: "need 0 < lambda_min <= lambda_max",
            });
        }
        if let Some(s) = self.step_override {
            if !(s > 0.0) || !s.is_finite() {
                return Err(BwError::InvalidParameter {
                    name: "step",
                    value: s,
                    reason: "must be positive",
                });
            }
        }
        if self.trace_stride < 1 {
            return Err(BwError::InvalidParameter {
                name: "trace_stride",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        check_dim(p.dim(), sigma0.dim())?;
        p.check_box(self.lambda_min, self.lambda_max)?;
        let slack = 1e-12;
        if sigma0.lambda_min() < self.lambda_min * (1.0 - slack)
            || sigma0.lambda_max() > self.lambda_max * (1.0 + slack)
        {
            return Err(BwError::InvalidParameter {
                name: "sigma0",
                value: sigma0.lambda_min(),
                reason: "initial point lies outside the spectral box",
            });
        }
        Ok(())
    }

    /// `η = 4 λ_min⁴ / λ_max³`.
    pub fn egd_step(&self) -> f64 {
        self.step_override
            .unwrap_or(4.0 * self.lambda_min.powi(4) / self.lambda_max.powi(3))
    }

    /// `η_n = 8 λ_max⁴ / (λ_min³ (n + 1))`.
    pub fn esgd_step(&self, n: usize) -> f64 {
        let c = self
            .step_override
            .unwrap_or(8.0 * self.lambda_max.powi(4) / self.lambda_min.powi(3));
        c / (n as f64 + 1.0)
    }
}

/// `I − GM(K, Σ⁻¹)` for one atom, computed through the geometric mean.
fn atom_term(sigma_inv: &SpdMatrix, k: &SpdMatrix) -> Result<DMatrix<f64>> {
    Ok(geometric_mean(k, sigma_inv)?.into_matrix())
}

/// Euclidean gradient `DF(Σ) = ½ (I − Σᵢ wᵢ GM(Σᵢ, Σ⁻¹))`.
pub fn euclid_gradient(sigma: &SpdMatrix, p: &DiscreteDistribution) -> Result<DMatrix<f64>> {
    check_dim(sigma.dim(), p.dim())?;
    let inv = sigma.inverse();
    let means = p
        .atoms()
        .par_iter()
        .map(|a| atom_term(&inv, &a.cov))
        .collect::<Result<Vec<_>>>()?;
    let avg = weighted_sum(p.weights().iter().copied().zip(means.iter()));
    let d = sigma.dim();
    Ok((DMatrix::identity(d, d) - avg) * 0.5)
}

fn record(
    trace: &mut TraceBuilder,
    t: usize,
    sigma: &SpdMatrix,
    p: &DiscreteDistribution,
) -> Result<f64> {
    let grad_sq = euclid_gradient(sigma, p)?.norm_squared();
    trace.record(t, sigma, bary_objective(sigma, p)?, grad_sq, None)?;
    Ok(grad_sq)
}

/// Projected gradient descent `Σₙ₊₁ = Π(Σₙ − η DF(Σₙ))`. Trace gradient
/// norms are Frobenius norms of `DF`.
pub fn run_egd(
    p: &DiscreteDistribution,
    sigma0: &SpdMatrix,
    cfg: &EuclideanConfig,
) -> Result<(SpdMatrix, ConvergenceTrace)> {
    cfg.validate(p, sigma0)?;
    let eta = cfg.egd_step();
    let mut sigma = sigma0.clone();
    let mut trace = TraceBuilder::new(cfg.reference.as_ref());
    let mut t = 0;
    loop {
        let grad = euclid_gradient(&sigma, p).map_err(|e| e.at(t))?;
        let grad_sq = grad.norm_squared();
        let converged = grad_sq.sqrt() <= cfg.grad_tol;
        let last = converged || t == cfg.max_iters;
        if last || t % cfg.trace_stride == 0 {
            let objective = bary_objective(&sigma, p).map_err(|e| e.at(t))?;
            trace
                .record(t, &sigma, objective, grad_sq, None)
                .map_err(|e| e.at(t))?;
        }
        if last {
            return Ok((sigma, trace.finish(t, converged)));
        }
        t += 1;
        sigma = project_spectrum(&(sigma.matrix() - grad * eta), cfg.lambda_min, cfg.lambda_max)
            .map_err(|e| e.at(t))?;
    }
}

/// Projected SGD `Σₙ₊₁ = Π(Σₙ − ηₙ₊₁ (I − GM(Kₙ₊₁, Σₙ⁻¹)))` with i.i.d.
/// samples `Kₙ₊₁ ~ P`.
pub fn run_esgd(
    p: &DiscreteDistribution,
    sigma0: &SpdMatrix,
    cfg: &EuclideanConfig,
) -> Result<(SpdMatrix, ConvergenceTrace)> {
    cfg.validate(p, sigma0)?;
    let d = p.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut sigma = sigma0.clone();
    let mut trace = TraceBuilder::new(cfg.reference.as_ref());
    let mut t = 0;
    loop {
        let last_budget = t == cfg.max_iters;
        if t == 0 || last_budget || t % cfg.trace_stride == 0 {
            let grad_sq = record(&mut trace, t, &sigma, p).map_err(|e| e.at(t))?;
            let converged = grad_sq.sqrt() <= cfg.grad_tol;
            if converged || last_budget {
                return Ok((sigma, trace.finish(t, converged)));
            }
        }
        t += 1;
        let k = p.covariance(p.index_for(rng.random::<f64>()));
        let gm = atom_term(&sigma.inverse(), k).map_err(|e| e.at(t))?;
        let g = DMatrix::identity(d, d) - gm;
        sigma = project_spectrum(&(sigma.matrix() - g * cfg.esgd_step(t)), cfg.lambda_min, cfg.lambda_max)
            .map_err(|e| e.at(t))?;
    }
}

/// `⟨Y, D²F(Σ)[Y]⟩ / ‖Y‖²_F` by a central second difference of the
/// barycenter objective along `Y`.
pub fn hessian_quadratic_form(sigma: &SpdMatrix, p: &DiscreteDistribution, y: &DMatrix<f64>) -> Result<f64> {
    check_dim(sigma.dim(), y.nrows())?;
    check_dim(sigma.dim(), y.ncols())?;
    let norm = y.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(BwError::InvalidParameter {
            name: "y",
            value: norm,
            reason: "direction must be nonzero and finite",
        });
    }
    let dir = crate::geometry::symmetrize(y) / norm;
    let h = 1e-3 * sigma.lambda_min();
    let f = |s: f64| -> Result<f64> {
        bary_objective(&SpdMatrix::new(sigma.matrix() + &dir * s)?, p)
    };
    Ok((f(h)? - 2.0 * f(0.0)? + f(-h)?) / (h * h))
}

/// Rayleigh-quotient bounds `[α³/(4β⁴), β³/(4α⁴)]` of the Euclidean Hessian
/// on the box `[α, β]`.
pub fn hessian_bounds(alpha: f64, beta: f64) -> (f64, f64) {
    (
        alpha.powi(3) / (4.0 * beta.powi(4)),
        beta.powi(3) / (4.0 * alpha.powi(4)),
    )
}
