//! Entropically regularized barycenters.
//!
//! Minimizes `F_γ(Σ) = F(Σ) + γ KL(N(0, Σ) ‖ N(0, I))`, whose
//! Bures-Wasserstein gradient is `(I − Σᵢ wᵢ T(Σ → Σᵢ)) + γ (I − Σ⁻¹)`.
//! With atom spectra inside `[1/√κ, √κ]` and step `η = 1/(1 + 2γ√κ)`, the
//! iterates stay in that box and converge linearly.

use nalgebra::{DMatrix, DVector};

use crate::barycenter::evaluate;
use crate::distribution::DiscreteDistribution;
use crate::error::{check_dim, BwError, Result};
use crate::geometry::{congruence, kl_to_standard, tangent_norm_sq_raw, SpdMatrix, TangentMap};
use crate::trace::{ConvergenceTrace, TraceBuilder};

#[derive(Clone, Debug)]
pub struct RegConfig {
    pub gamma: f64,
    /// Spectral box parameter; inferred from the atoms when absent.
    pub kappa: Option<f64>,
    /// Step size; `1/(1 + 2γ√κ)` when absent.
    pub step: Option<f64>,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub reference: Option<SpdMatrix>,
}

impl RegConfig {
    pub fn new(gamma: f64) -> Self {
        Self {
            gamma,
            kappa: None,
            step: None,
            max_iters: 10_000,
            grad_tol: 1e-10,
            reference: None,
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(BwError::InvalidParameter {
            name: "gamma",
            value: gamma,
            reason: "must be positive",
        });
    }
    Ok(())
}

/// Smallest `κ ≥ 1` with every atom spectrum inside `[1/√κ, √κ]`.
pub fn infer_kappa(p: &DiscreteDistribution) -> f64 {
    let (lo, hi) = p.spectral_bounds();
    (hi * hi).max(1.0 / (lo * lo)).max(1.0)
}

/// The box parameter in effect: the override (verified against the atoms)
/// or the inferred value.
pub fn resolve_kappa(p: &DiscreteDistribution, kappa: Option<f64>) -> Result<f64> {
    match kappa {
        None => Ok(infer_kappa(p)),
        Some(k) if k >= 1.0 && k.is_finite() => {
            p.check_box(1.0 / k.sqrt(), k.sqrt())?;
            Ok(k)
        }
        Some(k) => Err(BwError::InvalidParameter {
            name: "kappa",
            value: k,
            reason: "must be at least 1",
        }),
    }
}

/// `η = 1/(1 + 2γ√κ)`.
pub fn default_step(gamma: f64, kappa: f64) -> f64 {
    1.0 / (1.0 + 2.0 * gamma * kappa.sqrt())
}

struct RegEval {
    objective: f64,
    grad: DMatrix<f64>,
    grad_norm_sq: f64,
}

fn evaluate_reg(sigma: &SpdMatrix, p: &DiscreteDistribution, gamma: f64) -> Result<RegEval> {
    let bary = evaluate(sigma, p)?;
    let d = sigma.dim();
    let eye = DMatrix::identity(d, d);
    let inv = sigma.spectral_map(|l| 1.0 / l);
    let grad = (&eye - &bary.mean_map) + (eye - inv) * gamma;
    Ok(RegEval {
        objective: bary.objective + gamma * kl_to_standard(sigma),
        grad_norm_sq: tangent_norm_sq_raw(&grad, sigma.matrix()),
        grad,
    })
}

/// `F_γ(Σ) = F(Σ) + γ KL(Σ ‖ I)`.
pub fn reg_objective(sigma: &SpdMatrix, p: &DiscreteDistribution, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(evaluate_reg(sigma, p, gamma)?.objective)
}

/// `∇F_γ(Σ) = (I − Σᵢ wᵢ T(Σ → Σᵢ)) + γ (I − Σ⁻¹)`.
pub fn reg_gradient(sigma: &SpdMatrix, p: &DiscreteDistribution, gamma: f64) -> Result<TangentMap> {
    check_gamma(gamma)?;
    Ok(TangentMap::from_symmetric(evaluate_reg(sigma, p, gamma)?.grad))
}

fn check_step(gamma: f64, eta: f64) -> Result<()> {
    if !(eta > 0.0) || eta * (1.0 + gamma) > 1.0 + 1e-12 {
        return Err(BwError::InvalidParameter {
            name: "eta",
            value: eta,
            reason: "need 0 < eta and eta * (1 + gamma) <= 1",
        });
    }
    Ok(())
}

fn step_from(sigma: &SpdMatrix, grad: &DMatrix<f64>, eta: f64) -> Result<SpdMatrix> {
    let d = sigma.dim();
    let s = DMatrix::identity(d, d) - grad * eta;
    SpdMatrix::new(congruence(&s, sigma.matrix()))
}

/// One step `Σ⁺ = S Σ S` with
/// `S = η Σᵢ wᵢ T(Σ → Σᵢ) + ηγ Σ⁻¹ + (1 − η(1 + γ)) I`.
pub fn rbary_gd_step(
    sigma: &SpdMatrix,
    p: &DiscreteDistribution,
    gamma: f64,
    eta: f64,
) -> Result<SpdMatrix> {
    check_gamma(gamma)?;
    check_step(gamma, eta)?;
    check_dim(sigma.dim(), p.dim())?;
    let eval = evaluate_reg(sigma, p, gamma)?;
    step_from(sigma, &eval.grad, eta)
}

/// Riemannian GD on `F_γ`.
pub fn run_rbary_gd(
    p: &DiscreteDistribution,
    sigma0: &SpdMatrix,
    cfg: &RegConfig,
) -> Result<(SpdMatrix, ConvergenceTrace)> {
    check_gamma(cfg.gamma)?;
    check_dim(p.dim(), sigma0.dim())?;
    if cfg.max_iters < 1 {
        return Err(BwError::InvalidParameter {
            name: "max_iters",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    let kappa = resolve_kappa(p, cfg.kappa)?;
    let eta = cfg.step.unwrap_or_else(|| default_step(cfg.gamma, kappa));
    check_step(cfg.gamma, eta)?;

    let mut sigma = sigma0.clone();
    let mut trace = TraceBuilder::new(cfg.reference.as_ref());
    let mut t = 0;
    loop {
        let eval = evaluate_reg(&sigma, p, cfg.gamma).map_err(|e| e.at(t))?;
        trace
            .record(t, &sigma, eval.objective, eval.grad_norm_sq, None)
            .map_err(|e| e.at(t))?;
        let converged = eval.grad_norm_sq.sqrt() <= cfg.grad_tol;
        if converged || t == cfg.max_iters {
            return Ok((sigma, trace.finish(t, converged)));
        }
        t += 1;
        sigma = step_from(&sigma, &eval.grad, eta).map_err(|e| e.at(t))?;
    }
}

/// Mean of the regularized barycenter: `(1/(1 + γ)) Σᵢ wᵢ mᵢ`.
pub fn reg_mean(p: &DiscreteDistribution, gamma: f64) -> Result<DVector<f64>> {
    if !(gamma >= 0.0) {
        return Err(BwError::InvalidParameter {
            name: "gamma",
            value: gamma,
            reason: "must be nonnegative",
        });
    }
    Ok(p.mean_of_means() / (1.0 + gamma))
}
