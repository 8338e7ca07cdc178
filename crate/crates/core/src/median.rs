//! Smoothed Wasserstein geometric medians.
//!
//! The distance is smoothed to `W₂,ε = √(W₂² + ε²)`, which makes
//! `F_ε(Σ) = Σᵢ wᵢ W₂,ε(Σ, Σᵢ)` geodesically `1/ε`-smooth; gradient descent
//! then runs with step `ε`. Non-centered problems are lifted to centered
//! ones in dimension `2d`.

use nalgebra::{DMatrix, DVector};

use crate::distribution::DiscreteDistribution;
use crate::error::{check_dim, BwError, Result};
use crate::geometry::{
    bures_distance_sq, congruence, tangent_norm_sq_raw, GaussianMeasure, SpdMatrix, TangentMap,
};
use crate::parallel::{scalar_sum, transport_field, weighted_sum};
use crate::trace::{ConvergenceTrace, TraceBuilder};

/// Iteration cap applied to the guarantee's iteration count.
pub const MAX_GUARANTEE_ITERS: usize = 100_000;

/// Off-block tolerance when reading a point back from the lifted problem.
pub const STRUCTURE_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct MedianConfig {
    pub epsilon: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub reference: Option<SpdMatrix>,
}

impl MedianConfig {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            max_iters: MAX_GUARANTEE_ITERS,
            grad_tol: 0.0,
            reference: None,
        }
    }

    /// Budget from [`guarantee_iterations`], no gradient stopping.
    pub fn for_guarantee(p: &DiscreteDistribution, sigma0: &SpdMatrix, epsilon: f64) -> Result<Self> {
        Ok(Self {
            max_iters: guarantee_iterations(p, sigma0, epsilon)?,
            ..Self::new(epsilon)
        })
    }
}

fn check_epsilon(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(BwError::InvalidParameter {
            name: "epsilon",
            value: eps,
            reason: "must lie in (0, 1)",
        });
    }
    Ok(())
}

/// `√(W₂²(a, b) + ε²)`.
pub fn w2_smoothed(a: &SpdMatrix, b: &SpdMatrix, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(BwError::InvalidParameter {
            name: "epsilon",
            value: eps,
            reason: "must be positive",
        });
    }
    Ok((bures_distance_sq(a, b)? + eps * eps).sqrt())
}

struct MedianEval {
    smoothed: f64,
    unsmoothed: f64,
    grad: DMatrix<f64>,
    grad_norm_sq: f64,
}

fn evaluate(sigma: &SpdMatrix, p: &DiscreteDistribution, eps: f64) -> Result<MedianEval> {
    check_dim(sigma.dim(), p.dim())?;
    let field = transport_field(sigma, p)?;
    let w = p.weights();
    let smoothed: Vec<f64> = field.iter().map(|e| (e.w2sq + eps * eps).sqrt()).collect();
    let unsmoothed: Vec<f64> = field.iter().zip(w).map(|(e, w)| w * e.w2sq.sqrt()).collect();
    let weighted: Vec<f64> = smoothed.iter().zip(w).map(|(s, w)| w * s).collect();
    let d = sigma.dim();
    let eye = DMatrix::<f64>::identity(d, d);
    let logs: Vec<DMatrix<f64>> = field.iter().map(|e| &e.map - &eye).collect();
    let coeffs = smoothed.iter().zip(w).map(|(s, w)| -w / s);
    let grad = weighted_sum(coeffs.zip(logs.iter()));
    Ok(MedianEval {
        smoothed: scalar_sum(&weighted),
        unsmoothed: scalar_sum(&unsmoothed),
        grad_norm_sq: tangent_norm_sq_raw(&grad, sigma.matrix()),
        grad,
    })
}

/// `F_ε(Σ) = Σᵢ wᵢ √(W₂²(Σ, Σᵢ) + ε²)`; `ε = 0` gives the unsmoothed `F`.
pub fn median_objective(sigma: &SpdMatrix, p: &DiscreteDistribution, eps: f64) -> Result<f64> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(BwError::InvalidParameter {
            name: "epsilon",
            value: eps,
            reason: "must be nonnegative",
        });
    }
    Ok(evaluate(sigma, p, eps)?.smoothed)
}

/// `∇F_ε(Σ) = −Σᵢ wᵢ (T(Σ → Σᵢ) − I) / W₂,ε(Σ, Σᵢ)`.
pub fn median_gradient(sigma: &SpdMatrix, p: &DiscreteDistribution, eps: f64) -> Result<TangentMap> {
    check_epsilon(eps)?;
    Ok(TangentMap::from_symmetric(evaluate(sigma, p, eps)?.grad))
}

fn step_from(sigma: &SpdMatrix, grad: &DMatrix<f64>, eps: f64) -> Result<SpdMatrix> {
    let d = sigma.dim();
    let s = DMatrix::identity(d, d) - grad * eps;
    SpdMatrix::new(congruence(&s, sigma.matrix()))
}

/// One step `Σ⁺ = S Σ S` with `S = I − ε ∇F_ε(Σ)`.
pub fn median_gd_step(sigma: &SpdMatrix, p: &DiscreteDistribution, eps: f64) -> Result<SpdMatrix> {
    check_epsilon(eps)?;
    let eval = evaluate(sigma, p, eps)?;
    step_from(sigma, &eval.grad, eps)
}

/// `⌈32 κ F_ε(Σ₀)⁴ / ε⁴⌉` capped at [`MAX_GUARANTEE_ITERS`], with `κ` the
/// atoms' overall condition number.
pub fn guarantee_iterations(p: &DiscreteDistribution, sigma0: &SpdMatrix, eps: f64) -> Result<usize> {
    check_epsilon(eps)?;
    let (lo, hi) = p.spectral_bounds();
    let f0 = evaluate(sigma0, p, eps)?.smoothed;
    let t = (32.0 * (hi / lo) * f0.powi(4) / eps.powi(4)).ceil();
    Ok(if t.is_finite() && t < MAX_GUARANTEE_ITERS as f64 {
        (t as usize).max(1)
    } else {
        MAX_GUARANTEE_ITERS
    })
}

fn run_with_check(
    p: &DiscreteDistribution,
    sigma0: &SpdMatrix,
    cfg: &MedianConfig,
    check: impl Fn(&SpdMatrix) -> Result<()>,
) -> Result<(SpdMatrix, ConvergenceTrace)> {
    check_epsilon(cfg.epsilon)?;
    check_dim(p.dim(), sigma0.dim())?;
    let eps = cfg.epsilon;
    let mut sigma = sigma0.clone();
    let mut trace = TraceBuilder::new(cfg.reference.as_ref());
    let mut t = 0;
    loop {
        check(&sigma).map_err(|e| e.at(t))?;
        let eval = evaluate(&sigma, p, eps).map_err(|e| e.at(t))?;
        trace
            .record(t, &sigma, eval.smoothed, eval.grad_norm_sq, Some(eval.unsmoothed))
            .map_err(|e| e.at(t))?;
        let converged = eval.grad_norm_sq.sqrt() <= cfg.grad_tol;
        if converged || t == cfg.max_iters {
            return Ok((sigma, trace.finish(t, converged)));
        }
        t += 1;
        sigma = step_from(&sigma, &eval.grad, eps).map_err(|e| e.at(t))?;
    }
}

/// Gradient descent on `F_ε` with step `ε`. Trace objectives are `F_ε`;
/// the unsmoothed `F` is recorded alongside.
pub fn run_median_gd(
    p: &DiscreteDistribution,
    sigma0: &SpdMatrix,
    cfg: &MedianConfig,
) -> Result<(SpdMatrix, ConvergenceTrace)> {
    run_with_check(p, sigma0, cfg, |_| Ok(()))
}

/// Shift `C = √λ_min + max ‖mᵢ‖_∞` making every shifted mean positive.
pub fn augmentation_shift(p: &DiscreteDistribution) -> f64 {
    let (lo, _) = p.spectral_bounds();
    let max_mean = p
        .atoms()
        .iter()
        .map(|a| a.mean.amax())
        .fold(0.0, f64::max);
    lo.sqrt() + max_mean
}

/// `diag((m + C)²) ⊕ Σ`.
pub fn augment_point(g: &GaussianMeasure, c: f64) -> Result<SpdMatrix> {
    let d = g.dim();
    let mut m = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        m[(i, i)] = (g.mean[i] + c).powi(2);
    }
    m.view_mut((d, d), (d, d)).copy_from(g.cov.matrix());
    SpdMatrix::new(m)
}

/// Lifts non-centered atoms to centered atoms in dimension `2d`. `W₂`
/// between lifted atoms equals the full Gaussian `W₂` between originals.
pub fn augment_noncentered(p: &DiscreteDistribution) -> Result<(DiscreteDistribution, f64)> {
    let c = augmentation_shift(p);
    let covs = p
        .atoms()
        .iter()
        .map(|a| augment_point(a, c))
        .collect::<Result<Vec<_>>>()?;
    Ok((DiscreteDistribution::from_covariances(covs, p.weights().to_vec())?, c))
}

/// Inverse of [`augment_point`]. Fails when off-diagonal entries of the
/// upper block, or the coupling block, exceed [`STRUCTURE_TOL`] relative to
/// the largest entry.
pub fn deaugment(sigma_aug: &SpdMatrix, c: f64, d: usize) -> Result<GaussianMeasure> {
    check_dim(2 * d, sigma_aug.dim())?;
    let m = sigma_aug.matrix();
    let tol = STRUCTURE_TOL * m.amax().max(1.0);
    for i in 0..d {
        for j in 0..2 * d {
            if i != j && m[(i, j)].abs() > tol {
                return Err(BwError::Structure(format!(
                    "augmented point has entry ({i}, {j}) = {:e} outside the block structure",
                    m[(i, j)]
                )));
            }
        }
    }
    let mean = DVector::from_fn(d, |i, _| m[(i, i)].sqrt() - c);
    let cov = SpdMatrix::new(m.view((d, d), (d, d)).into_owned())?;
    GaussianMeasure::new(mean, cov)
}

/// Median of non-centered atoms through the lifted problem. The block
/// structure is verified at every iterate.
pub fn run_median_gd_noncentered(
    p: &DiscreteDistribution,
    start: &GaussianMeasure,
    cfg: &MedianConfig,
) -> Result<(GaussianMeasure, ConvergenceTrace)> {
    let d = p.dim();
    check_dim(d, start.dim())?;
    let (lifted, c) = augment_noncentered(p)?;
    let sigma0 = augment_point(start, c)?;
    let (out, trace) = run_with_check(&lifted, &sigma0, cfg, |s| deaugment(s, c, d).map(|_| ()))?;
    Ok((deaugment(&out, c, d)?, trace))
}
