//! Seeded synthetic covariance datasets.
//!
//! Methods (all with equal weights):
//!
//! 1. Haar eigenbasis, eigenvalues linearly spaced in `[α, β]`.
//! 2. Haar eigenbasis, i.i.d. `Unif[α, β]` eigenvalues.
//! 3. Three groups; as method 2 with interval `10^i · [1, κ]`, `κ = β/α`,
//!    `i ∈ {−2, 0, 2}`.
//! 4. As method 2, with one eigenbasis shared by every atom.
//! 5. Haar eigenbasis, eigenvalues drawn uniformly from a per-atom set of `m`
//!    values, themselves i.i.d. `Unif[α, β]`.
//! 6. As method 5, with one spectrum shared by every atom.
//! 7. `⌊n/6⌋` atoms from each of methods 1–6, remainder to method 1.

use nalgebra::DMatrix;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::distribution::DiscreteDistribution;
use crate::error::{BwError, Result};
use crate::geometry::{GaussianMeasure, SpdMatrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub method: u8,
    pub n: usize,
    pub d: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Support size for methods 5 and 6; defaults to `max(1, d/4)`.
    #[serde(default)]
    pub m: Option<usize>,
    pub seed: u64,
}

impl GenSpec {
    pub fn new(method: u8, n: usize, d: usize, alpha: f64, beta: f64, seed: u64) -> Self {
        Self {
            method,
            n,
            d,
            alpha,
            beta,
            m: None,
            seed,
        }
    }

    fn support_size(&self) -> usize {
        self.m.unwrap_or((self.d / 4).max(1))
    }

    fn validate(&self) -> Result<()> {
        if !(1..=7).contains(&self.method) {
            return Err(BwError::InvalidParameter {
                name: "method",
                value: self.method as f64,
                reason: "must be one of 1..=7",
            });
        }
        if self.n == 0 || self.d == 0 {
            return Err(BwError::InvalidParameter {
                name: "n/d",
                value: 0.0,
                reason: "atom count and dimension must be positive",
            });
        }
        if !(self.alpha > 0.0) || self.alpha > self.beta || !self.beta.is_finite() {
            return Err(BwError::InvalidParameter {
                name: "alpha",
                value: self.alpha,
                reason: "need 0 < alpha <= beta",
            });
        }
        let m = self.support_size();
        if m < 1 || m > self.d {
            return Err(BwError::InvalidParameter {
                name: "m",
                value: m as f64,
                reason: "need 1 <= m <= d",
            });
        }
        Ok(())
    }
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of `R`'s diagonal folded into `Q`.
pub fn haar_orthogonal<R: RngCore + ?Sized>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for (j, mut col) in q.column_iter_mut().enumerate() {
        if r[(j, j)] < 0.0 {
            col.neg_mut();
        }
    }
    q
}

fn with_basis(q: &DMatrix<f64>, values: &[f64]) -> Result<SpdMatrix> {
    let mut scaled = q.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= values[j];
    }
    SpdMatrix::new(scaled * q.transpose())
}

fn linear_spectrum(d: usize, alpha: f64, beta: f64) -> Vec<f64> {
    if d == 1 {
        return vec![alpha];
    }
    (0..d)
        .map(|j| alpha + (beta - alpha) * j as f64 / (d - 1) as f64)
        .collect()
}

fn uniform_spectrum<R: Rng>(rng: &mut R, d: usize, alpha: f64, beta: f64) -> Vec<f64> {
    (0..d).map(|_| uniform(rng, alpha, beta)).collect()
}

fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn set_spectrum<R: Rng>(rng: &mut R, d: usize, m: usize, alpha: f64, beta: f64) -> Vec<f64> {
    let support = uniform_spectrum(rng, m, alpha, beta);
    (0..d).map(|_| support[rng.random_range(0..m)]).collect()
}

fn generate_method<R: Rng>(
    rng: &mut R,
    method: u8,
    count: usize,
    spec: &GenSpec,
) -> Result<Vec<SpdMatrix>> {
    let (d, alpha, beta) = (spec.d, spec.alpha, spec.beta);
    let m = spec.support_size();
    match method {
        1 => (0..count)
            .map(|_| with_basis(&haar_orthogonal(d, rng), &linear_spectrum(d, alpha, beta)))
            .collect(),
        2 => (0..count)
            .map(|_| {
                let q = haar_orthogonal(d, rng);
                with_basis(&q, &uniform_spectrum(rng, d, alpha, beta))
            })
            .collect(),
        3 => {
            let kappa = beta / alpha;
            (0..count)
                .map(|j| {
                    let scale = [1e-2, 1.0, 1e2][3 * j / count];
                    let q = haar_orthogonal(d, rng);
                    with_basis(&q, &uniform_spectrum(rng, d, scale, scale * kappa))
                })
                .collect()
        }
        4 => {
            let q = haar_orthogonal(d, rng);
            (0..count)
                .map(|_| with_basis(&q, &uniform_spectrum(rng, d, alpha, beta)))
                .collect()
        }
        5 => (0..count)
            .map(|_| {
                let q = haar_orthogonal(d, rng);
                with_basis(&q, &set_spectrum(rng, d, m, alpha, beta))
            })
            .collect(),
        6 => {
            let values = set_spectrum(rng, d, m, alpha, beta);
            (0..count)
                .map(|_| with_basis(&haar_orthogonal(d, rng), &values))
                .collect()
        }
        7 => {
            let per = count / 6;
            let mut atoms = Vec::with_capacity(count);
            for method in 1..=6u8 {
                let size = if method == 1 { count - 5 * per } else { per };
                if size > 0 {
                    atoms.extend(generate_method(rng, method, size, spec)?);
                }
            }
            Ok(atoms)
        }
        _ => unreachable!("method validated"),
    }
}

/// Generates the dataset described by `spec`; deterministic in `spec.seed`.
pub fn generate(spec: &GenSpec) -> Result<DiscreteDistribution> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let atoms = generate_method(&mut rng, spec.method, spec.n, spec)?;
    DiscreteDistribution::uniform_covariances(atoms)
}

/// Dataset whose barycenter is exactly `I`: atoms `(I ± S)²` in antithetic
/// pairs, `S` with Haar eigenbasis and `Unif[−(1−δ), 1−δ]` eigenvalues, plus
/// the atom `I` when `n` is odd. The tangent vectors at `I` average to zero,
/// and spectra stay in `[δ², (2−δ)²]`.
pub fn generate_known_barycenter(
    n: usize,
    d: usize,
    delta: f64,
    seed: u64,
) -> Result<DiscreteDistribution> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(BwError::InvalidParameter {
            name: "delta",
            value: delta,
            reason: "must lie in (0, 1)",
        });
    }
    if n == 0 || d == 0 {
        return Err(BwError::InvalidParameter {
            name: "n/d",
            value: 0.0,
            reason: "atom count and dimension must be positive",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius = 1.0 - delta;
    let mut atoms = Vec::with_capacity(n);
    for _ in 0..n / 2 {
        let q = haar_orthogonal(d, &mut rng);
        let s: Vec<f64> = (0..d).map(|_| uniform(&mut rng, -radius, radius)).collect();
        let plus: Vec<f64> = s.iter().map(|u| (1.0 + u).powi(2)).collect();
        let minus: Vec<f64> = s.iter().map(|u| (1.0 - u).powi(2)).collect();
        atoms.push(with_basis(&q, &plus)?);
        atoms.push(with_basis(&q, &minus)?);
    }
    if n % 2 == 1 {
        atoms.push(SpdMatrix::identity(d));
    }
    DiscreteDistribution::uniform_covariances(atoms)
}

/// Adds `ρ e₁e₁ᵀ` to every atom covariance.
pub fn perturb_rank_one(p: &DiscreteDistribution, rho: f64) -> Result<DiscreteDistribution> {
    if !(rho >= 0.0) {
        return Err(BwError::InvalidParameter {
            name: "rho",
            value: rho,
            reason: "must be nonnegative",
        });
    }
    map_atoms(p, |_, cov| {
        let mut m = cov.matrix().clone();
        m[(0, 0)] += rho;
        SpdMatrix::new(m)
    })
}

/// Multiplies the first `⌊fraction · n⌋` atom covariances by `factor`.
pub fn scale_fraction(
    p: &DiscreteDistribution,
    fraction: f64,
    factor: f64,
) -> Result<DiscreteDistribution> {
    if !(0.0..=1.0).contains(&fraction) || !(factor > 0.0) {
        return Err(BwError::InvalidParameter {
            name: "fraction/factor",
            value: fraction,
            reason: "need fraction in [0, 1] and positive factor",
        });
    }
    let count = (fraction * p.len() as f64).floor() as usize;
    map_atoms(p, |i, cov| {
        if i < count {
            SpdMatrix::new(cov.matrix() * factor)
        } else {
            Ok(cov.clone())
        }
    })
}

fn map_atoms(
    p: &DiscreteDistribution,
    f: impl Fn(usize, &SpdMatrix) -> Result<SpdMatrix>,
) -> Result<DiscreteDistribution> {
    let atoms = p
        .atoms()
        .iter()
        .enumerate()
        .map(|(i, a)| GaussianMeasure::new(a.mean.clone(), f(i, &a.cov)?))
        .collect::<Result<Vec<_>>>()?;
    DiscreteDistribution::new(atoms, p.weights().to_vec())
}

/// Mean of `log_I Σᵢ = Σᵢ^{1/2} − I` over the atoms.
pub fn mean_tangent_at_identity(p: &DiscreteDistribution) -> DMatrix<f64> {
    let d = p.dim();
    p.covariances()
        .zip(p.weights())
        .fold(DMatrix::zeros(d, d), |acc, (c, w)| {
            acc + (c.spectral_map(f64::sqrt) - DMatrix::identity(d, d)) * *w
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn haar_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let q = haar_orthogonal(6, &mut rng);
            assert!((q.transpose() * &q - DMatrix::identity(6, 6)).norm() <= 1e-10);
        }
        let q = haar_orthogonal(1, &mut rng);
        assert_eq!(q[(0, 0)].abs(), 1.0);
    }

    #[test]
    fn haar_first_column_is_isotropic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let draws = 10_000;
        let mean = (0..draws).fold(DVector::zeros(4), |acc: DVector<f64>, _| {
            acc + haar_orthogonal(4, &mut rng).column(0)
        }) / draws as f64;
        assert!(mean.norm() <= 0.05, "mean norm {}", mean.norm());
    }

    #[test]
    fn method_one_spectrum() {
        let p = generate(&GenSpec::new(1, 5, 3, 1.0, 3.0, 7)).unwrap();
        for c in p.covariances() {
            let ev = c.eigenvalues();
            for (got, want) in ev.iter().zip([1.0, 2.0, 3.0]) {
                assert!((got - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn method_four_commutes() {
        let p = generate(&GenSpec::new(4, 6, 5, 0.5, 4.0, 3)).unwrap();
        for a in p.covariances() {
            for b in p.covariances() {
                let comm = a.matrix() * b.matrix() - b.matrix() * a.matrix();
                assert!(comm.norm() <= 1e-9);
            }
        }
    }

    #[test]
    fn method_three_scales() {
        let (alpha, beta) = (1.0, 5.0);
        let p = generate(&GenSpec::new(3, 9, 4, alpha, beta, 11)).unwrap();
        let kappa = beta / alpha;
        for c in p.covariances() {
            let inside = [1e-2, 1.0, 1e2].iter().any(|s| {
                c.lambda_min() >= s * (1.0 - 1e-12) && c.lambda_max() <= s * kappa * (1.0 + 1e-12)
            });
            assert!(inside, "spectrum [{}, {}]", c.lambda_min(), c.lambda_max());
        }
    }

    #[test]
    fn every_method_respects_its_box() {
        for method in [1u8, 2, 4, 5, 6, 7] {
            let spec = GenSpec {
                m: Some(2),
                ..GenSpec::new(method, 13, 6, 0.5, 3.0, 5)
            };
            let p = generate(&spec).unwrap();
            assert_eq!(p.len(), 13);
            if method != 7 {
                p.check_box(0.5, 3.0).unwrap();
            }
        }
    }

    #[test]
    fn method_six_shares_spectrum() {
        let spec = GenSpec {
            m: Some(2),
            ..GenSpec::new(6, 4, 5, 1.0, 2.0, 9)
        };
        let p = generate(&spec).unwrap();
        let first = p.covariance(0).eigenvalues().clone();
        for c in p.covariances() {
            assert!((c.eigenvalues() - &first).norm() < 1e-12);
        }
        let distinct = {
            let mut v: Vec<f64> = first.iter().copied().collect();
            v.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
            v.len()
        };
        assert!(distinct <= 2);
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = GenSpec::new(7, 14, 4, 0.1, 2.0, 42);
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = GenSpec { seed: 43, ..spec.clone() };
        assert_ne!(generate(&spec).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn invalid_specs() {
        assert!(generate(&GenSpec::new(8, 3, 2, 1.0, 2.0, 0)).is_err());
        assert!(generate(&GenSpec::new(1, 3, 2, 2.0, 1.0, 0)).is_err());
        let spec = GenSpec {
            m: Some(5),
            ..GenSpec::new(5, 3, 2, 1.0, 2.0, 0)
        };
        assert!(generate(&spec).is_err());
        assert!(generate_known_barycenter(3, 2, 1.0, 0).is_err());
        assert!(generate_known_barycenter(3, 2, 0.0, 0).is_err());
    }

    #[test]
    fn known_barycenter_construction() {
        let p = generate_known_barycenter(1, 3, 0.1, 0).unwrap();
        assert_eq!(p.covariance(0).matrix(), &DMatrix::identity(3, 3));
        let p = generate_known_barycenter(11, 5, 0.1, 4).unwrap();
        p.check_box(0.01, 3.61).unwrap();
        assert!(mean_tangent_at_identity(&p).norm() < 1e-13);
    }

    #[test]
    fn rank_one_perturbation() {
        let p = DiscreteDistribution::dirac(SpdMatrix::identity(3));
        let q = perturb_rank_one(&p, 10.0).unwrap();
        assert_eq!(q.covariance(0).matrix(), SpdMatrix::from_diagonal(&[11.0, 1.0, 1.0]).unwrap().matrix());
        assert_eq!(perturb_rank_one(&p, 0.0).unwrap(), p);
        assert!(perturb_rank_one(&p, -1.0).is_err());

        let p = generate(&GenSpec::new(2, 10, 4, 0.5, 2.0, 1)).unwrap();
        let rho = 3.0;
        let q = perturb_rank_one(&p, rho).unwrap();
        for (a, b) in p.covariances().zip(q.covariances()) {
            assert!(b.lambda_max() - a.lambda_max() <= rho + 1e-12);
            assert!(b.lambda_max() >= a.lambda_max() - 1e-12);
            assert!(b.lambda_min() >= a.lambda_min() - 1e-12);
        }
    }

    #[test]
    fn scale_fraction_scales_prefix() {
        let p = generate(&GenSpec::new(1, 10, 2, 1.0, 2.0, 1)).unwrap();
        let q = scale_fraction(&p, 0.45, 3.0).unwrap();
        for i in 0..10 {
            let factor = if i < 4 { 3.0 } else { 1.0 };
            assert!((q.covariance(i).matrix() - p.covariance(i).matrix() * factor).norm() < 1e-12);
        }
    }
}
