use nalgebra::DVector;

use crate::error::{BwError, Result};
use crate::geometry::{GaussianMeasure, SpdMatrix};

const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// A finitely supported probability measure over Gaussians.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteDistribution {
    atoms: Vec<GaussianMeasure>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(atoms: Vec<GaussianMeasure>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(BwError::EmptyDistribution);
        }
        if atoms.len() != weights.len() {
            return Err(BwError::InvalidWeights(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(BwError::InvalidWeights(format!("weight {w} is not positive")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(BwError::InvalidWeights(format!("weights sum to {total}, not 1")));
        }
        let d = atoms[0].dim();
        if let Some(bad) = atoms.iter().find(|a| a.dim() != d) {
            return Err(BwError::DimensionMismatch {
                expected: d,
                found: bad.dim(),
            });
        }
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(Self {
            atoms,
            weights,
            cumulative,
        })
    }

    pub fn uniform(atoms: Vec<GaussianMeasure>) -> Result<Self> {
        let n = atoms.len();
        Self::new(atoms, vec![1.0 / n.max(1) as f64; n])
    }

    /// Centered atoms with the given covariances and weights.
    pub fn from_covariances(covs: Vec<SpdMatrix>, weights: Vec<f64>) -> Result<Self> {
        Self::new(covs.into_iter().map(GaussianMeasure::centered).collect(), weights)
    }

    pub fn uniform_covariances(covs: Vec<SpdMatrix>) -> Result<Self> {
        Self::uniform(covs.into_iter().map(GaussianMeasure::centered).collect())
    }

    pub fn dirac(cov: SpdMatrix) -> Self {
        Self::uniform_covariances(vec![cov]).expect("single atom is a valid distribution")
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].dim()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[GaussianMeasure] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn covariance(&self, i: usize) -> &SpdMatrix {
        &self.atoms[i].cov
    }

    pub fn covariances(&self) -> impl Iterator<Item = &SpdMatrix> {
        self.atoms.iter().map(|a| &a.cov)
    }

    pub fn is_centered(&self) -> bool {
        self.atoms.iter().all(GaussianMeasure::is_centered)
    }

    /// `(min λ_min, max λ_max)` over all atom covariances.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        self.covariances().fold((f64::INFINITY, 0.0), |(lo, hi), c| {
            (lo.min(c.lambda_min()), hi.max(c.lambda_max()))
        })
    }

    /// Weighted average of the atom means.
    pub fn mean_of_means(&self) -> DVector<f64> {
        self.atoms
            .iter()
            .zip(&self.weights)
            .fold(DVector::zeros(self.dim()), |acc, (a, w)| acc + &a.mean * *w)
    }

    /// Same weights, atoms replaced by their centered versions.
    pub fn centered(&self) -> DiscreteDistribution {
        let atoms = self
            .atoms
            .iter()
            .map(|a| GaussianMeasure::centered(a.cov.clone()))
            .collect();
        Self::new(atoms, self.weights.clone()).expect("centering preserves validity")
    }

    /// Atom index for a uniform draw `u ∈ [0, 1)` by inverse CDF.
    pub fn index_for(&self, u: f64) -> usize {
        let target = u * self.cumulative[self.cumulative.len() - 1];
        self.cumulative
            .partition_point(|&c| c <= target)
            .min(self.atoms.len() - 1)
    }

    /// Verifies every atom spectrum lies in `[lower, upper]` up to a relative
    /// slack for rounding in the eigendecomposition.
    pub fn check_box(&self, lower: f64, upper: f64) -> Result<()> {
        const SLACK: f64 = 1e-12;
        for (i, c) in self.covariances().enumerate() {
            if c.lambda_min() < lower * (1.0 - SLACK) || c.lambda_max() > upper * (1.0 + SLACK) {
                return Err(BwError::OutOfBox {
                    atom: i,
                    lambda_min: c.lambda_min(),
                    lambda_max: c.lambda_max(),
                    lower,
                    upper,
                });
            }
        }
        Ok(())
    }
}
