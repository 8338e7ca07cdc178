//! Per-atom evaluation with a fixed reduction order.
//!
//! Atoms are mapped in parallel, collected in index order, and then summed
//! by a pairwise tree over ascending indices, so results are bitwise
//! identical regardless of the thread count.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::distribution::DiscreteDistribution;
use crate::error::Result;
use crate::geometry::{transport_eval, BaseFactors, SpdMatrix, TransportEval};

/// Transport maps and squared distances from `sigma` to every atom.
pub(crate) fn transport_field(
    sigma: &SpdMatrix,
    p: &DiscreteDistribution,
) -> Result<Vec<TransportEval>> {
    let base = BaseFactors::new(sigma);
    p.atoms()
        .par_iter()
        .map(|atom| transport_eval(&base, &atom.cov))
        .collect()
}

/// `Σᵢ coeffs[i] · mats[i]`, summed pairwise in index order.
pub(crate) fn weighted_sum<'a, I>(terms: I) -> DMatrix<f64>
where
    I: IntoIterator<Item = (f64, &'a DMatrix<f64>)>,
{
    let scaled: Vec<DMatrix<f64>> = terms.into_iter().map(|(c, m)| m * c).collect();
    tree_sum(&scaled)
}

fn tree_sum(items: &[DMatrix<f64>]) -> DMatrix<f64> {
    match items.len() {
        0 => panic!("tree_sum of no terms"),
        1 => items[0].clone(),
        n => {
            let (lo, hi) = items.split_at(n / 2);
            tree_sum(lo) + tree_sum(hi)
        }
    }
}

/// Pairwise sum of scalars in index order.
pub(crate) fn scalar_sum(items: &[f64]) -> f64 {
    match items.len() {
        0 => 0.0,
        1 => items[0],
        n => {
            let (lo, hi) = items.split_at(n / 2);
            scalar_sum(lo) + scalar_sum(hi)
        }
    }
}
