#![allow(dead_code)]

use std::io::Write;

use bwopt::datasets::haar_orthogonal;
use bwopt::{DiscreteDistribution, SpdMatrix};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// SPD matrix with Haar eigenbasis and eigenvalues uniform in `[lo, hi]`.
pub fn spd_in(d: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> SpdMatrix {
    let q = haar_orthogonal(d, rng);
    let values = DVector::from_fn(d, |_, _| if lo == hi { lo } else { rng.random_range(lo..=hi) });
    SpdMatrix::new(&q * DMatrix::from_diagonal(&values) * q.transpose()).unwrap()
}

/// Uniform distribution over `n` atoms from [`spd_in`].
pub fn problem_in(n: usize, d: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> DiscreteDistribution {
    DiscreteDistribution::uniform_covariances((0..n).map(|_| spd_in(d, lo, hi, rng)).collect()).unwrap()
}

/// Random symmetric direction with unit Frobenius norm.
pub fn unit_direction(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let s = (&a + a.transpose()) * 0.5;
    let n = s.norm();
    s / n
}

/// One report line, written straight to stderr so it shows up even when
/// the harness captures test output.
pub fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    writeln!(err, "[{tag}] criterion {id:>2} {name}: {detail}").unwrap();
}
