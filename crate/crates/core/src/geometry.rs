//! Closed-form Bures-Wasserstein primitives.
//!
//! Points of the manifold are covariance matrices ([`SpdMatrix`]); tangent
//! vectors at a point are symmetric matrices ([`TangentMap`]). For centered
//! Gaussians with covariances `Σ` and `Σ'` the optimal transport map is the
//! symmetric matrix
//!
//! ```text
//! T(Σ → Σ') = Σ^{-1/2} (Σ^{1/2} Σ' Σ^{1/2})^{1/2} Σ^{-1/2}
//! ```
//!
//! and everything else (distance, exp/log, geodesics) is built from it:
//!
//! ```text
//! W₂²(Σ, Σ')  = tr Σ + tr Σ' − 2 tr (Σ^{1/2} Σ' Σ^{1/2})^{1/2}
//! log_Σ Σ'    = T(Σ → Σ') − I
//! exp_Σ S     = (I + S) Σ (I + S)
//! ‖S‖_Σ²      = tr(S Σ S)
//! ```

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{check_dim, BwError, Result};

/// Smallest accepted ratio `λ_min / λ_max` for a positive-definite matrix.
pub const PD_RELATIVE_THRESHOLD: f64 = 1e-12;

const EIG_MAX_ITERS: usize = 10_000;

/// `(A + Aᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    let n = out.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// `S · B · S` for symmetric `S`, symmetrized.
pub fn congruence(s: &DMatrix<f64>, base: &DMatrix<f64>) -> DMatrix<f64> {
    symmetrize(&(s * base * s))
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
pub(crate) fn sym_eigen(
    m: &DMatrix<f64>,
    context: &'static str,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(BwError::NonFinite);
    }
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, EIG_MAX_ITERS).ok_or_else(|| {
        BwError::NumericalFailure {
            context,
            matrix: Box::new(m.clone()),
        }
    })?;
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// `V · diag(values) · Vᵀ`, symmetrized.
fn reconstruct(values: &DVector<f64>, vectors: &DMatrix<f64>) -> DMatrix<f64> {
    let mut scaled = vectors.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= values[j];
    }
    symmetrize(&(scaled * vectors.transpose()))
}

fn identity(d: usize) -> DMatrix<f64> {
    DMatrix::identity(d, d)
}

/// Symmetric positive-definite matrix with an eagerly computed
/// eigendecomposition. Immutable: every transformation returns a new value.
#[derive(Clone, Debug)]
pub struct SpdMatrix {
    entries: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl PartialEq for SpdMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl SpdMatrix {
    /// Symmetrizes `m` and accepts it if `λ_min > 1e-12 · λ_max`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(BwError::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(BwError::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        let entries = symmetrize(&m);
        let (eigenvalues, eigenvectors) = sym_eigen(&entries, "SpdMatrix::new")?;
        Self::validate(&eigenvalues)?;
        Ok(Self {
            entries,
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn from_row_slice(d: usize, data: &[f64]) -> Result<Self> {
        if data.len() != d * d {
            return Err(BwError::DimensionMismatch {
                expected: d * d,
                found: data.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(d, d, data))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn identity(d: usize) -> Self {
        Self::scaled_identity(d, 1.0).expect("identity is positive definite")
    }

    pub fn scaled_identity(d: usize, c: f64) -> Result<Self> {
        Self::from_diagonal(&vec![c; d])
    }

    /// Builds a matrix from a known spectral decomposition without
    /// re-diagonalizing. `vectors` must be orthogonal.
    pub(crate) fn from_eigen(values: DVector<f64>, vectors: DMatrix<f64>) -> Result<Self> {
        let entries = reconstruct(&values, &vectors);
        let (values, vectors) = sort_pairs(values, vectors);
        Self::validate(&values)?;
        Ok(Self {
            entries,
            eigenvalues: values,
            eigenvectors: vectors,
        })
    }

    fn validate(values: &DVector<f64>) -> Result<()> {
        let min = values[0];
        let max = values[values.len() - 1];
        if !(min > 0.0) || min <= PD_RELATIVE_THRESHOLD * max || !max.is_finite() {
            return Err(BwError::NotPositiveDefinite {
                min_eigenvalue: min,
                max_eigenvalue: max,
            });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors, column `j` paired with `eigenvalues()[j]`.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    pub fn condition_number(&self) -> f64 {
        self.lambda_max() / self.lambda_min()
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    pub fn ln_det(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.ln()).sum()
    }

    /// `V f(Λ) Vᵀ` as a plain symmetric matrix.
    pub fn spectral_map(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        reconstruct(&self.eigenvalues.map(f), &self.eigenvectors)
    }

    /// `V f(Λ) Vᵀ`, which must again be positive definite.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Result<SpdMatrix> {
        SpdMatrix::from_eigen(self.eigenvalues.map(f), self.eigenvectors.clone())
    }

    pub fn sqrt(&self) -> SpdMatrix {
        self.map_spectrum(f64::sqrt)
            .expect("square root of a positive definite matrix is positive definite")
    }

    pub fn inv_sqrt(&self) -> SpdMatrix {
        self.map_spectrum(|l| 1.0 / l.sqrt())
            .expect("inverse square root of a positive definite matrix is positive definite")
    }

    pub fn inverse(&self) -> SpdMatrix {
        self.map_spectrum(|l| 1.0 / l)
            .expect("inverse of a positive definite matrix is positive definite")
    }

    /// Frobenius distance between the stored entries and the reconstruction
    /// from the cached eigendecomposition, relative to `‖A‖_F`.
    pub fn eigen_reconstruction_error(&self) -> f64 {
        let rebuilt = reconstruct(&self.eigenvalues, &self.eigenvectors);
        (rebuilt - &self.entries).norm() / self.entries.norm()
    }
}

fn sort_pairs(values: DVector<f64>, vectors: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = values.len();
    if values.as_slice().windows(2).all(|w| w[0] <= w[1]) {
        return (values, vectors);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted = DVector::from_iterator(n, order.iter().map(|&i| values[i]));
    let mut v = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        v.set_column(dst, &vectors.column(src));
    }
    (sorted, v)
}

/// A Bures-Wasserstein tangent vector: a symmetric matrix. The base point is
/// supplied separately wherever a norm is taken.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentMap(DMatrix<f64>);

impl TangentMap {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(BwError::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(BwError::NonFinite);
        }
        Ok(Self(symmetrize(&m)))
    }

    pub(crate) fn from_symmetric(m: DMatrix<f64>) -> Self {
        Self(m)
    }

    pub fn zeros(d: usize) -> Self {
        Self(DMatrix::zeros(d, d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn scale(&self, c: f64) -> TangentMap {
        Self(&self.0 * c)
    }

    /// `‖v‖_base`.
    pub fn norm_at(&self, base: &SpdMatrix) -> Result<f64> {
        tangent_norm(self, base)
    }
}

/// A Gaussian measure `N(mean, cov)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMeasure {
    pub mean: DVector<f64>,
    pub cov: SpdMatrix,
}

impl GaussianMeasure {
    pub fn new(mean: DVector<f64>, cov: SpdMatrix) -> Result<Self> {
        check_dim(cov.dim(), mean.len())?;
        Ok(Self { mean, cov })
    }

    pub fn centered(cov: SpdMatrix) -> Self {
        Self {
            mean: DVector::zeros(cov.dim()),
            cov,
        }
    }

    pub fn dim(&self) -> usize {
        self.cov.dim()
    }

    pub fn is_centered(&self) -> bool {
        self.mean.iter().all(|&m| m == 0.0)
    }
}

/// Square-root factors of a base point, reused across every transport map
/// evaluated from that base.
pub(crate) struct BaseFactors {
    sqrt: DMatrix<f64>,
    inv_sqrt: DMatrix<f64>,
    trace: f64,
}

impl BaseFactors {
    pub(crate) fn new(base: &SpdMatrix) -> Self {
        Self {
            sqrt: base.spectral_map(f64::sqrt),
            inv_sqrt: base.spectral_map(|l| 1.0 / l.sqrt()),
            trace: base.trace(),
        }
    }
}

/// Transport map from a base point to one target, plus `W₂²` between them;
/// both fall out of the same eigendecomposition.
pub(crate) struct TransportEval {
    pub map: DMatrix<f64>,
    pub w2sq: f64,
}

pub(crate) fn transport_eval(base: &BaseFactors, target: &SpdMatrix) -> Result<TransportEval> {
    check_dim(base.sqrt.nrows(), target.dim())?;
    let middle = congruence(&base.sqrt, target.matrix());
    let (values, vectors) = sym_eigen(&middle, "transport map")?;
    let roots = values.map(|l| l.max(0.0).sqrt());
    let middle_root = reconstruct(&roots, &vectors);
    let map = congruence(&base.inv_sqrt, &middle_root);
    let w2sq = (base.trace + target.trace() - 2.0 * roots.sum()).max(0.0);
    Ok(TransportEval { map, w2sq })
}

/// Principal square root; `B·B = A`.
pub fn matrix_sqrt(a: &SpdMatrix) -> SpdMatrix {
    a.sqrt()
}

/// Matrix geometric mean `A^{1/2} (A^{-1/2} B A^{-1/2})^{1/2} A^{1/2}`.
pub fn geometric_mean(a: &SpdMatrix, b: &SpdMatrix) -> Result<SpdMatrix> {
    check_dim(a.dim(), b.dim())?;
    let a_sqrt = a.spectral_map(f64::sqrt);
    let a_inv_sqrt = a.spectral_map(|l| 1.0 / l.sqrt());
    let inner = SpdMatrix::new(congruence(&a_inv_sqrt, b.matrix()))?;
    let inner_root = inner.spectral_map(f64::sqrt);
    SpdMatrix::new(congruence(&a_sqrt, &inner_root))
}

/// Optimal transport map `T(from → to)`; satisfies `T · from · T = to`.
pub fn transport_map(from: &SpdMatrix, to: &SpdMatrix) -> Result<SpdMatrix> {
    check_dim(from.dim(), to.dim())?;
    let eval = transport_eval(&BaseFactors::new(from), to)?;
    SpdMatrix::new(eval.map)
}

/// Squared Bures-Wasserstein distance between covariance matrices.
pub fn bures_distance_sq(a: &SpdMatrix, b: &SpdMatrix) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    let a_sqrt = a.spectral_map(f64::sqrt);
    let middle = congruence(&a_sqrt, b.matrix());
    let (values, _) = sym_eigen(&middle, "w2 distance")?;
    let root_trace: f64 = values.iter().map(|l| l.max(0.0).sqrt()).sum();
    Ok((a.trace() + b.trace() - 2.0 * root_trace).max(0.0))
}

/// Squared 2-Wasserstein distance between Gaussians, `‖m − m'‖² + W₂²(Σ, Σ')`.
pub fn w2_squared(a: &GaussianMeasure, b: &GaussianMeasure) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    let mean_term = (&a.mean - &b.mean).norm_squared();
    Ok(mean_term + bures_distance_sq(&a.cov, &b.cov)?)
}

/// `log_base target = T(base → target) − I`.
pub fn bures_log(base: &SpdMatrix, target: &SpdMatrix) -> Result<TangentMap> {
    check_dim(base.dim(), target.dim())?;
    let eval = transport_eval(&BaseFactors::new(base), target)?;
    Ok(TangentMap::from_symmetric(eval.map - identity(base.dim())))
}

/// `exp_base v = (I + v) base (I + v)`. Rejects `v` when `I + v` is not
/// positive definite.
pub fn bures_exp(base: &SpdMatrix, v: &TangentMap) -> Result<SpdMatrix> {
    check_dim(base.dim(), v.dim())?;
    let shifted = v.matrix() + identity(base.dim());
    let (values, _) = sym_eigen(&shifted, "exponential map domain")?;
    if values[0] <= 0.0 {
        return Err(BwError::ExpDomain {
            min_eigenvalue: values[0],
        });
    }
    SpdMatrix::new(congruence(&shifted, base.matrix()))
}

/// `‖v‖_base = √tr(v · base · v)`.
pub fn tangent_norm(v: &TangentMap, base: &SpdMatrix) -> Result<f64> {
    check_dim(base.dim(), v.dim())?;
    Ok(tangent_norm_sq_raw(v.matrix(), base.matrix()).sqrt())
}

pub(crate) fn tangent_norm_sq_raw(v: &DMatrix<f64>, base: &DMatrix<f64>) -> f64 {
    let vb = v * base;
    vb.component_mul(v).sum().max(0.0)
}

fn check_unit_interval(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(BwError::InvalidParameter {
            name: "t",
            value: t,
            reason: "must lie in [0, 1]",
        });
    }
    Ok(())
}

/// Point at time `t` on the constant-speed geodesic from `a` to `b`.
pub fn geodesic_point(a: &SpdMatrix, b: &SpdMatrix, t: f64) -> Result<SpdMatrix> {
    check_unit_interval(t)?;
    check_dim(a.dim(), b.dim())?;
    let map = transport_eval(&BaseFactors::new(a), b)?.map;
    let step = identity(a.dim()) * (1.0 - t) + map * t;
    SpdMatrix::new(congruence(&step, a.matrix()))
}

/// Point at time `t` on the generalized geodesic from `a` to `b` with the
/// given base: `exp_base((1 − t) log_base a + t log_base b)`.
pub fn generalized_geodesic_point(
    base: &SpdMatrix,
    a: &SpdMatrix,
    b: &SpdMatrix,
    t: f64,
) -> Result<SpdMatrix> {
    check_unit_interval(t)?;
    check_dim(base.dim(), a.dim())?;
    check_dim(base.dim(), b.dim())?;
    let factors = BaseFactors::new(base);
    let to_a = transport_eval(&factors, a)?.map;
    let to_b = transport_eval(&factors, b)?.map;
    let step = to_a * (1.0 - t) + to_b * t;
    SpdMatrix::new(congruence(&step, base.matrix()))
}

/// Replaces every eigenvalue `λ` by `min(λ, β)`.
pub fn clip_eigenvalues(a: &SpdMatrix, beta: f64) -> Result<SpdMatrix> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(BwError::InvalidParameter {
            name: "beta",
            value: beta,
            reason: "must be positive and finite",
        });
    }
    a.map_spectrum(|l| l.min(beta))
}

/// Frobenius projection of a symmetric matrix onto
/// `{X : spec(X) ⊂ [alpha, beta]}`.
pub fn project_spectrum(y: &DMatrix<f64>, alpha: f64, beta: f64) -> Result<SpdMatrix> {
    if !(alpha > 0.0) {
        return Err(BwError::InvalidParameter {
            name: "alpha",
            value: alpha,
            reason: "must be positive",
        });
    }
    if alpha > beta {
        return Err(BwError::InvalidParameter {
            name: "alpha",
            value: alpha,
            reason: "must not exceed beta",
        });
    }
    if !y.is_square() {
        return Err(BwError::NotSquare {
            rows: y.nrows(),
            cols: y.ncols(),
        });
    }
    let (values, vectors) = sym_eigen(&symmetrize(y), "spectral projection")?;
    SpdMatrix::from_eigen(values.map(|l| l.clamp(alpha, beta)), vectors)
}

/// `KL(N(0, Σ) ‖ N(0, I)) = ½ Σᵢ (λᵢ − ln λᵢ − 1)`.
pub fn kl_to_standard(sigma: &SpdMatrix) -> f64 {
    0.5 * sigma
        .eigenvalues()
        .iter()
        .map(|&l| (l - l.ln() - 1.0).max(0.0))
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(rng: &mut ChaCha8Rng, d: usize) -> SpdMatrix {
        let g = DMatrix::from_fn(d, d, |_, _| rng.random::<f64>() - 0.5);
        SpdMatrix::new(&g * g.transpose() + DMatrix::identity(d, d) * 0.2).unwrap()
    }

    fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn rejects_indefinite_and_nearly_singular() {
        let err = SpdMatrix::from_diagonal(&[1.0, -1.0]).unwrap_err();
        assert!(matches!(err, BwError::NotPositiveDefinite { .. }));
        let err = SpdMatrix::from_diagonal(&[1.0, 1e-13]).unwrap_err();
        assert!(matches!(err, BwError::NotPositiveDefinite { .. }));
        assert!(SpdMatrix::from_diagonal(&[1.0, 1e-11]).is_ok());
        assert!(matches!(
            SpdMatrix::new(DMatrix::zeros(2, 3)),
            Err(BwError::NotSquare { .. })
        ));
        assert!(matches!(
            SpdMatrix::from_diagonal(&[1.0, f64::NAN]),
            Err(BwError::NonFinite)
        ));
    }

    #[test]
    fn constructor_symmetrizes_and_caches_spectrum() {
        let a = SpdMatrix::from_row_slice(2, &[2.0, 1.0, 0.0, 2.0]).unwrap();
        assert_eq!(a.matrix()[(0, 1)], 0.5);
        assert_eq!(a.matrix()[(1, 0)], 0.5);
        assert!((a.lambda_min() - 1.5).abs() < 1e-14);
        assert!((a.lambda_max() - 2.5).abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            assert!(random_spd(&mut rng, 6).eigen_reconstruction_error() < 1e-10);
        }
    }

    #[test]
    fn sqrt_cases() {
        let i3 = SpdMatrix::identity(3);
        assert!(rel(matrix_sqrt(&i3).matrix(), i3.matrix()) < 1e-15);
        let s = matrix_sqrt(&SpdMatrix::from_diagonal(&[4.0, 9.0]).unwrap());
        assert!(rel(s.matrix(), SpdMatrix::from_diagonal(&[2.0, 3.0]).unwrap().matrix()) < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for d in [1, 3, 8, 20] {
            let a = random_spd(&mut rng, d);
            let b = matrix_sqrt(&a);
            assert!(rel(&(b.matrix() * b.matrix()), a.matrix()) <= 1e-9);
        }
    }

    #[test]
    fn geometric_mean_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_spd(&mut rng, 4);
        let b = random_spd(&mut rng, 4);
        assert!(rel(geometric_mean(&a, &a).unwrap().matrix(), a.matrix()) < 1e-10);
        let i = SpdMatrix::identity(4);
        assert!(rel(geometric_mean(&i, &b).unwrap().matrix(), b.sqrt().matrix()) < 1e-12);
        let gm = geometric_mean(
            &SpdMatrix::from_diagonal(&[4.0, 1.0]).unwrap(),
            &SpdMatrix::from_diagonal(&[1.0, 4.0]).unwrap(),
        )
        .unwrap();
        assert!(rel(gm.matrix(), &DMatrix::from_diagonal_element(2, 2, 2.0)) < 1e-14);

        let gab = geometric_mean(&a, &b).unwrap();
        let gba = geometric_mean(&b, &a).unwrap();
        assert!(rel(gab.matrix(), gba.matrix()) <= 1e-9);
        let riccati = gab.matrix() * a.inverse().matrix() * gab.matrix();
        assert!(rel(&riccati, b.matrix()) <= 1e-8);
        assert!(matches!(
            geometric_mean(&a, &SpdMatrix::identity(3)),
            Err(BwError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn transport_map_cases() {
        let s = SpdMatrix::from_diagonal(&[1.0, 4.0]).unwrap();
        let t = SpdMatrix::from_diagonal(&[4.0, 1.0]).unwrap();
        let map = transport_map(&s, &t).unwrap();
        assert!(rel(map.matrix(), SpdMatrix::from_diagonal(&[2.0, 0.5]).unwrap().matrix()) < 1e-14);
        assert!(rel(transport_map(&s, &s).unwrap().matrix(), &DMatrix::identity(2, 2)) < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let a = random_spd(&mut rng, 5);
            let b = random_spd(&mut rng, 5);
            let ab = transport_map(&a, &b).unwrap();
            let ba = transport_map(&b, &a).unwrap();
            assert!(rel(&(ab.matrix() * a.matrix() * ab.matrix()), b.matrix()) <= 1e-8);
            assert!(rel(&(ab.matrix() * ba.matrix()), &DMatrix::identity(5, 5)) <= 1e-8);
        }
    }

    #[test]
    fn w2_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_spd(&mut rng, 4);
        assert!(bures_distance_sq(&a, &a).unwrap() < 1e-12);
        let four = SpdMatrix::from_diagonal(&[4.0]).unwrap();
        let one = SpdMatrix::from_diagonal(&[1.0]).unwrap();
        assert!((bures_distance_sq(&four, &one).unwrap() - 1.0).abs() < 1e-14);

        for _ in 0..10 {
            let a = random_spd(&mut rng, 4);
            let b = random_spd(&mut rng, 4);
            let w = bures_distance_sq(&a, &b).unwrap();
            let w_rev = bures_distance_sq(&b, &a).unwrap();
            assert!((w - w_rev).abs() <= 1e-9 * w);
            let t = transport_map(&a, &b).unwrap();
            let alt = (a.matrix() + b.matrix() - 2.0 * a.matrix() * t.matrix()).trace();
            assert!((w - alt).abs() <= 1e-8 * w);
        }

        let ga = GaussianMeasure::new(DVector::from_vec(vec![0.0]), one.clone()).unwrap();
        let gb = GaussianMeasure::new(DVector::from_vec(vec![3.0]), one.clone()).unwrap();
        assert!((w2_squared(&ga, &gb).unwrap() - 9.0).abs() < 1e-14);
        assert!(GaussianMeasure::new(DVector::zeros(2), one).is_err());
    }

    #[test]
    fn log_exp_cases() {
        let one = SpdMatrix::from_diagonal(&[1.0]).unwrap();
        let four = SpdMatrix::from_diagonal(&[4.0]).unwrap();
        assert!((bures_log(&one, &four).unwrap().matrix()[(0, 0)] - 1.0).abs() < 1e-14);
        let v = TangentMap::new(DMatrix::from_element(1, 1, 1.0)).unwrap();
        assert!((bures_exp(&one, &v).unwrap().matrix()[(0, 0)] - 4.0).abs() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_spd(&mut rng, 5);
        assert!(bures_log(&a, &a).unwrap().matrix().norm() < 1e-12);
        assert_eq!(bures_exp(&a, &TangentMap::zeros(5)).unwrap().matrix(), a.matrix());
        for _ in 0..10 {
            let a = random_spd(&mut rng, 5);
            let b = random_spd(&mut rng, 5);
            let v = bures_log(&a, &b).unwrap();
            let back = bures_exp(&a, &v).unwrap();
            assert!(rel(back.matrix(), b.matrix()) <= 1e-8);
            let n = tangent_norm(&v, &a).unwrap();
            let w = bures_distance_sq(&a, &b).unwrap();
            assert!((n * n - w).abs() <= 1e-8 * w);
        }
    }

    #[test]
    fn exp_domain_error_reports_most_negative_eigenvalue() {
        let base = SpdMatrix::identity(2);
        let v = TangentMap::new(DMatrix::from_diagonal(&DVector::from_vec(vec![-2.0, 0.5]))).unwrap();
        match bures_exp(&base, &v) {
            Err(BwError::ExpDomain { min_eigenvalue }) => assert!((min_eigenvalue + 1.0).abs() < 1e-14),
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn tangent_norm_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = random_spd(&mut rng, 3);
        assert_eq!(tangent_norm(&TangentMap::zeros(3), &s).unwrap(), 0.0);
        let id = TangentMap::new(DMatrix::identity(3, 3)).unwrap();
        assert!((tangent_norm(&id, &s).unwrap() - s.trace().sqrt()).abs() < 1e-14);
        assert!(tangent_norm(&TangentMap::zeros(2), &s).is_err());
    }

    #[test]
    fn geodesic_cases() {
        let a = SpdMatrix::from_diagonal(&[1.0]).unwrap();
        let b = SpdMatrix::from_diagonal(&[9.0]).unwrap();
        let mid = geodesic_point(&a, &b, 0.5).unwrap();
        assert!((mid.matrix()[(0, 0)] - 4.0).abs() < 1e-14);
        assert!(geodesic_point(&a, &b, 1.5).is_err());
        assert!(geodesic_point(&a, &b, -0.1).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let a = random_spd(&mut rng, 4);
            let b = random_spd(&mut rng, 4);
            assert!(rel(geodesic_point(&a, &b, 0.0).unwrap().matrix(), a.matrix()) <= 1e-9);
            assert!(rel(geodesic_point(&a, &b, 1.0).unwrap().matrix(), b.matrix()) <= 1e-9);
            let full = bures_distance_sq(&a, &b).unwrap().sqrt();
            for t in [0.25, 0.5, 0.8] {
                let p = geodesic_point(&a, &b, t).unwrap();
                let part = bures_distance_sq(&a, &p).unwrap().sqrt();
                assert!((part - t * full).abs() <= 1e-7 * full);
            }
        }
    }

    #[test]
    fn generalized_geodesic_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let base = random_spd(&mut rng, 4);
            let a = random_spd(&mut rng, 4);
            let b = random_spd(&mut rng, 4);
            for t in [0.0, 0.3, 0.7, 1.0] {
                let g = generalized_geodesic_point(&a, &a, &b, t).unwrap();
                let h = geodesic_point(&a, &b, t).unwrap();
                assert!(rel(g.matrix(), h.matrix()) <= 1e-9);
                let flat = generalized_geodesic_point(&base, &a, &a, t).unwrap();
                assert!(rel(flat.matrix(), a.matrix()) <= 1e-9);
            }
            let g0 = generalized_geodesic_point(&base, &a, &b, 0.0).unwrap();
            let g1 = generalized_geodesic_point(&base, &a, &b, 1.0).unwrap();
            assert!(rel(g0.matrix(), a.matrix()) <= 1e-8);
            assert!(rel(g1.matrix(), b.matrix()) <= 1e-8);
        }
        let i = SpdMatrix::identity(2);
        assert!(generalized_geodesic_point(&i, &i, &i, 2.0).is_err());
    }

    #[test]
    fn clip_cases() {
        let a = SpdMatrix::from_diagonal(&[2.0, 0.5]).unwrap();
        let c = clip_eigenvalues(&a, 1.0).unwrap();
        assert!(rel(c.matrix(), SpdMatrix::from_diagonal(&[1.0, 0.5]).unwrap().matrix()) < 1e-15);
        let unchanged = clip_eigenvalues(&a, 3.0).unwrap();
        assert!(rel(unchanged.matrix(), a.matrix()) < 1e-15);
        assert!(clip_eigenvalues(&a, 0.0).is_err());
    }

    #[test]
    fn projection_cases() {
        let y = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 3.0]));
        let p = project_spectrum(&y, 1.0, 2.0).unwrap();
        assert!(rel(p.matrix(), SpdMatrix::from_diagonal(&[1.0, 2.0]).unwrap().matrix()) < 1e-15);
        let inside = DMatrix::from_row_slice(2, 2, &[1.5, 0.1, 0.1, 1.5]);
        assert!(rel(project_spectrum(&inside, 1.0, 2.0).unwrap().matrix(), &inside) < 1e-14);
        assert!(project_spectrum(&y, 2.0, 1.0).is_err());
    }

    #[test]
    fn projection_beats_random_candidates() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (alpha, beta) = (0.5, 2.0);
        for _ in 0..5 {
            let g = DMatrix::from_fn(4, 4, |_, _| 3.0 * (rng.random::<f64>() - 0.5));
            let y = symmetrize(&g);
            let p = project_spectrum(&y, alpha, beta).unwrap();
            let best = (p.matrix() - &y).norm();
            for _ in 0..100 {
                let q = crate::datasets::haar_orthogonal(4, &mut rng);
                let vals = DVector::from_fn(4, |_, _| rng.random_range(alpha..=beta));
                let cand = reconstruct(&vals, &q);
                assert!(best <= (cand - &y).norm() + 1e-12);
            }
            let again = project_spectrum(p.matrix(), alpha, beta).unwrap();
            assert!(rel(again.matrix(), p.matrix()) < 1e-13);
        }
    }

    #[test]
    fn kl_cases() {
        assert!(kl_to_standard(&SpdMatrix::identity(3)).abs() < 1e-15);
        let two = SpdMatrix::scaled_identity(2, 2.0).unwrap();
        assert!((kl_to_standard(&two) - (1.0 - 2f64.ln())).abs() < 1e-14);
        let diag = [0.3, 1.7, 4.0];
        let expected: f64 = diag.iter().map(|s: &f64| 0.5 * (s - s.ln() - 1.0)).sum();
        assert!((kl_to_standard(&SpdMatrix::from_diagonal(&diag).unwrap()) - expected).abs() < 1e-14);
    }
}
