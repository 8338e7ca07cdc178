use nalgebra::DMatrix;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, BwError>;

#[derive(Debug, Error)]
pub enum BwError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("matrix is not positive definite (eigenvalues span [{min_eigenvalue:e}, {max_eigenvalue:e}])")]
    NotPositiveDefinite {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },

    #[error("numerical failure in {context}")]
    NumericalFailure {
        context: &'static str,
        matrix: Box<DMatrix<f64>>,
    },

    #[error("I + v is not positive definite (most negative eigenvalue {min_eigenvalue:e}); outside the exponential map domain")]
    ExpDomain { min_eigenvalue: f64 },

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("distribution has no atoms")]
    EmptyDistribution,

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("atom {atom} has spectrum [{lambda_min:e}, {lambda_max:e}] outside the box [{lower:e}, {upper:e}]")]
    OutOfBox {
        atom: usize,
        lambda_min: f64,
        lambda_max: f64,
        lower: f64,
        upper: f64,
    },

    #[error("structural violation: {0}")]
    Structure(String),

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<BwError>,
    },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl BwError {
    pub(crate) fn at(self, iteration: usize) -> Self {
        BwError::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            BwError::NumericalFailure { .. }
            | BwError::NotPositiveDefinite { .. }
            | BwError::ExpDomain { .. }
            | BwError::NonFinite
            | BwError::Structure(_) => true,
            BwError::AtIteration { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(BwError::DimensionMismatch { expected, found });
    }
    Ok(())
}
