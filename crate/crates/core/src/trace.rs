use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::geometry::{bures_distance_sq, SpdMatrix};
use crate::error::Result;

/// One row of a convergence trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub objective: f64,
    /// Squared gradient norm: `‖∇F‖²_Σ` for Riemannian solvers, `‖DF‖²_F`
    /// for the Euclidean baselines.
    pub grad_norm_sq: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub w2sq_to_ref: Option<f64>,
    /// Unsmoothed objective, recorded by the median solver only.
    pub unsmoothed_objective: Option<f64>,
    /// Nanoseconds since the previous record (since solver start for the
    /// first one).
    pub wall_ns: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    BudgetExhausted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub records: Vec<TraceRecord>,
    pub iterations: usize,
    pub termination: Termination,
}

impl ConvergenceTrace {
    pub fn objectives(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.objective)
    }

    pub fn last(&self) -> &TraceRecord {
        self.records.last().expect("trace always holds the initial point")
    }

    /// Largest increase of the objective between consecutive records.
    pub fn max_objective_increase(&self) -> f64 {
        self.records
            .windows(2)
            .map(|w| w[1].objective - w[0].objective)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// The trace with wall-clock fields zeroed, for determinism comparisons.
    pub fn without_timing(&self) -> ConvergenceTrace {
        let mut t = self.clone();
        for r in &mut t.records {
            r.wall_ns = 0;
        }
        t
    }
}

/// Accumulates records while a solver runs.
pub(crate) struct TraceBuilder<'a> {
    records: Vec<TraceRecord>,
    reference: Option<&'a SpdMatrix>,
    clock: Instant,
}

impl<'a> TraceBuilder<'a> {
    pub(crate) fn new(reference: Option<&'a SpdMatrix>) -> Self {
        Self {
            records: Vec::new(),
            reference,
            clock: Instant::now(),
        }
    }

    pub(crate) fn record(
        &mut self,
        iter: usize,
        point: &SpdMatrix,
        objective: f64,
        grad_norm_sq: f64,
        unsmoothed_objective: Option<f64>,
    ) -> Result<()> {
        let w2sq_to_ref = self
            .reference
            .map(|r| bures_distance_sq(point, r))
            .transpose()?;
        let wall_ns = self.clock.elapsed().as_nanos() as u64;
        self.clock = Instant::now();
        self.records.push(TraceRecord {
            iter,
            objective,
            grad_norm_sq,
            lambda_min: point.lambda_min(),
            lambda_max: point.lambda_max(),
            w2sq_to_ref,
            unsmoothed_objective,
            wall_ns,
        });
        Ok(())
    }

    pub(crate) fn finish(self, iterations: usize, converged: bool) -> ConvergenceTrace {
        ConvergenceTrace {
            records: self.records,
            iterations,
            termination: if converged {
                Termination::Converged
            } else {
                Termination::BudgetExhausted
            },
        }
    }
}
