//! Importance-weighted loss-vector estimators and the cumulative state they
//! feed.
//!
//! Both estimators whiten the oracle's context, `Sigma^{-1} x~`, and scale it
//! by the oracle loss over the observation probability (plus the implicit
//! exploration rate for the IX variant). Unobserved actions get a zero
//! vector.

use nalgebra::DMatrix;

use crate::environment::{Context, OracleContext};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatedLossVector {
    pub action: usize,
    pub vector: Vec<f64>,
}

impl EstimatedLossVector {
    pub fn zero(action: usize, dim: usize) -> Self {
        Self {
            action,
            vector: vec![0.0; dim],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.vector.iter().all(|&v| v == 0.0)
    }
}

/// `Sigma^{-1} x~`, shared by every action's estimate within a round.
#[derive(Debug, Clone, PartialEq)]
pub struct WhitenedContext(Vec<f64>);

impl WhitenedContext {
    pub fn new(sigma_inv: &DMatrix<f64>, oracle_context: &OracleContext) -> Result<Self> {
        let x = oracle_context.as_slice();
        if sigma_inv.nrows() != x.len() || sigma_inv.ncols() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: sigma_inv.nrows(),
                actual: x.len(),
            });
        }
        Ok(Self(
            (0..x.len())
                .map(|i| x.iter().enumerate().map(|(j, v)| sigma_inv[(i, j)] * v).sum())
                .collect(),
        ))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    fn scaled(&self, action: usize, factor: f64) -> EstimatedLossVector {
        EstimatedLossVector {
            action,
            vector: self.0.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Uniform-exploration estimator with a precomputed whitened context.
pub fn estimate_u_whitened(
    action: usize,
    observed: bool,
    q: f64,
    whitened: &WhitenedContext,
    oracle_loss: f64,
) -> Result<EstimatedLossVector> {
    if !(q > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "observation probability {q} for action {action} must be positive"
        )));
    }
    if !observed {
        return Ok(EstimatedLossVector::zero(action, whitened.0.len()));
    }
    Ok(whitened.scaled(action, oracle_loss / q))
}

/// `1{observed} / q * Sigma^{-1} x~ * l~`.
pub fn estimate_u(
    action: usize,
    observed: bool,
    q: f64,
    sigma_inv: &DMatrix<f64>,
    oracle_context: &OracleContext,
    oracle_loss: f64,
) -> Result<EstimatedLossVector> {
    let whitened = WhitenedContext::new(sigma_inv, oracle_context)?;
    estimate_u_whitened(action, observed, q, &whitened, oracle_loss)
}

/// Implicit-exploration estimator with a precomputed whitened context.
pub fn estimate_ix_whitened(
    action: usize,
    observed: bool,
    q: f64,
    beta: f64,
    whitened: &WhitenedContext,
    oracle_loss: f64,
) -> Result<EstimatedLossVector> {
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "implicit exploration rate {beta} must be positive"
        )));
    }
    if !(q >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "observation probability {q} for action {action} must be nonnegative"
        )));
    }
    if !observed {
        return Ok(EstimatedLossVector::zero(action, whitened.0.len()));
    }
    Ok(whitened.scaled(action, oracle_loss / (q + beta)))
}

/// `1{observed} / (q + beta) * Sigma^{-1} x~ * l~`.
pub fn estimate_ix(
    action: usize,
    observed: bool,
    q: f64,
    beta: f64,
    sigma_inv: &DMatrix<f64>,
    oracle_context: &OracleContext,
    oracle_loss: f64,
) -> Result<EstimatedLossVector> {
    let whitened = WhitenedContext::new(sigma_inv, oracle_context)?;
    estimate_ix_whitened(action, observed, q, beta, &whitened, oracle_loss)
}

/// Running sums of estimated loss vectors, one row per action. `round` is
/// the round whose estimates are accepted next.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeEstimate {
    num_actions: usize,
    dim: usize,
    rows: Vec<f64>,
    round: usize,
}

impl CumulativeEstimate {
    pub fn new(num_actions: usize, dim: usize) -> Self {
        Self {
            num_actions,
            dim,
            rows: vec![0.0; num_actions * dim],
            round: 1,
        }
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn row(&self, action: usize) -> &[f64] {
        &self.rows[action * self.dim..(action + 1) * self.dim]
    }

    /// `<x, sum of past estimates for action>`.
    pub fn score(&self, action: usize, context: &Context) -> f64 {
        context.dot(self.row(action))
    }

    pub fn accumulate(&mut self, round: usize, estimates: &[EstimatedLossVector]) -> Result<()> {
        if round != self.round {
            return Err(Error::Protocol(format!(
                "estimates for round {round} offered to state expecting round {}",
                self.round
            )));
        }
        if estimates.len() != self.num_actions {
            return Err(Error::DimensionMismatch {
                expected: self.num_actions,
                actual: estimates.len(),
            });
        }
        for (i, est) in estimates.iter().enumerate() {
            if est.action != i {
                return Err(Error::Protocol(format!("estimate {i} is labelled action {}", est.action)));
            }
            if est.vector.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    actual: est.vector.len(),
                });
            }
        }
        for est in estimates {
            let start = est.action * self.dim;
            for (acc, v) in self.rows[start..start + self.dim].iter_mut().zip(&est.vector) {
                *acc += v;
            }
        }
        self.round += 1;
        Ok(())
    }
}
