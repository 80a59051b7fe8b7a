//! Parameter schedules.
//!
//! The uniform-exploration agent uses a fixed learning rate tuned from the
//! horizon and per-round independence bounds, with the exploration rate
//! coupled as `gamma = eta * K * sigma^2 / lambda_min`. The implicit
//! exploration agent re-tunes both rates every round from the running sum
//! of its graph-dependent `Q` terms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constants of a problem instance that enter the schedules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    pub num_actions: usize,
    pub dim: usize,
    /// Bound on `||x||` over the context support.
    pub norm_bound: f64,
    /// Smallest eigenvalue of `E[x x^T]`.
    pub smallest_eigenvalue: f64,
    pub horizon: usize,
}

impl ProblemConstants {
    /// `K sigma^2 / lambda_min`.
    pub fn exploration_coupling(&self) -> f64 {
        self.num_actions as f64 * self.norm_bound.powi(2) / self.smallest_eigenvalue
    }

    fn validate(&self) -> Result<()> {
        if self.num_actions < 2 {
            return Err(Error::Schedule(format!(
                "tuned schedules need at least two actions (got {})",
                self.num_actions
            )));
        }
        if self.dim == 0 || self.horizon == 0 {
            return Err(Error::Schedule("dimension and horizon must be positive".into()));
        }
        if !(self.norm_bound > 0.0) || !(self.smallest_eigenvalue > 0.0) {
            return Err(Error::Schedule(format!(
                "norm bound {} and smallest eigenvalue {} must be positive",
                self.norm_bound, self.smallest_eigenvalue
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UParams {
    pub eta: f64,
    pub gamma: f64,
    pub directed: bool,
}

impl UParams {
    pub fn new(eta: f64, gamma: f64, directed: bool) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::InvalidParameter(format!("learning rate {eta} outside (0, 1)")));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidParameter(format!("exploration rate {gamma} outside [0, 1)")));
        }
        Ok(Self { eta, gamma, directed })
    }

    /// Learning rate with the coupled exploration rate.
    pub fn coupled(eta: f64, constants: &ProblemConstants, directed: bool) -> Result<Self> {
        Self::new(eta, eta * constants.exploration_coupling(), directed)
    }

    /// Whether `gamma` is at least the coupled value, which keeps every
    /// scaled estimate `|eta <x, theta_hat>|` at most one.
    pub fn is_coupled(&self, constants: &ProblemConstants) -> bool {
        self.gamma >= self.eta * constants.exploration_coupling() * (1.0 - 1e-12)
    }
}

fn check_alpha_bounds(alpha_bounds: &[f64], constants: &ProblemConstants) -> Result<f64> {
    if alpha_bounds.len() != constants.horizon {
        return Err(Error::Schedule(format!(
            "{} independence bounds for a horizon of {}",
            alpha_bounds.len(),
            constants.horizon
        )));
    }
    if let Some((t, a)) = alpha_bounds
        .iter()
        .enumerate()
        .find(|(_, &a)| !(a >= 1.0) || a > constants.num_actions as f64)
    {
        return Err(Error::Schedule(format!(
            "independence bound {a} at round {} outside [1, {}]",
            t + 1,
            constants.num_actions
        )));
    }
    Ok(alpha_bounds.iter().sum())
}

/// Learning rate for undirected graphs,
/// `eta = sqrt(ln K / (2 K sigma^2 T / lambda_min + d * sum alpha_t))`.
pub fn schedule_u_undirected(constants: &ProblemConstants, alpha_bounds: &[f64]) -> Result<UParams> {
    constants.validate()?;
    let alpha_sum = check_alpha_bounds(alpha_bounds, constants)?;
    let c = constants.exploration_coupling();
    let t = constants.horizon as f64;
    let d = constants.dim as f64;
    let ln_k = (constants.num_actions as f64).ln();
    let eta = (ln_k / (2.0 * c * t + d * alpha_sum)).sqrt();
    let gamma = eta * c;
    if gamma >= 1.0 {
        // gamma < 1  <=>  T > c^2 ln K / (2c + d * mean alpha)
        let mean_alpha = alpha_sum / t;
        let min_horizon = (c * c * ln_k / (2.0 * c + d * mean_alpha)).floor() as usize + 1;
        return Err(Error::Schedule(format!(
            "exploration rate {gamma:.4} >= 1; horizon must be at least {min_horizon}"
        )));
    }
    UParams::new(eta, gamma, false)
}

/// Learning rate for directed graphs,
/// `eta = (2 K sigma^2 T / lambda_min + 4 d * sum alpha_t)^(-1/2)`, valid only
/// when `ln(1 / gamma) >= 1`.
pub fn schedule_u_directed(constants: &ProblemConstants, alpha_bounds: &[f64]) -> Result<UParams> {
    constants.validate()?;
    let alpha_sum = check_alpha_bounds(alpha_bounds, constants)?;
    let c = constants.exploration_coupling();
    let t = constants.horizon as f64;
    let d = constants.dim as f64;
    let eta = (2.0 * c * t + 4.0 * d * alpha_sum).powf(-0.5);
    let gamma = eta * c;
    if (1.0 / gamma).ln() < 1.0 {
        return Err(Error::Schedule(format!(
            "directed tuning requires ln(1/gamma) >= 1 but gamma = {gamma:.4}; use a longer horizon"
        )));
    }
    UParams::new(eta, gamma, true)
}

/// `4 alpha ln(4 K^2 / (alpha gamma))`.
pub fn q_bound_u_directed(alpha: f64, num_actions: usize, gamma: f64) -> f64 {
    let k = num_actions as f64;
    4.0 * alpha * (4.0 * k * k / (alpha * gamma)).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IxRates {
    pub eta: f64,
    pub beta: f64,
}

/// Rates for round `round` given `q_running_sum = sum_{s < round} Q_s`:
/// `beta = sqrt(ln K / (K + sum))`, `eta = sqrt(ln K / (d K + d sum))`.
pub fn schedule_ix(round: usize, num_actions: usize, dim: usize, q_running_sum: f64) -> Result<IxRates> {
    if round == 0 {
        return Err(Error::Schedule("rounds are numbered from 1".into()));
    }
    if num_actions < 2 || dim == 0 {
        return Err(Error::Schedule(format!(
            "implicit exploration needs at least two actions and one dimension (got K={num_actions}, d={dim})"
        )));
    }
    if !(q_running_sum >= 0.0) {
        return Err(Error::Schedule(format!("running Q sum {q_running_sum} must be nonnegative")));
    }
    let k = num_actions as f64;
    let d = dim as f64;
    let ln_k = k.ln();
    Ok(IxRates {
        beta: (ln_k / (k + q_running_sum)).sqrt(),
        eta: (ln_k / (d * k + d * q_running_sum)).sqrt(),
    })
}

/// `2 alpha ln(1 + (ceil(K^2 / beta) + K) / alpha) + 2`.
pub fn q_value_ix(alpha: f64, num_actions: usize, beta: f64) -> f64 {
    let k = num_actions as f64;
    2.0 * alpha * (1.0 + ((k * k / beta).ceil() + k) / alpha).ln() + 2.0
}
