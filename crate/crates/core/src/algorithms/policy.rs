use serde::{Deserialize, Serialize};

use crate::environment::Context;
use crate::error::{Error, Result};
use crate::estimators::CumulativeEstimate;

use super::schedule::UParams;

/// Distribution over actions played in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PolicyVector(Vec<f64>);

impl PolicyVector {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        crate::graph::check_simplex(&probabilities)?;
        Ok(Self(probabilities))
    }

    pub fn uniform(num_actions: usize) -> Self {
        Self(vec![1.0 / num_actions as f64; num_actions])
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Inverse-CDF sampling with a single uniform draw `u` in `[0, 1)`.
    /// Ties in the cumulative sums resolve toward the lower index.
    pub fn sample_with(&self, u: f64) -> usize {
        let mut cumulative = 0.0;
        for (i, &p) in self.0.iter().enumerate() {
            cumulative += p;
            if u < cumulative {
                return i;
            }
        }
        // rounding left u above the final partial sum
        self.0.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

/// Softmax of `scores` with max subtraction.
pub fn softmax(scores: &[f64]) -> Result<Vec<f64>> {
    if let Some(action) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFiniteScore { action });
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

fn scores(state: &CumulativeEstimate, context: &Context, eta: f64) -> Result<Vec<f64>> {
    if context.dim() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            actual: context.dim(),
        });
    }
    Ok((0..state.num_actions())
        .map(|i| -eta * state.score(i, context))
        .collect())
}

/// Exponential weights mixed with uniform exploration:
/// `(1 - gamma) * softmax(-eta <x, row_i>) + gamma / K`.
pub fn policy_u(state: &CumulativeEstimate, context: &Context, params: &UParams) -> Result<PolicyVector> {
    let k = state.num_actions() as f64;
    let weights = softmax(&scores(state, context, params.eta)?)?;
    Ok(PolicyVector(
        weights
            .into_iter()
            .map(|w| (1.0 - params.gamma) * w + params.gamma / k)
            .collect(),
    ))
}

/// Pure exponential weights, `softmax(-eta_t <x, row_i>)`.
pub fn policy_ix(state: &CumulativeEstimate, context: &Context, eta: f64) -> Result<PolicyVector> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter(format!("learning rate {eta} must be positive")));
    }
    Ok(PolicyVector(softmax(&scores(state, context, eta)?)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::EstimatedLossVector;
    use proptest::prelude::*;

    fn state_with_rows(rows: &[Vec<f64>]) -> CumulativeEstimate {
        let d = rows[0].len();
        let mut s = CumulativeEstimate::new(rows.len(), d);
        let batch: Vec<_> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| EstimatedLossVector {
                action: i,
                vector: r.clone(),
            })
            .collect();
        s.accumulate(1, &batch).unwrap();
        s
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn policy_u_uniform_at_start() {
        let s = CumulativeEstimate::new(5, 3);
        let params = UParams { eta: 0.3, gamma: 0.1, directed: false };
        let pi = policy_u(&s, &Context(vec![0.2, 0.5, 0.1]), &params).unwrap();
        assert!(close(pi.probabilities(), &[0.2; 5], 1e-15));
    }

    #[test]
    fn policy_u_equal_rows_uniform() {
        let s = state_with_rows(&[vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0]]);
        for gamma in [0.0, 0.3, 0.9] {
            let params = UParams { eta: 0.7, gamma, directed: false };
            let pi = policy_u(&s, &Context(vec![0.4, 0.9]), &params).unwrap();
            assert!(close(pi.probabilities(), &[1.0 / 3.0; 3], 1e-15));
        }
    }

    #[test]
    fn policy_u_two_actions() {
        let eta = 0.5;
        let s = state_with_rows(&[vec![0.0], vec![3f64.ln() / eta]]);
        let params = UParams { eta, gamma: 0.0, directed: false };
        let pi = policy_u(&s, &Context(vec![1.0]), &params).unwrap();
        assert!(close(pi.probabilities(), &[0.75, 0.25], 1e-15));
    }

    #[test]
    fn policy_ix_examples() {
        let s = CumulativeEstimate::new(4, 2);
        let pi = policy_ix(&s, &Context(vec![1.0, 1.0]), 0.2).unwrap();
        assert!(close(pi.probabilities(), &[0.25; 4], 1e-15));

        let eta = 2.0;
        let s = state_with_rows(&[vec![0.0], vec![2f64.ln() / eta], vec![4f64.ln() / eta]]);
        let pi = policy_ix(&s, &Context(vec![1.0]), eta).unwrap();
        assert!(close(pi.probabilities(), &[4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0], 1e-15));
    }

    #[test]
    fn policy_ix_rejects_bad_eta() {
        let s = CumulativeEstimate::new(2, 1);
        assert!(policy_ix(&s, &Context(vec![1.0]), 0.0).is_err());
    }

    #[test]
    fn non_finite_scores_rejected() {
        let s = state_with_rows(&[vec![f64::INFINITY], vec![0.0]]);
        let err = policy_ix(&s, &Context(vec![1.0]), 1.0).unwrap_err();
        assert!(matches!(err, Error::NonFiniteScore { action: 0 }));
    }

    #[test]
    fn huge_scores_stay_finite() {
        let s = state_with_rows(&[vec![1e6], vec![-1e6]]);
        let pi = policy_ix(&s, &Context(vec![1.0]), 1.0).unwrap();
        assert_eq!(pi.probabilities(), &[0.0, 1.0]);
    }

    #[test]
    fn inverse_cdf_sampling() {
        let pi = PolicyVector::new(vec![0.25, 0.0, 0.75]).unwrap();
        assert_eq!(pi.sample_with(0.0), 0);
        assert_eq!(pi.sample_with(0.249), 0);
        assert_eq!(pi.sample_with(0.25), 2);
        assert_eq!(pi.sample_with(0.999_999), 2);
        let tie = PolicyVector::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(tie.sample_with(0.4999), 0);
    }

    proptest! {
        #[test]
        fn policy_u_floor_and_simplex(
            rows in prop::collection::vec(prop::collection::vec(-50.0..50.0f64, 3), 2..8),
            x in prop::collection::vec(0.0..1.0f64, 3),
            eta in 0.001..1.0f64,
            gamma in 0.0..1.0f64,
        ) {
            let s = state_with_rows(&rows);
            let k = rows.len() as f64;
            let pi = policy_u(&s, &Context(x), &UParams { eta, gamma, directed: false }).unwrap();
            let total: f64 = pi.probabilities().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-10);
            for &p in pi.probabilities() {
                prop_assert!(p >= gamma / k - 1e-15);
            }
        }

        #[test]
        fn shift_invariance(
            rows in prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 2), 2..6),
            shift in prop::collection::vec(-5.0..5.0f64, 2),
            x in prop::collection::vec(0.0..1.0f64, 2),
            eta in 0.01..2.0f64,
        ) {
            // adding the same vector to every row shifts every score by <x, shift>
            let shifted: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| r.iter().zip(&shift).map(|(a, b)| a + b).collect())
                .collect();
            let a = state_with_rows(&rows);
            let b = state_with_rows(&shifted);
            let ctx = Context(x);
            let params = UParams { eta, gamma: 0.2, directed: false };
            prop_assert!(close(
                policy_ix(&a, &ctx, eta).unwrap().probabilities(),
                policy_ix(&b, &ctx, eta).unwrap().probabilities(),
                1e-12
            ));
            prop_assert!(close(
                policy_u(&a, &ctx, &params).unwrap().probabilities(),
                policy_u(&b, &ctx, &params).unwrap().probabilities(),
                1e-12
            ));
        }
    }
}
