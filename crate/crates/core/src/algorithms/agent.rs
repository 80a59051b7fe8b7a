use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::environment::{Context, ContextDistribution, OracleDraw};
use crate::error::{Error, Result};
use crate::estimators::{estimate_ix_whitened, estimate_u_whitened, CumulativeEstimate, EstimatedLossVector, WhitenedContext};
use crate::graph::{FeedbackGraph, ObservationSet};

use super::policy::{policy_ix, policy_u, PolicyVector};
use super::schedule::{q_value_ix, schedule_ix, IxRates, ProblemConstants, UParams};

/// The four agent variants. The starred variants discard side observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "exp3-lgc-u")]
    Exp3LgcU,
    #[serde(rename = "exp3-lgc-ix")]
    Exp3LgcIx,
    #[serde(rename = "exp3-lgc-u-star")]
    Exp3LgcUStar,
    #[serde(rename = "exp3-lgc-ix-star")]
    Exp3LgcIxStar,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Exp3LgcU,
        Algorithm::Exp3LgcUStar,
        Algorithm::Exp3LgcIx,
        Algorithm::Exp3LgcIxStar,
    ];

    pub fn selector(self) -> &'static str {
        match self {
            Algorithm::Exp3LgcU => "exp3-lgc-u",
            Algorithm::Exp3LgcIx => "exp3-lgc-ix",
            Algorithm::Exp3LgcUStar => "exp3-lgc-u-star",
            Algorithm::Exp3LgcIxStar => "exp3-lgc-ix-star",
        }
    }

    pub fn uses_side_observations(self) -> bool {
        matches!(self, Algorithm::Exp3LgcU | Algorithm::Exp3LgcIx)
    }

    pub fn is_implicit_exploration(self) -> bool {
        matches!(self, Algorithm::Exp3LgcIx | Algorithm::Exp3LgcIxStar)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.selector())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.selector() == s)
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown algorithm `{s}`; expected one of {}",
                    Algorithm::ALL.map(|a| a.selector()).join(", ")
                ))
            })
    }
}

/// How per-round independence numbers enter the schedules.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum AlphaMode {
    /// Independence number of the disclosed graph (greedy bound above 25 actions).
    #[default]
    Exact,
    /// A fixed bound used on every round.
    Fixed(f64),
}

impl Serialize for AlphaMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            AlphaMode::Exact => s.serialize_str("exact"),
            AlphaMode::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for AlphaMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Word(String),
            Value(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Word(w) if w == "exact" => Ok(AlphaMode::Exact),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "alpha_bounds must be \"exact\" or a number, got \"{w}\""
            ))),
            Raw::Value(v) if v >= 1.0 => Ok(AlphaMode::Fixed(v)),
            Raw::Value(v) => Err(serde::de::Error::custom(format!("alpha_bounds value {v} must be at least 1"))),
        }
    }
}

/// Losses revealed to the agent after it acts: the observation set of the
/// played action and `<x_t, theta_i>` for each member.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub set: ObservationSet,
    pub losses: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
enum UpdateRule {
    Uniform {
        params: UParams,
        /// `K sigma^2 / (lambda_min gamma)` when the exploration rate is coupled.
        magnitude_bound: Option<f64>,
    },
    Implicit {
        alpha_mode: AlphaMode,
        q_running_sum: f64,
        rates: IxRates,
    },
}

#[derive(Debug, Clone)]
struct Pending {
    context: Context,
    policy: PolicyVector,
    action: usize,
}

/// What an update computed, for the round record.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateSummary {
    pub q: Vec<f64>,
    pub estimates: Vec<EstimatedLossVector>,
}

/// One agent instance for one trial. Alternates [`Agent::step`] and
/// [`Agent::update`]; the feedback graph is only seen at update time.
#[derive(Debug, Clone)]
pub struct Agent {
    algorithm: Algorithm,
    rule: UpdateRule,
    state: CumulativeEstimate,
    sigma_inv: Arc<DMatrix<f64>>,
    pending: Option<Pending>,
    alpha_cache: Option<(u64, usize)>,
}

impl Agent {
    pub fn uniform(
        algorithm: Algorithm,
        params: UParams,
        constants: &ProblemConstants,
        dist: &ContextDistribution,
    ) -> Result<Self> {
        if algorithm.is_implicit_exploration() {
            return Err(Error::InvalidParameter(format!("{algorithm} is not a uniform-exploration agent")));
        }
        let magnitude_bound = (params.is_coupled(constants) && params.gamma > 0.0)
            .then(|| constants.exploration_coupling() / params.gamma);
        Ok(Self::with_rule(
            algorithm,
            UpdateRule::Uniform { params, magnitude_bound },
            constants,
            dist,
        ))
    }

    pub fn implicit(
        algorithm: Algorithm,
        alpha_mode: AlphaMode,
        constants: &ProblemConstants,
        dist: &ContextDistribution,
    ) -> Result<Self> {
        if !algorithm.is_implicit_exploration() {
            return Err(Error::InvalidParameter(format!("{algorithm} is not an implicit-exploration agent")));
        }
        if let AlphaMode::Fixed(v) = alpha_mode {
            if !(1.0..=constants.num_actions as f64).contains(&v) {
                return Err(Error::InvalidParameter(format!(
                    "fixed independence bound {v} outside [1, {}]",
                    constants.num_actions
                )));
            }
        }
        let rates = schedule_ix(1, constants.num_actions, constants.dim, 0.0)?;
        Ok(Self::with_rule(
            algorithm,
            UpdateRule::Implicit {
                alpha_mode,
                q_running_sum: 0.0,
                rates,
            },
            constants,
            dist,
        ))
    }

    fn with_rule(algorithm: Algorithm, rule: UpdateRule, constants: &ProblemConstants, dist: &ContextDistribution) -> Self {
        Self {
            algorithm,
            rule,
            state: CumulativeEstimate::new(constants.num_actions, constants.dim),
            sigma_inv: Arc::new(dist.second_moment_inverse().clone()),
            pending: None,
            alpha_cache: None,
        }
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn state(&self) -> &CumulativeEstimate {
        &self.state
    }

    /// Round the next step belongs to.
    pub fn round(&self) -> usize {
        self.state.round()
    }

    pub fn uniform_params(&self) -> Option<UParams> {
        match self.rule {
            UpdateRule::Uniform { params, .. } => Some(params),
            UpdateRule::Implicit { .. } => None,
        }
    }

    /// Current `(eta_t, beta_t)` for implicit exploration agents.
    pub fn ix_rates(&self) -> Option<IxRates> {
        match self.rule {
            UpdateRule::Implicit { rates, .. } => Some(rates),
            UpdateRule::Uniform { .. } => None,
        }
    }

    pub fn q_running_sum(&self) -> Option<f64> {
        match self.rule {
            UpdateRule::Implicit { q_running_sum, .. } => Some(q_running_sum),
            UpdateRule::Uniform { .. } => None,
        }
    }

    /// Policy for `context` given the current state. Pure.
    pub fn policy(&self, context: &Context) -> Result<PolicyVector> {
        match &self.rule {
            UpdateRule::Uniform { params, .. } => policy_u(&self.state, context, params),
            UpdateRule::Implicit { rates, .. } => policy_ix(&self.state, context, rates.eta),
        }
    }

    /// Draws the round's action from the policy with one uniform variate.
    pub fn step<R: Rng + ?Sized>(&mut self, context: &Context, rng: &mut R) -> Result<(usize, PolicyVector)> {
        if self.pending.is_some() {
            return Err(Error::Protocol("step called twice without an update".into()));
        }
        let policy = self.policy(context)?;
        let action = policy.sample_with(rng.random::<f64>());
        self.pending = Some(Pending {
            context: context.clone(),
            policy: policy.clone(),
            action,
        });
        Ok((action, policy))
    }

    /// Installs a step taken elsewhere, for replaying recorded traces.
    pub(crate) fn replay_step(&mut self, context: Context, policy: PolicyVector, action: usize) -> Result<()> {
        if self.pending.is_some() {
            return Err(Error::Protocol("step called twice without an update".into()));
        }
        if action >= self.state.num_actions() || policy.len() != self.state.num_actions() {
            return Err(Error::ActionOutOfRange {
                index: action,
                num_actions: self.state.num_actions(),
            });
        }
        self.pending = Some(Pending { context, policy, action });
        Ok(())
    }

    fn independence(&mut self, graph: &FeedbackGraph) -> usize {
        let key = graph.fingerprint();
        match self.alpha_cache {
            Some((k, alpha)) if k == key => alpha,
            _ => {
                let alpha = graph.independence_number();
                self.alpha_cache = Some((key, alpha));
                alpha
            }
        }
    }

    /// Builds every action's estimate from the disclosed graph and the
    /// oracle's extra observations, using the policy drawn at step time.
    pub fn update(&mut self, graph: &FeedbackGraph, observation: &Observation, oracle: &OracleDraw) -> Result<UpdateSummary> {
        let pending = self
            .pending
            .take()
            .ok_or_else(|| Error::Protocol("update called before step".into()))?;
        let k = self.state.num_actions();
        if graph.num_actions() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                actual: graph.num_actions(),
            });
        }
        let expected_set = graph.observation_set(pending.action)?;
        if observation.set != expected_set {
            return Err(Error::Protocol(format!(
                "observation set {:?} does not match the disclosed graph for action {}",
                observation.set.members, pending.action
            )));
        }
        if self.algorithm.is_implicit_exploration() {
            let negative = observation.losses.iter().chain(&oracle.losses).find(|(_, l)| *l < 0.0);
            if let Some(&(action, loss)) = negative {
                return Err(Error::NegativeLoss { action, loss });
            }
        }

        let q = graph.observation_probabilities(pending.policy.probabilities())?;
        let whitened = WhitenedContext::new(&self.sigma_inv, &oracle.context)?;
        let mut estimates = Vec::with_capacity(k);
        for i in 0..k {
            let observed = expected_set.contains(i);
            let oracle_loss = match (observed, oracle.loss(i)) {
                (true, Some(l)) => l,
                (true, None) => {
                    return Err(Error::Protocol(format!("oracle did not report a loss for observed action {i}")));
                }
                (false, _) => 0.0,
            };
            let estimate = match &self.rule {
                UpdateRule::Uniform { params, magnitude_bound } => {
                    let est = estimate_u_whitened(i, observed, q[i], &whitened, oracle_loss)?;
                    if let Some(bound) = magnitude_bound {
                        debug_assert!(
                            params.eta * pending.context.dot(&est.vector).abs() <= params.eta * bound * (1.0 + 1e-9),
                            "estimate magnitude exceeds K sigma^2 / (lambda_min gamma)"
                        );
                    }
                    est
                }
                UpdateRule::Implicit { rates, .. } => {
                    estimate_ix_whitened(i, observed, q[i], rates.beta, &whitened, oracle_loss)?
                }
            };
            estimates.push(estimate);
        }
        let round = self.state.round();
        self.state.accumulate(round, &estimates)?;

        let alpha = match &self.rule {
            UpdateRule::Implicit { alpha_mode: AlphaMode::Exact, .. } => Some(self.independence(graph) as f64),
            UpdateRule::Implicit { alpha_mode: AlphaMode::Fixed(v), .. } => Some(*v),
            UpdateRule::Uniform { .. } => None,
        };
        if let (Some(alpha), UpdateRule::Implicit { q_running_sum, rates, .. }) = (alpha, &mut self.rule) {
            *q_running_sum += q_value_ix(alpha, k, rates.beta);
            *rates = schedule_ix(round + 1, k, self.state.dim(), *q_running_sum)?;
        }
        Ok(UpdateSummary { q, estimates })
    }
}
