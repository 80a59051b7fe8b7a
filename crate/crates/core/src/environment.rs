//! Context distributions, adversaries and the extra-observation oracle.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{check_simplex, FeedbackGraph, GraphSpec, ObservationSet};

/// Second-moment matrices with smallest eigenvalue at or below this are
/// rejected as singular.
pub const SINGULARITY_THRESHOLD: f64 = 1e-12;

/// A context vector revealed to the agent before it acts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Context(pub Vec<f64>);

impl Context {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }
}

/// Fresh context drawn by the extra-observation oracle. Kept distinct from
/// [`Context`] so estimators cannot be fed the decision context by mistake.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OracleContext(pub Vec<f64>);

impl OracleContext {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ContextKind {
    /// Independent coordinates, each `1/sqrt(d)` with probability `p` and 0 otherwise.
    BernoulliScaled { p: f64 },
    /// Finite support with explicit probabilities.
    CustomDiscrete { support: Vec<Vec<f64>>, probs: Vec<f64> },
}

/// Unvalidated context model: can be sampled even when its second moment is
/// singular.
#[derive(Debug, Clone)]
pub struct ContextModel {
    dim: usize,
    kind: ContextKind,
    picker: Option<WeightedIndex<f64>>,
}

impl ContextModel {
    pub fn new(dim: usize, kind: ContextKind) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDistribution("dimension must be at least 1".into()));
        }
        let picker = match &kind {
            ContextKind::BernoulliScaled { p } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::InvalidDistribution(format!("p = {p} outside [0, 1]")));
                }
                None
            }
            ContextKind::CustomDiscrete { support, probs } => {
                if support.is_empty() || support.len() != probs.len() {
                    return Err(Error::InvalidDistribution(format!(
                        "{} support points but {} probabilities",
                        support.len(),
                        probs.len()
                    )));
                }
                if let Some(x) = support.iter().find(|x| x.len() != dim) {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        actual: x.len(),
                    });
                }
                check_simplex(probs).map_err(|e| Error::InvalidDistribution(e.to_string()))?;
                Some(WeightedIndex::new(probs).map_err(|e| Error::InvalidDistribution(e.to_string()))?)
            }
        };
        Ok(Self { dim, kind, picker })
    }

    pub fn bernoulli_scaled(dim: usize, p: f64) -> Result<Self> {
        Self::new(dim, ContextKind::BernoulliScaled { p })
    }

    pub fn custom_discrete(support: Vec<Vec<f64>>, probs: Vec<f64>) -> Result<Self> {
        let dim = support.first().map_or(0, Vec::len);
        Self::new(dim, ContextKind::CustomDiscrete { support, probs })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &ContextKind {
        &self.kind
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.kind {
            ContextKind::BernoulliScaled { p } => {
                let value = 1.0 / (self.dim as f64).sqrt();
                (0..self.dim)
                    .map(|_| if rng.random::<f64>() < *p { value } else { 0.0 })
                    .collect()
            }
            ContextKind::CustomDiscrete { support, .. } => {
                let picker = self.picker.as_ref().expect("discrete model has a picker");
                support[picker.sample(rng)].clone()
            }
        }
    }

    pub fn sample_context<R: Rng + ?Sized>(&self, rng: &mut R) -> Context {
        Context(self.sample(rng))
    }

    /// `E[x x^T]` without any definiteness check.
    pub fn raw_second_moment(&self) -> DMatrix<f64> {
        let d = self.dim;
        match &self.kind {
            ContextKind::BernoulliScaled { p } => {
                let scale = 1.0 / d as f64;
                DMatrix::from_fn(d, d, |i, j| if i == j { p * scale } else { p * p * scale })
            }
            ContextKind::CustomDiscrete { support, probs } => {
                let mut m = DMatrix::zeros(d, d);
                for (x, &w) in support.iter().zip(probs) {
                    for i in 0..d {
                        for j in 0..d {
                            m[(i, j)] += w * x[i] * x[j];
                        }
                    }
                }
                m
            }
        }
    }

    /// `E[x x^T]`, rejected when not positive definite.
    pub fn exact_second_moment(&self) -> Result<DMatrix<f64>> {
        let m = self.raw_second_moment();
        let lambda_min = smallest_eigenvalue(&m);
        if lambda_min <= SINGULARITY_THRESHOLD {
            return Err(Error::SingularSecondMoment { lambda_min });
        }
        Ok(m)
    }

    /// Largest Euclidean norm over the support.
    pub fn norm_bound(&self) -> f64 {
        match &self.kind {
            ContextKind::BernoulliScaled { p } => {
                if *p > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ContextKind::CustomDiscrete { support, probs } => support
                .iter()
                .zip(probs)
                .filter(|(_, &w)| w > 0.0)
                .map(|(x, _)| dot(x, x).sqrt())
                .fold(0.0, f64::max),
        }
    }
}

fn smallest_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// A validated context distribution together with the quantities the
/// estimators need: `Sigma = E[x x^T]`, its inverse, its smallest eigenvalue
/// and a norm bound on the support.
#[derive(Debug, Clone)]
pub struct ContextDistribution {
    model: ContextModel,
    second_moment: DMatrix<f64>,
    second_moment_inverse: DMatrix<f64>,
    smallest_eigenvalue: f64,
    norm_bound: f64,
}

impl ContextDistribution {
    pub fn new(model: ContextModel) -> Result<Self> {
        let second_moment = model.exact_second_moment()?;
        let smallest_eigenvalue = smallest_eigenvalue(&second_moment);
        let second_moment_inverse = second_moment
            .clone()
            .cholesky()
            .ok_or(Error::SingularSecondMoment {
                lambda_min: smallest_eigenvalue,
            })?
            .inverse();
        let norm_bound = model.norm_bound();
        Ok(Self {
            model,
            second_moment,
            second_moment_inverse,
            smallest_eigenvalue,
            norm_bound,
        })
    }

    pub fn model(&self) -> &ContextModel {
        &self.model
    }

    pub fn dim(&self) -> usize {
        self.model.dim
    }

    pub fn second_moment(&self) -> &DMatrix<f64> {
        &self.second_moment
    }

    pub fn second_moment_inverse(&self) -> &DMatrix<f64> {
        &self.second_moment_inverse
    }

    pub fn smallest_eigenvalue(&self) -> f64 {
        self.smallest_eigenvalue
    }

    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    pub fn sample_context<R: Rng + ?Sized>(&self, rng: &mut R) -> Context {
        self.model.sample_context(rng)
    }

    pub fn sample_oracle_context<R: Rng + ?Sized>(&self, rng: &mut R) -> OracleContext {
        OracleContext(self.model.sample(rng))
    }
}

/// Per-round loss vectors, one `d`-vector per action.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTable {
    num_actions: usize,
    dim: usize,
    data: Vec<f64>,
}

impl LossTable {
    pub fn zeros(num_actions: usize, dim: usize) -> Self {
        Self {
            num_actions,
            dim,
            data: vec![0.0; num_actions * dim],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || dim == 0 {
            return Err(Error::InvalidAdversary("empty loss table".into()));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: r.len(),
            });
        }
        Ok(Self {
            num_actions: rows.len(),
            dim,
            data: rows.concat(),
        })
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, action: usize) -> &[f64] {
        &self.data[action * self.dim..(action + 1) * self.dim]
    }

    pub fn row_mut(&mut self, action: usize) -> &mut [f64] {
        &mut self.data[action * self.dim..(action + 1) * self.dim]
    }

    /// `<x, theta_action>`.
    pub fn loss(&self, action: usize, x: &[f64]) -> f64 {
        dot(x, self.row(action))
    }

    pub fn max_norm(&self) -> f64 {
        (0..self.num_actions)
            .map(|i| dot(self.row(i), self.row(i)).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn add_assign(&mut self, other: &LossTable) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossPhase {
    /// Last round (inclusive) this phase covers.
    pub until: usize,
    /// One row per action.
    pub theta: Vec<Vec<f64>>,
}

fn default_first_scale() -> f64 {
    0.1
}

fn default_second_scale() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossModel {
    /// Every coordinate of `theta_i` is `first_scale * i * |cos t| / sqrt(d)`
    /// up to the change point and `second_scale * i * |sin t| / sqrt(d)`
    /// afterwards (`i` one-based, `t` the round in radians).
    SuddenChangeSynthetic {
        /// Defaults to half the horizon.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        change_point: Option<usize>,
        #[serde(default = "default_first_scale")]
        first_scale: f64,
        #[serde(default = "default_second_scale")]
        second_scale: f64,
    },
    /// Piecewise-constant loss vectors; the last phase extends to the horizon.
    CustomOblivious { phases: Vec<LossPhase> },
}

/// An oblivious adversary: loss process plus feedback-graph process over a
/// fixed horizon.
#[derive(Debug, Clone)]
pub struct AdversarySpec {
    num_actions: usize,
    dim: usize,
    horizon: usize,
    losses: ResolvedLosses,
    graph: GraphSpec,
}

#[derive(Debug, Clone)]
enum ResolvedLosses {
    SuddenChange {
        change_point: usize,
        first_scale: f64,
        second_scale: f64,
    },
    Phases(Vec<(usize, LossTable)>),
}

impl AdversarySpec {
    /// Validates the loss process against the context norm bound: every loss
    /// vector must satisfy `||theta|| * sigma <= 1`.
    pub fn new(
        num_actions: usize,
        dim: usize,
        horizon: usize,
        losses: &LossModel,
        graph: GraphSpec,
        norm_bound: f64,
    ) -> Result<Self> {
        if num_actions == 0 || dim == 0 {
            return Err(Error::InvalidAdversary("need at least one action and one dimension".into()));
        }
        graph.validate(num_actions)?;
        let losses = match losses {
            LossModel::SuddenChangeSynthetic {
                change_point,
                first_scale,
                second_scale,
            } => {
                let worst = first_scale.abs().max(second_scale.abs()) * num_actions as f64;
                if worst * norm_bound > 1.0 + 1e-12 {
                    return Err(Error::InvalidAdversary(format!(
                        "largest loss vector norm {worst} times context bound {norm_bound} exceeds 1"
                    )));
                }
                ResolvedLosses::SuddenChange {
                    change_point: change_point.unwrap_or(horizon / 2),
                    first_scale: *first_scale,
                    second_scale: *second_scale,
                }
            }
            LossModel::CustomOblivious { phases } => {
                if phases.is_empty() {
                    return Err(Error::InvalidAdversary("custom adversary needs at least one phase".into()));
                }
                let mut resolved = Vec::with_capacity(phases.len());
                let mut previous = 0;
                for (n, phase) in phases.iter().enumerate() {
                    if n > 0 && phase.until <= previous {
                        return Err(Error::InvalidAdversary("phase boundaries must increase".into()));
                    }
                    previous = phase.until;
                    let table = LossTable::from_rows(&phase.theta)?;
                    if table.num_actions() != num_actions || table.dim() != dim {
                        return Err(Error::InvalidAdversary(format!(
                            "phase {n} is {}x{}, expected {num_actions}x{dim}",
                            table.num_actions(),
                            table.dim()
                        )));
                    }
                    if table.max_norm() * norm_bound > 1.0 + 1e-12 {
                        return Err(Error::InvalidAdversary(format!(
                            "phase {n}: loss vector norm {} times context bound {norm_bound} exceeds 1",
                            table.max_norm()
                        )));
                    }
                    resolved.push((phase.until, table));
                }
                ResolvedLosses::Phases(resolved)
            }
        };
        Ok(Self {
            num_actions,
            dim,
            horizon,
            losses,
            graph,
        })
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn graph_spec(&self) -> &GraphSpec {
        &self.graph
    }

    pub fn change_point(&self) -> Option<usize> {
        match self.losses {
            ResolvedLosses::SuddenChange { change_point, .. } => Some(change_point),
            ResolvedLosses::Phases(_) => None,
        }
    }

    /// Same adversary over a different feedback-graph process.
    pub fn with_graph(&self, graph: GraphSpec) -> Result<Self> {
        graph.validate(self.num_actions)?;
        Ok(Self { graph, ..self.clone() })
    }

    /// Loss vectors committed for round `round` (one-based).
    pub fn adversary_losses(&self, round: usize) -> Result<LossTable> {
        if round == 0 || round > self.horizon {
            return Err(Error::InvalidAdversary(format!(
                "round {round} outside 1..={}",
                self.horizon
            )));
        }
        Ok(self.losses_unchecked(round))
    }

    fn losses_unchecked(&self, round: usize) -> LossTable {
        match &self.losses {
            ResolvedLosses::SuddenChange {
                change_point,
                first_scale,
                second_scale,
            } => {
                let t = round as f64;
                let (scale, phase) = if round <= *change_point {
                    (*first_scale, t.cos().abs())
                } else {
                    (*second_scale, t.sin().abs())
                };
                let base = scale * phase / (self.dim as f64).sqrt();
                let mut table = LossTable::zeros(self.num_actions, self.dim);
                for i in 0..self.num_actions {
                    let value = base * (i + 1) as f64;
                    table.row_mut(i).fill(value);
                }
                table
            }
            ResolvedLosses::Phases(phases) => phases
                .iter()
                .find(|(until, _)| round <= *until)
                .unwrap_or_else(|| phases.last().expect("at least one phase"))
                .1
                .clone(),
        }
    }

    /// Feedback graph for `round`. Time-invariant graphs ignore `round`;
    /// random graphs draw from `rng`.
    pub fn adversary_graph<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<FeedbackGraph> {
        self.graph.build(self.num_actions, rng)
    }
}

/// What the adversary commits at the start of a round.
#[derive(Debug, Clone)]
pub struct Commitment {
    pub graph: Arc<FeedbackGraph>,
    pub losses: LossTable,
}

/// Interaction history visible to an adversary when it commits.
pub trait History {
    fn rounds_played(&self) -> usize;
}

/// Source of per-round loss vectors and feedback graphs. Adversaries may
/// inspect the interaction history; oblivious ones ignore it.
pub trait Adversary: Send + Sync {
    fn num_actions(&self) -> usize;
    fn dim(&self) -> usize;
    fn horizon(&self) -> usize;

    fn is_oblivious(&self) -> bool {
        true
    }

    /// Whether one graph serves every round of a trial.
    fn graph_is_time_invariant(&self) -> bool;

    /// Commits `(G_t, theta_t)` for `round`. `graph_rng` is the trial's graph
    /// stream for this round.
    fn commit(&self, round: usize, history: &dyn History, graph_rng: &mut dyn rand::RngCore) -> Result<Commitment>;

    /// Loss vectors for `round` without any history, available only for
    /// oblivious adversaries.
    fn oblivious_losses(&self, round: usize) -> Result<LossTable>;
}

impl Adversary for AdversarySpec {
    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn graph_is_time_invariant(&self) -> bool {
        self.graph.is_time_invariant()
    }

    fn commit(&self, round: usize, _history: &dyn History, graph_rng: &mut dyn rand::RngCore) -> Result<Commitment> {
        Ok(Commitment {
            graph: Arc::new(self.adversary_graph(graph_rng)?),
            losses: self.adversary_losses(round)?,
        })
    }

    fn oblivious_losses(&self, round: usize) -> Result<LossTable> {
        self.adversary_losses(round)
    }
}

/// Extra observations disclosed after the agent acts: a fresh context and
/// the losses it induces on every observed action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleDraw {
    pub context: OracleContext,
    /// `(action, <context, theta_action>)`, sorted by action.
    pub losses: Vec<(usize, f64)>,
}

impl OracleDraw {
    pub fn loss(&self, action: usize) -> Option<f64> {
        self.losses
            .binary_search_by_key(&action, |&(a, _)| a)
            .ok()
            .map(|n| self.losses[n].1)
    }
}

pub fn oracle_draw<R: Rng + ?Sized>(
    dist: &ContextDistribution,
    losses: &LossTable,
    observed: &ObservationSet,
    rng: &mut R,
) -> OracleDraw {
    let context = dist.sample_oracle_context(rng);
    let losses = observed
        .members
        .iter()
        .map(|&i| (i, losses.loss(i, context.as_slice())))
        .collect();
    OracleDraw { context, losses }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    fn paper_adversary(horizon: usize) -> AdversarySpec {
        AdversarySpec::new(
            10,
            10,
            horizon,
            &LossModel::SuddenChangeSynthetic {
                change_point: None,
                first_scale: 0.1,
                second_scale: 0.05,
            },
            GraphSpec::CompletePlusIsolated { clique: 9, isolated: 1 },
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn bernoulli_samples_live_on_support() {
        let m = ContextModel::bernoulli_scaled(10, 0.5).unwrap();
        let v = 1.0 / 10f64.sqrt();
        let mut r = rng();
        for _ in 0..200 {
            let x = m.sample(&mut r);
            assert!(x.iter().all(|&c| c == 0.0 || (c - v).abs() < 1e-15));
            assert!(dot(&x, &x).sqrt() <= 1.0 + 1e-12);
        }
        assert!((v - 0.316_227_766_016_837_94).abs() < 1e-15);
    }

    #[test]
    fn degenerate_samples() {
        let m = ContextModel::bernoulli_scaled(4, 0.0).unwrap();
        assert_eq!(m.sample(&mut rng()), vec![0.0; 4]);
        let m = ContextModel::custom_discrete(vec![vec![0.3, -0.2]], vec![1.0]).unwrap();
        let mut r = rng();
        for _ in 0..10 {
            assert_eq!(m.sample(&mut r), vec![0.3, -0.2]);
        }
    }

    #[test]
    fn second_moment_examples() {
        let m = ContextModel::bernoulli_scaled(2, 0.5).unwrap().exact_second_moment().unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.25, 0.125, 0.125, 0.25]);
        assert!((m - expected).norm() < 1e-15);

        let point = ContextModel::custom_discrete(vec![vec![1.0, 0.0]], vec![1.0]).unwrap();
        assert!(matches!(
            point.exact_second_moment(),
            Err(Error::SingularSecondMoment { .. })
        ));

        let uniform = ContextModel::custom_discrete(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.5, 0.5]).unwrap();
        let m = uniform.exact_second_moment().unwrap();
        assert!((m - DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5])).norm() < 1e-15);
    }

    #[test]
    fn distribution_inverse_and_eigenvalue() {
        let dist = ContextDistribution::new(ContextModel::bernoulli_scaled(10, 0.5).unwrap()).unwrap();
        let product = dist.second_moment() * dist.second_moment_inverse();
        assert!((product - DMatrix::<f64>::identity(10, 10)).norm() < 1e-10);
        assert!((dist.smallest_eigenvalue() - 0.025).abs() < 1e-12);
        assert_eq!(dist.norm_bound(), 1.0);
    }

    #[test]
    fn monte_carlo_second_moment_agrees() {
        let model = ContextModel::bernoulli_scaled(3, 0.3).unwrap();
        let exact = model.exact_second_moment().unwrap();
        let mut acc = DMatrix::<f64>::zeros(3, 3);
        let mut r = rng();
        let n = 1_000_000;
        for _ in 0..n {
            let x = model.sample(&mut r);
            for i in 0..3 {
                for j in 0..3 {
                    acc[(i, j)] += x[i] * x[j];
                }
            }
        }
        acc /= n as f64;
        for (a, b) in acc.iter().zip(exact.iter()) {
            assert!((a - b).abs() < 3e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn sudden_change_losses() {
        let adv = paper_adversary(100);
        let first = adv.adversary_losses(1).unwrap();
        let expected = 0.1 * 1f64.cos().abs() / 10f64.sqrt();
        assert!(first.row(0).iter().all(|&v| (v - expected).abs() < 1e-15));
        assert!((expected - 0.017_085_859_115_842_81).abs() < 1e-15);

        // round 11 is the closest integer to a zero of cos
        let near_zero = adv.adversary_losses(11).unwrap();
        let want = 0.1 * 10.0 * 11f64.cos().abs() / 10f64.sqrt();
        assert!(near_zero.row(9).iter().all(|&v| (v - want).abs() < 1e-15 && v < 2e-3));

        let adv4 = AdversarySpec::new(
            2,
            4,
            10,
            &LossModel::SuddenChangeSynthetic {
                change_point: Some(0),
                first_scale: 0.1,
                second_scale: 0.05,
            },
            GraphSpec::Edgeless,
            1.0,
        )
        .unwrap();
        let table = adv4.adversary_losses(2).unwrap();
        let want = 0.05 * 2.0 * 2f64.sin().abs() / 2.0;
        assert!(table.row(1).iter().all(|&v| (v - want).abs() < 1e-15));
    }

    #[test]
    fn boundedness_rejected_at_construction() {
        let err = AdversarySpec::new(
            11,
            10,
            100,
            &LossModel::SuddenChangeSynthetic {
                change_point: None,
                first_scale: 0.1,
                second_scale: 0.05,
            },
            GraphSpec::Edgeless,
            1.0,
        );
        assert!(matches!(err, Err(Error::InvalidAdversary(_))));
    }

    #[test]
    fn paper_losses_bounded_and_nonnegative() {
        let adv = paper_adversary(200);
        let v = 1.0 / 10f64.sqrt();
        // all-ones scaled context maximizes every loss on the support
        let x = vec![v; 10];
        for t in 1..=200 {
            let table = adv.adversary_losses(t).unwrap();
            for i in 0..10 {
                let l = table.loss(i, &x);
                assert!((0.0..=1.0 + 1e-12).contains(&l));
            }
        }
    }

    #[test]
    fn change_point_defaults_to_half_horizon() {
        assert_eq!(paper_adversary(100_000).change_point(), Some(50_000));
    }

    #[test]
    fn custom_phases() {
        let adv = AdversarySpec::new(
            2,
            1,
            10,
            &LossModel::CustomOblivious {
                phases: vec![
                    LossPhase { until: 3, theta: vec![vec![0.1], vec![0.2]] },
                    LossPhase { until: 10, theta: vec![vec![0.3], vec![0.0]] },
                ],
            },
            GraphSpec::Edgeless,
            1.0,
        )
        .unwrap();
        assert_eq!(adv.adversary_losses(3).unwrap().row(1), &[0.2]);
        assert_eq!(adv.adversary_losses(4).unwrap().row(0), &[0.3]);
        assert!(adv.adversary_losses(11).is_err());
    }

    #[test]
    fn graph_presets() {
        let adv = paper_adversary(10);
        let g = adv.adversary_graph(&mut rng()).unwrap();
        assert!(g.has_edge(0, 8) && !g.has_edge(0, 9) && !g.has_edge(9, 3));
        assert_eq!(g.independence_number_exact().unwrap(), 2);
        let edgeless = adv.with_graph(GraphSpec::Edgeless).unwrap();
        assert_eq!(edgeless.adversary_graph(&mut rng()).unwrap().independence_number_exact().unwrap(), 10);
        let complete = adv.with_graph(GraphSpec::Complete).unwrap();
        assert_eq!(complete.adversary_graph(&mut rng()).unwrap().independence_number_exact().unwrap(), 1);
    }

    #[test]
    fn oracle_examples() {
        let dist = ContextDistribution::new(
            ContextModel::custom_discrete(vec![vec![0.5, 0.25], vec![0.0, 1.0]], vec![0.5, 0.5]).unwrap(),
        )
        .unwrap();
        let table = LossTable::from_rows(&[vec![0.2, 0.4], vec![0.0, 0.0], vec![-0.2, 0.6]]).unwrap();
        let g = FeedbackGraph::from_edges(3, &[(0, 2)], true).unwrap();

        let zero = oracle_draw(&dist, &table, &g.observation_set(1).unwrap(), &mut rng());
        assert_eq!(zero.losses, vec![(1, 0.0)]);

        let mut r = rng();
        for _ in 0..20 {
            let draw = oracle_draw(&dist, &table, &g.observation_set(0).unwrap(), &mut r);
            assert_eq!(draw.losses.iter().map(|l| l.0).collect::<Vec<_>>(), vec![0, 2]);
            for &(i, l) in &draw.losses {
                assert_eq!(l, dot(draw.context.as_slice(), table.row(i)));
            }
        }
    }

    #[test]
    fn oracle_on_bernoulli_recomputes_dot() {
        let dist = ContextDistribution::new(ContextModel::bernoulli_scaled(2, 0.5).unwrap()).unwrap();
        let table = LossTable::from_rows(&[vec![0.3, 0.1], vec![0.2, 0.7]]).unwrap();
        let all = FeedbackGraph::complete(2).unwrap().observation_set(0).unwrap();
        let mut r = rng();
        for _ in 0..50 {
            let draw = oracle_draw(&dist, &table, &all, &mut r);
            let x = draw.context.as_slice();
            assert_eq!(draw.loss(0), Some(x[0] * 0.3 + x[1] * 0.1));
            assert_eq!(draw.loss(1), Some(x[0] * 0.2 + x[1] * 0.7));
        }
    }
}
