//! Exact small-scale oracles for the estimator claims, the graph lemmas and
//! the regret bounds.
//!
//! Observation sets, observation probabilities, independence numbers and
//! second moments are recomputed here from edge lists and enumerated
//! supports instead of going through the graph and environment code paths.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algorithms::{
    q_bound_u_directed, q_value_ix, schedule_ix, schedule_u_directed, schedule_u_undirected, PolicyVector,
    ProblemConstants,
};
use crate::environment::{ContextDistribution, ContextKind, ContextModel, LossTable, OracleContext};
use crate::error::{Error, Result};
use crate::estimators::{estimate_ix, estimate_u};
use crate::graph::FeedbackGraph;

/// Largest context support the exact expectation enumerates.
pub const SUPPORT_LIMIT: usize = 64;
/// Largest action count for exact estimator enumeration.
pub const ENUMERATION_MAX_ACTIONS: usize = 10;
/// Largest action count for brute-force independence numbers.
pub const BRUTE_FORCE_MAX_ACTIONS: usize = 12;
/// Slack allowed on every audited inequality and identity.
pub const AUDIT_TOLERANCE: f64 = 1e-10;

/// Every support point of a discrete context model with its probability.
pub fn enumerate_support(model: &ContextModel) -> Result<Vec<(Vec<f64>, f64)>> {
    let d = model.dim();
    match model.kind() {
        ContextKind::BernoulliScaled { p } => {
            if d >= 7 || 1usize << d > SUPPORT_LIMIT {
                return Err(Error::Verification(format!(
                    "product support has 2^{d} points, above the limit of {SUPPORT_LIMIT}"
                )));
            }
            let value = 1.0 / (d as f64).sqrt();
            Ok((0u32..1 << d)
                .map(|mask| {
                    let ones = mask.count_ones() as i32;
                    let x = (0..d).map(|j| if mask & (1 << j) != 0 { value } else { 0.0 }).collect();
                    (x, p.powi(ones) * (1.0 - p).powi(d as i32 - ones))
                })
                .collect())
        }
        ContextKind::CustomDiscrete { support, probs } => {
            if support.len() > SUPPORT_LIMIT {
                return Err(Error::Verification(format!(
                    "support has {} points, above the limit of {SUPPORT_LIMIT}",
                    support.len()
                )));
            }
            Ok(support.iter().cloned().zip(probs.iter().copied()).collect())
        }
    }
}

/// `E[x x^T]` summed over an enumerated support.
pub fn reference_second_moment(support: &[(Vec<f64>, f64)], dim: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dim, dim);
    for (x, p) in support {
        for r in 0..dim {
            for c in 0..dim {
                m[(r, c)] += p * x[r] * x[c];
            }
        }
    }
    m
}

/// `{action} ∪ {j : action -> j}` from a raw edge list.
pub fn reference_observation_set(edges: &[(usize, usize)], action: usize) -> Vec<usize> {
    let mut set: Vec<usize> = edges.iter().filter(|(from, _)| *from == action).map(|(_, to)| *to).collect();
    set.push(action);
    set.sort_unstable();
    set.dedup();
    set
}

/// `q(i) = pi(i) + sum_{j -> i} pi(j)` from a raw edge list.
pub fn reference_q(edges: &[(usize, usize)], pi: &[f64]) -> Vec<f64> {
    let mut q = pi.to_vec();
    for &(from, to) in edges {
        q[to] += pi[from];
    }
    q
}

/// Largest vertex set with no edge in either direction, by subset
/// enumeration.
pub fn brute_force_independence(num_actions: usize, edges: &[(usize, usize)]) -> Result<usize> {
    if num_actions > BRUTE_FORCE_MAX_ACTIONS {
        return Err(Error::Verification(format!(
            "brute-force independence is limited to {BRUTE_FORCE_MAX_ACTIONS} actions (got {num_actions})"
        )));
    }
    let mut conflict = vec![0u32; num_actions];
    for &(a, b) in edges {
        conflict[a] |= 1 << b;
        conflict[b] |= 1 << a;
    }
    Ok((0u32..1 << num_actions)
        .filter(|&mask| (0..num_actions).all(|i| mask & (1 << i) == 0 || conflict[i] & mask == 0))
        .map(|mask| mask.count_ones() as usize)
        .max()
        .unwrap_or(0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorMode {
    /// `1{i in S} / q * Sigma^{-1} x~ l~`.
    Uniform,
    /// `1{i in S} / (q + beta) * Sigma^{-1} x~ l~`.
    Implicit { beta: f64 },
}

/// `E[theta_hat_i]` for every action, enumerating the played action over
/// `pi` and the oracle context over the support of `dist`. The estimates
/// themselves come from the library estimators.
pub fn exact_estimator_expectation(
    pi: &PolicyVector,
    graph: &FeedbackGraph,
    dist: &ContextDistribution,
    theta: &LossTable,
    mode: EstimatorMode,
) -> Result<Vec<Vec<f64>>> {
    let k = graph.num_actions();
    let d = dist.dim();
    if k > ENUMERATION_MAX_ACTIONS {
        return Err(Error::Verification(format!(
            "exact enumeration is limited to {ENUMERATION_MAX_ACTIONS} actions (got {k})"
        )));
    }
    if pi.len() != k || theta.num_actions() != k || theta.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: pi.len(),
        });
    }
    let support = enumerate_support(dist.model())?;
    let edges = graph.edges();
    let q = reference_q(&edges, pi.probabilities());
    let sigma_inv = dist.second_moment_inverse();
    let mut expected = vec![vec![0.0; d]; k];
    for (played, &weight) in pi.probabilities().iter().enumerate() {
        if weight == 0.0 {
            continue;
        }
        let observed = reference_observation_set(&edges, played);
        for (x, p) in &support {
            let oracle = OracleContext(x.clone());
            for (i, acc) in expected.iter_mut().enumerate() {
                let seen = observed.binary_search(&i).is_ok();
                let loss: f64 = x.iter().zip(theta.row(i)).map(|(a, b)| a * b).sum();
                let est = match mode {
                    EstimatorMode::Uniform => estimate_u(i, seen, q[i], sigma_inv, &oracle, loss)?,
                    EstimatorMode::Implicit { beta } => estimate_ix(i, seen, q[i], beta, sigma_inv, &oracle, loss)?,
                };
                for (a, v) in acc.iter_mut().zip(&est.vector) {
                    *a += weight * p * v;
                }
            }
        }
    }
    Ok(expected)
}

/// Both sides of the implicit-exploration identity at context `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IxIdentity {
    /// `sum_i pi(i) <x, E[theta_hat_i]>` by enumeration.
    pub enumerated: f64,
    /// `sum_i pi(i) q(i) / (q(i) + beta) <x, theta_i>`.
    pub closed_form: f64,
    /// `sum_i pi(i) <x, theta_i>`.
    pub true_loss: f64,
}

impl IxIdentity {
    pub fn identity_error(&self) -> f64 {
        (self.enumerated - self.closed_form).abs()
    }

    /// Amount by which the estimate exceeds the true loss (nonpositive when optimistic).
    pub fn optimism_violation(&self) -> f64 {
        self.enumerated - self.true_loss
    }
}

pub fn ix_identity(
    pi: &PolicyVector,
    graph: &FeedbackGraph,
    dist: &ContextDistribution,
    theta: &LossTable,
    beta: f64,
    x: &[f64],
) -> Result<IxIdentity> {
    let expected = exact_estimator_expectation(pi, graph, dist, theta, EstimatorMode::Implicit { beta })?;
    let q = reference_q(&graph.edges(), pi.probabilities());
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(u, v)| u * v).sum() };
    let mut out = IxIdentity {
        enumerated: 0.0,
        closed_form: 0.0,
        true_loss: 0.0,
    };
    for (i, &p) in pi.probabilities().iter().enumerate() {
        let loss = dot(x, theta.row(i));
        out.enumerated += p * dot(x, &expected[i]);
        out.closed_form += p * q[i] / (q[i] + beta) * loss;
        out.true_loss += p * loss;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LemmaVariant {
    /// `sum pi / q <= alpha` on undirected graphs.
    Undirected,
    /// `sum pi / q <= 4 alpha ln(4K / (alpha eps))` when `min pi >= eps`.
    Directed { epsilon: f64 },
    /// `sum pi / (c + q) <= 2 alpha ln(1 + (ceil(K^2 / c) + K) / alpha) + 2`.
    ImplicitExploration { c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaAudit {
    pub lhs: f64,
    pub rhs: f64,
    pub alpha: usize,
    pub pass: bool,
}

pub fn lemma_sum_audit(graph: &FeedbackGraph, pi: &[f64], variant: LemmaVariant) -> Result<LemmaAudit> {
    let k = graph.num_actions();
    if pi.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: pi.len(),
        });
    }
    crate::graph::check_simplex(pi)?;
    let edges = graph.edges();
    let alpha = brute_force_independence(k, &edges)?;
    let q = reference_q(&edges, pi);
    let kf = k as f64;
    let a = alpha as f64;
    let ratio_sum = |c: f64| -> f64 {
        pi.iter()
            .zip(&q)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, qi)| p / (c + qi))
            .sum()
    };
    let (lhs, rhs) = match variant {
        LemmaVariant::Undirected => {
            if edges.iter().any(|&(i, j)| !edges.contains(&(j, i))) {
                return Err(Error::Verification("undirected audit on a directed graph".into()));
            }
            (ratio_sum(0.0), a)
        }
        LemmaVariant::Directed { epsilon } => {
            if !(epsilon > 0.0 && epsilon < 0.5) {
                return Err(Error::Verification(format!("epsilon {epsilon} outside (0, 1/2)")));
            }
            if let Some(p) = pi.iter().find(|&&p| p < epsilon) {
                return Err(Error::Verification(format!("probability {p} below epsilon {epsilon}")));
            }
            (ratio_sum(0.0), 4.0 * a * (4.0 * kf / (a * epsilon)).ln())
        }
        LemmaVariant::ImplicitExploration { c } => {
            if !(c > 0.0) {
                return Err(Error::Verification(format!("constant {c} must be positive")));
            }
            (ratio_sum(c), 2.0 * a * (1.0 + ((kf * kf / c).ceil() + kf) / a).ln() + 2.0)
        }
    };
    Ok(LemmaAudit {
        lhs,
        rhs,
        alpha,
        pass: lhs <= rhs + AUDIT_TOLERANCE,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundVariant {
    Theorem1Undirected,
    Theorem1Directed,
    Theorem2,
}

/// `ln K / eta + 2 eta K sigma^2 T / lambda_min + eta d sum Q_t`.
pub fn theorem1_bound(constants: &ProblemConstants, eta: f64, q_sum: f64) -> f64 {
    let k = constants.num_actions as f64;
    k.ln() / eta
        + 2.0 * eta * constants.exploration_coupling() * constants.horizon as f64
        + eta * constants.dim as f64 * q_sum
}

/// `2 (1 + sqrt d) sqrt((K + sum Q_t) ln K)`.
pub fn theorem2_bound(num_actions: usize, dim: usize, q_sum: f64) -> f64 {
    let k = num_actions as f64;
    2.0 * (1.0 + (dim as f64).sqrt()) * ((k + q_sum) * k.ln()).sqrt()
}

/// Regret bound for a horizon with per-round independence numbers
/// `alphas`, using the tuned rates of each algorithm.
pub fn regret_bound_value(variant: BoundVariant, constants: &ProblemConstants, alphas: &[f64]) -> Result<f64> {
    match variant {
        BoundVariant::Theorem1Undirected => {
            let params = schedule_u_undirected(constants, alphas)?;
            Ok(theorem1_bound(constants, params.eta, alphas.iter().sum()))
        }
        BoundVariant::Theorem1Directed => {
            let params = schedule_u_directed(constants, alphas)?;
            let q_sum = alphas
                .iter()
                .map(|&a| q_bound_u_directed(a, constants.num_actions, params.gamma))
                .sum();
            Ok(theorem1_bound(constants, params.eta, q_sum))
        }
        BoundVariant::Theorem2 => {
            if alphas.len() != constants.horizon {
                return Err(Error::Schedule(format!(
                    "{} independence numbers for a horizon of {}",
                    alphas.len(),
                    constants.horizon
                )));
            }
            let mut q_sum = 0.0;
            for (t, &a) in alphas.iter().enumerate() {
                let rates = schedule_ix(t + 1, constants.num_actions, constants.dim, q_sum)?;
                q_sum += q_value_ix(a, constants.num_actions, rates.beta);
            }
            Ok(theorem2_bound(constants.num_actions, constants.dim, q_sum))
        }
    }
}

/// One row of the audit table.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditOutcome {
    pub name: &'static str,
    pub instances: usize,
    /// Largest deviation or violation seen.
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl AuditOutcome {
    fn new(name: &'static str, instances: usize, worst: f64, tolerance: f64) -> Self {
        Self {
            name,
            instances,
            worst,
            tolerance,
            passed: worst <= tolerance,
        }
    }
}

fn random_policy<R: Rng>(k: usize, floor: f64, rng: &mut R) -> PolicyVector {
    let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + floor).collect();
    let total: f64 = raw.iter().sum();
    let mut pi: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let drift: f64 = 1.0 - pi.iter().sum::<f64>();
    pi[0] += drift;
    PolicyVector::new(pi).expect("normalized")
}

fn random_graph<R: Rng>(k: usize, directed: bool, rng: &mut R) -> FeedbackGraph {
    let p = rng.random::<f64>();
    FeedbackGraph::erdos_renyi(k, p, directed, rng).expect("valid edge probability")
}

/// Random loss vectors with norm at most `max_norm`; nonnegative when asked.
fn random_theta<R: Rng>(k: usize, d: usize, nonnegative: bool, rng: &mut R) -> LossTable {
    let rows: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            let v: Vec<f64> = (0..d)
                .map(|_| if nonnegative { rng.random::<f64>() } else { rng.random::<f64>() * 2.0 - 1.0 })
                .collect();
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
            let scale = rng.random::<f64>() / norm;
            v.into_iter().map(|a| a * scale).collect()
        })
        .collect();
    LossTable::from_rows(&rows).expect("rectangular")
}

fn random_small_distribution<R: Rng>(rng: &mut R) -> (ContextDistribution, usize) {
    let d = rng.random_range(1..=3);
    let p = rng.random_range(0.1..0.9);
    let model = ContextModel::bernoulli_scaled(d, p).expect("valid p");
    (ContextDistribution::new(model).expect("nonsingular for 0 < p < 1"), d)
}

/// Unbiasedness of the uniform-exploration estimator on random instances:
/// largest componentwise `|E[theta_hat_i] - theta_i|`.
pub fn audit_unbiasedness(instances: usize, seed: u64) -> Result<AuditOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let k = rng.random_range(1..=ENUMERATION_MAX_ACTIONS);
        let (dist, d) = random_small_distribution(&mut rng);
        let graph = random_graph(k, rng.random(), &mut rng);
        let pi = random_policy(k, 0.05, &mut rng);
        let theta = random_theta(k, d, false, &mut rng);
        let expected = exact_estimator_expectation(&pi, &graph, &dist, &theta, EstimatorMode::Uniform)?;
        for (i, row) in expected.iter().enumerate() {
            for (e, t) in row.iter().zip(theta.row(i)) {
                worst = worst.max((e - t).abs());
            }
        }
    }
    Ok(AuditOutcome::new("estimator unbiasedness", instances, worst, AUDIT_TOLERANCE))
}

/// Implicit-exploration identity and optimism on random nonnegative
/// instances: largest identity error or optimism violation.
pub fn audit_ix_identity(instances: usize, seed: u64) -> Result<AuditOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let k = rng.random_range(1..=ENUMERATION_MAX_ACTIONS);
        let (dist, d) = random_small_distribution(&mut rng);
        let graph = random_graph(k, rng.random(), &mut rng);
        let pi = random_policy(k, 0.0, &mut rng);
        let theta = random_theta(k, d, true, &mut rng);
        let beta = rng.random_range(0.001..1.0);
        let x = dist.sample_context(&mut rng);
        let check = ix_identity(&pi, &graph, &dist, &theta, beta, x.as_slice())?;
        worst = worst.max(check.identity_error()).max(check.optimism_violation());
    }
    Ok(AuditOutcome::new("implicit exploration identity and optimism", instances, worst, AUDIT_TOLERANCE))
}

/// One graph lemma on random instances: largest `lhs - rhs`.
pub fn audit_lemma(kind: LemmaKind, instances: usize, seed: u64) -> Result<AuditOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..instances {
        let k = rng.random_range(2..=BRUTE_FORCE_MAX_ACTIONS);
        let (graph, pi, variant) = match kind {
            LemmaKind::Undirected => {
                let pi = random_policy(k, 0.0, &mut rng);
                (random_graph(k, false, &mut rng), pi, LemmaVariant::Undirected)
            }
            LemmaKind::Directed => {
                let pi = random_policy(k, rng.random_range(0.0..0.5), &mut rng);
                let epsilon = pi.probabilities().iter().copied().fold(0.49, f64::min);
                (random_graph(k, true, &mut rng), pi, LemmaVariant::Directed { epsilon })
            }
            LemmaKind::ImplicitExploration => {
                let pi = random_policy(k, 0.0, &mut rng);
                let c = rng.random_range(0.001..1.0);
                (random_graph(k, rng.random(), &mut rng), pi, LemmaVariant::ImplicitExploration { c })
            }
        };
        let audit = lemma_sum_audit(&graph, pi.probabilities(), variant)?;
        worst = worst.max(audit.lhs - audit.rhs);
    }
    Ok(AuditOutcome::new(kind.name(), instances, worst, AUDIT_TOLERANCE))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LemmaKind {
    Undirected,
    Directed,
    ImplicitExploration,
}

impl LemmaKind {
    pub const ALL: [LemmaKind; 3] = [LemmaKind::Undirected, LemmaKind::Directed, LemmaKind::ImplicitExploration];

    fn name(self) -> &'static str {
        match self {
            LemmaKind::Undirected => "undirected graph lemma",
            LemmaKind::Directed => "directed graph lemma",
            LemmaKind::ImplicitExploration => "implicit exploration graph lemma",
        }
    }
}

/// Equality case on the nine-clique-plus-isolated graph under the uniform
/// policy: `|lhs - 2| + |alpha - 2|`.
pub fn audit_paper_graph_equality() -> Result<AuditOutcome> {
    let graph = FeedbackGraph::complete_plus_isolated(9, 1)?;
    let audit = lemma_sum_audit(&graph, &[0.1; 10], LemmaVariant::Undirected)?;
    let worst = (audit.lhs - 2.0).abs() + (audit.alpha as f64 - 2.0).abs() + (audit.rhs - 2.0).abs();
    Ok(AuditOutcome::new("nine-clique graph equality case", 1, worst, AUDIT_TOLERANCE))
}

/// Exact solver against known graphs and brute force; greedy bound never
/// below the exact value. Counts failures.
pub fn audit_independence(instances: usize, seed: u64) -> Result<AuditOutcome> {
    let mut failures = 0usize;
    let known = [
        (FeedbackGraph::complete_plus_isolated(9, 1)?, 2),
        (FeedbackGraph::complete(10)?, 1),
        (FeedbackGraph::complete(4)?, 1),
        (FeedbackGraph::edgeless(10)?, 10),
        (FeedbackGraph::edgeless(3)?, 3),
    ];
    for (g, alpha) in &known {
        if g.independence_number_exact()? != *alpha {
            failures += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..instances {
        let k = rng.random_range(1..=BRUTE_FORCE_MAX_ACTIONS);
        let g = random_graph(k, rng.random(), &mut rng);
        let exact = g.independence_number_exact()?;
        if exact != brute_force_independence(k, &g.edges())? || g.independence_number_greedy_bound() < exact {
            failures += 1;
        }
    }
    Ok(AuditOutcome::new(
        "independence number solver and greedy bound",
        instances + known.len(),
        failures as f64,
        0.0,
    ))
}

/// Every audit at its standard instance count.
pub fn run_audit_suite(seed: u64) -> Result<Vec<AuditOutcome>> {
    let mut outcomes = vec![
        audit_unbiasedness(100, seed)?,
        audit_ix_identity(100, seed.wrapping_add(1))?,
    ];
    for (n, kind) in LemmaKind::ALL.into_iter().enumerate() {
        outcomes.push(audit_lemma(kind, 200, seed.wrapping_add(2 + n as u64))?);
    }
    outcomes.push(audit_paper_graph_equality()?);
    outcomes.push(audit_independence(500, seed.wrapping_add(5))?);
    Ok(outcomes)
}
