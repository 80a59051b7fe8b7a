//! Round-by-round protocol driver, trials and experiments.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::algorithms::{
    schedule_u_directed, schedule_u_undirected, Agent, Algorithm, AlphaMode, Observation, PolicyVector, ProblemConstants,
    UParams,
};
use crate::config::{AlgorithmConfig, ExperimentConfig};
use crate::environment::{
    oracle_draw, Adversary, AdversarySpec, Context, ContextDistribution, ContextModel, History, OracleDraw,
};
use crate::error::{Error, Result};
use crate::evaluation::{aggregate, checkpoint_rounds, regret_curve, AggregateCurve, BenchmarkPolicy};
use crate::graph::{FeedbackGraph, ObservationSet};
use crate::rng::{stream, StreamTag};

/// Everything that happened in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub context: Context,
    pub policy: PolicyVector,
    pub action: usize,
    pub realized_loss: f64,
    pub observation_set: ObservationSet,
    pub oracle: OracleDraw,
    pub q: Vec<f64>,
    pub graph_hash: u64,
}

#[derive(Serialize)]
struct RoundRecordLine<'a> {
    round: usize,
    context: &'a [f64],
    policy: &'a [f64],
    action: usize,
    realized_loss: f64,
    observation_set: Vec<usize>,
    oracle_context: &'a [f64],
    oracle_losses: Vec<(usize, f64)>,
    q: &'a [f64],
    graph_hash: String,
}

impl RoundRecord {
    /// One JSON object with one-based action indices.
    pub fn to_json_line(&self) -> String {
        let line = RoundRecordLine {
            round: self.round,
            context: self.context.as_slice(),
            policy: self.policy.probabilities(),
            action: self.action + 1,
            realized_loss: self.realized_loss,
            observation_set: self.observation_set.members.iter().map(|i| i + 1).collect(),
            oracle_context: self.oracle.context.as_slice(),
            oracle_losses: self.oracle.losses.iter().map(|&(i, l)| (i + 1, l)).collect(),
            q: &self.q,
            graph_hash: format!("{:016x}", self.graph_hash),
        };
        serde_json::to_string(&line).expect("record serializes")
    }
}

/// One agent's run over the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub config_hash: String,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub records: Vec<RoundRecord>,
    pub cumulative_loss: Vec<f64>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn actions(&self) -> impl Iterator<Item = usize> + '_ {
        self.records.iter().map(|r| r.action)
    }

    /// One JSON line per round.
    pub fn write_jsonl<W: std::io::Write>(&self, out: &mut W) -> Result<()> {
        for record in &self.records {
            writeln!(out, "{}", record.to_json_line())?;
        }
        Ok(())
    }
}

struct RoundsPlayed(usize);

impl History for RoundsPlayed {
    fn rounds_played(&self) -> usize {
        self.0
    }
}

/// Rng for the graph committed at `round`; time-invariant graphs always use
/// the round-0 cell.
fn graph_stream(adversary: &dyn Adversary, seed: u64, round: usize) -> rand_chacha::ChaCha8Rng {
    let cell = if adversary.graph_is_time_invariant() { 0 } else { round as u64 };
    stream(seed, cell, StreamTag::Graph)
}

/// Plays round `round`. The adversary commits before the context is drawn
/// and the graph reaches the agent only in the update. Agents that ignore
/// side observations are shown the graph with its edges removed.
pub fn run_round(
    agent: &mut Agent,
    adversary: &dyn Adversary,
    dist: &ContextDistribution,
    round: usize,
    seed: u64,
) -> Result<RoundRecord> {
    play_round(agent, adversary, dist, round, seed).map_err(|e| e.at_round(round))
}

fn play_round(
    agent: &mut Agent,
    adversary: &dyn Adversary,
    dist: &ContextDistribution,
    round: usize,
    seed: u64,
) -> Result<RoundRecord> {
    let mut graph_rng = graph_stream(adversary, seed, round);
    let commitment = adversary.commit(round, &RoundsPlayed(round - 1), &mut graph_rng)?;

    let context = dist.sample_context(&mut stream(seed, round as u64, StreamTag::Context));
    let (action, policy) = agent.step(&context, &mut stream(seed, round as u64, StreamTag::Action))?;

    let graph = if agent.algorithm().uses_side_observations() {
        commitment.graph
    } else {
        Arc::new(commitment.graph.without_edges())
    };
    let set = graph.observation_set(action)?;
    let losses: Vec<(usize, f64)> = set
        .members
        .iter()
        .map(|&i| (i, commitment.losses.loss(i, context.as_slice())))
        .collect();
    let realized_loss = commitment.losses.loss(action, context.as_slice());
    if realized_loss.abs() > 1.0 + 1e-12 {
        return Err(Error::InvalidAdversary(format!(
            "realized loss {realized_loss} for action {action} outside [-1, 1]"
        )));
    }
    let oracle = oracle_draw(
        dist,
        &commitment.losses,
        &set,
        &mut stream(seed, round as u64, StreamTag::OracleContext),
    );
    let summary = agent.update(&graph, &Observation { set: set.clone(), losses }, &oracle)?;
    Ok(RoundRecord {
        round,
        context,
        policy,
        action,
        realized_loss,
        observation_set: set,
        oracle,
        q: summary.q,
        graph_hash: graph.fingerprint(),
    })
}

/// Runs `agent` from its current round through `horizon`.
pub fn simulate(
    agent: &mut Agent,
    adversary: &dyn Adversary,
    dist: &ContextDistribution,
    horizon: usize,
    seed: u64,
    config_hash: &str,
) -> Result<Trace> {
    let mut records = Vec::with_capacity(horizon);
    let mut cumulative_loss = Vec::with_capacity(horizon);
    let mut total = 0.0;
    for round in agent.round()..=horizon {
        let record = run_round(agent, adversary, dist, round, seed)?;
        total += record.realized_loss;
        cumulative_loss.push(total);
        records.push(record);
    }
    Ok(Trace {
        config_hash: config_hash.to_string(),
        algorithm: agent.algorithm(),
        seed,
        records,
        cumulative_loss,
    })
}

/// A validated configuration with its context distribution and adversary
/// materialized.
#[derive(Debug, Clone)]
pub struct Experiment {
    config: ExperimentConfig,
    dist: ContextDistribution,
    adversary: AdversarySpec,
    hash: String,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let model = ContextModel::new(config.dimension, config.context.clone())
            .map_err(|e| Error::config("context", e.to_string()))?;
        let dist = ContextDistribution::new(model).map_err(|e| Error::config("context", e.to_string()))?;
        let adversary = AdversarySpec::new(
            config.actions,
            config.dimension,
            config.horizon,
            &config.adversary,
            config.graph.clone(),
            dist.norm_bound(),
        )
        .map_err(|e| Error::config("adversary", e.to_string()))?;
        let hash = config.hash();
        Ok(Self {
            config,
            dist,
            adversary,
            hash,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn distribution(&self) -> &ContextDistribution {
        &self.dist
    }

    pub fn adversary(&self) -> &AdversarySpec {
        &self.adversary
    }

    pub fn config_hash(&self) -> &str {
        &self.hash
    }

    pub fn constants(&self) -> ProblemConstants {
        ProblemConstants {
            num_actions: self.config.actions,
            dim: self.config.dimension,
            norm_bound: self.dist.norm_bound(),
            smallest_eigenvalue: self.dist.smallest_eigenvalue(),
            horizon: self.config.horizon,
        }
    }

    /// Per-round independence bounds the uniform-exploration schedule sees
    /// for a trial with `seed`. Variants without side observations use `K`.
    pub fn alpha_bounds(&self, algorithm: &AlgorithmConfig, seed: u64) -> Result<Vec<f64>> {
        let k = self.config.actions;
        let horizon = self.config.horizon;
        if !algorithm.name.uses_side_observations() {
            return Ok(vec![k as f64; horizon]);
        }
        match algorithm.alpha_bounds {
            AlphaMode::Fixed(v) => Ok(vec![v; horizon]),
            AlphaMode::Exact if self.adversary.graph_is_time_invariant() => {
                let graph = self.adversary.adversary_graph(&mut graph_stream(&self.adversary, seed, 0))?;
                Ok(vec![graph.independence_number() as f64; horizon])
            }
            AlphaMode::Exact => (1..=horizon)
                .map(|t| {
                    let g = self.adversary.adversary_graph(&mut graph_stream(&self.adversary, seed, t))?;
                    Ok(g.independence_number() as f64)
                })
                .collect(),
        }
    }

    /// `(eta, gamma)` for a uniform-exploration entry: explicit overrides,
    /// otherwise the tuned schedule.
    pub fn uniform_params(&self, algorithm: &AlgorithmConfig, seed: u64) -> Result<UParams> {
        let constants = self.constants();
        let directed = algorithm.directed.unwrap_or_else(|| self.config.graph.is_directed());
        match (algorithm.eta, algorithm.gamma) {
            (Some(eta), Some(gamma)) => UParams::new(eta, gamma, directed),
            (Some(eta), None) => UParams::coupled(eta, &constants, directed),
            (None, _) => {
                let alphas = self.alpha_bounds(algorithm, seed)?;
                if directed {
                    schedule_u_directed(&constants, &alphas)
                } else {
                    schedule_u_undirected(&constants, &alphas)
                }
            }
        }
    }

    pub fn build_agent(&self, algorithm: &AlgorithmConfig, seed: u64) -> Result<Agent> {
        let constants = self.constants();
        if algorithm.name.is_implicit_exploration() {
            Agent::implicit(algorithm.name, algorithm.alpha_bounds, &constants, &self.dist)
        } else {
            Agent::uniform(algorithm.name, self.uniform_params(algorithm, seed)?, &constants, &self.dist)
        }
    }

    /// Deterministic in `(config, algorithm, seed)`.
    pub fn run_trial(&self, algorithm: &AlgorithmConfig, seed: u64) -> Result<Trace> {
        let mut agent = self.build_agent(algorithm, seed)?;
        simulate(&mut agent, &self.adversary, &self.dist, self.config.horizon, seed, &self.hash)
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.config.base_seed.wrapping_add(trial as u64)
    }

    /// Runs every configured algorithm for every trial, in parallel over
    /// trials. `on_trace` sees each finished trace before it is dropped.
    pub fn run<F>(&self, on_trace: F) -> Result<ExperimentResults>
    where
        F: Fn(usize, &Trace) -> Result<()> + Sync,
    {
        let benchmark = BenchmarkPolicy::build(&self.adversary, self.config.horizon)?;
        let rounds = checkpoint_rounds(self.config.horizon, self.config.output.checkpoints);
        let jobs: Vec<(usize, usize)> = (0..self.config.algorithms.len())
            .flat_map(|a| (0..self.config.trials).map(move |t| (a, t)))
            .collect();
        let curves = jobs
            .par_iter()
            .map(|&(a, trial)| {
                let algorithm = &self.config.algorithms[a];
                let attach = |e: Error| Error::AtTrial {
                    algorithm: algorithm.name.to_string(),
                    trial,
                    source: Box::new(e),
                };
                let trace = self.run_trial(algorithm, self.trial_seed(trial)).map_err(attach)?;
                on_trace(trial, &trace).map_err(attach)?;
                let curve = regret_curve(&trace, &benchmark, &self.adversary).map_err(attach)?;
                Ok(curve.at_rounds(&rounds))
            })
            .collect::<Result<Vec<_>>>()?;

        let mut per_algorithm = Vec::with_capacity(self.config.algorithms.len());
        for (a, chunk) in curves.chunks(self.config.trials).enumerate() {
            per_algorithm.push(AlgorithmResult {
                algorithm: self.config.algorithms[a].name,
                final_regrets: chunk.iter().map(|c| *c.values.last().unwrap_or(&0.0)).collect(),
                curve: aggregate(chunk)?,
            });
        }
        Ok(ExperimentResults {
            config_hash: self.hash.clone(),
            results: per_algorithm,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmResult {
    pub algorithm: Algorithm,
    /// Regret at the horizon, one entry per trial in seed order.
    pub final_regrets: Vec<f64>,
    pub curve: AggregateCurve,
}

impl AlgorithmResult {
    pub fn mean_final(&self) -> f64 {
        self.final_regrets.iter().sum::<f64>() / self.final_regrets.len() as f64
    }

    /// Sample standard deviation of the final regrets.
    pub fn std_final(&self) -> f64 {
        let n = self.final_regrets.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.mean_final();
        (self.final_regrets.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResults {
    pub config_hash: String,
    pub results: Vec<AlgorithmResult>,
}

impl ExperimentResults {
    pub fn get(&self, algorithm: Algorithm) -> Option<&AlgorithmResult> {
        self.results.iter().find(|r| r.algorithm == algorithm)
    }
}

/// Convenience wrapper: validates `config` and runs it.
pub fn run_experiment(config: ExperimentConfig) -> Result<ExperimentResults> {
    Experiment::new(config)?.run(|_, _| Ok(()))
}

/// Rebuilds the agent's state round by round from a trace and checks that
/// each recorded policy is what the state at that point produces for the
/// recorded context. Returns the largest absolute deviation.
pub fn replay_policies(experiment: &Experiment, algorithm: &AlgorithmConfig, trace: &Trace) -> Result<f64> {
    let mut agent = experiment.build_agent(algorithm, trace.seed)?;
    let mut worst: f64 = 0.0;
    for record in &trace.records {
        let policy = agent.policy(&record.context)?;
        for (a, b) in policy.probabilities().iter().zip(record.policy.probabilities()) {
            worst = worst.max((a - b).abs());
        }
        let graph = if algorithm.name.uses_side_observations() {
            let mut rng = graph_stream(&experiment.adversary, trace.seed, record.round);
            experiment.adversary.adversary_graph(&mut rng)?
        } else {
            FeedbackGraph::edgeless(experiment.config.actions)?
        };
        agent.replay_step(record.context.clone(), record.policy.clone(), record.action)?;
        let table = experiment.adversary.adversary_losses(record.round)?;
        let losses = record
            .observation_set
            .members
            .iter()
            .map(|&i| (i, table.loss(i, record.context.as_slice())))
            .collect();
        let observation = Observation {
            set: record.observation_set.clone(),
            losses,
        };
        agent.update(&graph, &observation, &record.oracle)?;
    }
    Ok(worst)
}
