//! Benchmark policy, regret curves and cross-trial aggregation.

use std::io::Write;

use serde::Serialize;

use crate::config::OutputFormat;
use crate::environment::{dot, Adversary, LossTable};
use crate::error::{Error, Result};
use crate::simulator::{ExperimentResults, Trace};

/// Best fixed context-to-action mapping in hindsight for an oblivious
/// adversary: `x -> argmin_j <x, sum_t theta_{j,t}>`.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkPolicy {
    horizon: usize,
    cumulative_theta: LossTable,
}

impl BenchmarkPolicy {
    pub fn build(adversary: &dyn Adversary, horizon: usize) -> Result<Self> {
        if !adversary.is_oblivious() {
            return Err(Error::InvalidAdversary(
                "the benchmark policy needs an oblivious adversary".into(),
            ));
        }
        let mut cumulative_theta = LossTable::zeros(adversary.num_actions(), adversary.dim());
        for round in 1..=horizon {
            cumulative_theta.add_assign(&adversary.oblivious_losses(round)?);
        }
        Ok(Self {
            horizon,
            cumulative_theta,
        })
    }

    pub fn from_cumulative(horizon: usize, cumulative_theta: LossTable) -> Self {
        Self {
            horizon,
            cumulative_theta,
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn cumulative_theta(&self) -> &LossTable {
        &self.cumulative_theta
    }

    /// Lowest index among the minimizers.
    pub fn decision(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_value = f64::INFINITY;
        for j in 0..self.cumulative_theta.num_actions() {
            let value = dot(x, self.cumulative_theta.row(j));
            if value < best_value {
                best = j;
                best_value = value;
            }
        }
        best
    }
}

/// Cumulative regret at a list of rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretCurve {
    pub rounds: Vec<usize>,
    pub values: Vec<f64>,
}

impl RegretCurve {
    /// Curve over every round from per-round loss gaps.
    pub fn from_gaps(gaps: &[f64]) -> Self {
        let mut total = 0.0;
        Self {
            rounds: (1..=gaps.len()).collect(),
            values: gaps
                .iter()
                .map(|g| {
                    total += g;
                    total
                })
                .collect(),
        }
    }

    /// Values at the requested rounds, which must be present in the curve.
    pub fn at_rounds(&self, rounds: &[usize]) -> Self {
        let values = rounds
            .iter()
            .map(|r| {
                let n = self.rounds.binary_search(r).expect("checkpoint present in curve");
                self.values[n]
            })
            .collect();
        Self {
            rounds: rounds.to_vec(),
            values,
        }
    }
}

/// Prefix sums of `<X_t, theta_{I_t,t}> - <X_t, theta_{pi*(X_t),t}>` over
/// the recorded contexts.
pub fn regret_curve(trace: &Trace, benchmark: &BenchmarkPolicy, adversary: &dyn Adversary) -> Result<RegretCurve> {
    if trace.len() != benchmark.horizon() {
        return Err(Error::DimensionMismatch {
            expected: benchmark.horizon(),
            actual: trace.len(),
        });
    }
    let mut gaps = Vec::with_capacity(trace.len());
    for record in &trace.records {
        let theta = adversary.oblivious_losses(record.round)?;
        let x = record.context.as_slice();
        let best = benchmark.decision(x);
        gaps.push(record.realized_loss - theta.loss(best, x));
    }
    Ok(RegretCurve::from_gaps(&gaps))
}

/// Pointwise mean and sample standard deviation across trials.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateCurve {
    pub rounds: Vec<usize>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub trials: usize,
}

pub fn aggregate(curves: &[RegretCurve]) -> Result<AggregateCurve> {
    let first = curves
        .first()
        .ok_or_else(|| Error::InvalidParameter("cannot aggregate an empty list of curves".into()))?;
    if let Some(bad) = curves.iter().find(|c| c.rounds != first.rounds) {
        return Err(Error::DimensionMismatch {
            expected: first.rounds.len(),
            actual: bad.rounds.len(),
        });
    }
    let n = curves.len() as f64;
    let len = first.rounds.len();
    let mut mean = vec![0.0; len];
    let mut std = vec![0.0; len];
    for p in 0..len {
        let m = curves.iter().map(|c| c.values[p]).sum::<f64>() / n;
        mean[p] = m;
        if curves.len() > 1 {
            let ss: f64 = curves.iter().map(|c| (c.values[p] - m).powi(2)).sum();
            std[p] = (ss / (n - 1.0)).sqrt();
        }
    }
    Ok(AggregateCurve {
        rounds: first.rounds.clone(),
        mean,
        std,
        trials: curves.len(),
    })
}

/// About `count` evenly spaced rounds in `1..=horizon`, always ending at
/// the horizon.
pub fn checkpoint_rounds(horizon: usize, count: usize) -> Vec<usize> {
    if horizon == 0 {
        return Vec::new();
    }
    let stride = (horizon / count.max(1)).max(1);
    let mut rounds: Vec<usize> = (1..)
        .map(|k| k * stride)
        .take_while(|&r| r <= horizon)
        .collect();
    if rounds.last() != Some(&horizon) {
        rounds.push(horizon);
    }
    rounds
}

pub const CSV_HEADER: &str = "round,algorithm,mean_regret,std_regret,trials";

#[derive(Serialize)]
struct ResultRow<'a> {
    round: usize,
    algorithm: &'a str,
    mean_regret: f64,
    std_regret: f64,
    trials: usize,
}

/// Writes one row per (checkpoint, algorithm), grouped by algorithm.
pub fn write_results<W: Write>(out: &mut W, results: &ExperimentResults, format: OutputFormat) -> Result<()> {
    if format == OutputFormat::Csv {
        writeln!(out, "{CSV_HEADER}")?;
    }
    for result in &results.results {
        let curve = &result.curve;
        for p in 0..curve.rounds.len() {
            let row = ResultRow {
                round: curve.rounds[p],
                algorithm: result.algorithm.selector(),
                mean_regret: curve.mean[p],
                std_regret: curve.std[p],
                trials: curve.trials,
            };
            match format {
                OutputFormat::Csv => writeln!(
                    out,
                    "{},{},{},{},{}",
                    row.round, row.algorithm, row.mean_regret, row.std_regret, row.trials
                )?,
                OutputFormat::Jsonl => writeln!(out, "{}", serde_json::to_string(&row)?)?,
            }
        }
    }
    Ok(())
}
