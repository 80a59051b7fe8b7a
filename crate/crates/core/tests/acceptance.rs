//! Acceptance suite: prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::time::{Duration, Instant};

use lgcbandit::algorithms::{
    q_bound_u_directed, q_value_ix, schedule_ix, schedule_u_directed, schedule_u_undirected, Algorithm,
    ProblemConstants,
};
use lgcbandit::config::{AlgorithmConfig, ExperimentConfig, OutputFormat};
use lgcbandit::environment::LossModel;
use lgcbandit::evaluation::write_results;
use lgcbandit::graph::{FeedbackGraph, GraphSpec};
use lgcbandit::simulator::{Experiment, ExperimentResults};
use lgcbandit::verification::{
    audit_independence, audit_ix_identity, audit_lemma, audit_paper_graph_equality, audit_unbiasedness,
    regret_bound_value, BoundVariant, LemmaKind,
};

const SEED: u64 = 20_240_601;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Verdict) -> Verdict {
    let start = Instant::now();
    let mut v = f();
    let elapsed = start.elapsed();
    v.detail = format!("{} [{:.2}s]", v.detail, elapsed.as_secs_f64());
    if let Some(limit) = limit {
        if elapsed > limit {
            v.passed = false;
            v.detail = format!("{} exceeds {}s", v.detail, limit.as_secs());
        }
    }
    v
}

fn desk_config() -> ExperimentConfig {
    let mut config = ExperimentConfig::preset("paper_fig2").expect("preset parses");
    config.horizon = 20_000;
    config.trials = 20;
    config.base_seed = SEED;
    config.adversary = LossModel::SuddenChangeSynthetic {
        change_point: Some(10_000),
        first_scale: 0.1,
        second_scale: 0.05,
    };
    config.validate().expect("desk config valid");
    config
}

fn csv_bytes(results: &ExperimentResults) -> Vec<u8> {
    let mut out = Vec::new();
    write_results(&mut out, results, OutputFormat::Csv).expect("in-memory write");
    out
}

fn criterion_1() -> Verdict {
    match audit_unbiasedness(100, SEED) {
        Ok(o) => verdict(o.passed, format!("max deviation {:.3e} over {} instances", o.worst, o.instances)),
        Err(e) => verdict(false, e.to_string()),
    }
}

fn criterion_2() -> Verdict {
    match audit_ix_identity(100, SEED + 1) {
        Ok(o) => verdict(
            o.passed,
            format!("max identity error or optimism excess {:.3e} over {} instances", o.worst, o.instances),
        ),
        Err(e) => verdict(false, e.to_string()),
    }
}

fn criterion_3() -> Verdict {
    let mut details = Vec::new();
    let mut passed = true;
    for (n, kind) in LemmaKind::ALL.into_iter().enumerate() {
        match audit_lemma(kind, 200, SEED + 2 + n as u64) {
            Ok(o) => {
                passed &= o.passed;
                details.push(format!("{}: max lhs-rhs {:.3e}", o.name, o.worst));
            }
            Err(e) => {
                passed = false;
                details.push(e.to_string());
            }
        }
    }
    match audit_paper_graph_equality() {
        Ok(o) => {
            passed &= o.passed;
            details.push(format!("equality case error {:.1e}", o.worst));
        }
        Err(e) => {
            passed = false;
            details.push(e.to_string());
        }
    }
    verdict(passed, details.join("; "))
}

fn criterion_4() -> Verdict {
    let fixed = [
        (FeedbackGraph::complete_plus_isolated(9, 1), 2usize),
        (FeedbackGraph::complete(10), 1),
        (FeedbackGraph::edgeless(10), 10),
    ];
    let mut passed = true;
    let mut seen = Vec::new();
    for (g, want) in fixed {
        let got = g.and_then(|g| g.independence_number_exact()).ok();
        passed &= got == Some(want);
        seen.push(format!("{got:?}"));
    }
    match audit_independence(500, SEED + 5) {
        Ok(o) => verdict(
            passed && o.passed,
            format!("paper/complete/edgeless = {}; {} random-graph failures", seen.join("/"), o.worst),
        ),
        Err(e) => verdict(false, e.to_string()),
    }
}

/// Pooled standard error of the difference of two means over `n` paired trials.
fn pooled_se(a: &[f64], b: &[f64]) -> f64 {
    let var = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    };
    ((var(a) + var(b)) / a.len() as f64).sqrt()
}

fn criterion_5(results: &ExperimentResults) -> Verdict {
    let pairs = [
        (Algorithm::Exp3LgcU, Algorithm::Exp3LgcUStar),
        (Algorithm::Exp3LgcIx, Algorithm::Exp3LgcIxStar),
    ];
    let mut passed = true;
    let mut details = Vec::new();
    for (with, without) in pairs {
        let a = results.get(with).expect("configured");
        let b = results.get(without).expect("configured");
        let margin = b.mean_final() - a.mean_final();
        let se = pooled_se(&a.final_regrets, &b.final_regrets);
        passed &= margin >= se;
        details.push(format!(
            "{with} {:.2} vs {without} {:.2} (margin {:.2}, pooled SE {:.2})",
            a.mean_final(),
            b.mean_final(),
            margin,
            se
        ));
    }
    verdict(passed, details.join("; "))
}

fn criterion_6(experiment: &Experiment, results: &ExperimentResults) -> Verdict {
    let constants = experiment.constants();
    let alphas = match experiment.alpha_bounds(&AlgorithmConfig::new(Algorithm::Exp3LgcU), SEED) {
        Ok(a) => a,
        Err(e) => return verdict(false, e.to_string()),
    };
    let bounds = (
        regret_bound_value(BoundVariant::Theorem1Undirected, &constants, &alphas),
        regret_bound_value(BoundVariant::Theorem2, &constants, &alphas),
    );
    let (Ok(u_bound), Ok(ix_bound)) = bounds else {
        return verdict(false, format!("bound evaluation failed: {bounds:?}"));
    };
    let u = results.get(Algorithm::Exp3LgcU).expect("configured").mean_final();
    let ix = results.get(Algorithm::Exp3LgcIx).expect("configured").mean_final();
    verdict(
        u <= u_bound && ix <= ix_bound,
        format!("U {u:.2} <= {u_bound:.2}; IX {ix:.2} <= {ix_bound:.2}"),
    )
}

fn criterion_7() -> Verdict {
    let mut config = desk_config();
    config.adversary = LossModel::SuddenChangeSynthetic {
        change_point: Some(config.horizon),
        first_scale: 0.1,
        second_scale: 0.05,
    };
    config.algorithms = vec![AlgorithmConfig::new(Algorithm::Exp3LgcU)];
    let results = match Experiment::new(config).and_then(|e| e.run(|_, _| Ok(()))) {
        Ok(r) => r,
        Err(e) => return verdict(false, e.to_string()),
    };
    let curve = &results.results[0].curve;
    let at = |round: usize| curve.mean[curve.rounds.iter().position(|&r| r == round).expect("checkpoint")];
    let (half, full) = (at(10_000), at(20_000));
    let ratio = full / half;
    verdict(
        half > 0.0 && ratio <= 1.8,
        format!("R(T/2) = {half:.2}, R(T) = {full:.2}, ratio {ratio:.3} (limit 1.8)"),
    )
}

fn criterion_8() -> Verdict {
    // Frozen from an independent 30-digit evaluation of the closed forms.
    let paper = |horizon| ProblemConstants {
        num_actions: 10,
        dim: 10,
        norm_bound: 1.0,
        smallest_eigenvalue: 0.025,
        horizon,
    };
    let mut worst: f64 = 0.0;
    let mut check = |got: f64, want: f64| worst = worst.max((got / want - 1.0).abs());
    let cases: [(usize, f64, bool, f64, f64); 8] = [
        (100_000, 2.0, false, 1.675_717_936_053_753_3e-4, 0.067_028_717_442_150_132),
        (100_000, 10.0, false, 1.599_508_637_396_027_1e-4, 0.063_980_345_495_841_083),
        (100_000, 2.0, true, 1.066_003_581_778_052_2e-4, 0.042_640_143_271_122_087),
        (100_000, 10.0, true, 9.128_709_291_752_768_6e-5, 0.036_514_837_167_011_074),
        (20_000, 2.0, false, 3.747_019_216_131_838_1e-4, 0.149_880_768_645_273_52),
        (20_000, 10.0, false, 3.576_610_043_815_578_7e-4, 0.143_064_401_752_623_15),
        (20_000, 2.0, true, 2.383_656_473_113_980_8e-4, 0.095_346_258_924_559_232),
        (20_000, 10.0, true, 2.041_241_452_319_315_1e-4, 0.081_649_658_092_772_603),
    ];
    for (horizon, alpha, directed, eta, gamma) in cases {
        let alphas = vec![alpha; horizon];
        let params = if directed {
            schedule_u_directed(&paper(horizon), &alphas)
        } else {
            schedule_u_undirected(&paper(horizon), &alphas)
        };
        match params {
            Ok(p) => {
                check(p.eta, eta);
                check(p.gamma, gamma);
            }
            Err(e) => return verdict(false, e.to_string()),
        }
    }
    match schedule_ix(1, 10, 10, 0.0) {
        Ok(r) => {
            check(r.beta, 0.479_852_591_218_808_12);
            check(r.eta, 0.151_742_712_938_514_64);
        }
        Err(e) => return verdict(false, e.to_string()),
    }
    check(q_value_ix(1.0, 1, 1.0), 4.197_224_577_336_219_4);
    check(q_value_ix(2.0, 10, 0.25), 23.311_504_675_158_324);
    check(q_bound_u_directed(1.0, 1, 4.0 / std::f64::consts::E), 4.0);
    check(q_bound_u_directed(10.0, 10, 0.1), 239.658_581_884_319_28);
    verdict(worst <= 5e-11, format!("max relative error {worst:.2e} over 24 values"))
}

fn criterion_9(experiment: &Experiment, first_csv: &[u8]) -> Verdict {
    let second = match experiment.run(|_, _| Ok(())) {
        Ok(r) => csv_bytes(&r),
        Err(e) => return verdict(false, e.to_string()),
    };
    let identical = second == first_csv;

    let mut edgeless_config = experiment.config().clone();
    edgeless_config.graph = GraphSpec::Edgeless;
    let edgeless = Experiment::new(edgeless_config).expect("edgeless variant valid");
    let u = AlgorithmConfig::new(Algorithm::Exp3LgcU);
    let u_star = AlgorithmConfig::new(Algorithm::Exp3LgcUStar);
    let mut mismatched = 0;
    let seeds = 5;
    for trial in 0..seeds {
        let seed = experiment.trial_seed(trial);
        let a = edgeless.run_trial(&u, seed).map(|t| t.records);
        let b = experiment.run_trial(&u_star, seed).map(|t| t.records);
        match (a, b) {
            (Ok(a), Ok(b)) if a == b => {}
            _ => mismatched += 1,
        }
    }
    verdict(
        identical && mismatched == 0,
        format!(
            "CSV rerun identical: {identical} ({} bytes); edgeless U vs U* traces mismatched in {mismatched}/{seeds} seeds",
            first_csv.len()
        ),
    )
}

fn report(n: usize, name: &str, v: &Verdict) {
    let status = if v.passed { "PASS" } else { "FAIL" };
    println!("criterion {n} {status} {name}: {}", v.detail);
}

fn main() {
    // Run only when selected as a whole; `cargo test <filter>` passes a filter.
    if std::env::args().skip(1).any(|a| !a.starts_with('-') && a != "acceptance") {
        return;
    }
    let mut verdicts = Vec::new();
    let five_s = Some(Duration::from_secs(5));
    verdicts.push((1, "estimator unbiasedness", timed(five_s, criterion_1)));
    verdicts.push((2, "implicit exploration identity and optimism", timed(five_s, criterion_2)));
    verdicts.push((3, "graph lemma audits", timed(None, criterion_3)));
    verdicts.push((4, "independence number", timed(None, criterion_4)));

    let experiment = Experiment::new(desk_config()).expect("desk experiment");
    let start = Instant::now();
    let results = experiment.run(|_, _| Ok(()));
    let elapsed = start.elapsed();
    match results {
        Ok(results) => {
            let mut v5 = criterion_5(&results);
            v5.detail = format!("{} [{:.2}s]", v5.detail, elapsed.as_secs_f64());
            verdicts.push((5, "side observations lower final regret", v5));
            verdicts.push((6, "empirical regret below theoretical bounds", criterion_6(&experiment, &results)));
            verdicts.push((7, "sublinear regret growth", timed(None, criterion_7)));
            verdicts.push((8, "schedule fixtures", timed(None, criterion_8)));
            let csv = csv_bytes(&results);
            verdicts.push((9, "determinism and ablation equivalence", timed(None, || criterion_9(&experiment, &csv))));
        }
        Err(e) => {
            for (n, name) in [(5, "side observations lower final regret"), (6, "empirical regret below theoretical bounds")] {
                verdicts.push((n, name, verdict(false, format!("experiment failed: {e}"))));
            }
            verdicts.push((7, "sublinear regret growth", timed(None, criterion_7)));
            verdicts.push((8, "schedule fixtures", timed(None, criterion_8)));
            verdicts.push((9, "determinism and ablation equivalence", verdict(false, format!("experiment failed: {e}"))));
        }
    }
    for (n, name, v) in &verdicts {
        report(*n, name, v);
    }
    let failed = verdicts.iter().filter(|(_, _, v)| !v.passed).count();
    println!("acceptance: {} passed, {failed} failed", verdicts.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
