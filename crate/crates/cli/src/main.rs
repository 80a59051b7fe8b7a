use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;

use anyhow::{bail, Context as _, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use lgcbandit::algorithms::Algorithm;
use lgcbandit::config::{ExperimentConfig, OutputFormat, Overrides};
use lgcbandit::evaluation::write_results;
use lgcbandit::simulator::{Experiment, Trace};
use lgcbandit::verification::run_audit_suite;

const BUILD_ID: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Parser)]
#[command(name = "lgcbandit", version, about = "Contextual bandits with graph feedback: experiments and audits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Jsonl => OutputFormat::Jsonl,
        }
    }
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Config file path or preset name.
    #[arg(long, default_value = "paper_fig2")]
    config: String,
    #[arg(long)]
    trials: Option<usize>,
    /// Horizon T.
    #[arg(long)]
    horizon: Option<usize>,
    /// Base seed; trial n uses seed + n.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self, out: Option<PathBuf>, format: Option<Format>) -> Result<ExperimentConfig> {
        let overrides = Overrides {
            trials: self.trials,
            horizon: self.horizon,
            base_seed: self.seed,
            directory: out,
            format: format.map(Into::into),
        };
        Ok(ExperimentConfig::load(&self.config)?.with_overrides(&overrides)?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write aggregated regret curves plus a manifest.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory; overrides the config file.
        #[arg(long, env = "LGC_OUT_DIR")]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Worker threads for trials.
        #[arg(long)]
        threads: Option<usize>,
        /// Also write every trial's round records as JSON lines.
        #[arg(long)]
        dump_traces: bool,
    },
    /// Run the exact verification audits and print a pass/fail table.
    Verify {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print the resolved learning and exploration rates.
    ShowSchedule {
        #[command(flatten)]
        config: ConfigArgs,
        /// Restrict to one algorithm selector.
        #[arg(long)]
        algorithm: Option<String>,
    },
}

fn set_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    Ok(())
}

/// Writes through a `.partial` file and renames on success.
fn write_atomically(path: &Path, fill: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let partial = path.with_extension(format!(
        "{}.partial",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    let result = (|| {
        let mut writer = BufWriter::new(File::create(&partial)?);
        fill(&mut writer)?;
        writer.flush()?;
        Ok(())
    })();
    match result {
        Ok(()) => fs::rename(&partial, path).with_context(|| format!("renaming {}", partial.display())),
        Err(e) => {
            let _ = fs::remove_file(&partial);
            Err(e)
        }
    }
}

fn dump_trace(dir: &Path, trial: usize, trace: &Trace) -> lgcbandit::Result<()> {
    let path = dir.join(format!("{}-trial{trial:04}.jsonl", trace.algorithm));
    let partial = path.with_extension("jsonl.partial");
    let mut writer = BufWriter::new(File::create(&partial)?);
    trace.write_jsonl(&mut writer)?;
    writer.flush()?;
    drop(writer);
    fs::rename(&partial, &path)?;
    Ok(())
}

fn run(config: ExperimentConfig, dump_traces: bool) -> Result<()> {
    let experiment = Experiment::new(config)?;
    let config = experiment.config();
    let dir = config.output.directory.clone().unwrap_or_else(|| PathBuf::from("results"));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let extension = match config.output.format {
        OutputFormat::Csv => "csv",
        OutputFormat::Jsonl => "jsonl",
    };
    let results_path = dir.join(format!("results.{extension}"));
    let manifest_path = dir.join("manifest.json");
    let trace_dir = dir.join("traces");
    if dump_traces {
        fs::create_dir_all(&trace_dir)?;
    }

    let manifest = |status: &str, error: Option<String>| {
        json!({
            "status": status,
            "error": error,
            "config_hash": experiment.config_hash(),
            "base_seed": config.base_seed,
            "trials": config.trials,
            "horizon": config.horizon,
            "results": results_path.file_name().and_then(|n| n.to_str()),
            "build": BUILD_ID,
            "config": config,
        })
    };

    let log = Mutex::new(());
    let outcome = experiment
        .run(|trial, trace| {
            if dump_traces {
                dump_trace(&trace_dir, trial, trace)?;
            }
            let _guard = log.lock().expect("log lock");
            let total = trace.cumulative_loss.last().copied().unwrap_or(0.0);
            eprintln!("{} trial {trial} (seed {}) done, cumulative loss {total:.4}", trace.algorithm, trace.seed);
            Ok(())
        })
        .map_err(anyhow::Error::from)
        .and_then(|results| {
            write_atomically(&results_path, |w| Ok(write_results(w, &results, config.output.format)?))?;
            Ok(results)
        });

    match outcome {
        Ok(results) => {
            write_atomically(&manifest_path, |w| {
                serde_json::to_writer_pretty(&mut *w, &manifest("complete", None))?;
                Ok(writeln!(w)?)
            })?;
            println!("{:<18} {:>14} {:>12}", "algorithm", "final regret", "std");
            for r in &results.results {
                println!("{:<18} {:>14.4} {:>12.4}", r.algorithm.selector(), r.mean_final(), r.std_final());
            }
            println!("wrote {} and {}", results_path.display(), manifest_path.display());
            Ok(())
        }
        Err(e) => {
            let _ = fs::remove_file(&results_path);
            let _ = write_atomically(&manifest_path, |w| {
                serde_json::to_writer_pretty(&mut *w, &manifest("incomplete", Some(format!("{e:#}"))))?;
                Ok(writeln!(w)?)
            });
            Err(e)
        }
    }
}

fn verify(seed: u64) -> Result<bool> {
    let outcomes = run_audit_suite(seed)?;
    println!("{:<46} {:>9} {:>12} {:>10}  result", "audit", "instances", "worst", "tolerance");
    for o in &outcomes {
        println!(
            "{:<46} {:>9} {:>12.3e} {:>10.0e}  {}",
            o.name,
            o.instances,
            o.worst,
            o.tolerance,
            if o.passed { "PASS" } else { "FAIL" }
        );
    }
    Ok(outcomes.iter().all(|o| o.passed))
}

fn show_schedule(config: ExperimentConfig, only: Option<&str>) -> Result<()> {
    let only: Option<Algorithm> = only.map(str::parse).transpose()?;
    let experiment = Experiment::new(config)?;
    let config = experiment.config();
    let constants = experiment.constants();
    println!(
        "K = {}, d = {}, T = {}, sigma = {}, lambda_min = {}",
        constants.num_actions, constants.dim, constants.horizon, constants.norm_bound, constants.smallest_eigenvalue
    );
    let mut shown = 0;
    for algorithm in config.algorithms.iter().filter(|a| only.is_none_or(|o| o == a.name)) {
        let agent = experiment.build_agent(algorithm, config.base_seed)?;
        if let Some(p) = agent.uniform_params() {
            println!("{}: eta = {:e}, gamma = {:e}, directed = {}", algorithm.name, p.eta, p.gamma, p.directed);
        } else if let Some(r) = agent.ix_rates() {
            println!("{}: eta_1 = {:e}, beta_1 = {:e}", algorithm.name, r.eta, r.beta);
        }
        shown += 1;
    }
    if shown == 0 {
        bail!("algorithm {} is not in the config", only.map(|a| a.selector()).unwrap_or_default());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            format,
            threads,
            dump_traces,
        } => set_threads(threads)
            .and_then(|()| config.load(out, format))
            .and_then(|c| run(c, dump_traces))
            .map(|()| true),
        Command::Verify { seed, threads } => set_threads(threads).and_then(|()| verify(seed)),
        Command::ShowSchedule { config, algorithm } => config
            .load(None, None)
            .and_then(|c| show_schedule(c, algorithm.as_deref()))
            .map(|()| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: one or more audits failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
