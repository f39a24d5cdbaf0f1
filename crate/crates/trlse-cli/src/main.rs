//! Command-line experiment runner.

use std::path::PathBuf;

use anyhow::Context;
use clap::Parser;

use trlse_cli::config::{resolve, Options};
use trlse_cli::experiment::run_experiment;

/// Level set estimation experiment runner: trust-region estimation and
/// baselines on synthetic benchmarks, with seeded repetitions and CSV output.
#[derive(Parser, Debug)]
#[command(name = "trlse", version, about)]
struct Cli {
    /// TOML config file; command-line flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Benchmark function: levy, ackley, rosenbrock, trid, mishra03.
    #[arg(long)]
    problem: Option<String>,
    /// Input dimension.
    #[arg(long)]
    dim: Option<usize>,
    /// Method: trlse, random, straddle.
    #[arg(long)]
    method: Option<String>,
    /// Total evaluation budget.
    #[arg(long)]
    budget: Option<usize>,
    /// Number of simultaneous trust regions.
    #[arg(long)]
    regions: Option<usize>,
    /// Initial region volume.
    #[arg(long)]
    v_init: Option<f64>,
    /// Maximum region volume.
    #[arg(long)]
    v_max: Option<f64>,
    /// Confidence parameter.
    #[arg(long)]
    beta: Option<f64>,
    /// Kernel family: matern52, rbf, rq.
    #[arg(long)]
    kernel: Option<String>,
    /// Global acquisition: straddle, thompson.
    #[arg(long)]
    acq_global: Option<String>,
    /// Local acquisition: straddle, thompson.
    #[arg(long)]
    acq_local: Option<String>,
    /// Volume adjustment: sigmoid[:a,b], linear[:slope,intercept], constant.
    #[arg(long)]
    s_fn: Option<String>,
    /// Base seed; repetition r uses seed + r.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of seeded repetitions.
    #[arg(long)]
    reps: Option<usize>,
    /// Random test points per classifier evaluation.
    #[arg(long)]
    test_size: Option<usize>,
    /// Steps between classifier snapshots.
    #[arg(long)]
    eval_every: Option<usize>,
    /// Output directory for CSV, summary, and metadata files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Target superlevel-set fraction for threshold calibration.
    #[arg(long)]
    fraction: Option<f64>,
    /// Observation noise relative to the calibrated value spread.
    #[arg(long)]
    noise: Option<f64>,
    /// Monte-Carlo samples for threshold calibration.
    #[arg(long)]
    calibration_samples: Option<usize>,
    /// Threshold cache file shared across runs.
    #[arg(long)]
    threshold_cache: Option<PathBuf>,
    /// Ablation: re-initialize regions at uniform locations.
    #[arg(long)]
    random_reinit: bool,
    /// Ablation: use only the global GP for local computations.
    #[arg(long)]
    single_gp: bool,
    /// Ablation: freeze region volumes (constant adjustment).
    #[arg(long)]
    constant_s: bool,
}

impl Cli {
    fn into_options(self) -> (Option<PathBuf>, Options) {
        let config = self.config;
        let options = Options {
            problem: self.problem,
            dim: self.dim,
            method: self.method,
            budget: self.budget,
            regions: self.regions,
            v_init: self.v_init,
            v_max: self.v_max,
            beta: self.beta,
            kernel: self.kernel,
            acq_global: self.acq_global,
            acq_local: self.acq_local,
            s_fn: self.s_fn,
            seed: self.seed,
            reps: self.reps,
            test_size: self.test_size,
            eval_every: self.eval_every,
            out: self.out,
            fraction: self.fraction,
            noise: self.noise,
            calibration_samples: self.calibration_samples,
            threshold_cache: self.threshold_cache,
            random_reinit: if self.random_reinit { Some(true) } else { None },
            single_gp: if self.single_gp { Some(true) } else { None },
            constant_s: if self.constant_s { Some(true) } else { None },
        };
        (config, options)
    }
}

fn main() -> anyhow::Result<()> {
    let (config_path, cli_options) = Cli::parse().into_options();
    let options = match config_path {
        Some(path) => {
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("reading config {}", path.display()))?;
            cli_options.or(Options::from_toml(&text)?)
        }
        None => cli_options,
    };
    let spec = resolve(options)?;
    eprintln!(
        "running {} on {} (budget {}, {} repetitions, seed {})",
        spec.method.name(),
        spec.problem_tag(),
        spec.run.budget,
        spec.repetitions,
        spec.run.seed
    );
    let output = run_experiment(&spec).context("experiment failed")?;
    for path in &output.csv_paths {
        println!("{}", path.display());
    }
    println!("{}", output.summary_path.display());
    println!("{}", output.metadata_path.display());
    eprintln!(
        "threshold {:.6} | final F1 per repetition: {}",
        output.threshold,
        output
            .final_f1
            .iter()
            .map(|f| format!("{f:.4}"))
            .collect::<Vec<_>>()
            .join(" ")
    );
    Ok(())
}
