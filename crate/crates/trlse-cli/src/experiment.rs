//! Seeded experiment execution and metrics.
//!
//! One CSV per (method, seed), a metadata key=value file per experiment, and
//! a median/IQR summary CSV across repetitions. Replays are deterministic:
//! identical specs and seeds produce identical CSV bytes except for the
//! wall-clock column.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use trlse::engine::{
    baseline_initialize, baseline_step, initialize, snapshot, step, BaselineKind, Classifier,
    Label, RunConfig, RunState,
};
use trlse::problems::{BenchmarkFunction, Problem, ProblemBuilder};
use trlse::util::{derive_seed, fnv1a, stream_rng};
use trlse::{Error, Result};

use crate::summary::{summarize, write_summary_csv};

/// Versioned CSV schema tag written as the first line of every metrics file.
pub const CSV_SCHEMA: &str = "lse-metrics-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Trlse,
    Random,
    Straddle,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Trlse => "trlse",
            Method::Random => "random",
            Method::Straddle => "straddle",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "trlse" => Ok(Method::Trlse),
            "random" => Ok(Method::Random),
            "straddle" => Ok(Method::Straddle),
            other => Err(Error::InvalidParameter(format!("unknown method `{other}`"))),
        }
    }
}

/// A full experiment: problem, method, run configuration, repetitions, and
/// evaluation settings.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub function: BenchmarkFunction,
    pub dim: usize,
    pub method: Method,
    pub run: RunConfig,
    pub repetitions: usize,
    pub test_size: usize,
    /// Steps between classifier snapshots.
    pub eval_every: usize,
    pub out_dir: PathBuf,
    pub superlevel_fraction: f64,
    pub relative_noise: f64,
    pub calibration_samples: usize,
    pub threshold_cache: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions < 1 {
            return Err(Error::InvalidParameter("need at least one repetition".into()));
        }
        if self.test_size < 1000 {
            return Err(Error::InvalidParameter("test_size must be at least 1000".into()));
        }
        if self.eval_every < 1 {
            return Err(Error::InvalidParameter("eval_every must be at least 1".into()));
        }
        // The run threshold is a calibration output, not a user input; check
        // the rest of the run configuration with a placeholder.
        let mut run = self.run.clone();
        run.threshold = 0.0;
        run.validate()
    }

    pub fn problem_tag(&self) -> String {
        format!("{}{}", self.function.name(), self.dim)
    }

    pub fn build_problem(&self) -> Result<Problem> {
        let mut builder = ProblemBuilder::new(self.function, self.dim)
            .fraction(self.superlevel_fraction)
            .sample_count(self.calibration_samples)
            .relative_noise(self.relative_noise);
        if let Some(cache) = &self.threshold_cache {
            builder = builder.cache(cache);
        }
        builder.build()
    }
}

/// Snapshot evaluation defaults from the benchmark table, keyed by
/// `(function, dim)`; falls back to dimension heuristics elsewhere.
pub fn table_region_settings(function: BenchmarkFunction, dim: usize) -> Option<(f64, f64, usize)> {
    match (function, dim) {
        (BenchmarkFunction::Mishra03, 2) => Some((1e-4, 5e-2, 10)),
        (BenchmarkFunction::Levy, 10) => Some((1e-5, 1e-1, 40)),
        (BenchmarkFunction::Levy, 100) => Some((1e-30, 1e-2, 50)),
        (BenchmarkFunction::Ackley, 200) => Some((1e-60, 1e-2, 200)),
        (BenchmarkFunction::Trid, 1000) | (BenchmarkFunction::Rosenbrock, 1000) => {
            Some((1e-300, 1e-2, 50))
        }
        _ => None,
    }
}

/// Default snapshot cadence: every step up to 100 dimensions, every fifth
/// step beyond (snapshots cost posterior sweeps over the whole test set).
pub fn default_eval_every(dim: usize) -> usize {
    if dim <= 100 {
        1
    } else {
        5
    }
}

/// Confusion counts and derived scores with superlevel as the positive
/// class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

/// Scores predictions against ground truth. Precision, recall, and F1 are
/// zero when their denominators vanish.
pub fn metrics_from_labels(predicted: &[Label], truth: &[Label]) -> Metrics {
    assert_eq!(predicted.len(), truth.len());
    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (p, t) in predicted.iter().zip(truth) {
        match (p, t) {
            (Label::Superlevel, Label::Superlevel) => tp += 1,
            (Label::Superlevel, Label::Sublevel) => fp += 1,
            (Label::Sublevel, Label::Superlevel) => fn_ += 1,
            (Label::Sublevel, Label::Sublevel) => tn += 1,
        }
    }
    let precision = if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 };
    let recall = if tp + fn_ > 0 { tp as f64 / (tp + fn_) as f64 } else { 0.0 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Metrics { f1, precision, recall, tp, fp, fn_, tn }
}

/// The fixed test set for a `(problem, seed)` pair: uniform points on the
/// unit cube, independent of the method, so every method and iteration is
/// scored on identical points.
pub fn test_points(problem: &Problem, seed: u64, test_size: usize) -> Vec<Vec<f64>> {
    let key = derive_seed(seed, "test-set", fnv1a(problem.name().as_bytes()));
    let mut rng = stream_rng(key, "points", 0);
    (0..test_size)
        .map(|_| (0..problem.dim()).map(|_| rng.gen::<f64>()).collect())
        .collect()
}

/// Scores a classifier on a fresh uniform test set drawn for `(problem,
/// seed)`.
pub fn evaluate_classifier(
    classifier: &Classifier,
    problem: &Problem,
    test_size: usize,
    seed: u64,
) -> Result<Metrics> {
    let points = test_points(problem, seed, test_size);
    let truth = problem.ground_truth(&points);
    let predicted = classifier.classify(&points)?;
    Ok(metrics_from_labels(&predicted, &truth))
}

/// One CSV row: a classifier snapshot scored on the shared test set.
#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub method: Method,
    pub seed: u64,
    pub iteration: usize,
    pub evaluations: usize,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub live_regions: usize,
    pub regions_initialized: usize,
    pub wall_ms: u64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl MetricsRow {
    pub fn csv_header() -> String {
        format!(
            "# schema={CSV_SCHEMA}\nmethod,seed,iteration,evaluations,f1,precision,recall,\
             live_regions,regions_initialized,wall_ms,tp,fp,fn,tn"
        )
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.method.name(),
            self.seed,
            self.iteration,
            self.evaluations,
            self.f1,
            self.precision,
            self.recall,
            self.live_regions,
            self.regions_initialized,
            self.wall_ms,
            self.tp,
            self.fp,
            self.fn_,
            self.tn
        )
    }
}

fn row_from_state(
    spec: &ExperimentSpec,
    state: &RunState,
    config: &RunConfig,
    points: &[Vec<f64>],
    truth: &[Label],
    started: Instant,
) -> Result<MetricsRow> {
    let classifier = snapshot(state, config);
    let predicted = classifier.classify(points)?;
    let m = metrics_from_labels(&predicted, truth);
    Ok(MetricsRow {
        method: spec.method,
        seed: config.seed,
        iteration: state.steps,
        evaluations: state.evaluations(),
        f1: m.f1,
        precision: m.precision,
        recall: m.recall,
        live_regions: state.regions.len(),
        regions_initialized: state.regions_initialized,
        wall_ms: started.elapsed().as_millis() as u64,
        tp: m.tp,
        fp: m.fp,
        fn_: m.fn_,
        tn: m.tn,
    })
}

/// Runs one repetition, snapshotting on the configured cadence plus the
/// final state. Also returns the final run state for diagnostics.
pub fn run_repetition(
    spec: &ExperimentSpec,
    problem: &Problem,
    rep_seed: u64,
    points: &[Vec<f64>],
    truth: &[Label],
) -> Result<(Vec<MetricsRow>, RunState)> {
    let mut config = spec.run.clone();
    config.seed = rep_seed;
    config.threshold = problem.threshold();
    let started = Instant::now();
    let mut rows = Vec::new();
    let mut state = match spec.method {
        Method::Trlse => initialize(problem, &config)?,
        Method::Random | Method::Straddle => baseline_initialize(problem, &config)?,
    };
    rows.push(row_from_state(spec, &state, &config, points, truth, started)?);
    let mut last_snapshot_step = 0;
    loop {
        let budget_open = match spec.method {
            Method::Trlse => !state.complete && state.evaluations() <= config.budget,
            _ => !state.complete && state.evaluations() < config.budget,
        };
        if !budget_open {
            break;
        }
        match spec.method {
            Method::Trlse => step(&mut state, problem, &config)?,
            Method::Random => baseline_step(BaselineKind::Random, &mut state, problem, &config)?,
            Method::Straddle => {
                baseline_step(BaselineKind::GlobalStraddle, &mut state, problem, &config)?
            }
        }
        if state.steps % spec.eval_every == 0 {
            rows.push(row_from_state(spec, &state, &config, points, truth, started)?);
            last_snapshot_step = state.steps;
        }
    }
    state.complete = true;
    if last_snapshot_step != state.steps {
        rows.push(row_from_state(spec, &state, &config, points, truth, started)?);
    }
    Ok((rows, state))
}

/// Paths produced by one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub csv_paths: Vec<PathBuf>,
    pub summary_path: PathBuf,
    pub metadata_path: PathBuf,
    pub threshold: f64,
    /// Final-row F1 per repetition, in seed order.
    pub final_f1: Vec<f64>,
    pub states: Vec<RunState>,
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}

fn write_rows(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut text = String::new();
    text.push_str(&MetricsRow::csv_header());
    text.push('\n');
    for row in rows {
        text.push_str(&row.to_csv());
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_truncation_marker(path: &Path, rows: &[MetricsRow], error: &Error) {
    // Best effort: a partial file with an explicit marker row beats a
    // missing file when a repetition dies mid-run.
    let _ = write_rows(path, rows);
    if let Ok(mut f) = fs::OpenOptions::new().append(true).open(path) {
        let _ = writeln!(f, "# truncated: {error}");
    }
}

/// Runs every repetition of the experiment (in parallel), writes one CSV per
/// seed, a metadata file, and the cross-repetition summary.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    fs::create_dir_all(&spec.out_dir).map_err(|e| io_err(&spec.out_dir, e))?;
    let problem = spec.build_problem()?;
    let tag = spec.problem_tag();

    let reps: Vec<u64> = (0..spec.repetitions as u64).map(|r| spec.run.seed + r).collect();
    type RepOutcome = (u64, PathBuf, Result<(Vec<MetricsRow>, RunState)>);
    let outcomes: Vec<RepOutcome> = reps
        .par_iter()
        .map(|&rep_seed| {
            let path = spec
                .out_dir
                .join(format!("{tag}_{}_seed{rep_seed}.csv", spec.method.name()));
            let points = test_points(&problem, rep_seed, spec.test_size);
            let truth = problem.ground_truth(&points);
            let result = run_repetition(spec, &problem, rep_seed, &points, &truth);
            (rep_seed, path, result)
        })
        .collect();

    let mut csv_paths = Vec::new();
    let mut all_rows = Vec::new();
    let mut final_f1 = Vec::new();
    let mut states = Vec::new();
    for (_, path, outcome) in outcomes {
        match outcome {
            Ok((rows, state)) => {
                write_rows(&path, &rows)?;
                csv_paths.push(path);
                final_f1.push(rows.last().map(|r| r.f1).unwrap_or(0.0));
                all_rows.push(rows);
                states.push(state);
            }
            Err(e) => {
                write_truncation_marker(&path, &[], &e);
                return Err(e);
            }
        }
    }

    let summary_path = spec.out_dir.join(format!("{tag}_{}_summary.csv", spec.method.name()));
    write_summary_csv(&summary_path, &summarize(&all_rows))
        .map_err(|e| io_err(&summary_path, e))?;

    let metadata_path = spec.out_dir.join(format!("{tag}_{}_meta.txt", spec.method.name()));
    write_metadata(&metadata_path, spec, problem.threshold(), problem.noise_std())?;

    Ok(ExperimentOutput {
        csv_paths,
        summary_path,
        metadata_path,
        threshold: problem.threshold(),
        final_f1,
        states,
    })
}

fn write_metadata(path: &Path, spec: &ExperimentSpec, threshold: f64, noise_std: f64) -> Result<()> {
    let ablations = &spec.run.ablations;
    let s_fn = match spec.run.s_function {
        trlse::region::SFunction::Sigmoid { a, b } => format!("sigmoid(a={a},b={b})"),
        trlse::region::SFunction::Linear { slope, intercept } => {
            format!("linear(slope={slope},intercept={intercept})")
        }
        trlse::region::SFunction::Constant => "constant".to_string(),
    };
    let text = format!(
        "schema=lse-meta-v1\nbuild={}\nproblem={}\ndim={}\nmethod={}\nbudget={}\nregions={}\n\
         v_init={:e}\nv_max={:e}\nbeta={}\nkernel={}\nacq_global={}\nacq_local={}\ns_fn={}\n\
         seed={}\nrepetitions={}\ntest_size={}\neval_every={}\nsuperlevel_fraction={}\n\
         relative_noise={}\ncalibration_samples={}\nthreshold={:.16e}\nnoise_std={:.16e}\n\
         random_reinit={}\nsingle_global_gp={}\nconstant_volume={}\n",
        env!("CARGO_PKG_VERSION"),
        spec.function.name(),
        spec.dim,
        spec.method.name(),
        spec.run.budget,
        spec.run.num_regions,
        spec.run.v_init,
        spec.run.v_max,
        spec.run.beta,
        spec.run.kernel_family.name(),
        spec.run.global_acquisition.name(),
        spec.run.local_acquisition.name(),
        s_fn,
        spec.run.seed,
        spec.repetitions,
        spec.test_size,
        spec.eval_every,
        spec.superlevel_fraction,
        spec.relative_noise,
        spec.calibration_samples,
        threshold,
        noise_std,
        ablations.random_reinit,
        ablations.single_global_gp,
        ablations.constant_volume,
    );
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Strips the wall-clock column so deterministic replays compare equal.
pub fn csv_without_wall_clock(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for line in text.lines() {
        if line.starts_with('#') || line.starts_with("method,") {
            out.push_str(line);
        } else {
            let fields: Vec<&str> = line.split(',').collect();
            for (i, f) in fields.iter().enumerate() {
                if i == 9 {
                    out.push_str("__");
                } else {
                    out.push_str(f);
                }
                if i + 1 < fields.len() {
                    out.push(',');
                }
            }
        }
        out.push('\n');
    }
    out
}
