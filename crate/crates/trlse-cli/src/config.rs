//! Option resolution: command-line flags take precedence over a TOML config
//! file, which takes precedence over the built-in defaults.

use std::path::PathBuf;

use serde::Deserialize;

use trlse::acquisition::AcquisitionKind;
use trlse::engine::{default_region_settings, AblationFlags, RunConfig};
use trlse::kernel::KernelFamily;
use trlse::problems::BenchmarkFunction;
use trlse::region::SFunction;
use trlse::{Error, Result};

use crate::experiment::{default_eval_every, table_region_settings, ExperimentSpec, Method};

/// Raw option bag shared by the CLI parser and the config file. Every field
/// optional; `None` means "not given here".
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    pub problem: Option<String>,
    pub dim: Option<usize>,
    pub method: Option<String>,
    pub budget: Option<usize>,
    pub regions: Option<usize>,
    pub v_init: Option<f64>,
    pub v_max: Option<f64>,
    pub beta: Option<f64>,
    pub kernel: Option<String>,
    pub acq_global: Option<String>,
    pub acq_local: Option<String>,
    pub s_fn: Option<String>,
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub test_size: Option<usize>,
    pub eval_every: Option<usize>,
    pub out: Option<PathBuf>,
    pub fraction: Option<f64>,
    pub noise: Option<f64>,
    pub calibration_samples: Option<usize>,
    pub threshold_cache: Option<PathBuf>,
    pub random_reinit: Option<bool>,
    pub single_gp: Option<bool>,
    pub constant_s: Option<bool>,
}

impl Options {
    /// Field-wise precedence: `self` wins over `fallback`.
    pub fn or(self, fallback: Options) -> Options {
        Options {
            problem: self.problem.or(fallback.problem),
            dim: self.dim.or(fallback.dim),
            method: self.method.or(fallback.method),
            budget: self.budget.or(fallback.budget),
            regions: self.regions.or(fallback.regions),
            v_init: self.v_init.or(fallback.v_init),
            v_max: self.v_max.or(fallback.v_max),
            beta: self.beta.or(fallback.beta),
            kernel: self.kernel.or(fallback.kernel),
            acq_global: self.acq_global.or(fallback.acq_global),
            acq_local: self.acq_local.or(fallback.acq_local),
            s_fn: self.s_fn.or(fallback.s_fn),
            seed: self.seed.or(fallback.seed),
            reps: self.reps.or(fallback.reps),
            test_size: self.test_size.or(fallback.test_size),
            eval_every: self.eval_every.or(fallback.eval_every),
            out: self.out.or(fallback.out),
            fraction: self.fraction.or(fallback.fraction),
            noise: self.noise.or(fallback.noise),
            calibration_samples: self.calibration_samples.or(fallback.calibration_samples),
            threshold_cache: self.threshold_cache.or(fallback.threshold_cache),
            random_reinit: self.random_reinit.or(fallback.random_reinit),
            single_gp: self.single_gp.or(fallback.single_gp),
            constant_s: self.constant_s.or(fallback.constant_s),
        }
    }

    pub fn from_toml(text: &str) -> Result<Options> {
        toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("config file: {e}")))
    }
}

pub fn parse_kernel(name: &str) -> Result<KernelFamily> {
    match name.to_ascii_lowercase().as_str() {
        "matern52" | "matern" => Ok(KernelFamily::Matern52),
        "rbf" => Ok(KernelFamily::Rbf),
        "rq" | "rationalquadratic" => Ok(KernelFamily::RationalQuadratic),
        other => Err(Error::InvalidParameter(format!("unknown kernel `{other}`"))),
    }
}

pub fn parse_acquisition(name: &str) -> Result<AcquisitionKind> {
    match name.to_ascii_lowercase().as_str() {
        "straddle" => Ok(AcquisitionKind::Straddle),
        "thompson" | "ts" => Ok(AcquisitionKind::ThompsonLse),
        "c2lse" => Ok(AcquisitionKind::C2Lse),
        other => Err(Error::InvalidParameter(format!("unknown acquisition `{other}`"))),
    }
}

/// `sigmoid` and `linear` accept optional parameters:
/// `sigmoid:a,b` and `linear:slope,intercept`.
pub fn parse_s_function(name: &str) -> Result<SFunction> {
    let lower = name.to_ascii_lowercase();
    let (kind, args) = match lower.split_once(':') {
        Some((k, a)) => (k, Some(a)),
        None => (lower.as_str(), None),
    };
    let two = |args: &str| -> Result<(f64, f64)> {
        let parts: Vec<&str> = args.split(',').collect();
        if parts.len() != 2 {
            return Err(Error::InvalidParameter(format!("expected two parameters in `{args}`")));
        }
        let a = parts[0]
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad number in `{args}`")))?;
        let b = parts[1]
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad number in `{args}`")))?;
        Ok((a, b))
    };
    match kind {
        "sigmoid" => match args {
            None => Ok(SFunction::default_sigmoid()),
            Some(a) => {
                let (s, b) = two(a)?;
                SFunction::sigmoid(s, b)
            }
        },
        "linear" => match args {
            None => SFunction::linear(-4.0, 4.0),
            Some(a) => {
                let (s, b) = two(a)?;
                SFunction::linear(s, b)
            }
        },
        "constant" => Ok(SFunction::Constant),
        other => Err(Error::InvalidParameter(format!("unknown adjustment function `{other}`"))),
    }
}

/// Resolves a merged option bag into a validated experiment spec.
pub fn resolve(options: Options) -> Result<ExperimentSpec> {
    let problem_name = options
        .problem
        .ok_or_else(|| Error::InvalidParameter("--problem is required".into()))?;
    let function = BenchmarkFunction::parse(&problem_name)?;
    let dim = options.dim.unwrap_or(match function {
        BenchmarkFunction::Mishra03 => 2,
        _ => 10,
    });
    function.validate_dim(dim)?;
    let method = Method::parse(options.method.as_deref().unwrap_or("trlse"))?;

    let (table_v_init, table_v_max, table_regions) = table_region_settings(function, dim)
        .unwrap_or_else(|| default_region_settings(dim));
    let num_regions = options.regions.unwrap_or(table_regions);
    let budget = options.budget.unwrap_or_else(|| (num_regions * 8).max(200));

    let run = RunConfig {
        threshold: f64::NAN, // calibrated when the problem is built
        budget,
        v_init: options.v_init.unwrap_or(table_v_init),
        v_max: options.v_max.unwrap_or(table_v_max),
        num_regions,
        beta: options.beta.unwrap_or(1.96),
        global_acquisition: parse_acquisition(options.acq_global.as_deref().unwrap_or("straddle"))?,
        local_acquisition: parse_acquisition(options.acq_local.as_deref().unwrap_or("straddle"))?,
        kernel_family: parse_kernel(options.kernel.as_deref().unwrap_or("matern52"))?,
        s_function: parse_s_function(options.s_fn.as_deref().unwrap_or("sigmoid"))?,
        seed: options.seed.unwrap_or(0),
        ablations: AblationFlags {
            random_reinit: options.random_reinit.unwrap_or(false),
            single_global_gp: options.single_gp.unwrap_or(false),
            constant_volume: options.constant_s.unwrap_or(false),
        },
    };

    Ok(ExperimentSpec {
        function,
        dim,
        method,
        run,
        repetitions: options.reps.unwrap_or(1),
        test_size: options.test_size.unwrap_or(100_000),
        eval_every: options.eval_every.unwrap_or_else(|| default_eval_every(dim)),
        out_dir: options.out.unwrap_or_else(|| PathBuf::from("results")),
        superlevel_fraction: options
            .fraction
            .unwrap_or_else(|| function.default_superlevel_fraction()),
        relative_noise: options.noise.unwrap_or(0.01),
        calibration_samples: options.calibration_samples.unwrap_or(1_000_000),
        threshold_cache: options.threshold_cache,
    })
}
