//! Synthetic black-box benchmark problems with calibrated thresholds,
//! seeded observation noise, and ground-truth membership oracles.
//!
//! Thresholds are reconstructed from target superlevel fractions by
//! Monte-Carlo quantile calibration and can be cached in a plain-text sidecar
//! file so every run shares identical thresholds.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::engine::Label;
use crate::error::{Error, Result};
use crate::util::{derive_seed, hash_point, norm_ppf, stream_rng};

/// Closed-form benchmark families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchmarkFunction {
    Levy,
    Ackley,
    Rosenbrock,
    Trid,
    Mishra03,
}

impl BenchmarkFunction {
    pub fn name(self) -> &'static str {
        match self {
            BenchmarkFunction::Levy => "levy",
            BenchmarkFunction::Ackley => "ackley",
            BenchmarkFunction::Rosenbrock => "rosenbrock",
            BenchmarkFunction::Trid => "trid",
            BenchmarkFunction::Mishra03 => "mishra03",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "levy" => Ok(BenchmarkFunction::Levy),
            "ackley" => Ok(BenchmarkFunction::Ackley),
            "rosenbrock" => Ok(BenchmarkFunction::Rosenbrock),
            "trid" => Ok(BenchmarkFunction::Trid),
            "mishra03" => Ok(BenchmarkFunction::Mishra03),
            other => Err(Error::InvalidParameter(format!("unknown problem `{other}`"))),
        }
    }

    /// Raw evaluation domain per dimension.
    pub fn domain(self, dim: usize) -> (f64, f64) {
        match self {
            BenchmarkFunction::Levy => (-10.0, 10.0),
            BenchmarkFunction::Ackley => (-5.0, 10.0),
            BenchmarkFunction::Rosenbrock => (-5.0, 10.0),
            BenchmarkFunction::Trid => {
                let d = dim as f64;
                (-d * d, d * d)
            }
            BenchmarkFunction::Mishra03 => (-5.0, 5.0),
        }
    }

    /// Default calibration target for the superlevel fraction.
    pub fn default_superlevel_fraction(self) -> f64 {
        match self {
            BenchmarkFunction::Mishra03 => 0.615,
            _ => 0.20,
        }
    }

    pub fn validate_dim(self, dim: usize) -> Result<()> {
        let ok = match self {
            BenchmarkFunction::Mishra03 => dim == 2,
            BenchmarkFunction::Levy | BenchmarkFunction::Ackley => dim >= 1,
            BenchmarkFunction::Rosenbrock | BenchmarkFunction::Trid => dim >= 2,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "dimension {dim} is not valid for {}",
                self.name()
            )))
        }
    }

    /// Evaluates the standard closed form at a raw-domain point.
    pub fn eval_raw(self, x: &[f64]) -> f64 {
        match self {
            BenchmarkFunction::Levy => {
                let w: Vec<f64> = x.iter().map(|v| 1.0 + (v - 1.0) / 4.0).collect();
                let d = w.len();
                let mut total = (std::f64::consts::PI * w[0]).sin().powi(2);
                for wi in &w[..d - 1] {
                    let s = (std::f64::consts::PI * wi + 1.0).sin();
                    total += (wi - 1.0).powi(2) * (1.0 + 10.0 * s * s);
                }
                let s_last = (2.0 * std::f64::consts::PI * w[d - 1]).sin();
                total + (w[d - 1] - 1.0).powi(2) * (1.0 + s_last * s_last)
            }
            BenchmarkFunction::Ackley => {
                let d = x.len() as f64;
                let sum_sq: f64 = x.iter().map(|v| v * v).sum();
                let sum_cos: f64 =
                    x.iter().map(|v| (2.0 * std::f64::consts::PI * v).cos()).sum();
                -20.0 * (-0.2 * (sum_sq / d).sqrt()).exp() - (sum_cos / d).exp()
                    + 20.0
                    + std::f64::consts::E
            }
            BenchmarkFunction::Rosenbrock => x
                .windows(2)
                .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (w[0] - 1.0).powi(2))
                .sum(),
            BenchmarkFunction::Trid => {
                let quad: f64 = x.iter().map(|v| (v - 1.0).powi(2)).sum();
                let cross: f64 = x.windows(2).map(|w| w[0] * w[1]).sum();
                quad - cross
            }
            BenchmarkFunction::Mishra03 => {
                let r = (x[0] * x[0] + x[1] * x[1]).abs().sqrt();
                r.cos().abs().sqrt() + 0.01 * (x[0] + x[1])
            }
        }
    }
}

/// A calibrated problem instance: function, raw box domain, threshold, and
/// the seeded observation-noise level in raw units.
#[derive(Debug, Clone)]
pub struct Problem {
    function: BenchmarkFunction,
    dim: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    threshold: f64,
    superlevel_fraction: f64,
    noise_std: f64,
    out_scale: f64,
    out_offset: f64,
}

impl Problem {
    pub fn name(&self) -> String {
        format!("{}{}", self.function.name(), self.dim)
    }

    pub fn function(&self) -> BenchmarkFunction {
        self.function
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Threshold in raw function units.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn superlevel_fraction(&self) -> f64 {
        self.superlevel_fraction
    }

    /// Observation-noise standard deviation in raw units.
    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    /// Maps a unit-cube point to the raw domain.
    pub fn to_raw(&self, unit: &[f64]) -> Vec<f64> {
        unit.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(u, (l, h))| l + u * (h - l))
            .collect()
    }

    /// Noiseless evaluation at a unit-cube point.
    pub fn eval_noiseless(&self, unit: &[f64]) -> f64 {
        self.out_scale * self.function.eval_raw(&self.to_raw(unit)) + self.out_offset
    }

    /// The same problem with targets and threshold pushed through a positive
    /// affine map; classifications are invariant under this. Exposed for
    /// invariance testing.
    #[doc(hidden)]
    pub fn rescaled(mut self, scale: f64, offset: f64) -> Self {
        assert!(scale > 0.0);
        self.out_scale *= scale;
        self.out_offset = scale * self.out_offset + offset;
        self.threshold = scale * self.threshold + offset;
        self.noise_std *= scale;
        self
    }

    /// Noisy evaluation `f(x) + eta`, `eta ~ N(0, noise_std^2)`. The noise
    /// stream is keyed by the point's bit pattern and the run seed, so
    /// evaluation order and concurrency do not change results.
    pub fn eval(&self, unit: &[f64], seed: u64) -> f64 {
        let clean = self.eval_noiseless(unit);
        if self.noise_std == 0.0 {
            return clean;
        }
        let mut rng = stream_rng(derive_seed(seed, "noise", hash_point(unit)), "draw", 0);
        let u: f64 = rng.gen_range(1e-15..(1.0 - 1e-15));
        clean + self.noise_std * norm_ppf(u)
    }

    /// Noiseless ground-truth labels against the calibrated threshold, with
    /// the same closed `>=` convention as the classifier.
    pub fn ground_truth(&self, unit_points: &[Vec<f64>]) -> Vec<Label> {
        unit_points
            .iter()
            .map(|p| {
                if self.eval_noiseless(p) >= self.threshold {
                    Label::Superlevel
                } else {
                    Label::Sublevel
                }
            })
            .collect()
    }
}

/// Calibration output: the threshold plus the sample spread used to express
/// relative noise levels in raw units.
#[derive(Debug, Clone, Copy)]
pub struct Calibration {
    pub threshold: f64,
    pub sample_std: f64,
    pub fraction_at_threshold: f64,
}

/// Computes the `(1 - fraction)` empirical quantile of the noiseless
/// function over uniform domain samples. Deterministic per seed.
pub fn calibrate_threshold(
    function: BenchmarkFunction,
    dim: usize,
    fraction: f64,
    sample_count: usize,
    seed: u64,
) -> Result<Calibration> {
    function.validate_dim(dim)?;
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParameter("fraction must lie in (0, 1)".into()));
    }
    if sample_count < 2 {
        return Err(Error::InvalidParameter("sample_count too small".into()));
    }
    let (lo, hi) = function.domain(dim);
    let mut rng = stream_rng(seed, "calibrate", 0);
    let mut values = Vec::with_capacity(sample_count);
    let mut raw = vec![0.0f64; dim];
    for _ in 0..sample_count {
        for r in raw.iter_mut() {
            let u: f64 = rng.gen();
            *r = lo + u * (hi - lo);
        }
        values.push(function.eval_raw(&raw));
    }
    let mean = values.iter().sum::<f64>() / sample_count as f64;
    let var =
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (sample_count - 1) as f64;

    let mut sorted = values.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("function values are finite"));
    // Floor-index empirical quantile: exact order statistic, so the extreme
    // fractions hit the sample minimum/maximum exactly.
    let q = 1.0 - fraction;
    let idx = ((q * (sample_count - 1) as f64).floor() as usize).min(sample_count - 1);
    let threshold = sorted[idx];
    let above = values.iter().filter(|v| **v >= threshold).count();
    Ok(Calibration {
        threshold,
        sample_std: var.sqrt(),
        fraction_at_threshold: above as f64 / sample_count as f64,
    })
}

/// Builder assembling a [`Problem`] from a function, target fraction, and
/// noise level relative to the calibrated sample spread.
#[derive(Debug, Clone)]
pub struct ProblemBuilder {
    function: BenchmarkFunction,
    dim: usize,
    fraction: f64,
    sample_count: usize,
    calibration_seed: u64,
    relative_noise: f64,
    cache_path: Option<PathBuf>,
}

impl ProblemBuilder {
    pub fn new(function: BenchmarkFunction, dim: usize) -> Self {
        Self {
            function,
            dim,
            fraction: function.default_superlevel_fraction(),
            sample_count: 1_000_000,
            calibration_seed: 20_240_001,
            relative_noise: 0.01,
            cache_path: None,
        }
    }

    pub fn fraction(mut self, fraction: f64) -> Self {
        self.fraction = fraction;
        self
    }

    pub fn sample_count(mut self, count: usize) -> Self {
        self.sample_count = count;
        self
    }

    pub fn calibration_seed(mut self, seed: u64) -> Self {
        self.calibration_seed = seed;
        self
    }

    /// Noise standard deviation as a fraction of the calibrated sample
    /// spread; 0 disables noise.
    pub fn relative_noise(mut self, rel: f64) -> Self {
        self.relative_noise = rel;
        self
    }

    pub fn cache(mut self, path: impl Into<PathBuf>) -> Self {
        self.cache_path = Some(path.into());
        self
    }

    pub fn build(self) -> Result<Problem> {
        self.function.validate_dim(self.dim)?;
        let key = CacheKey {
            name: self.function.name().to_string(),
            dim: self.dim,
            fraction: self.fraction,
            sample_count: self.sample_count,
            seed: self.calibration_seed,
        };
        let cached = match &self.cache_path {
            Some(path) => lookup_cached_threshold(path, &key)?,
            None => None,
        };
        let calibration = match cached {
            // The sample std is cheap relative to threshold reuse semantics;
            // recompute it deterministically even on cache hits.
            Some(h) => {
                let mut c = calibrate_threshold(
                    self.function,
                    self.dim,
                    self.fraction,
                    self.sample_count,
                    self.calibration_seed,
                )?;
                c.threshold = h;
                c
            }
            None => {
                let c = calibrate_threshold(
                    self.function,
                    self.dim,
                    self.fraction,
                    self.sample_count,
                    self.calibration_seed,
                )?;
                if let Some(path) = &self.cache_path {
                    append_cached_threshold(path, &key, c.threshold)?;
                }
                c
            }
        };
        let (lo, hi) = self.function.domain(self.dim);
        Ok(Problem {
            function: self.function,
            dim: self.dim,
            lower: vec![lo; self.dim],
            upper: vec![hi; self.dim],
            threshold: calibration.threshold,
            superlevel_fraction: self.fraction,
            noise_std: self.relative_noise * calibration.sample_std,
            out_scale: 1.0,
            out_offset: 0.0,
        })
    }
}

struct CacheKey {
    name: String,
    dim: usize,
    fraction: f64,
    sample_count: usize,
    seed: u64,
}

impl CacheKey {
    fn matches(&self, fields: &[&str]) -> bool {
        fields.len() == 6
            && fields[0] == self.name
            && fields[1].parse::<usize>() == Ok(self.dim)
            && fields[2].parse::<f64>().map(|f| f == self.fraction).unwrap_or(false)
            && fields[3].parse::<usize>() == Ok(self.sample_count)
            && fields[4].parse::<u64>() == Ok(self.seed)
    }
}

/// One record per line: `name,d,fraction,sample_count,seed,h` with the
/// threshold written to 17 significant digits.
fn lookup_cached_threshold(path: &Path, key: &CacheKey) -> Result<Option<f64>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(Error::Io { path: path.to_path_buf(), source: e }),
    };
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if key.matches(&fields) {
            if let Ok(h) = fields[5].parse::<f64>() {
                return Ok(Some(h));
            }
        }
    }
    Ok(None)
}

fn append_cached_threshold(path: &Path, key: &CacheKey, threshold: f64) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
        }
    }
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
    writeln!(
        file,
        "{},{},{},{},{},{:.16e}",
        key.name, key.dim, key.fraction, key.sample_count, key.seed, threshold
    )
    .map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_minima_evaluate_to_zero() {
        assert!(BenchmarkFunction::Levy.eval_raw(&[1.0; 10]).abs() < 1e-12);
        assert!(BenchmarkFunction::Ackley.eval_raw(&[0.0, 0.0]).abs() < 1e-12);
        assert!(BenchmarkFunction::Rosenbrock.eval_raw(&[1.0, 1.0, 1.0]).abs() < 1e-12);
    }

    #[test]
    fn levy_matches_independent_rederivation() {
        let f = BenchmarkFunction::Levy;
        assert!((f.eval_raw(&[0.0, 0.0]) - 0.7158445541169746).abs() < 1e-12);
        assert!((f.eval_raw(&[2.0, 3.0]) - 1.4091554458830253).abs() < 1e-12);
        assert!((f.eval_raw(&[-5.0, 4.0, 3.0]) - 10.885949075897415).abs() < 1e-12);
        assert!((f.eval_raw(&[0.0; 10]) - 1.4426009870527703).abs() < 1e-12);
        assert!((f.eval_raw(&[-10.0, 10.0]) - 90.38280895184609).abs() < 1e-12);
    }

    #[test]
    fn ackley_matches_independent_rederivation() {
        let f = BenchmarkFunction::Ackley;
        assert!((f.eval_raw(&[1.0, 1.0]) - 3.6253849384403627).abs() < 1e-12);
        assert!((f.eval_raw(&[-2.5, 4.0]) - 11.454215696941548).abs() < 1e-12);
        assert!((f.eval_raw(&[1.0, 2.0, 3.0]) - 7.0164536082694).abs() < 1e-12);
        assert!((f.eval_raw(&[0.5; 5]) - 4.253654026568412).abs() < 1e-12);
    }

    #[test]
    fn rosenbrock_matches_independent_rederivation() {
        let f = BenchmarkFunction::Rosenbrock;
        assert_eq!(f.eval_raw(&[0.0, 0.0]), 1.0);
        assert_eq!(f.eval_raw(&[-1.0, 2.0]), 104.0);
        assert_eq!(f.eval_raw(&[2.0, 2.0, 2.0]), 802.0);
        assert_eq!(f.eval_raw(&[1.5, -0.5, 3.0]), 1515.0);
    }

    #[test]
    fn trid_minimum_matches_the_closed_form() {
        for d in [4usize, 10] {
            let x: Vec<f64> = (1..=d).map(|i| (i * (d + 1 - i)) as f64).collect();
            let expected = -(d as f64) * (d as f64 + 4.0) * (d as f64 - 1.0) / 6.0;
            assert!((BenchmarkFunction::Trid.eval_raw(&x) - expected).abs() < 1e-9);
        }
        assert_eq!(BenchmarkFunction::Trid.eval_raw(&[0.0, 0.0]), 2.0);
        assert_eq!(BenchmarkFunction::Trid.eval_raw(&[1.0, 2.0, 3.0]), -3.0);
        assert_eq!(BenchmarkFunction::Trid.eval_raw(&[5.0, -5.0]), 77.0);
    }

    #[test]
    fn mishra03_matches_independent_rederivation() {
        let f = BenchmarkFunction::Mishra03;
        assert_eq!(f.eval_raw(&[0.0, 0.0]), 1.0);
        assert!((f.eval_raw(&[-5.0, -5.0]) - 0.739849930826003).abs() < 1e-12);
        assert!((f.eval_raw(&[1.0, 2.0]) - 0.815667153734434).abs() < 1e-12);
        assert!((f.eval_raw(&[3.5, -4.0]) - 0.7478981184388095).abs() < 1e-12);
        assert!((f.eval_raw(&[-1.0, 4.2]) - 0.6523159671903117).abs() < 1e-12);
    }

    #[test]
    fn domain_mapping_is_exact_at_corners() {
        let p = ProblemBuilder::new(BenchmarkFunction::Levy, 3)
            .sample_count(1000)
            .build()
            .unwrap();
        assert_eq!(p.to_raw(&[0.0, 0.0, 0.0]), vec![-10.0, -10.0, -10.0]);
        assert_eq!(p.to_raw(&[1.0, 1.0, 1.0]), vec![10.0, 10.0, 10.0]);
        let d = 7usize;
        let t = ProblemBuilder::new(BenchmarkFunction::Trid, d)
            .sample_count(1000)
            .build()
            .unwrap();
        assert_eq!(t.to_raw(&vec![1.0; d])[0], (d * d) as f64);
    }

    #[test]
    fn calibration_hits_the_target_fraction() {
        let c = calibrate_threshold(BenchmarkFunction::Levy, 2, 0.2, 200_000, 9).unwrap();
        assert!((c.fraction_at_threshold - 0.2).abs() < 0.01);
    }

    #[test]
    fn calibration_is_self_consistent_across_seeds() {
        let c = calibrate_threshold(BenchmarkFunction::Levy, 10, 0.2, 1_000_000, 1).unwrap();
        let check = calibrate_threshold(BenchmarkFunction::Levy, 10, 0.2, 1_000_000, 2).unwrap();
        let count_above = {
            let mut rng = stream_rng(3, "fresh-check", 0);
            let mut above = 0usize;
            let n = 200_000;
            for _ in 0..n {
                let unit: Vec<f64> = (0..10).map(|_| rng.gen::<f64>()).collect();
                let raw: Vec<f64> = unit.iter().map(|u| -10.0 + u * 20.0).collect();
                if BenchmarkFunction::Levy.eval_raw(&raw) >= c.threshold {
                    above += 1;
                }
            }
            above as f64 / n as f64
        };
        assert!((count_above - 0.2).abs() < 0.005, "fresh fraction {count_above}");
        assert!((c.threshold - check.threshold).abs() / c.threshold.abs() < 0.01);
    }

    #[test]
    fn larger_fraction_means_smaller_threshold() {
        let lo = calibrate_threshold(BenchmarkFunction::Ackley, 2, 0.1, 100_000, 4).unwrap();
        let hi = calibrate_threshold(BenchmarkFunction::Ackley, 2, 0.6, 100_000, 4).unwrap();
        assert!(hi.threshold < lo.threshold);
    }

    #[test]
    fn extreme_fraction_stays_at_or_below_the_sample_minimum() {
        let c =
            calibrate_threshold(BenchmarkFunction::Ackley, 2, 1.0 - 1e-9, 10_000, 4).unwrap();
        let mut rng = stream_rng(4, "calibrate", 0);
        let mut min = f64::INFINITY;
        for _ in 0..10_000 {
            let raw: Vec<f64> =
                (0..2).map(|_| -5.0 + rng.gen::<f64>() * 15.0).collect();
            min = min.min(BenchmarkFunction::Ackley.eval_raw(&raw));
        }
        assert!(c.threshold <= min + 1e-9);
    }

    #[test]
    fn noise_is_keyed_by_point_and_seed() {
        let p = ProblemBuilder::new(BenchmarkFunction::Levy, 2)
            .sample_count(10_000)
            .build()
            .unwrap();
        let x = vec![0.3, 0.8];
        assert_eq!(p.eval(&x, 7).to_bits(), p.eval(&x, 7).to_bits());
        assert_ne!(p.eval(&x, 7).to_bits(), p.eval(&x, 8).to_bits());
        assert_ne!(p.eval(&x, 7).to_bits(), p.eval(&[0.3, 0.80001], 7).to_bits());
        assert!(p.noise_std() > 0.0);
    }

    #[test]
    fn ground_truth_ignores_noise_and_uses_closed_inequality() {
        let p = ProblemBuilder::new(BenchmarkFunction::Levy, 2)
            .sample_count(10_000)
            .relative_noise(0.5)
            .build()
            .unwrap();
        let pts: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 49.0, 0.5]).collect();
        let labels = p.ground_truth(&pts);
        for (pt, label) in pts.iter().zip(&labels) {
            let expected =
                if p.eval_noiseless(pt) >= p.threshold() { Label::Superlevel } else { Label::Sublevel };
            assert_eq!(*label, expected);
        }
    }

    #[test]
    fn threshold_cache_round_trips() {
        let dir = std::env::temp_dir().join(format!("lse-cache-test-{}", std::process::id()));
        let path = dir.join("thresholds.txt");
        let _ = fs::remove_file(&path);
        let a = ProblemBuilder::new(BenchmarkFunction::Mishra03, 2)
            .sample_count(50_000)
            .cache(&path)
            .build()
            .unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
        let b = ProblemBuilder::new(BenchmarkFunction::Mishra03, 2)
            .sample_count(50_000)
            .cache(&path)
            .build()
            .unwrap();
        assert_eq!(a.threshold().to_bits(), b.threshold().to_bits());
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1, "cache hit must not append");
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn mishra03_requires_two_dimensions() {
        assert!(BenchmarkFunction::Mishra03.validate_dim(3).is_err());
    }
}
