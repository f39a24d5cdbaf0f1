//! MAP hyperparameter fitting: log marginal likelihood plus log-priors,
//! maximized by a seeded multi-start coordinate search with golden-section
//! line searches. Derivative-free and deterministic for a given seed.
//!
//! The lengthscale prior location scales with dimension (log-normal around
//! `sqrt(d) / 2`), which keeps high-dimensional surrogates from collapsing to
//! tiny lengthscales on few observations.

use rand::Rng;

use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::kernel::{KernelFamily, KernelSpec};
use crate::util::{standard_normal, stream_rng};

/// Observation-noise floor applied to every fit.
pub const NOISE_FLOOR: f64 = 1e-6;

const RESTARTS: usize = 8;
const SWEEPS_PER_RESTART: usize = 2;
const POLISH_SWEEPS: usize = 2;
const GOLDEN_ITERS: usize = 11;
const INITIAL_HALF_WIDTH: f64 = 1.5;
/// Observations used in the likelihood are capped for cost; a deterministic
/// seeded subset is used beyond this size.
const FIT_SUBSET_CAP: usize = 160;

const LOG_LEN_BOUNDS: (f64, f64) = (-6.907755278982137, 6.907755278982137); // 1e-3..1e3
const LOG_SIG_BOUNDS: (f64, f64) = (-13.815510557964274, 6.907755278982137); // 1e-6..1e3
const LOG_NOISE_BOUNDS: (f64, f64) = (-13.815510557964274, 4.605170185988092); // 1e-6..1e2
const LOG_ALPHA_BOUNDS: (f64, f64) = (-4.605170185988091, 6.907755278982137); // 1e-2..1e3

/// Result of a hyperparameter fit.
#[derive(Debug, Clone)]
pub struct FittedHyperparams {
    pub kernel: KernelSpec,
    pub noise_variance: f64,
}

struct PriorSpec {
    /// (log-space location, log-space std) per parameter.
    locs: Vec<f64>,
    scales: Vec<f64>,
    bounds: Vec<(f64, f64)>,
    family: KernelFamily,
    dim: usize,
}

impl PriorSpec {
    fn new(family: KernelFamily, dim: usize) -> Self {
        let mut locs = Vec::new();
        let mut scales = Vec::new();
        let mut bounds = Vec::new();
        let len_loc = ((dim as f64).sqrt() / 2.0).ln();
        for _ in 0..dim {
            locs.push(len_loc);
            scales.push(3.0f64.sqrt());
            bounds.push(LOG_LEN_BOUNDS);
        }
        // Signal variance: standardized targets have roughly unit spread, and
        // a tight prior keeps acquisition values comparable across the
        // independently fitted local models.
        locs.push(0.0);
        scales.push(1.0);
        bounds.push(LOG_SIG_BOUNDS);
        // Noise variance: centered on exp(-4). Few-point surrogates inherit
        // this mode, and anything much smaller makes newborn regions
        // overconfident enough to be discarded on a single noisy value.
        locs.push(-4.0);
        scales.push(1.0);
        bounds.push(LOG_NOISE_BOUNDS);
        if family == KernelFamily::RationalQuadratic {
            locs.push(0.0);
            scales.push(1.0);
            bounds.push(LOG_ALPHA_BOUNDS);
        }
        Self { locs, scales, bounds, family, dim }
    }

    fn n_params(&self) -> usize {
        self.locs.len()
    }

    fn modes(&self) -> Vec<f64> {
        self.locs.clone()
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        theta
            .iter()
            .zip(self.locs.iter().zip(&self.scales))
            .map(|(t, (loc, scale))| {
                let z = (t - loc) / scale;
                -0.5 * z * z
            })
            .sum()
    }

    fn clamp(&self, theta: &mut [f64]) {
        for (t, (lo, hi)) in theta.iter_mut().zip(&self.bounds) {
            *t = t.clamp(*lo, *hi);
        }
    }

    fn to_hyperparams(&self, theta: &[f64]) -> Result<FittedHyperparams> {
        let lengths: Vec<f64> = theta[..self.dim].iter().map(|t| t.exp()).collect();
        let signal = theta[self.dim].exp();
        let noise = theta[self.dim + 1].exp().max(NOISE_FLOOR);
        let alpha = if self.family == KernelFamily::RationalQuadratic {
            theta[self.dim + 2].exp()
        } else {
            1.0
        };
        Ok(FittedHyperparams {
            kernel: KernelSpec::with_rq_alpha(self.family, lengths, signal, alpha)?,
            noise_variance: noise,
        })
    }
}

fn objective(prior: &PriorSpec, xs: &[Vec<f64>], ys: &[f64], theta: &[f64]) -> f64 {
    let hp = match prior.to_hyperparams(theta) {
        Ok(hp) => hp,
        Err(_) => return f64::NEG_INFINITY,
    };
    match GpModel::fit(hp.kernel, hp.noise_variance, xs.to_vec(), ys.to_vec()) {
        Ok(model) => model.log_marginal_likelihood() + prior.log_density(theta),
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Golden-section maximization of `f` on `[lo, hi]`.
fn golden_section<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, iters: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

fn coordinate_sweeps(
    prior: &PriorSpec,
    xs: &[Vec<f64>],
    ys: &[f64],
    theta: &mut [f64],
    mut best: f64,
    sweeps: usize,
    initial_half_width: f64,
) -> f64 {
    let mut width = initial_half_width;
    for _ in 0..sweeps {
        for k in 0..prior.n_params() {
            let (lo_b, hi_b) = prior.bounds[k];
            let lo = (theta[k] - width).max(lo_b);
            let hi = (theta[k] + width).min(hi_b);
            if hi <= lo {
                continue;
            }
            let eval = |v: f64| {
                let mut t = theta.to_vec();
                t[k] = v;
                objective(prior, xs, ys, &t)
            };
            let (x, fx) = golden_section(eval, lo, hi, GOLDEN_ITERS);
            if fx > best {
                theta[k] = x;
                best = fx;
            }
        }
        width *= 0.5;
    }
    best
}

/// MAP fit of kernel hyperparameters and observation noise on standardized
/// targets. With a single observation the likelihood is uninformative and the
/// prior modes are returned directly.
pub fn fit_hyperparams(
    xs: &[Vec<f64>],
    ys_std: &[f64],
    family: KernelFamily,
    seed: u64,
) -> Result<FittedHyperparams> {
    if xs.is_empty() {
        return Err(Error::InvalidParameter("hyperparameter fit needs observations".into()));
    }
    if xs.len() != ys_std.len() {
        return Err(Error::InvalidParameter(format!(
            "{} inputs but {} targets",
            xs.len(),
            ys_std.len()
        )));
    }
    let dim = xs[0].len();
    for x in xs {
        if x.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: x.len() });
        }
    }
    let prior = PriorSpec::new(family, dim);
    if xs.len() == 1 {
        return prior.to_hyperparams(&prior.modes());
    }

    // Deterministic subsample to bound the per-evaluation factorization cost.
    let (sub_x, sub_y): (Vec<Vec<f64>>, Vec<f64>) = if xs.len() > FIT_SUBSET_CAP {
        let mut idx: Vec<usize> = (0..xs.len()).collect();
        let mut rng = stream_rng(seed, "fit-subset", 0);
        for i in (1..idx.len()).rev() {
            let j = rng.gen_range(0..=i);
            idx.swap(i, j);
        }
        idx.truncate(FIT_SUBSET_CAP);
        idx.sort_unstable();
        (idx.iter().map(|&i| xs[i].clone()).collect(), idx.iter().map(|&i| ys_std[i]).collect())
    } else {
        (xs.to_vec(), ys_std.to_vec())
    };

    let mut best_theta = prior.modes();
    let mut best = f64::NEG_INFINITY;
    for restart in 0..RESTARTS {
        let mut theta = if restart == 0 {
            prior.modes()
        } else {
            let mut rng = stream_rng(seed, "fit-restart", restart as u64);
            let mut t: Vec<f64> = prior
                .locs
                .iter()
                .zip(&prior.scales)
                .map(|(loc, scale)| loc + scale * standard_normal(&mut rng))
                .collect();
            prior.clamp(&mut t);
            t
        };
        let start = objective(&prior, &sub_x, &sub_y, &theta);
        let score = coordinate_sweeps(
            &prior,
            &sub_x,
            &sub_y,
            &mut theta,
            start,
            SWEEPS_PER_RESTART,
            INITIAL_HALF_WIDTH,
        );
        if score > best {
            best = score;
            best_theta = theta;
        }
    }
    coordinate_sweeps(
        &prior,
        &sub_x,
        &sub_y,
        best_theta.as_mut_slice(),
        best,
        POLISH_SWEEPS,
        INITIAL_HALF_WIDTH * 0.25,
    );
    prior.to_hyperparams(&best_theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_observation_returns_prior_modes() {
        let fit = fit_hyperparams(&[vec![0.5, 0.5]], &[0.3], KernelFamily::Matern52, 1).unwrap();
        let expected_len = 2.0f64.sqrt() / 2.0;
        for l in fit.kernel.lengthscales() {
            assert!((l - expected_len).abs() < 1e-12);
        }
        assert!((fit.kernel.signal_variance() - 1.0).abs() < 1e-12);
        assert!((fit.noise_variance - (-4.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn constant_targets_keep_noise_at_or_above_the_floor() {
        let xs: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 / 11.0]).collect();
        let ys = vec![0.0; 12];
        let fit = fit_hyperparams(&xs, &ys, KernelFamily::Rbf, 3).unwrap();
        assert!(fit.noise_variance >= NOISE_FLOOR);
    }

    #[test]
    fn fit_on_smooth_data_beats_the_prior_modes() {
        let mut rng = stream_rng(17, "fit-smooth", 0);
        use rand::Rng;
        let xs: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| ((3.0 * x[0]).sin() + (2.0 * x[1]).cos() - 0.5) * 0.8)
            .collect();
        let fitted = fit_hyperparams(&xs, &ys, KernelFamily::Matern52, 17).unwrap();
        let modes = PriorSpec::new(KernelFamily::Matern52, 2);
        let baseline = modes.to_hyperparams(&modes.modes()).unwrap();
        let lml_fit =
            GpModel::fit(fitted.kernel.clone(), fitted.noise_variance, xs.clone(), ys.clone())
                .unwrap()
                .log_marginal_likelihood();
        let lml_modes = GpModel::fit(baseline.kernel, baseline.noise_variance, xs, ys)
            .unwrap()
            .log_marginal_likelihood();
        assert!(
            lml_fit >= lml_modes - 1e-9,
            "fitted lml {lml_fit} below prior-mode lml {lml_modes}"
        );
    }

    #[test]
    fn fits_are_deterministic_per_seed() {
        let xs: Vec<Vec<f64>> = (0..15).map(|i| vec![i as f64 / 14.0]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (6.0 * x[0]).sin()).collect();
        let a = fit_hyperparams(&xs, &ys, KernelFamily::Rbf, 42).unwrap();
        let b = fit_hyperparams(&xs, &ys, KernelFamily::Rbf, 42).unwrap();
        assert_eq!(a.kernel.lengthscales(), b.kernel.lengthscales());
        assert_eq!(a.noise_variance.to_bits(), b.noise_variance.to_bits());
    }

    #[test]
    fn rational_quadratic_fit_carries_its_shape_parameter() {
        let xs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 9.0]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x[0] * x[0]).collect();
        let fit = fit_hyperparams(&xs, &ys, KernelFamily::RationalQuadratic, 5).unwrap();
        assert!(fit.kernel.rq_alpha() > 0.0);
    }
}
