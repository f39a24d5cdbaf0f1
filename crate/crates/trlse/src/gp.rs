//! Exact Gaussian-process regression on standardized targets.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::util::standard_normal;

/// Jitter ladder tried when factorizing the Gram matrix.
const JITTER_LADDER: [f64; 7] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

/// Affine map taking raw targets into the standardized scale the models are
/// fit on. The raw threshold is the centering constant, so its image (the
/// internal threshold) is exactly zero and a zero-mean prior carries no
/// classification bias: points the models know nothing about sit on the
/// boundary.
#[derive(Debug, Clone)]
pub struct Standardizer {
    mean: f64,
    std: f64,
    raw_threshold: f64,
}

impl Standardizer {
    /// Fits the scale from observed raw targets. Degenerate spreads fall back
    /// to unit scale.
    pub fn fit(raw_values: &[f64], raw_threshold: f64) -> Self {
        let n = raw_values.len();
        let mean = if n == 0 { 0.0 } else { raw_values.iter().sum::<f64>() / n as f64 };
        let std = if n < 2 {
            1.0
        } else {
            let var = raw_values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let s = var.sqrt();
            if s.is_finite() && s > 1e-12 * mean.abs().max(1.0) {
                s
            } else {
                1.0
            }
        };
        Self { mean, std, raw_threshold }
    }

    pub fn transform(&self, y: f64) -> f64 {
        (y - self.raw_threshold) / self.std
    }

    pub fn inverse(&self, z: f64) -> f64 {
        z * self.std + self.raw_threshold
    }

    pub fn transform_all(&self, ys: &[f64]) -> Vec<f64> {
        ys.iter().map(|&y| self.transform(y)).collect()
    }

    /// Image of the raw threshold under [`Standardizer::transform`].
    pub fn internal_threshold(&self) -> f64 {
        0.0
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn std(&self) -> f64 {
        self.std
    }

    pub fn raw_threshold(&self) -> f64 {
        self.raw_threshold
    }
}

/// An exact GP posterior: kernel, noise level, training data in the unit
/// cube, and the Cholesky factor of `K + sigma^2 I + jitter I`.
#[derive(Debug, Clone)]
pub struct GpModel {
    kernel: KernelSpec,
    noise_variance: f64,
    train_x: Vec<Vec<f64>>,
    train_y_std: Vec<f64>,
    chol_l: DMatrix<f64>,
    alpha: DVector<f64>,
    jitter: f64,
}

impl GpModel {
    /// A prior model with no observations.
    pub fn prior(kernel: KernelSpec, noise_variance: f64) -> Self {
        Self {
            kernel,
            noise_variance,
            train_x: Vec::new(),
            train_y_std: Vec::new(),
            chol_l: DMatrix::zeros(0, 0),
            alpha: DVector::zeros(0),
            jitter: 0.0,
        }
    }

    /// Fits the model on standardized targets, escalating jitter until the
    /// Gram matrix factorizes.
    pub fn fit(
        kernel: KernelSpec,
        noise_variance: f64,
        train_x: Vec<Vec<f64>>,
        train_y_std: Vec<f64>,
    ) -> Result<Self> {
        if train_x.len() != train_y_std.len() {
            return Err(Error::InvalidParameter(format!(
                "{} inputs but {} targets",
                train_x.len(),
                train_y_std.len()
            )));
        }
        if !noise_variance.is_finite() || noise_variance < 0.0 {
            return Err(Error::InvalidParameter("noise variance must be non-negative".into()));
        }
        for x in &train_x {
            if x.len() != kernel.dim() {
                return Err(Error::DimensionMismatch { expected: kernel.dim(), got: x.len() });
            }
        }
        if train_x.is_empty() {
            return Ok(Self::prior(kernel, noise_variance));
        }

        let n = train_x.len();
        let base = kernel.gram(&train_x);
        let max_diag = (0..n).map(|i| base[(i, i)]).fold(0.0f64, f64::max);
        for &jitter in &JITTER_LADDER {
            let mut k = base.clone();
            for i in 0..n {
                k[(i, i)] += noise_variance + jitter;
            }
            if let Some(chol) = k.cholesky() {
                let y = DVector::from_column_slice(&train_y_std);
                let alpha = chol.solve(&y);
                return Ok(Self {
                    kernel,
                    noise_variance,
                    train_x,
                    train_y_std,
                    chol_l: chol.unpack(),
                    alpha,
                    jitter,
                });
            }
        }
        Err(Error::SingularGram {
            condition: max_diag / (noise_variance + JITTER_LADDER[JITTER_LADDER.len() - 1]),
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn len(&self) -> usize {
        self.train_x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train_x.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    pub fn train_x(&self) -> &[Vec<f64>] {
        &self.train_x
    }

    pub fn train_y_std(&self) -> &[f64] {
        &self.train_y_std
    }

    /// Lower Cholesky factor of the regularized Gram matrix.
    pub fn chol_l(&self) -> &DMatrix<f64> {
        &self.chol_l
    }

    /// Posterior mean and variance of the latent function at one query.
    /// Variance is clamped at zero from below.
    pub fn posterior_one(&self, x: &[f64]) -> Result<(f64, f64)> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let prior_var = self.kernel.signal_variance();
        if self.train_x.is_empty() {
            return Ok((0.0, prior_var));
        }
        let n = self.len();
        let mut kvec = DVector::zeros(n);
        for i in 0..n {
            kvec[i] = self.kernel.eval_unchecked(&self.train_x[i], x);
        }
        let mean = kvec.dot(&self.alpha);
        let v = self
            .chol_l
            .solve_lower_triangular(&kvec)
            .expect("triangular factor has positive diagonal");
        let var = (prior_var - v.norm_squared()).max(0.0);
        Ok((mean, var))
    }

    /// Posterior mean and variance at a batch of queries.
    pub fn posterior(&self, queries: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut means = Vec::with_capacity(queries.len());
        let mut vars = Vec::with_capacity(queries.len());
        for q in queries {
            let (m, v) = self.posterior_one(q)?;
            means.push(m);
            vars.push(v);
        }
        Ok((means, vars))
    }

    /// One draw from the joint posterior over the candidate set, deterministic
    /// for a given seed. Rank deficiency (duplicated candidates) is handled by
    /// clamping negative eigenvalues, so perfectly correlated candidates get
    /// identical values.
    pub fn sample_path(&self, candidates: &[Vec<f64>], seed: u64) -> Result<Vec<f64>> {
        if candidates.is_empty() {
            return Err(Error::InvalidParameter("sample_path needs at least one candidate".into()));
        }
        for c in candidates {
            if c.len() != self.dim() {
                return Err(Error::DimensionMismatch { expected: self.dim(), got: c.len() });
            }
        }
        let m = candidates.len();
        let mut cov = self.kernel.gram(candidates);
        let mut mean = DVector::zeros(m);
        if !self.train_x.is_empty() {
            let kxq = self.kernel.cross(&self.train_x, candidates);
            mean = kxq.transpose() * &self.alpha;
            let v = self
                .chol_l
                .solve_lower_triangular(&kxq)
                .expect("triangular factor has positive diagonal");
            cov -= v.transpose() * v;
        }
        if cov.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPsd);
        }
        // Symmetrize before the eigendecomposition.
        let cov = (&cov + cov.transpose()) * 0.5;
        let eig = SymmetricEigen::new(cov);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = DVector::from_fn(m, |_, _| standard_normal(&mut rng));
        let scaled = DVector::from_fn(m, |i, _| eig.eigenvalues[i].max(0.0).sqrt() * z[i]);
        let draw = mean + &eig.eigenvectors * scaled;
        Ok(draw.iter().cloned().collect())
    }

    /// Log marginal likelihood of the training targets under this model.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.len();
        if n == 0 {
            return 0.0;
        }
        let y = DVector::from_column_slice(&self.train_y_std);
        let data_fit = -0.5 * y.dot(&self.alpha);
        let log_det: f64 = (0..n).map(|i| self.chol_l[(i, i)].ln()).sum();
        data_fit - log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
    }
}
