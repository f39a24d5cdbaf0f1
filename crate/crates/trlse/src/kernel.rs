//! Stationary covariance functions with per-dimension (ARD) lengthscales.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Supported stationary kernel families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    Matern52,
    Rbf,
    RationalQuadratic,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Matern52 => "matern52",
            KernelFamily::Rbf => "rbf",
            KernelFamily::RationalQuadratic => "rq",
        }
    }
}

/// A fully specified stationary kernel: family, ARD lengthscales (unit-cube
/// units), signal variance, and the shape parameter for the rational
/// quadratic family.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    family: KernelFamily,
    lengthscales: Vec<f64>,
    signal_variance: f64,
    rq_alpha: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, lengthscales: Vec<f64>, signal_variance: f64) -> Result<Self> {
        Self::with_rq_alpha(family, lengthscales, signal_variance, 1.0)
    }

    pub fn with_rq_alpha(
        family: KernelFamily,
        lengthscales: Vec<f64>,
        signal_variance: f64,
        rq_alpha: f64,
    ) -> Result<Self> {
        if lengthscales.is_empty() {
            return Err(Error::InvalidParameter("kernel needs at least one lengthscale".into()));
        }
        if lengthscales.iter().any(|l| !l.is_finite() || *l <= 0.0) {
            return Err(Error::InvalidParameter(
                "lengthscales must be strictly positive and finite".into(),
            ));
        }
        if !signal_variance.is_finite() || signal_variance <= 0.0 {
            return Err(Error::InvalidParameter("signal variance must be positive".into()));
        }
        if !rq_alpha.is_finite() || rq_alpha <= 0.0 {
            return Err(Error::InvalidParameter("rq_alpha must be positive".into()));
        }
        Ok(Self { family, lengthscales, signal_variance, rq_alpha })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn lengthscales(&self) -> &[f64] {
        &self.lengthscales
    }

    pub fn signal_variance(&self) -> f64 {
        self.signal_variance
    }

    pub fn rq_alpha(&self) -> f64 {
        self.rq_alpha
    }

    /// Evaluates k(a, b), checking dimensions.
    pub fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: a.len() });
        }
        if b.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: b.len() });
        }
        Ok(self.eval_unchecked(a, b))
    }

    /// Hot-path evaluation without dimension checks.
    pub(crate) fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in 0..self.lengthscales.len() {
            let z = (a[k] - b[k]) / self.lengthscales[k];
            s += z * z;
        }
        self.value_at_scaled_sq_dist(s)
    }

    fn value_at_scaled_sq_dist(&self, s: f64) -> f64 {
        let sv = self.signal_variance;
        match self.family {
            KernelFamily::Rbf => sv * (-0.5 * s).exp(),
            KernelFamily::Matern52 => {
                let r = (5.0 * s).sqrt();
                sv * (1.0 + r + 5.0 * s / 3.0) * (-r).exp()
            }
            KernelFamily::RationalQuadratic => {
                sv * (1.0 + s / (2.0 * self.rq_alpha)).powf(-self.rq_alpha)
            }
        }
    }

    /// Symmetric Gram matrix over a point set (no noise or jitter added).
    pub(crate) fn gram(&self, xs: &[Vec<f64>]) -> DMatrix<f64> {
        let n = xs.len();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            k[(i, i)] = self.signal_variance;
            for j in (i + 1)..n {
                let v = self.eval_unchecked(&xs[i], &xs[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }

    /// Cross-covariance matrix between training points (rows) and queries
    /// (columns).
    pub(crate) fn cross(&self, xs: &[Vec<f64>], queries: &[Vec<f64>]) -> DMatrix<f64> {
        let mut k = DMatrix::zeros(xs.len(), queries.len());
        for (j, q) in queries.iter().enumerate() {
            for (i, x) in xs.iter().enumerate() {
                k[(i, j)] = self.eval_unchecked(x, q);
            }
        }
        k
    }
}

/// Evaluates a kernel at a pair of points. Thin wrapper kept as a free
/// function for callers that do not hold a model.
pub fn kernel_eval(spec: &KernelSpec, a: &[f64], b: &[f64]) -> Result<f64> {
    spec.eval(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;

    fn spec(family: KernelFamily) -> KernelSpec {
        KernelSpec::new(family, vec![1.0], 1.0).unwrap()
    }

    #[test]
    fn stationary_kernels_at_zero_distance_equal_signal_variance() {
        for family in [KernelFamily::Matern52, KernelFamily::Rbf, KernelFamily::RationalQuadratic] {
            let k = KernelSpec::new(family, vec![0.3, 0.7], 2.5).unwrap();
            let a = [0.2, 0.9];
            assert_eq!(k.eval(&a, &a).unwrap(), 2.5);
        }
    }

    #[test]
    fn rbf_unit_lengthscale_at_distance_one() {
        let k = spec(KernelFamily::Rbf);
        let v = k.eval(&[0.0], &[1.0]).unwrap();
        assert!((v - 0.6065306597126334).abs() < 1e-15);
    }

    #[test]
    fn matern52_decays_monotonically_to_zero() {
        let k = spec(KernelFamily::Matern52);
        let mut prev = k.eval(&[0.0], &[0.0]).unwrap();
        for i in 1..40 {
            let v = k.eval(&[0.0], &[i as f64 * 0.5]).unwrap();
            assert!(v < prev, "not decaying at step {i}");
            prev = v;
        }
        assert!(prev < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let k = spec(KernelFamily::Rbf);
        assert!(matches!(
            k.eval(&[0.0, 1.0], &[0.0, 1.0]),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn gram_matrices_are_positive_semidefinite_after_jitter() {
        let mut rng = crate::util::stream_rng(11, "kernel-psd", 0);
        use rand::Rng;
        for family in [KernelFamily::Matern52, KernelFamily::Rbf, KernelFamily::RationalQuadratic] {
            for trial in 0..20 {
                let d = 1 + trial % 4;
                let n = 2 + trial % 30;
                let lengths: Vec<f64> = (0..d).map(|_| rng.gen_range(0.05..2.0)).collect();
                let k = KernelSpec::with_rq_alpha(family, lengths, 1.3, 0.8).unwrap();
                let xs: Vec<Vec<f64>> =
                    (0..n).map(|_| (0..d).map(|_| rng.gen::<f64>()).collect()).collect();
                let mut gram = k.gram(&xs);
                for i in 0..n {
                    gram[(i, i)] += 1e-10;
                }
                let trace: f64 = (0..n).map(|i| gram[(i, i)]).sum();
                let eig = SymmetricEigen::new(gram);
                let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
                assert!(min >= -1e-8 * trace, "family {family:?}: min eig {min} trace {trace}");
            }
        }
    }
}
