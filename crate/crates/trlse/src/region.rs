//! Per-region state machine: centroid move, penalty, volume and length
//! updates, local data windowing, and the closed-form discard bound.
//!
//! Volumes and side lengths live in log domain throughout. Initial volumes
//! can sit near the edge of double precision (1e-300 at a thousand
//! dimensions), and log arithmetic keeps the length product exactly equal to
//! the volume at any scale.

use crate::boxopt::{maximize_in_box, AxisBox, BoxQuery};
use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::util::{norm_cdf, norm_ppf, softplus};

/// Adjustment function mapping a penalty in [0.5, 1] to a multiplicative
/// volume factor. The default sigmoid decreases smoothly from about 2 at
/// penalty 0.5 to about 0.24 at penalty 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SFunction {
    Sigmoid { a: f64, b: f64 },
    Linear { slope: f64, intercept: f64 },
    Constant,
}

impl SFunction {
    /// The sigmoid used throughout: `2 / (1 + exp(8u - 6))`.
    pub fn default_sigmoid() -> Self {
        SFunction::Sigmoid { a: 8.0, b: 6.0 }
    }

    pub fn sigmoid(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0) || !b.is_finite() {
            return Err(Error::InvalidParameter("sigmoid needs a > 0 and finite b".into()));
        }
        Ok(SFunction::Sigmoid { a, b })
    }

    /// Linear adjustment; must be non-increasing on [0.5, 1].
    pub fn linear(slope: f64, intercept: f64) -> Result<Self> {
        if !(slope <= 0.0) || !intercept.is_finite() {
            return Err(Error::InvalidParameter(
                "linear adjustment must be monotone non-increasing".into(),
            ));
        }
        Ok(SFunction::Linear { slope, intercept })
    }

    pub fn factor(&self, penalty: f64) -> f64 {
        match *self {
            SFunction::Sigmoid { a, b } => 2.0 / (1.0 + (a * penalty - b).exp()),
            SFunction::Linear { slope, intercept } => (slope * penalty + intercept).max(0.0),
            SFunction::Constant => 1.0,
        }
    }

    /// `ln S(penalty)`; negative infinity when the factor underflows to zero,
    /// which forces a discard through the volume update.
    pub fn log_factor(&self, penalty: f64) -> f64 {
        match *self {
            SFunction::Sigmoid { a, b } => {
                std::f64::consts::LN_2 - softplus(a * penalty - b)
            }
            SFunction::Linear { slope, intercept } => {
                let s = slope * penalty + intercept;
                if s > 0.0 {
                    s.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            SFunction::Constant => 0.0,
        }
    }
}

/// One trust region: centroid, log-volume, per-dimension log side lengths,
/// and the local surrogate fitted on the data window around it.
#[derive(Debug, Clone)]
pub struct TrustRegion {
    pub id: usize,
    pub centroid: Vec<f64>,
    pub log_volume: f64,
    pub log_lengths: Vec<f64>,
    pub local_model: GpModel,
    pub birth_iteration: usize,
    /// Index into the run dataset of the evaluation made when the region was
    /// (re-)initialized; backs the empty-window fallback.
    pub birth_index: usize,
    /// Window size at the most recent local hyperparameter fit.
    pub last_hyperfit_size: usize,
}

impl TrustRegion {
    /// A fresh region of volume `v_init` with isotropic side lengths.
    pub fn new(
        id: usize,
        centroid: Vec<f64>,
        v_init: f64,
        birth_iteration: usize,
        birth_index: usize,
        local_model: GpModel,
    ) -> Result<Self> {
        if !(v_init > 0.0) || !v_init.is_finite() {
            return Err(Error::InvalidParameter("initial volume must be positive".into()));
        }
        let d = centroid.len();
        let log_volume = v_init.ln();
        Ok(Self {
            id,
            centroid,
            log_volume,
            log_lengths: vec![log_volume / d as f64; d],
            local_model,
            birth_iteration,
            birth_index,
            last_hyperfit_size: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.centroid.len()
    }

    pub fn volume(&self) -> f64 {
        self.log_volume.exp()
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.log_lengths.iter().map(|l| l.exp()).collect()
    }

    /// The region box `[C - L/2, C + L/2]`, clipped to the unit cube for all
    /// geometric queries. Volume bookkeeping keeps the unclipped lengths.
    pub fn region_box(&self) -> AxisBox {
        let mut lower = Vec::with_capacity(self.dim());
        let mut upper = Vec::with_capacity(self.dim());
        for (c, ll) in self.centroid.iter().zip(&self.log_lengths) {
            let half = 0.5 * ll.exp();
            lower.push((c - half).max(0.0));
            upper.push((c + half).min(1.0).max((c - half).max(0.0)));
        }
        AxisBox { lower, upper }
    }

    /// The local-GP data window `[C - L, C + L]`: twice the region extent per
    /// axis, so the local model sees points from immediately outside the
    /// region and models the border well.
    pub fn window_box(&self) -> AxisBox {
        let mut lower = Vec::with_capacity(self.dim());
        let mut upper = Vec::with_capacity(self.dim());
        for (c, ll) in self.centroid.iter().zip(&self.log_lengths) {
            let len = ll.exp();
            lower.push((c - len).max(0.0));
            upper.push((c + len).min(1.0).max((c - len).max(0.0)));
        }
        AxisBox { lower, upper }
    }

    /// Discard rule: volume fell below half the initial volume.
    pub fn needs_discard(&self, v_init: f64) -> bool {
        self.log_volume < v_init.ln() - std::f64::consts::LN_2
    }
}

/// Moves the centroid to the point of the region deemed closest to the
/// threshold boundary by the local posterior mean. The previous centroid is
/// kept on ties or regressions, so `|mu - h|` at the centroid never
/// increases.
pub fn move_centroid(tr: &TrustRegion, threshold: f64, q: &BoxQuery) -> Vec<f64> {
    move_centroid_with(&tr.local_model, &tr.region_box(), &tr.centroid, threshold, q)
}

/// Centroid move under an explicit model; backs both the normal path and the
/// single-global-GP mode.
pub(crate) fn move_centroid_with(
    model: &GpModel,
    bounds: &AxisBox,
    current: &[f64],
    threshold: f64,
    q: &BoxQuery,
) -> Vec<f64> {
    let score = |x: &[f64]| {
        let (m, _) = model.posterior_one(x).expect("region box matches model dimension");
        -(m - threshold).abs()
    };
    let query = BoxQuery { bounds: bounds.clone(), ..q.clone() };
    let opt = maximize_in_box(score, &query);
    if opt.value > score(current) {
        opt.point
    } else {
        current.to_vec()
    }
}

/// Penalty from the confidence-bounded value range of a region:
/// `Phi(|l + u - 2h| / (2 sigma_bar))` with `sigma_bar = (u - l) / (2 beta)`.
/// A collapsed range (`u == l`) is defined as the neutral value 0.5. The
/// result always lies in [0.5, 1).
pub fn penalty_from_bounds(lcb_min: f64, ucb_max: f64, threshold: f64, beta: f64) -> f64 {
    let spread = ucb_max - lcb_min;
    if spread <= 0.0 || !spread.is_finite() {
        return 0.5;
    }
    let arg = beta * (lcb_min + ucb_max - 2.0 * threshold).abs() / spread;
    let p = norm_cdf(arg);
    // Phi saturates to 1.0 in double precision for large arguments; the
    // penalty range is half-open at 1.
    p.clamp(0.5, 1.0 - f64::EPSILON / 2.0)
}

/// Penalty of a region under its local model, extremizing the confidence
/// bounds over the region box.
pub fn penalty(tr: &TrustRegion, threshold: f64, beta: f64, q: &BoxQuery) -> Result<f64> {
    let query = BoxQuery { bounds: tr.region_box(), ..q.clone() };
    let (lcb_min, ucb_max) =
        crate::boxopt::extremize_confidence_bounds(&tr.local_model, &query.bounds, beta, &query)?;
    Ok(penalty_from_bounds(lcb_min, ucb_max, threshold, beta))
}

/// Volume update `V <- min(V * S(P), V_max)`, in log domain. Returns the new
/// log-volume; a zero adjustment factor maps to negative infinity, forcing a
/// discard.
pub fn update_volume(tr: &mut TrustRegion, penalty: f64, s: &SFunction, v_max: f64) -> f64 {
    let new_log = (tr.log_volume + s.log_factor(penalty)).min(v_max.ln());
    tr.log_volume = new_log;
    new_log
}

/// Redistributes the current volume over per-dimension side lengths in
/// proportion to the local lengthscales: `L = (V / prod(lambda))^(1/d) *
/// lambda`. The product of the lengths equals the volume exactly in log
/// space.
pub fn update_lengths(tr: &mut TrustRegion, lengthscales: &[f64]) -> Result<()> {
    let d = tr.dim();
    if lengthscales.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: lengthscales.len() });
    }
    if lengthscales.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
        return Err(Error::InvalidParameter("lengthscales must be strictly positive".into()));
    }
    let log_lams: Vec<f64> = lengthscales.iter().map(|l| l.ln()).collect();
    let sum_log_lam: f64 = log_lams.iter().sum();
    let base = (tr.log_volume - sum_log_lam) / d as f64;
    tr.log_lengths = log_lams.iter().map(|ll| base + ll).collect();
    Ok(())
}

/// Indices of dataset points inside the region's data window (closed
/// inequalities: points exactly on a window face are included).
pub fn data_window(tr: &TrustRegion, points: &[Vec<f64>]) -> Vec<usize> {
    let window = tr.window_box();
    points
        .iter()
        .enumerate()
        .filter(|(_, x)| window.contains(x))
        .map(|(i, _)| i)
        .collect()
}

/// Closed-form bound on the iterations a region can survive while its
/// confidence range sits entirely on one side of the threshold:
/// `zeta = log(V_init / V_max^2) / (log 2 - log(1 + exp(-b + a Phi(beta))))`.
/// Callers take the ceiling. Errors when the denominator is non-negative,
/// i.e. `beta <= Phi^-1(b / a)`.
pub fn zeta_bound(v_init: f64, v_max: f64, a: f64, b: f64, beta: f64) -> Result<f64> {
    if !(v_init > 0.0) || !(v_max > 0.0) || v_init >= v_max {
        return Err(Error::InvalidParameter("need 0 < v_init < v_max".into()));
    }
    if !(a > 0.0) {
        return Err(Error::InvalidParameter("sigmoid steepness a must be positive".into()));
    }
    let numerator = v_init.ln() - 2.0 * v_max.ln();
    let denominator = std::f64::consts::LN_2 - softplus(a * norm_cdf(beta) - b);
    if denominator >= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "beta {beta} does not exceed the bound {:.6} required for guaranteed shrink",
            norm_ppf(b / a)
        )));
    }
    Ok(numerator / denominator)
}
