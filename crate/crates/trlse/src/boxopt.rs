//! Derivative-free maximization of scalar scores over axis-aligned boxes and
//! over the complement of a union of boxes. This is the inner solver behind
//! every argmax/argmin in the estimation loop, so it is candidate-based and
//! deterministic: a scrambled Halton sequence inside boxes, uniform rejection
//! sampling for complements, and an optional coordinate-search polish.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::util::stream_rng;

/// An axis-aligned box, used both as a search domain and as a hole to avoid.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl AxisBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), got: upper.len() });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !l.is_finite() || !u.is_finite() || l > u) {
            return Err(Error::InvalidParameter("box must satisfy lower <= upper".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn unit(dim: usize) -> Self {
        Self { lower: vec![0.0; dim], upper: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Closed membership test.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }
}

/// A box search request: domain, candidate budget, seed, and whether to run
/// the coordinate-search polish after the candidate scan.
#[derive(Debug, Clone)]
pub struct BoxQuery {
    pub bounds: AxisBox,
    pub budget: usize,
    pub seed: u64,
    pub polish: bool,
}

impl BoxQuery {
    pub fn new(bounds: AxisBox, seed: u64) -> Self {
        let budget = default_budget(bounds.dim());
        Self { bounds, budget, seed, polish: true }
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget.max(1);
        self
    }

    pub fn without_polish(mut self) -> Self {
        self.polish = false;
        self
    }
}

/// Default candidate count: `min(4096, 512 * sqrt(d))`, bounding runtime in
/// high dimension.
pub fn default_budget(dim: usize) -> usize {
    let scaled = (512.0 * (dim.max(1) as f64).sqrt()).ceil() as usize;
    scaled.clamp(1, 4096)
}

/// Result of a box search. `candidate_value` is the best score over the raw
/// candidate set before polishing; `value >= candidate_value` always holds.
#[derive(Debug, Clone)]
pub struct BoxOptimum {
    pub point: Vec<f64>,
    pub value: f64,
    pub candidate_value: f64,
}

const POLISH_STEPS: usize = 40;
const POLISH_INITIAL_FRACTION: f64 = 0.1;
const POLISH_DECAY: f64 = 0.9;

/// First `n` primes, for Halton bases.
fn primes(n: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(n);
    let mut candidate: u64 = 2;
    while out.len() < n {
        if out.iter().all(|p| candidate % p != 0) {
            out.push(candidate);
        }
        candidate += 1;
    }
    out
}

/// Per-dimension digit permutation for Halton scrambling. Zero is fixed so
/// that leading zeros stay zeros.
fn digit_permutation(base: u64, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut perm: Vec<u64> = (0..base).collect();
    for i in (2..base as usize).rev() {
        let j = rng.gen_range(1..=i);
        perm.swap(i, j);
    }
    perm
}

fn radical_inverse(mut index: u64, base: u64, perm: &[u64]) -> f64 {
    let mut inv = 0.0;
    let mut scale = 1.0 / base as f64;
    while index > 0 {
        let digit = index % base;
        inv += perm[digit as usize] as f64 * scale;
        index /= base;
        scale /= base as f64;
    }
    inv
}

/// Scrambled Halton points inside a box. Candidate `i` depends only on
/// `(i, dim, seed)`, so sequences with larger budgets are supersets of
/// smaller ones.
pub(crate) fn halton_candidates(bounds: &AxisBox, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let d = bounds.dim();
    let bases = primes(d);
    let perms: Vec<Vec<u64>> = bases
        .iter()
        .enumerate()
        .map(|(k, &b)| {
            let mut rng = stream_rng(seed, "halton-perm", k as u64);
            digit_permutation(b, &mut rng)
        })
        .collect();
    (0..count)
        .map(|i| {
            (0..d)
                .map(|k| {
                    let u = radical_inverse(i as u64 + 1, bases[k], &perms[k]);
                    bounds.lower[k] + u * (bounds.upper[k] - bounds.lower[k])
                })
                .collect()
        })
        .collect()
}

fn argmax_by_index(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

/// Coordinate-search refinement: cycles coordinates with a geometrically
/// decaying step starting at 10% of the box width, accepting only strict
/// improvements that satisfy `feasible`.
fn polish<F, G>(
    score: &F,
    feasible: &G,
    bounds: &AxisBox,
    mut point: Vec<f64>,
    mut value: f64,
) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64 + ?Sized,
    G: Fn(&[f64]) -> bool + ?Sized,
{
    let d = bounds.dim();
    let mut step = POLISH_INITIAL_FRACTION;
    for iter in 0..POLISH_STEPS {
        let k = iter % d;
        let width = bounds.upper[k] - bounds.lower[k];
        if width > 0.0 {
            for dir in [1.0, -1.0] {
                let mut trial = point.clone();
                trial[k] = (trial[k] + dir * step * width).clamp(bounds.lower[k], bounds.upper[k]);
                if trial[k] != point[k] && feasible(&trial) {
                    let v = score(&trial);
                    if v > value {
                        point = trial;
                        value = v;
                        break;
                    }
                }
            }
        }
        step *= POLISH_DECAY;
    }
    (point, value)
}

/// Maximizes a score over a box via scrambled Halton candidates plus an
/// optional polish. Deterministic for a given seed; ties resolve to the
/// lowest candidate index.
pub fn maximize_in_box<F>(score: F, q: &BoxQuery) -> BoxOptimum
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let candidates = halton_candidates(&q.bounds, q.budget.max(1), q.seed);
    let scores: Vec<f64> = candidates.iter().map(|c| score(c)).collect();
    let best = argmax_by_index(&scores);
    let candidate_value = scores[best];
    let (point, value) = if q.polish {
        polish(&score, &|_: &[f64]| true, &q.bounds, candidates[best].clone(), candidate_value)
    } else {
        (candidates[best].clone(), candidate_value)
    };
    BoxOptimum { point, value, candidate_value }
}

/// Uniform rejection samples from `domain \ union(holes)`. Stops after ten
/// times the budget in draws; an empty result means the holes covered every
/// draw.
pub(crate) fn complement_candidates(
    domain: &AxisBox,
    holes: &[AxisBox],
    budget: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let budget = budget.max(1);
    let mut rng = stream_rng(seed, "complement", 0);
    let d = domain.dim();
    let mut candidates: Vec<Vec<f64>> = Vec::with_capacity(budget);
    let mut draws = 0usize;
    while candidates.len() < budget && draws < 10 * budget {
        draws += 1;
        let x: Vec<f64> = (0..d)
            .map(|k| {
                let u: f64 = rng.gen();
                domain.lower[k] + u * (domain.upper[k] - domain.lower[k])
            })
            .collect();
        if !holes.iter().any(|h| h.contains(&x)) {
            candidates.push(x);
        }
    }
    if candidates.is_empty() {
        return Err(Error::NoFeasibleCandidate);
    }
    Ok(candidates)
}

/// Maximizes a score over `domain \ union(holes)`. Candidates are uniform
/// draws with hole rejection; if rejection exhausts ten times the budget the
/// scan runs on whatever feasible candidates were found, and only a fully
/// covered domain is an error.
pub fn maximize_in_complement<F>(
    score: F,
    domain: &AxisBox,
    holes: &[AxisBox],
    q: &BoxQuery,
) -> Result<BoxOptimum>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let candidates = complement_candidates(domain, holes, q.budget, q.seed)?;
    let scores: Vec<f64> = candidates.iter().map(|c| score(c)).collect();
    let best = argmax_by_index(&scores);
    let candidate_value = scores[best];
    let out_of_holes = |x: &[f64]| !holes.iter().any(|h| h.contains(x));
    let (point, value) = if q.polish {
        polish(&score, &out_of_holes, domain, candidates[best].clone(), candidate_value)
    } else {
        (candidates[best].clone(), candidate_value)
    };
    debug_assert!(out_of_holes(&point));
    Ok(BoxOptimum { point, value, candidate_value })
}

/// Extremizes the confidence bounds of a model over a box: the minimum of
/// `mu - beta*sigma` and the maximum of `mu + beta*sigma`, sharing one
/// candidate set between the two scans.
pub fn extremize_confidence_bounds(
    model: &GpModel,
    bounds: &AxisBox,
    beta: f64,
    q: &BoxQuery,
) -> Result<(f64, f64)> {
    let candidates = halton_candidates(bounds, q.budget.max(1), q.seed);
    let mut neg_lcb = Vec::with_capacity(candidates.len());
    let mut ucb = Vec::with_capacity(candidates.len());
    for c in &candidates {
        let (m, v) = model.posterior_one(c)?;
        let s = v.sqrt();
        neg_lcb.push(-(m - beta * s));
        ucb.push(m + beta * s);
    }
    let lcb_score = |x: &[f64]| {
        let (m, v) = model.posterior_one(x).expect("dimension checked");
        -(m - beta * v.sqrt())
    };
    let ucb_score = |x: &[f64]| {
        let (m, v) = model.posterior_one(x).expect("dimension checked");
        m + beta * v.sqrt()
    };
    let i_lcb = argmax_by_index(&neg_lcb);
    let i_ucb = argmax_by_index(&ucb);
    let (mut best_neg_lcb, mut best_ucb) = (neg_lcb[i_lcb], ucb[i_ucb]);
    if q.polish {
        let always = |_: &[f64]| true;
        best_neg_lcb =
            polish(&lcb_score, &always, bounds, candidates[i_lcb].clone(), best_neg_lcb).1;
        best_ucb = polish(&ucb_score, &always, bounds, candidates[i_ucb].clone(), best_ucb).1;
    }
    let lcb_min = -best_neg_lcb;
    let ucb_max = best_ucb;
    Ok((lcb_min.min(ucb_max), ucb_max))
}
