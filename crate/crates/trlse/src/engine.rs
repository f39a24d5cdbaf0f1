//! The main estimation loop, baseline strategies, and the classifier built
//! from the run's surrogates.
//!
//! One loop pass performs, in order: per-region updates (centroid move,
//! penalty, volume and length updates, local-GP refresh from the data
//! window), replacement of collapsed regions by maximizing the global
//! acquisition over the complement of the live regions, and one local
//! evaluation at the best per-region acquisition maximum. The budget counts
//! every function evaluation, including re-initializations.

use rand::Rng;
use rayon::prelude::*;

use crate::acquisition::{straddle_score, thompson_scores, AcquisitionKind, AcquisitionSpec};
use crate::boxopt::{
    complement_candidates, extremize_confidence_bounds, maximize_in_box, maximize_in_complement,
    AxisBox, BoxOptimum, BoxQuery,
};
use crate::error::{Error, Result};
use crate::fit::{fit_hyperparams, FittedHyperparams};
use crate::gp::{GpModel, Standardizer};
use crate::kernel::KernelFamily;
use crate::problems::Problem;
use crate::region::{
    data_window, move_centroid_with, penalty_from_bounds, update_lengths, update_volume,
    SFunction, TrustRegion,
};
use crate::util::{derive_seed, norm_ppf, stream_rng};

/// Hyperparameters (and the standardizer) are refit after this many new
/// observations; the factorization is rebuilt on every observation.
const HYPERFIT_INTERVAL: usize = 10;
/// Window growth that triggers a local hyperparameter refit.
const LOCAL_HYPERFIT_GROWTH: usize = 10;
/// Candidate cap for Thompson selections: joint path sampling costs a cubic
/// eigendecomposition in the candidate count.
const THOMPSON_CANDIDATE_CAP: usize = 512;

/// Level-set membership label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Superlevel,
    Sublevel,
}

/// Ablation switches.
#[derive(Debug, Clone, Copy, Default)]
pub struct AblationFlags {
    /// Replace discarded regions at uniform locations (still outside the
    /// other regions) instead of maximizing the global acquisition.
    pub random_reinit: bool,
    /// Use the global GP, restricted to the region boxes, for all local
    /// computations.
    pub single_global_gp: bool,
    /// Freeze region volumes (adjustment factor identically 1).
    pub constant_volume: bool,
}

/// Full configuration of one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Threshold in raw function units.
    pub threshold: f64,
    /// Total evaluation budget, counting initialization and
    /// re-initialization evaluations.
    pub budget: usize,
    pub v_init: f64,
    pub v_max: f64,
    pub num_regions: usize,
    pub beta: f64,
    pub global_acquisition: AcquisitionKind,
    pub local_acquisition: AcquisitionKind,
    pub kernel_family: KernelFamily,
    pub s_function: SFunction,
    pub seed: u64,
    pub ablations: AblationFlags,
}

impl RunConfig {
    /// Defaults for a calibrated problem: Straddle at both levels, Matern 5/2,
    /// the standard sigmoid adjustment, and beta = 1.96.
    pub fn for_problem(problem: &Problem, budget: usize, seed: u64) -> Self {
        let d = problem.dim();
        let (v_init, v_max, num_regions) = default_region_settings(d);
        Self {
            threshold: problem.threshold(),
            budget,
            v_init,
            v_max,
            num_regions,
            beta: 1.96,
            global_acquisition: AcquisitionKind::Straddle,
            local_acquisition: AcquisitionKind::Straddle,
            kernel_family: KernelFamily::Matern52,
            s_function: SFunction::default_sigmoid(),
            seed,
            ablations: AblationFlags::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.threshold.is_finite() {
            return Err(Error::InvalidParameter("threshold must be finite".into()));
        }
        if !(self.v_init > 0.0 && self.v_max > 0.0 && self.v_init < self.v_max) {
            return Err(Error::InvalidParameter("need 0 < v_init < v_max".into()));
        }
        if self.num_regions < 1 {
            return Err(Error::InvalidParameter("need at least one region".into()));
        }
        if self.budget < self.num_regions {
            return Err(Error::InvalidParameter(
                "budget must cover the initial region evaluations".into(),
            ));
        }
        if !self.beta.is_finite() || self.beta < norm_ppf(0.75) - 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "beta must be >= {:.4}",
                norm_ppf(0.75)
            )));
        }
        for kind in [self.global_acquisition, self.local_acquisition] {
            if kind == AcquisitionKind::C2Lse {
                return Err(Error::UnsupportedAcquisition("c2lse"));
            }
        }
        Ok(())
    }
}

/// Per-dimension defaults when the benchmark table has no entry: initial
/// volume near `0.5^d`, generous cap, and a few dozen regions.
pub fn default_region_settings(dim: usize) -> (f64, f64, usize) {
    let v_init = 0.5f64.powi(dim as i32).max(1e-300);
    let v_max = if dim <= 10 { 1e-1 } else { 1e-2 };
    let regions = if dim <= 10 { 40 } else { 50 };
    (v_init.min(v_max / 4.0), v_max, regions)
}

/// One evaluated observation in raw units.
#[derive(Debug, Clone)]
pub struct EvaluatedPoint {
    pub x: Vec<f64>,
    pub y_raw: f64,
}

/// A selection made by an acquisition maximization, with the runtime
/// non-negativity context: `feasible` is true when some examined candidate's
/// beta-confidence interval contained the threshold (meaningful for Straddle
/// only).
#[derive(Debug, Clone)]
pub struct SelectionRecord {
    pub region_id: usize,
    pub acquisition_value: f64,
    pub feasible: bool,
}

/// The local selection of one loop pass, with the global acquisition value
/// at the selected point logged before its evaluation.
#[derive(Debug, Clone)]
pub struct LocalSelectionRecord {
    pub region_id: usize,
    pub acquisition_value: f64,
    pub feasible: bool,
    pub global_acquisition_value: f64,
}

/// Structured record of one loop pass.
#[derive(Debug, Clone)]
pub struct StepEvent {
    pub step: usize,
    pub evaluations: usize,
    pub regions_initialized: usize,
    pub reinits: Vec<SelectionRecord>,
    pub local_selection: Option<LocalSelectionRecord>,
    pub region_log_volumes: Vec<f64>,
}

/// Mutable state of a run.
#[derive(Debug, Clone)]
pub struct RunState {
    pub dataset: Vec<EvaluatedPoint>,
    pub standardizer: Standardizer,
    pub global_model: GpModel,
    pub global_hypers: FittedHyperparams,
    pub regions: Vec<TrustRegion>,
    /// Count of regions ever initialized (`n`).
    pub regions_initialized: usize,
    /// Completed local iterations (`t`).
    pub local_iterations: usize,
    /// Completed loop passes.
    pub steps: usize,
    pub complete: bool,
    pub events: Vec<StepEvent>,
    observations_at_last_hyperfit: usize,
}

impl RunState {
    pub fn evaluations(&self) -> usize {
        self.dataset.len()
    }

    /// Global acquisition values at every re-initialization point, in order.
    pub fn reinit_acquisition_values(&self) -> Vec<f64> {
        self.events
            .iter()
            .flat_map(|e| e.reinits.iter().map(|r| r.acquisition_value))
            .collect()
    }

    /// Whether some re-initialization (after the first) had an acquisition
    /// value at or below the running average of the values so far.
    pub fn running_average_condition_hit(&self) -> bool {
        running_average_condition_hit(&self.reinit_acquisition_values())
    }
}

/// `true` when some `a_N` with `N >= 2` satisfies `a_N <= mean(a_1..a_N)`.
pub fn running_average_condition_hit(values: &[f64]) -> bool {
    let mut sum = 0.0;
    for (i, v) in values.iter().enumerate() {
        sum += v;
        if i >= 1 && *v <= sum / (i + 1) as f64 {
            return true;
        }
    }
    false
}

fn standardized_targets(dataset: &[EvaluatedPoint], std: &Standardizer) -> Vec<f64> {
    dataset.iter().map(|p| std.transform(p.y_raw)).collect()
}

fn dataset_points(dataset: &[EvaluatedPoint]) -> Vec<Vec<f64>> {
    dataset.iter().map(|p| p.x.clone()).collect()
}

/// Rebuilds the global factorization; refits the standardizer and the global
/// hyperparameters on the configured cadence.
fn refresh_global(state: &mut RunState, config: &RunConfig, force_hyperfit: bool) -> Result<()> {
    let n = state.dataset.len();
    if force_hyperfit || n >= state.observations_at_last_hyperfit + HYPERFIT_INTERVAL {
        let raw: Vec<f64> = state.dataset.iter().map(|p| p.y_raw).collect();
        state.standardizer = Standardizer::fit(&raw, config.threshold);
        let xs = dataset_points(&state.dataset);
        let ys = standardized_targets(&state.dataset, &state.standardizer);
        state.global_hypers = fit_hyperparams(
            &xs,
            &ys,
            config.kernel_family,
            derive_seed(config.seed, "global-hyperfit", n as u64),
        )?;
        state.observations_at_last_hyperfit = n;
    }
    state.global_model = GpModel::fit(
        state.global_hypers.kernel.clone(),
        state.global_hypers.noise_variance,
        dataset_points(&state.dataset),
        standardized_targets(&state.dataset, &state.standardizer),
    )?;
    Ok(())
}

/// Refits a region's local model from its data window. An empty window falls
/// back to the nearest evaluated point plus the region's birth evaluation.
fn refresh_local_model(
    tr: &mut TrustRegion,
    dataset: &[EvaluatedPoint],
    standardizer: &Standardizer,
    config: &RunConfig,
) -> Result<()> {
    let points = dataset_points(dataset);
    let mut indices = data_window(tr, &points);
    if indices.is_empty() {
        let nearest = points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let d2: f64 =
                    p.iter().zip(&tr.centroid).map(|(a, b)| (a - b) * (a - b)).sum();
                (i, d2)
            })
            .min_by(|a, b| a.1.partial_cmp(&b.1).expect("distances are finite"))
            .map(|(i, _)| i)
            .expect("dataset is never empty after initialization");
        indices.push(nearest);
        if tr.birth_index < dataset.len() && tr.birth_index != nearest {
            indices.push(tr.birth_index);
            indices.sort_unstable();
        }
    }
    let xs: Vec<Vec<f64>> = indices.iter().map(|&i| points[i].clone()).collect();
    let ys: Vec<f64> = indices.iter().map(|&i| standardizer.transform(dataset[i].y_raw)).collect();
    if tr.last_hyperfit_size == 0 || xs.len() >= tr.last_hyperfit_size + LOCAL_HYPERFIT_GROWTH {
        let seed = derive_seed(
            config.seed,
            "local-hyperfit",
            (tr.id as u64) << 32 | xs.len() as u64,
        );
        let hypers = fit_hyperparams(&xs, &ys, config.kernel_family, seed)?;
        tr.last_hyperfit_size = xs.len();
        tr.local_model = GpModel::fit(hypers.kernel, hypers.noise_variance, xs, ys)?;
    } else {
        tr.local_model = GpModel::fit(
            tr.local_model.kernel().clone(),
            tr.local_model.noise_variance(),
            xs,
            ys,
        )?;
    }
    Ok(())
}

fn scan_seed(config: &RunConfig, label: &str, step: usize, id: usize) -> u64 {
    derive_seed(config.seed, label, (step as u64) << 32 | id as u64)
}

/// The shared initial design: `R` uniform centroids. All methods draw the
/// same design for the same seed.
fn initial_design(dim: usize, num_points: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream_rng(seed, "init-design", 0);
    (0..num_points).map(|_| (0..dim).map(|_| rng.gen::<f64>()).collect()).collect()
}

/// Draws and evaluates `R` uniform centroids, builds the standardizer and the
/// global model, and opens one region of volume `v_init` per centroid, each
/// with a local model fit on its own evaluation.
pub fn initialize(problem: &Problem, config: &RunConfig) -> Result<RunState> {
    config.validate()?;
    let d = problem.dim();
    let centroids = initial_design(d, config.num_regions, config.seed);
    let mut dataset = Vec::with_capacity(config.budget + 1);
    for c in &centroids {
        dataset.push(EvaluatedPoint { x: c.clone(), y_raw: problem.eval(c, config.seed) });
    }
    let raw: Vec<f64> = dataset.iter().map(|p| p.y_raw).collect();
    let standardizer = Standardizer::fit(&raw, config.threshold);
    let xs = dataset_points(&dataset);
    let ys = standardized_targets(&dataset, &standardizer);
    let global_hypers = fit_hyperparams(
        &xs,
        &ys,
        config.kernel_family,
        derive_seed(config.seed, "global-hyperfit", dataset.len() as u64),
    )?;
    let global_model = GpModel::fit(
        global_hypers.kernel.clone(),
        global_hypers.noise_variance,
        xs.clone(),
        ys.clone(),
    )?;

    let mut regions = Vec::with_capacity(config.num_regions);
    for (i, c) in centroids.into_iter().enumerate() {
        let local_model = if config.ablations.single_global_gp {
            GpModel::prior(global_hypers.kernel.clone(), global_hypers.noise_variance)
        } else {
            let hypers = fit_hyperparams(
                std::slice::from_ref(&c),
                &[ys[i]],
                config.kernel_family,
                derive_seed(config.seed, "local-hyperfit", i as u64),
            )?;
            GpModel::fit(hypers.kernel, hypers.noise_variance, vec![c.clone()], vec![ys[i]])?
        };
        let mut tr = TrustRegion::new(i, c, config.v_init, 0, i, local_model)?;
        tr.last_hyperfit_size = 1;
        regions.push(tr);
    }

    Ok(RunState {
        observations_at_last_hyperfit: dataset.len(),
        dataset,
        standardizer,
        global_model,
        global_hypers,
        regions,
        regions_initialized: config.num_regions,
        local_iterations: 0,
        steps: 0,
        complete: false,
        events: Vec::new(),
    })
}

struct RegionScanOutcome {
    best_point: Vec<f64>,
    best_value: f64,
    candidate_value: f64,
}

/// Maximizes the configured local acquisition over a region box.
fn scan_region_acquisition(
    model: &GpModel,
    bounds: &AxisBox,
    spec: &AcquisitionSpec,
    seed: u64,
) -> Result<RegionScanOutcome> {
    let budget = crate::boxopt::default_budget(bounds.dim());
    match spec.kind {
        AcquisitionKind::Straddle => {
            let score = |x: &[f64]| {
                let (m, v) = model.posterior_one(x).expect("dimension checked by caller");
                straddle_score(m, v.sqrt(), spec)
            };
            let q = BoxQuery { bounds: bounds.clone(), budget, seed, polish: true };
            let opt: BoxOptimum = maximize_in_box(score, &q);
            Ok(RegionScanOutcome {
                best_point: opt.point,
                best_value: opt.value,
                candidate_value: opt.candidate_value,
            })
        }
        AcquisitionKind::ThompsonLse => {
            let q = BoxQuery {
                bounds: bounds.clone(),
                budget: budget.min(THOMPSON_CANDIDATE_CAP),
                seed,
                polish: false,
            };
            let candidates = crate::boxopt::halton_candidates(&q.bounds, q.budget, q.seed);
            let scores = thompson_scores(model, &candidates, spec, derive_seed(seed, "ts", 0))?;
            let mut best = 0;
            for (i, s) in scores.iter().enumerate().skip(1) {
                if *s > scores[best] {
                    best = i;
                }
            }
            Ok(RegionScanOutcome {
                best_point: candidates[best].clone(),
                best_value: scores[best],
                candidate_value: scores[best],
            })
        }
        AcquisitionKind::C2Lse => Err(Error::UnsupportedAcquisition("c2lse")),
    }
}

/// Phase (a): updates one region in place given the frozen global context.
/// Returns nothing; all effects are on the region.
fn update_region(
    tr: &mut TrustRegion,
    dataset: &[EvaluatedPoint],
    standardizer: &Standardizer,
    global_model: &GpModel,
    config: &RunConfig,
    step: usize,
) -> Result<()> {
    let internal_h = standardizer.internal_threshold();
    let model: &GpModel =
        if config.ablations.single_global_gp { global_model } else { &tr.local_model };
    let old_box = tr.region_box();
    let budget = crate::boxopt::default_budget(tr.dim());

    // Centroid move and penalty both read the pre-update box and model.
    let q_move = BoxQuery {
        bounds: old_box.clone(),
        budget,
        seed: scan_seed(config, "centroid-scan", step, tr.id),
        polish: true,
    };
    let new_centroid = move_centroid_with(model, &old_box, &tr.centroid, internal_h, &q_move);

    let q_bounds = BoxQuery {
        bounds: old_box.clone(),
        budget,
        seed: scan_seed(config, "penalty-scan", step, tr.id),
        polish: true,
    };
    let (lcb_min, ucb_max) =
        extremize_confidence_bounds(model, &old_box, config.beta, &q_bounds)?;
    let p = penalty_from_bounds(lcb_min, ucb_max, internal_h, config.beta);
    let lengthscales = model.kernel().lengthscales().to_vec();

    tr.centroid = new_centroid;
    let s_effective =
        if config.ablations.constant_volume { SFunction::Constant } else { config.s_function };
    update_volume(tr, p, &s_effective, config.v_max);
    update_lengths(tr, &lengthscales)?;

    if !config.ablations.single_global_gp {
        refresh_local_model(tr, dataset, standardizer, config)?;
    }
    Ok(())
}

/// One pass of the main loop: region updates, re-initialization of collapsed
/// regions via the global acquisition, and one local evaluation. Evaluations
/// are appended until the budget is crossed, at which point the state is
/// marked complete mid-step.
pub fn step(state: &mut RunState, problem: &Problem, config: &RunConfig) -> Result<()> {
    if state.complete {
        return Err(Error::InvalidParameter("run is already complete".into()));
    }
    let step_index = state.steps + 1;
    let spec_global = AcquisitionSpec::new(
        config.global_acquisition,
        config.beta,
        state.standardizer.internal_threshold(),
    )?;
    let spec_local = AcquisitionSpec::new(
        config.local_acquisition,
        config.beta,
        state.standardizer.internal_threshold(),
    )?;

    // Phase (a): independent per-region updates against the frozen global
    // context, merged back in slot order.
    {
        let dataset = &state.dataset;
        let standardizer = &state.standardizer;
        let global_model = &state.global_model;
        let results: Vec<Result<()>> = state
            .regions
            .par_iter_mut()
            .map(|tr| update_region(tr, dataset, standardizer, global_model, config, step_index))
            .collect();
        for r in results {
            r?;
        }
    }

    let mut reinits = Vec::new();
    let mut local_selection = None;

    // Phase (b): replace collapsed regions in ascending id order.
    let mut order: Vec<usize> = (0..state.regions.len()).collect();
    order.sort_by_key(|&slot| state.regions[slot].id);
    for slot in order {
        if !state.regions[slot].needs_discard(config.v_init) {
            continue;
        }
        let holes: Vec<AxisBox> = state
            .regions
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != slot)
            .map(|(_, r)| r.region_box())
            .collect();
        let new_id = state.regions_initialized;
        let seed = derive_seed(config.seed, "reinit-scan", new_id as u64);
        let domain = AxisBox::unit(problem.dim());
        let budget = crate::boxopt::default_budget(problem.dim());

        let (point, value, feasible) = if config.ablations.random_reinit {
            let candidates = complement_candidates(&domain, &holes, 64, seed)?;
            let x = candidates[0].clone();
            let (m, v) = state.global_model.posterior_one(&x)?;
            (x, straddle_score(m, v.sqrt(), &spec_global), false)
        } else {
            match spec_global.kind {
                AcquisitionKind::Straddle => {
                    let global_model = &state.global_model;
                    let score = |x: &[f64]| {
                        let (m, v) = global_model.posterior_one(x).expect("dimension checked");
                        straddle_score(m, v.sqrt(), &spec_global)
                    };
                    let q = BoxQuery { bounds: domain.clone(), budget, seed, polish: true };
                    let opt = maximize_in_complement(score, &domain, &holes, &q)?;
                    (opt.point, opt.value, opt.candidate_value >= 0.0)
                }
                AcquisitionKind::ThompsonLse => {
                    let candidates = complement_candidates(
                        &domain,
                        &holes,
                        budget.min(THOMPSON_CANDIDATE_CAP),
                        seed,
                    )?;
                    let scores = thompson_scores(
                        &state.global_model,
                        &candidates,
                        &spec_global,
                        derive_seed(seed, "ts", 0),
                    )?;
                    let mut best = 0;
                    for (i, s) in scores.iter().enumerate().skip(1) {
                        if *s > scores[best] {
                            best = i;
                        }
                    }
                    (candidates[best].clone(), scores[best], false)
                }
                AcquisitionKind::C2Lse => return Err(Error::UnsupportedAcquisition("c2lse")),
            }
        };

        let y = problem.eval(&point, config.seed);
        state.dataset.push(EvaluatedPoint { x: point.clone(), y_raw: y });
        let birth_index = state.dataset.len() - 1;
        state.regions_initialized += 1;

        let placeholder = GpModel::prior(
            state.global_hypers.kernel.clone(),
            state.global_hypers.noise_variance,
        );
        let mut fresh =
            TrustRegion::new(new_id, point, config.v_init, step_index, birth_index, placeholder)?;
        refresh_global(state, config, false)?;
        if !config.ablations.single_global_gp {
            refresh_local_model(&mut fresh, &state.dataset, &state.standardizer, config)?;
        }
        state.regions[slot] = fresh;
        reinits.push(SelectionRecord { region_id: new_id, acquisition_value: value, feasible });

        if state.dataset.len() > config.budget {
            state.complete = true;
            break;
        }
    }

    // Phase (c): one evaluation at the best per-region local acquisition
    // maximum.
    if !state.complete {
        let dataset_len = state.dataset.len();
        let scans: Vec<Result<RegionScanOutcome>> = state
            .regions
            .par_iter()
            .map(|tr| {
                let model: &GpModel = if config.ablations.single_global_gp {
                    &state.global_model
                } else {
                    &tr.local_model
                };
                scan_region_acquisition(
                    model,
                    &tr.region_box(),
                    &spec_local,
                    scan_seed(config, "local-scan", step_index, tr.id),
                )
            })
            .collect();
        let mut best_slot = None;
        let mut feasible = false;
        let mut outcomes = Vec::with_capacity(scans.len());
        for scan in scans {
            outcomes.push(scan?);
        }
        for (slot, outcome) in outcomes.iter().enumerate() {
            feasible |= outcome.candidate_value >= 0.0;
            match best_slot {
                None => best_slot = Some(slot),
                Some(b) => {
                    if outcome.best_value > outcomes[b].best_value {
                        best_slot = Some(slot);
                    }
                }
            }
        }
        let best_slot = best_slot.expect("at least one region is always live");
        let chosen = &outcomes[best_slot];
        let feasible = feasible && spec_local.kind == AcquisitionKind::Straddle;

        let (gm, gv) = state.global_model.posterior_one(&chosen.best_point)?;
        let global_acq = straddle_score(
            gm,
            gv.sqrt(),
            &AcquisitionSpec::new(
                AcquisitionKind::Straddle,
                config.beta,
                state.standardizer.internal_threshold(),
            )?,
        );

        let y = problem.eval(&chosen.best_point, config.seed);
        state
            .dataset
            .push(EvaluatedPoint { x: chosen.best_point.clone(), y_raw: y });
        refresh_global(state, config, false)?;
        state.local_iterations += 1;
        local_selection = Some(LocalSelectionRecord {
            region_id: state.regions[best_slot].id,
            acquisition_value: chosen.best_value,
            feasible,
            global_acquisition_value: global_acq,
        });
        debug_assert_eq!(dataset_len + 1, state.dataset.len());
        if state.dataset.len() > config.budget {
            state.complete = true;
        }
    }

    state.steps += 1;
    state.events.push(StepEvent {
        step: step_index,
        evaluations: state.dataset.len(),
        regions_initialized: state.regions_initialized,
        reinits,
        local_selection,
        region_log_volumes: state.regions.iter().map(|r| r.log_volume).collect(),
    });
    Ok(())
}

/// Runs the full loop: initialization followed by steps while the budget
/// allows.
pub fn run(problem: &Problem, config: &RunConfig) -> Result<RunState> {
    let mut state = initialize(problem, config)?;
    while !state.complete && state.dataset.len() <= config.budget {
        step(&mut state, problem, config)?;
    }
    state.complete = true;
    Ok(state)
}

/// A region snapshot inside a classifier: its box and, unless the run used a
/// single global surrogate, its local model.
#[derive(Debug, Clone)]
pub struct ClassifierRegion {
    pub bbox: AxisBox,
    pub model: Option<GpModel>,
}

/// Frozen classification rules: the global model labels points outside every
/// region, and the containing region's local model with the lowest posterior
/// variance labels points inside. `mu >= h` (closed) maps to the superlevel
/// set.
#[derive(Debug, Clone)]
pub struct Classifier {
    threshold: f64,
    global: GpModel,
    regions: Vec<ClassifierRegion>,
}

impl Classifier {
    pub fn new(global: GpModel, regions: Vec<ClassifierRegion>, threshold: f64) -> Self {
        Self { threshold, global, regions }
    }

    pub fn global_model(&self) -> &GpModel {
        &self.global
    }

    pub fn regions(&self) -> &[ClassifierRegion] {
        &self.regions
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Labels one point.
    pub fn classify_one(&self, x: &[f64]) -> Result<Label> {
        let mut chosen: Option<(f64, f64)> = None; // (variance, mean)
        for region in &self.regions {
            if region.bbox.contains(x) {
                let model = region.model.as_ref().unwrap_or(&self.global);
                let (m, v) = model.posterior_one(x)?;
                let better = match chosen {
                    None => true,
                    Some((bv, _)) => v < bv,
                };
                if better {
                    chosen = Some((v, m));
                }
            }
        }
        let mean = match chosen {
            Some((_, m)) => m,
            None => self.global.posterior_one(x)?.0,
        };
        Ok(if mean >= self.threshold { Label::Superlevel } else { Label::Sublevel })
    }

    pub fn classify(&self, points: &[Vec<f64>]) -> Result<Vec<Label>> {
        points.iter().map(|p| self.classify_one(p)).collect()
    }
}

/// Takes a classifier snapshot of the current state; valid at any step.
pub fn snapshot(state: &RunState, config: &RunConfig) -> Classifier {
    let regions = state
        .regions
        .iter()
        .map(|tr| ClassifierRegion {
            bbox: tr.region_box(),
            model: if config.ablations.single_global_gp {
                None
            } else {
                Some(tr.local_model.clone())
            },
        })
        .collect();
    Classifier::new(
        state.global_model.clone(),
        regions,
        state.standardizer.internal_threshold(),
    )
}

/// Classifies a batch with an existing snapshot.
pub fn classify(classifier: &Classifier, points: &[Vec<f64>]) -> Result<Vec<Label>> {
    classifier.classify(points)
}

/// Baseline strategies sharing the budget semantics and initial design.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    Random,
    GlobalStraddle,
}

/// Initializes a baseline run: the same R-point initial design as the main
/// algorithm for the same seed, a global model, and no regions.
pub fn baseline_initialize(problem: &Problem, config: &RunConfig) -> Result<RunState> {
    config.validate()?;
    let centroids = initial_design(problem.dim(), config.num_regions, config.seed);
    let mut dataset = Vec::with_capacity(config.budget);
    for c in &centroids {
        dataset.push(EvaluatedPoint { x: c.clone(), y_raw: problem.eval(c, config.seed) });
    }
    let raw: Vec<f64> = dataset.iter().map(|p| p.y_raw).collect();
    let standardizer = Standardizer::fit(&raw, config.threshold);
    let xs = dataset_points(&dataset);
    let ys = standardized_targets(&dataset, &standardizer);
    let global_hypers = fit_hyperparams(
        &xs,
        &ys,
        config.kernel_family,
        derive_seed(config.seed, "global-hyperfit", dataset.len() as u64),
    )?;
    let global_model =
        GpModel::fit(global_hypers.kernel.clone(), global_hypers.noise_variance, xs, ys)?;
    Ok(RunState {
        observations_at_last_hyperfit: dataset.len(),
        dataset,
        standardizer,
        global_model,
        global_hypers,
        regions: Vec::new(),
        regions_initialized: 0,
        local_iterations: 0,
        steps: 0,
        complete: false,
        events: Vec::new(),
    })
}

/// One baseline acquisition: a uniform draw or a global Straddle maximum over
/// the whole unit box.
pub fn baseline_step(
    kind: BaselineKind,
    state: &mut RunState,
    problem: &Problem,
    config: &RunConfig,
) -> Result<()> {
    if state.complete {
        return Err(Error::InvalidParameter("run is already complete".into()));
    }
    let step_index = state.steps + 1;
    let (point, value) = match kind {
        BaselineKind::Random => {
            let mut rng = stream_rng(config.seed, "random-baseline", step_index as u64);
            let x: Vec<f64> = (0..problem.dim()).map(|_| rng.gen::<f64>()).collect();
            (x, 0.0)
        }
        BaselineKind::GlobalStraddle => {
            let spec = AcquisitionSpec::new(
                AcquisitionKind::Straddle,
                config.beta,
                state.standardizer.internal_threshold(),
            )?;
            let global_model = &state.global_model;
            let score = |x: &[f64]| {
                let (m, v) = global_model.posterior_one(x).expect("dimension checked");
                straddle_score(m, v.sqrt(), &spec)
            };
            let q = BoxQuery {
                bounds: AxisBox::unit(problem.dim()),
                budget: crate::boxopt::default_budget(problem.dim()),
                seed: derive_seed(config.seed, "straddle-baseline", step_index as u64),
                polish: true,
            };
            let opt = maximize_in_box(score, &q);
            (opt.point, opt.value)
        }
    };
    let y = problem.eval(&point, config.seed);
    state.dataset.push(EvaluatedPoint { x: point, y_raw: y });
    refresh_global(state, config, false)?;
    state.local_iterations += 1;
    state.steps += 1;
    state.events.push(StepEvent {
        step: step_index,
        evaluations: state.dataset.len(),
        regions_initialized: 0,
        reinits: Vec::new(),
        local_selection: Some(LocalSelectionRecord {
            region_id: 0,
            acquisition_value: value,
            feasible: false,
            global_acquisition_value: value,
        }),
        region_log_volumes: Vec::new(),
    });
    if state.dataset.len() >= config.budget {
        state.complete = true;
    }
    Ok(())
}

/// Runs a baseline to exactly `budget` evaluations.
pub fn run_baseline(kind: BaselineKind, problem: &Problem, config: &RunConfig) -> Result<RunState> {
    let mut state = baseline_initialize(problem, config)?;
    while !state.complete && state.dataset.len() < config.budget {
        baseline_step(kind, &mut state, problem, config)?;
    }
    state.complete = true;
    Ok(state)
}
