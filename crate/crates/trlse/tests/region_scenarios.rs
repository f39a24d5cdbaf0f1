//! Scenario and property suites for the region update machinery.

use rand::Rng;
use trlse::boxopt::{AxisBox, BoxQuery};
use trlse::engine::{initialize, run, step, RunConfig};
use trlse::gp::GpModel;
use trlse::kernel::{KernelFamily, KernelSpec};
use trlse::problems::{BenchmarkFunction, ProblemBuilder};
use trlse::region::{
    penalty, penalty_from_bounds, update_lengths, update_volume, zeta_bound, SFunction,
    TrustRegion,
};
use trlse::util::{norm_cdf, stream_rng};

/// A region whose local model confidently sits above the threshold shrinks
/// out of existence within `ceil(zeta)` volume updates.
#[test]
fn confident_off_boundary_region_dies_within_the_zeta_bound() {
    let (v_init, v_max, a, b, beta) = (1e-3, 5e-2, 8.0, 6.0, 1.96);
    let zeta = zeta_bound(v_init, v_max, a, b, beta).unwrap();
    let max_steps = zeta.ceil().max(1.0) as usize;
    assert_eq!(max_steps, 1);

    // Noiseless local model pinned far above h = 0 on a dense grid: the
    // lower confidence bound stays above the threshold everywhere in the
    // region.
    let xs: Vec<Vec<f64>> = (0..=40).map(|i| vec![i as f64 / 40.0]).collect();
    let ys = vec![3.0; xs.len()];
    let kernel = KernelSpec::new(KernelFamily::Matern52, vec![0.5], 1.0).unwrap();
    let model = GpModel::fit(kernel, 1e-8, xs, ys).unwrap();
    let mut tr = TrustRegion::new(0, vec![0.5], v_init, 0, 0, model).unwrap();

    let s = SFunction::sigmoid(a, b).unwrap();
    let mut shrink_steps = 0;
    while !tr.needs_discard(v_init) {
        shrink_steps += 1;
        assert!(shrink_steps <= max_steps, "region survived past ceil(zeta)");
        let q = BoxQuery::new(tr.region_box(), 7).with_budget(512);
        let p = penalty(&tr, 0.0, beta, &q).unwrap();
        assert!(p >= norm_cdf(beta) - 1e-9, "penalty {p} below Phi(beta)");
        update_volume(&mut tr, p, &s, v_max);
    }
    assert_eq!(shrink_steps, max_steps);
}

/// Randomized sweep of the penalty/volume algebra: range of the penalty,
/// guaranteed shrink past `Phi(beta)`, the volume cap, and the log-domain
/// length-product identity.
#[test]
fn penalty_and_volume_invariants_hold_over_random_tuples() {
    let mut rng = stream_rng(2024, "pen-vol", 0);
    let kernel = KernelSpec::new(KernelFamily::Rbf, vec![1.0; 3], 1.0).unwrap();
    for case in 0..2000 {
        let h = rng.gen_range(-3.0..3.0);
        let lcb = h + rng.gen_range(-4.0..4.0);
        let ucb = lcb + rng.gen_range(0.0..5.0);
        let beta: f64 = rng.gen_range(0.6745..3.0);
        let p = penalty_from_bounds(lcb, ucb, h, beta);
        assert!((0.5..1.0).contains(&p), "case {case}: penalty {p} out of range");

        let psi = rng.gen_range(0.55..0.95);
        let a = rng.gen_range(2.0..12.0);
        let s = SFunction::sigmoid(a, psi * a).unwrap();
        if p > norm_cdf(beta) && norm_cdf(beta) >= psi {
            assert!(s.factor(p) < 1.0, "case {case}: no shrink at penalty {p}");
        }

        let v_max = rng.gen_range(1e-3..0.5f64);
        let v0 = rng.gen_range(1e-8..1.0f64).min(v_max);
        let mut tr =
            TrustRegion::new(0, vec![0.5; 3], v0, 0, 0, GpModel::prior(kernel.clone(), 0.0))
                .unwrap();
        update_volume(&mut tr, p, &s, v_max);
        assert!(tr.log_volume <= v_max.ln() + 1e-12, "case {case}: volume exceeds cap");

        let lams: Vec<f64> = (0..3).map(|_| rng.gen_range(0.05..20.0)).collect();
        update_lengths(&mut tr, &lams).unwrap();
        let sum: f64 = tr.log_lengths.iter().sum();
        assert!(
            (sum - tr.log_volume).abs() <= 1e-9 * tr.log_volume.abs().max(1.0),
            "case {case}: length product drifted from volume"
        );
    }
}

/// Log-domain bookkeeping survives initial volumes at the edge of double
/// precision.
#[test]
fn extreme_initial_volumes_stay_finite_in_log_domain() {
    let d = 1000;
    let kernel = KernelSpec::new(KernelFamily::Rbf, vec![1.0; d], 1.0).unwrap();
    let mut tr = TrustRegion::new(
        0,
        vec![0.5; d],
        1e-300,
        0,
        0,
        GpModel::prior(kernel, 0.0),
    )
    .unwrap();
    assert!(tr.log_volume.is_finite());
    let lams = vec![0.5; d];
    update_lengths(&mut tr, &lams).unwrap();
    let sum: f64 = tr.log_lengths.iter().sum();
    assert!((sum - tr.log_volume).abs() <= 1e-9 * tr.log_volume.abs());
    let lengths = tr.lengths();
    assert!(lengths.iter().all(|l| l.is_finite() && *l > 0.0));
}

/// Driving the full engine on a problem whose values sit far above the
/// threshold forces every region through the discard path, and each discard
/// costs exactly one extra evaluation.
#[test]
fn discards_cost_one_evaluation_each() {
    let problem = ProblemBuilder::new(BenchmarkFunction::Levy, 2)
        .sample_count(20_000)
        .fraction(0.985)
        .relative_noise(0.0)
        .build()
        .unwrap();
    // With a ~98.5% superlevel fraction nearly every initial value is above
    // the threshold... so regions mostly bracket nothing and shrink hard.
    let mut config = RunConfig::for_problem(&problem, 30, 9);
    config.num_regions = 4;
    config.v_init = 1e-4;
    config.v_max = 5e-2;
    let mut state = initialize(&problem, &config).unwrap();
    let before = state.evaluations();
    assert_eq!(before, 4);
    step(&mut state, &problem, &config).unwrap();
    let event = state.events.last().unwrap();
    let new_evals = state.evaluations() - before;
    assert_eq!(new_evals, event.reinits.len() + 1, "k discards cost k+1 evaluations");
    assert_eq!(state.regions.len(), 4, "live region count is pinned at R");
}

/// Budget conservation across a full run: every evaluation is accounted for
/// by initialization, re-initializations, and local iterations.
#[test]
fn budget_conservation_over_a_full_run() {
    let problem = ProblemBuilder::new(BenchmarkFunction::Mishra03, 2)
        .sample_count(50_000)
        .build()
        .unwrap();
    let mut config = RunConfig::for_problem(&problem, 40, 3);
    config.num_regions = 5;
    config.v_init = 1e-4;
    config.v_max = 5e-2;
    let state = run(&problem, &config).unwrap();
    let reinits: usize = state.events.iter().map(|e| e.reinits.len()).sum();
    assert_eq!(
        state.evaluations(),
        config.num_regions + reinits + state.local_iterations,
        "evaluations must decompose as R + N_reinit + T"
    );
    assert!(state.evaluations() <= config.budget + 1);
    assert!(reinits + state.local_iterations <= config.budget - config.num_regions + 1);
    assert_eq!(state.regions.len(), config.num_regions);
    assert_eq!(
        state.regions_initialized,
        config.num_regions + reinits,
        "n increments exactly on re-initialization"
    );
}
