use rand::Rng;
use rayon::prelude::*;
use trlse::engine::{run, snapshot, Label, RunConfig};
use trlse::problems::{BenchmarkFunction, ProblemBuilder};
use trlse::util::stream_rng;

fn f1(pred: &[Label], truth: &[Label]) -> f64 {
    let (mut tp, mut fp, mut fnn) = (0f64, 0f64, 0f64);
    for (p, t) in pred.iter().zip(truth) {
        match (p, t) {
            (Label::Superlevel, Label::Superlevel) => tp += 1.0,
            (Label::Superlevel, Label::Sublevel) => fp += 1.0,
            (Label::Sublevel, Label::Superlevel) => fnn += 1.0,
            _ => {}
        }
    }
    if tp == 0.0 { 0.0 } else { 2.0 * tp / (2.0 * tp + fp + fnn) }
}

fn main() {
    let mut rng = stream_rng(555, "testset", 0);
    let test: Vec<Vec<f64>> = (0..10_000).map(|_| (0..10).map(|_| rng.gen::<f64>()).collect()).collect();
    let problem = ProblemBuilder::new(BenchmarkFunction::Levy, 10)
        .sample_count(1_000_000)
        .build()
        .unwrap();
    let truth = problem.ground_truth(&test);
    let jobs: Vec<(u64, bool)> = (0..5u64).flat_map(|s| [(s, false), (s, true)]).collect();
    let results: Vec<(u64, bool, f64, usize)> = jobs
        .par_iter()
        .map(|(seed, constant)| {
            let mut config = RunConfig::for_problem(&problem, 1200, *seed);
            config.num_regions = 20;
            config.v_init = 1e-5;
            config.v_max = 1e-1;
            config.ablations.constant_volume = *constant;
            let t0 = std::time::Instant::now();
            let state = run(&problem, &config).unwrap();
            let reinits: usize = state.events.iter().map(|e| e.reinits.len()).sum();
            let cls = snapshot(&state, &config);
            let score = f1(&cls.classify(&test).unwrap(), &truth);
            eprintln!("done seed {seed} const={constant} f1 {score:.4} reinits {reinits} in {:?}", t0.elapsed());
            (*seed, *constant, score, reinits)
        })
        .collect();
    for c in [false, true] {
        let mut v: Vec<f64> = results.iter().filter(|r| r.1 == c).map(|r| r.2).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let scores: Vec<String> = results.iter().filter(|r| r.1 == c).map(|r| format!("{:.3}", r.2)).collect();
        println!("B1200 R20 {}: median {:.4} [{}]", if c { "const" } else { "s1   " }, v[v.len() / 2], scores.join(" "));
    }
}
