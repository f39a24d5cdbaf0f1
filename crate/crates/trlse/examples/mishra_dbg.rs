use rand::Rng;
use trlse::engine::{run, snapshot, Label, RunConfig};
use trlse::problems::{BenchmarkFunction, ProblemBuilder};
use trlse::util::stream_rng;

fn main() {
    let problem = ProblemBuilder::new(BenchmarkFunction::Mishra03, 2)
        .sample_count(100_000)
        .build()
        .unwrap();
    println!("h = {}, noise = {}", problem.threshold(), problem.noise_std());
    for (budget, regions) in [(40usize, 5usize), (80, 10), (200, 10)] {
        let mut config = RunConfig::for_problem(&problem, budget, 3);
        config.num_regions = regions;
        config.v_init = 1e-4;
        config.v_max = 5e-2;
        let state = run(&problem, &config).unwrap();
        let zs: Vec<f64> = state.dataset.iter().map(|p| state.standardizer.transform(p.y_raw)).collect();
        let zmin = zs.iter().cloned().fold(f64::INFINITY, f64::min);
        let zmax = zs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let zpos = zs.iter().filter(|z| **z >= 0.0).count();
        let k = state.global_model.kernel();
        let cls = snapshot(&state, &config);
        let mut rng = stream_rng(1, "t", 0);
        let test: Vec<Vec<f64>> = (0..4000).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let truth = problem.ground_truth(&test);
        let pred = cls.classify(&test).unwrap();
        let (mut tp, mut fp, mut fnn, mut tn) = (0, 0, 0, 0);
        for (p, t) in pred.iter().zip(&truth) {
            match (p, t) {
                (Label::Superlevel, Label::Superlevel) => tp += 1,
                (Label::Superlevel, Label::Sublevel) => fp += 1,
                (Label::Sublevel, Label::Superlevel) => fnn += 1,
                _ => tn += 1,
            }
        }
        println!(
            "B{budget}: z in [{zmin:.2},{zmax:.2}] pos {zpos}/{} | lam {:?} sv {:.3} nv {:.4} | tp {tp} fp {fp} fn {fnn} tn {tn}",
            zs.len(),
            k.lengthscales().iter().map(|l| (l * 100.0).round() / 100.0).collect::<Vec<_>>(),
            k.signal_variance(),
            state.global_model.noise_variance()
        );
    }
}
