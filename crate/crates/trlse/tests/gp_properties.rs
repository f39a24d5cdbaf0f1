//! Cross-checks of the factorized GP posterior against an independent dense
//! linear solve, plus variance monotonicity.

use rand::Rng;
use trlse::gp::GpModel;
use trlse::kernel::{KernelFamily, KernelSpec};
use trlse::util::stream_rng;

/// Gaussian elimination with partial pivoting; deliberately independent of
/// the Cholesky path used by the implementation.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let mut pivot = col;
        for row in (col + 1)..n {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        let diag = a[col][col];
        assert!(diag.abs() > 0.0, "oracle matrix is singular");
        for row in (col + 1)..n {
            let factor = a[row][col] / diag;
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in (row + 1)..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x
}

/// Posterior mean/variance by direct dense solves of the regularized system.
fn oracle_posterior(
    kernel: &KernelSpec,
    noise: f64,
    jitter: f64,
    xs: &[Vec<f64>],
    ys: &[f64],
    query: &[f64],
) -> (f64, f64) {
    let n = xs.len();
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            k[i][j] = kernel.eval(&xs[i], &xs[j]).unwrap();
        }
        k[i][i] += noise + jitter;
    }
    let kq: Vec<f64> = xs.iter().map(|x| kernel.eval(x, query).unwrap()).collect();
    let alpha = solve_dense(k.clone(), ys.to_vec());
    let w = solve_dense(k, kq.clone());
    let mean: f64 = kq.iter().zip(&alpha).map(|(a, b)| a * b).sum();
    let reduction: f64 = kq.iter().zip(&w).map(|(a, b)| a * b).sum();
    (mean, (kernel.eval(query, query).unwrap() - reduction).max(0.0))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn factorized_posterior_matches_dense_solve_oracle() {
    let mut rng = stream_rng(101, "gp-oracle", 0);
    let families =
        [KernelFamily::Matern52, KernelFamily::Rbf, KernelFamily::RationalQuadratic];
    for case in 0..100 {
        let d = 1 + case % 5;
        let n = 1 + (case * 7) % 50;
        let family = families[case % families.len()];
        let lengths: Vec<f64> = (0..d).map(|_| rng.gen_range(0.1..1.5)).collect();
        let kernel =
            KernelSpec::with_rq_alpha(family, lengths, rng.gen_range(0.3..2.0), 1.2).unwrap();
        let noise = rng.gen_range(1e-6..1e-2);
        let xs: Vec<Vec<f64>> =
            (0..n).map(|_| (0..d).map(|_| rng.gen::<f64>()).collect()).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let model = GpModel::fit(kernel.clone(), noise, xs.clone(), ys.clone()).unwrap();
        for _ in 0..3 {
            let q: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
            let (m, v) = model.posterior_one(&q).unwrap();
            let (om, ov) = oracle_posterior(&kernel, noise, model.jitter(), &xs, &ys, &q);
            assert!(close(m, om, 1e-8), "case {case}: mean {m} vs oracle {om}");
            assert!(close(v, ov, 1e-8), "case {case}: var {v} vs oracle {ov}");
        }
    }
}

#[test]
fn conditioning_on_more_data_never_raises_variance() {
    let mut rng = stream_rng(55, "var-mono", 0);
    for case in 0..25 {
        let d = 1 + case % 3;
        let n = 2 + case % 12;
        let kernel =
            KernelSpec::new(KernelFamily::Rbf, vec![rng.gen_range(0.2..1.0); d], 1.0).unwrap();
        let xs: Vec<Vec<f64>> =
            (0..n).map(|_| (0..d).map(|_| rng.gen::<f64>()).collect()).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let smaller =
            GpModel::fit(kernel.clone(), 0.0, xs[..n - 1].to_vec(), ys[..n - 1].to_vec())
                .unwrap();
        let larger = GpModel::fit(kernel, 0.0, xs, ys).unwrap();
        for _ in 0..20 {
            let q: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
            let (_, v_small) = smaller.posterior_one(&q).unwrap();
            let (_, v_large) = larger.posterior_one(&q).unwrap();
            assert!(
                v_large <= v_small + 1e-8,
                "case {case}: variance rose from {v_small} to {v_large}"
            );
        }
    }
}
