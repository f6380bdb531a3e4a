mod common;

use common::*;
use fy_core::learn::{
    evaluate, fit, objective_and_gradient, synthetic_proportions, LinearModel, OptimizerConfig,
    SyntheticConfig,
};
use fy_core::prediction::sparsemax_exact;
use fy_core::FyLossSpec;
use ndarray::Array2;
use rand::Rng;

fn random_matrix(rng: &mut impl Rng, r: usize, c: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |_| rng.random_range(-scale..scale))
}

fn random_targets(rng: &mut impl Rng, n: usize, d: usize) -> Array2<f64> {
    let mut y = Array2::zeros((n, d));
    for mut row in y.rows_mut() {
        row.assign(&ndarray::Array1::from(simplex(rng, d)));
    }
    y
}

fn losses() -> [FyLossSpec; 3] {
    [
        FyLossSpec::logistic(),
        FyLossSpec::sparsemax(),
        FyLossSpec::tsallis(1.5).unwrap(),
    ]
}

#[test]
fn objective_convex_in_weights() {
    let mut rng = rng(11);
    for spec in losses() {
        for _ in 0..100 {
            let x = random_matrix(&mut rng, 8, 4, 2.0);
            let y = random_targets(&mut rng, 8, 3);
            let lambda = rng.random_range(0.0..2.0);
            let w1 = random_matrix(&mut rng, 3, 4, 2.0);
            let w2 = random_matrix(&mut rng, 3, 4, 2.0);
            let at = |w: Array2<f64>| {
                let mut m = LinearModel::zeros(spec, lambda, 3, 4);
                m.weights = w;
                objective_and_gradient(&m, &x, &y).unwrap().0
            };
            let mid = at((&w1 + &w2) * 0.5);
            let avg = 0.5 * (at(w1) + at(w2));
            assert!(mid <= avg + 1e-9, "{spec:?}: {mid} > {avg}");
        }
    }
}

#[test]
fn full_gradient_matches_differences() {
    let mut rng = rng(12);
    for spec in losses() {
        let spec = spec.with_solver(fy_core::SolverPolicy::default().with_tolerance(1e-13));
        for _ in 0..20 {
            let x = random_matrix(&mut rng, 5, 3, 1.5);
            let y = random_targets(&mut rng, 5, 3);
            let mut m = LinearModel::zeros(spec, 0.3, 3, 3);
            m.weights = random_matrix(&mut rng, 3, 3, 1.0);
            let (_, g) = objective_and_gradient(&m, &x, &y).unwrap();
            let h = 1e-6;
            let mut fd = Vec::new();
            for idx in 0..9 {
                let (r, c) = (idx / 3, idx % 3);
                let mut a = m.clone();
                let mut b = m.clone();
                a.weights[[r, c]] += h;
                b.weights[[r, c]] -= h;
                let fa = objective_and_gradient(&a, &x, &y).unwrap().0;
                let fb = objective_and_gradient(&b, &x, &y).unwrap().0;
                fd.push((fa - fb) / (2.0 * h));
            }
            let analytic: Vec<f64> = g.iter().cloned().collect();
            assert!(
                relative_error(&analytic, &fd) <= 1e-5,
                "{spec:?}: {analytic:?} vs {fd:?}"
            );
        }
    }
}

#[test]
fn sparsemax_recovers_supports_on_realizable_toy() {
    let mut rng = rng(13);
    let (n, p, d) = (80, 6, 5);
    let x = random_matrix(&mut rng, n, p, 1.0);
    let w_true = random_matrix(&mut rng, d, p, 2.0);
    let theta = x.dot(&w_true.t());
    let mut y = Array2::zeros((n, d));
    for (mut dst, src) in y.rows_mut().into_iter().zip(theta.rows()) {
        dst.assign(&ndarray::Array1::from(sparsemax_exact(&src.to_vec())));
    }
    let sparse_rows = y
        .rows()
        .into_iter()
        .filter(|r| r.iter().any(|&v| v == 0.0))
        .count();
    assert!(sparse_rows > n / 2, "toy targets should be sparse");

    let opt = OptimizerConfig {
        max_iterations: 5000,
        gradient_tolerance: 1e-9,
        ..OptimizerConfig::default()
    };
    let model = fit(&FyLossSpec::sparsemax(), 1e-8, &x, &y, &opt).unwrap();
    let pred = model.predict(&x).unwrap();
    let matched = pred
        .rows()
        .into_iter()
        .zip(y.rows())
        .filter(|(a, b)| {
            a.iter()
                .zip(b.iter())
                .all(|(u, v)| (*u > 0.0) == (*v > 0.0))
        })
        .count();
    assert!(
        matched as f64 >= 0.9 * n as f64,
        "{matched}/{n} supports match"
    );
    assert!(model.train_log.unwrap().is_monotone());
}

#[test]
fn separable_toy_is_fit_closely() {
    let x = ndarray::array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [-1.0, 0.5]];
    let y = ndarray::array![
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.5, 0.5, 0.0],
        [0.0, 0.0, 1.0]
    ];
    let opt = OptimizerConfig {
        max_iterations: 5000,
        gradient_tolerance: 1e-10,
        ..OptimizerConfig::default()
    };
    let model = fit(&FyLossSpec::sparsemax(), 1e-9, &x, &y, &opt).unwrap();
    let report = evaluate(&model, &x, &y).unwrap();
    assert!(report.mean_js <= 1e-3, "{report:?}");
}

#[test]
fn fit_is_deterministic_and_monotone() {
    let cfg = SyntheticConfig::new(200, 20, 5, 50.0, 1.0);
    let (x, y) = synthetic_proportions(9, &cfg).unwrap();
    let opt = OptimizerConfig::default();
    for spec in losses() {
        let a = fit(&spec, 1.0, &x, &y, &opt).unwrap();
        let b = fit(&spec, 1.0, &x, &y, &opt).unwrap();
        assert_eq!(a.weights, b.weights);
        assert!(a.train_log.as_ref().unwrap().is_monotone());
        assert!(a.weights.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn subgradient_losses_train() {
    let mut rng = rng(14);
    let x = random_matrix(&mut rng, 30, 4, 1.0);
    let labels: Vec<usize> = (0..30).map(|_| rng.random_range(0..3)).collect();
    let y = Array2::from_shape_fn((30, 3), |(i, j)| if labels[i] == j { 1.0 } else { 0.0 });
    let opt = OptimizerConfig {
        max_iterations: 200,
        ..OptimizerConfig::default()
    };
    for spec in [FyLossSpec::perceptron(), FyLossSpec::hinge()] {
        let m = fit(&spec, 0.1, &x, &y, &opt).unwrap();
        let start = LinearModel::zeros(spec, 0.1, 3, 4);
        let r0 = objective_and_gradient(&start, &x, &y).unwrap().0;
        let r1 = objective_and_gradient(&m, &x, &y).unwrap().0;
        assert!(r1 <= r0, "{spec:?}: {r1} > {r0}");
    }
}
