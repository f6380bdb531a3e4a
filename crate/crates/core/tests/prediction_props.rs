use fy_core::prediction::{closed_form::argmax_index, phi, sparsemax_exact, tau_bracket};
use fy_core::{conjugate_value, predict, EntropySpec, FyLossSpec};
use proptest::prelude::*;

fn strictly_convex_loss() -> impl Strategy<Value = FyLossSpec> {
    prop_oneof![
        Just(FyLossSpec::logistic()),
        Just(FyLossSpec::sparsemax()),
        (1.05f64..4.0).prop_map(|a| FyLossSpec::tsallis(a).unwrap()),
    ]
}

fn slow_loss() -> impl Strategy<Value = FyLossSpec> {
    prop_oneof![
        (1.2f64..4.0).prop_map(|q| FyLossSpec::entropy(EntropySpec::norm(q).unwrap())),
        (1.2f64..3.0).prop_map(|q| FyLossSpec::entropy(EntropySpec::squared_norm(q).unwrap())),
        (0.2f64..0.95).prop_map(|b| FyLossSpec::entropy(EntropySpec::renyi(b).unwrap())),
    ]
}

fn scores(d: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    d.prop_flat_map(|d| prop::collection::vec(-3.0f64..3.0, d))
}

fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut s = seed;
    for i in (1..n).rev() {
        s = s
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        idx.swap(i, (s >> 33) as usize % (i + 1));
    }
    idx
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn feasible(spec in strictly_convex_loss(), theta in scores(1..=30)) {
        let p = predict(&spec, &theta).unwrap().p.into_inner();
        prop_assert!(p.iter().all(|&v| v >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn permutation_equivariant(spec in strictly_convex_loss(), theta in scores(2..=20), seed in any::<u64>()) {
        let perm = permutation(theta.len(), seed);
        let permuted: Vec<f64> = perm.iter().map(|&i| theta[i]).collect();
        let p = predict(&spec, &theta).unwrap().p.into_inner();
        let q = predict(&spec, &permuted).unwrap().p.into_inner();
        let p_perm: Vec<f64> = perm.iter().map(|&i| p[i]).collect();
        prop_assert!(max_abs_diff(&p_perm, &q) <= 1e-9);
    }

    #[test]
    fn order_preserving(spec in strictly_convex_loss(), theta in scores(2..=20)) {
        let p = predict(&spec, &theta).unwrap().p.into_inner();
        for i in 0..theta.len() {
            for j in 0..theta.len() {
                if theta[i] > theta[j] {
                    prop_assert!(p[i] >= p[j] - 1e-12);
                }
                if p[i] > p[j] + 1e-9 {
                    prop_assert!(theta[i] > theta[j]);
                }
            }
        }
    }

    #[test]
    fn argmax_agrees(spec in strictly_convex_loss(), theta in scores(2..=20)) {
        let p = predict(&spec, &theta).unwrap().p.into_inner();
        let k = argmax_index(&theta);
        let top = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(p[k] >= top - 1e-12);
    }

    #[test]
    fn temperature_scaling(
        spec in strictly_convex_loss(),
        theta in scores(2..=20),
        t in prop::sample::select(vec![0.5, 2.0, 10.0]),
    ) {
        let scaled = spec.with_temperature(t).unwrap();
        let p = predict(&scaled, &theta).unwrap().p.into_inner();
        let shrunk: Vec<f64> = theta.iter().map(|v| v / t).collect();
        let q = predict(&spec, &shrunk).unwrap().p.into_inner();
        prop_assert!(max_abs_diff(&p, &q) <= 1e-9);
    }

    #[test]
    fn gradient_of_conjugate(spec in strictly_convex_loss(), theta in scores(2..=8)) {
        let p = predict(&spec, &theta).unwrap().p.into_inner();
        let h = 1e-6;
        for j in 0..theta.len() {
            let mut a = theta.clone();
            let mut b = theta.clone();
            a[j] += h;
            b[j] -= h;
            let fd = (conjugate_value(&spec, &a).unwrap() - conjugate_value(&spec, &b).unwrap()) / (2.0 * h);
            prop_assert!((fd - p[j]).abs() <= 1e-5, "coord {j}: {fd} vs {}", p[j]);
        }
    }

    #[test]
    fn bracket_signs(alpha in 1.05f64..4.0, theta in scores(1..=50)) {
        let spec = EntropySpec::tsallis(alpha).unwrap();
        let (lo, hi) = tau_bracket(&spec, &theta).unwrap();
        prop_assert!(phi(&spec, &theta, lo).unwrap() >= -1e-12);
        prop_assert!(phi(&spec, &theta, hi).unwrap() <= 1e-12);
    }

    #[test]
    fn tsallis_two_is_sparsemax(theta in scores(2..=50)) {
        let spec = FyLossSpec::tsallis(2.0).unwrap();
        let p = fy_core::predict_with(
            &spec,
            &theta,
            &fy_core::SolverPolicy::new(fy_core::Method::Brent).with_tolerance(1e-12),
        )
        .unwrap()
        .p
        .into_inner();
        prop_assert!(max_abs_diff(&p, &sparsemax_exact(&theta)) <= 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn projected_gradient_families_feasible_and_equivariant(
        spec in slow_loss(),
        theta in scores(2..=8),
        seed in any::<u64>(),
    ) {
        let p = predict(&spec, &theta).unwrap().p.into_inner();
        prop_assert!(p.iter().all(|&v| v >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        let perm = permutation(theta.len(), seed);
        let permuted: Vec<f64> = perm.iter().map(|&i| theta[i]).collect();
        let q = predict(&spec, &permuted).unwrap().p.into_inner();
        let p_perm: Vec<f64> = perm.iter().map(|&i| p[i]).collect();
        prop_assert!(max_abs_diff(&p_perm, &q) <= 1e-6);
    }
}

#[test]
fn sparsity_onset() {
    for alpha in [1.2, 1.5, 2.0] {
        let spec = FyLossSpec::tsallis(alpha).unwrap();
        let m = 1.0 / (alpha - 1.0);
        for i in 0..=300 {
            let s = 3.0 * i as f64 / 300.0;
            let p = predict(&spec, &[s, 0.0]).unwrap().p.into_inner();
            if s >= m {
                assert_eq!(p[1], 0.0, "alpha={alpha} s={s}");
            } else if s <= m - 0.01 {
                assert!(p[1] > 0.0, "alpha={alpha} s={s}");
            }
        }
    }
}

#[test]
fn shannon_stays_interior() {
    let spec = FyLossSpec::logistic();
    for gap in [1.0, 10.0, 100.0, 500.0, 700.0] {
        let p = predict(&spec, &[gap, 0.0, 0.0]).unwrap().p.into_inner();
        assert!(p.iter().all(|&v| v > 0.0), "gap {gap}: {p:?}");
    }
}

#[test]
fn margin_gap_gives_vertex() {
    let specs = [
        EntropySpec::tsallis(1.25).unwrap(),
        EntropySpec::tsallis(1.5).unwrap(),
        EntropySpec::tsallis(2.0).unwrap(),
        EntropySpec::tsallis(3.0).unwrap(),
        EntropySpec::norm(1.5).unwrap(),
        EntropySpec::norm(2.0).unwrap(),
        EntropySpec::norm(4.0).unwrap(),
    ];
    for spec in specs {
        let m = fy_core::margin::margin_closed_form(&spec).to_f64();
        for d in [2, 3, 5] {
            for k in 0..d {
                let mut theta = vec![0.0; d];
                theta[k] = m + 0.1;
                let r = predict(&FyLossSpec::entropy(spec), &theta).unwrap();
                assert_eq!(r.p.support_size(), 1, "{spec:?} d={d} k={k}: {:?}", r.p);
                assert_eq!(r.p.as_slice()[k], 1.0);
            }
        }
    }
}
