//! Prediction maps with closed forms: softmax, sparsemax, sigmoid, argmax.

/// Softmax with max subtraction.
pub fn softmax(theta: &[f64]) -> Vec<f64> {
    let m = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = theta.iter().map(|&t| (t - m).exp()).collect();
    let z: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= z);
    out
}

/// `log sum exp(theta)`, computed stably.
pub fn log_sum_exp(theta: &[f64]) -> f64 {
    let m = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + theta.iter().map(|&t| (t - m).exp()).sum::<f64>().ln()
}

pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Vertex of the lowest-index maximal score.
pub fn argmax_vertex(theta: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; theta.len()];
    out[argmax_index(theta)] = 1.0;
    out
}

/// Lowest index attaining the maximum.
pub fn argmax_index(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Sort-based threshold of the Euclidean projection onto the simplex.
pub fn sparsemax_threshold(theta: &[f64]) -> f64 {
    let mut z = theta.to_vec();
    z.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = z[0] - 1.0;
    for (j, &zj) in z.iter().enumerate() {
        cumsum += zj;
        let k = (j + 1) as f64;
        if 1.0 + k * zj > cumsum {
            tau = (cumsum - 1.0) / k;
        } else {
            break;
        }
    }
    tau
}

/// Euclidean projection of `theta` onto the probability simplex (sparsemax).
///
/// `O(d log d)` via sorting. The support is `{j : theta_j > tau}`.
pub fn sparsemax_exact(theta: &[f64]) -> Vec<f64> {
    let tau = sparsemax_threshold(theta);
    theta.iter().map(|&t| (t - tau).max(0.0)).collect()
}

/// Same as [`sparsemax_exact`], writing into `out`, reusing `scratch` for the sort.
pub(crate) fn project_simplex_into(v: &[f64], scratch: &mut Vec<f64>, out: &mut [f64]) {
    scratch.clear();
    scratch.extend_from_slice(v);
    scratch.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = scratch[0] - 1.0;
    for (j, &zj) in scratch.iter().enumerate() {
        cumsum += zj;
        let k = (j + 1) as f64;
        if 1.0 + k * zj > cumsum {
            tau = (cumsum - 1.0) / k;
        } else {
            break;
        }
    }
    for (o, &x) in out.iter_mut().zip(v) {
        *o = (x - tau).max(0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Projection by enumerating candidate supports: for each nonempty subset S
    /// the threshold is (sum_S theta - 1)/|S|, and the projection is the unique
    /// candidate satisfying the KKT sign conditions.
    fn projection_by_enumeration(theta: &[f64]) -> Vec<f64> {
        let d = theta.len();
        for mask in 1u32..(1 << d) {
            let idx: Vec<usize> = (0..d).filter(|j| mask & (1 << j) != 0).collect();
            let tau = (idx.iter().map(|&j| theta[j]).sum::<f64>() - 1.0) / idx.len() as f64;
            let ok = (0..d).all(|j| {
                if mask & (1 << j) != 0 {
                    theta[j] - tau > 0.0
                } else {
                    theta[j] - tau <= 0.0
                }
            });
            if ok {
                return theta.iter().map(|&t| (t - tau).max(0.0)).collect();
            }
        }
        unreachable!()
    }

    #[test]
    fn sparsemax_examples() {
        assert_eq!(sparsemax_exact(&[0.5, 0.5]), vec![0.5, 0.5]);
        assert_eq!(sparsemax_exact(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = sparsemax_exact(&[0.6, 0.4, 0.0]);
        let oracle = projection_by_enumeration(&[0.6, 0.4, 0.0]);
        for (a, b) in p.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-15);
        }
        // the input already lies on the simplex, so it is its own projection
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.4).abs() < 1e-15 && p[2] == 0.0);
        assert!((sparsemax_threshold(&[2.0, 0.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sparsemax_matches_enumeration_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let d = rng.random_range(1..=7);
            let theta: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let p = sparsemax_exact(&theta);
            let q = projection_by_enumeration(&theta);
            for (a, b) in p.iter().zip(&q) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn softmax_is_stable() {
        let p = softmax(&[1000.0, 1000.0]);
        assert_eq!(p, vec![0.5, 0.5]);
        assert!((log_sum_exp(&[0.0, 0.0]) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((log_sum_exp(&[1000.0, 1000.0]) - 1000.0 - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn argmax_ties_go_to_lowest_index() {
        assert_eq!(argmax_vertex(&[3.0, 1.0, 2.0]), vec![1.0, 0.0, 0.0]);
        assert_eq!(argmax_vertex(&[1.0, 3.0, 3.0]), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn sigmoid_symmetry() {
        for t in [-50.0, -1.0, 0.0, 0.3, 40.0] {
            assert!((sigmoid(t) + sigmoid(-t) - 1.0).abs() < 1e-15);
        }
    }
}
