#![allow(dead_code)]

use ccl_core::nnet::{Activation, Dense, FeedforwardNet};
use ccl_core::quantify::{threshold_grid, QuadrantCounts};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Per-threshold quadrant counts by direct enumeration.
pub fn naive_counts(a: &[f64], b: &[f64], grid: usize) -> Vec<QuadrantCounts> {
    threshold_grid(grid)
        .iter()
        .map(|&t| {
            let mut q = QuadrantCounts::default();
            for i in 0..a.len() {
                let ante = a[i] >= t;
                let cons = b[i] >= 1.0 - t;
                if ante && cons {
                    q.tp += 1;
                } else if ante {
                    q.f += 1;
                } else if cons {
                    q.unused += 1;
                } else {
                    q.tn += 1;
                }
            }
            q
        })
        .collect()
}

pub fn naive_f1(q: &QuadrantCounts) -> f64 {
    let p = if q.tp + q.f == 0 { 1.0 } else { q.tp as f64 / (q.tp + q.f) as f64 };
    let r = if q.tn + q.f == 0 { 1.0 } else { q.tn as f64 / (q.tn + q.f) as f64 };
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Values mixing continuous draws, exact grid points and hard 0/1.
pub fn mixed_probs(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| match rng.random_range(0..4) {
            0 => rng.random_range(0..=100) as f64 / 100.0,
            1 => f64::from(rng.random::<bool>() as u8),
            _ => rng.random::<f64>(),
        })
        .collect()
}

pub fn random_inputs(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((n, d), || rng.random_range(-1.0..1.0))
}

/// Relative error between analytic and central-difference gradients,
/// taken over the whole parameter vector.
pub fn gradient_check(net: &FeedforwardNet, x: &Array2<f64>, y: &Array2<f64>) -> f64 {
    let (_, grads) = net.loss_and_gradients(x, y).unwrap();
    let eps = 1e-5;
    let (mut diff, mut scale) = (0.0f64, 0.0f64);
    let layers = net.layers().to_vec();
    let loss_with = |layers: Vec<Dense>| FeedforwardNet::new(layers, net.seed()).unwrap().loss(x, y).unwrap();
    for (l, g) in grads.iter().enumerate() {
        for (idx, &analytic) in g.weights.indexed_iter() {
            let mut plus = layers.clone();
            plus[l].weights[idx] += eps;
            let mut minus = layers.clone();
            minus[l].weights[idx] -= eps;
            let fd = (loss_with(plus) - loss_with(minus)) / (2.0 * eps);
            diff += (analytic - fd).powi(2);
            scale += analytic.powi(2).max(fd.powi(2));
        }
        for (k, &analytic) in g.biases.iter().enumerate() {
            let mut plus = layers.clone();
            plus[l].biases[k] += eps;
            let mut minus = layers.clone();
            minus[l].biases[k] -= eps;
            let fd = (loss_with(plus) - loss_with(minus)) / (2.0 * eps);
            diff += (analytic - fd).powi(2);
            scale += analytic.powi(2).max(fd.powi(2));
        }
    }
    diff.sqrt() / scale.sqrt().max(1e-12)
}

/// Small net with smooth hidden units, so finite differences are stable.
pub fn smooth_net(widths: &[usize], output: Activation, seed: u64) -> FeedforwardNet {
    let mut acts = vec![Activation::Sigmoid; widths.len() - 2];
    acts.push(output);
    FeedforwardNet::random(widths, &acts, seed).unwrap()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
