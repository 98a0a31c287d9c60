#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sith::qnet::{squared_error, QNetwork};

/// Relative disagreement between the analytic and central-difference gradients of
/// the squared-error loss, `|a - n| / (|a| + |n|)` over the whole parameter vector.
pub fn gradient_check_error(sizes: &[usize], batch: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = QNetwork::<f64>::new(sizes, seed).unwrap();
    for layer in net.layers_mut() {
        layer.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
    }
    // Central differences are only valid away from ReLU kinks.
    let x = loop {
        let x = Array2::from_shape_fn((batch, sizes[0]), |_| rng.random_range(-1.0..1.0));
        if min_hidden_preactivation(&net, &x) > KINK_MARGIN {
            break x;
        }
    };
    let n_out = *sizes.last().unwrap();
    let actions: Vec<usize> = (0..batch).map(|_| rng.random_range(0..n_out)).collect();
    let targets: Vec<f64> = (0..batch).map(|_| rng.random_range(-1.0..1.0)).collect();

    let loss = |net: &QNetwork<f64>| {
        let q = net.forward(x.view()).unwrap();
        squared_error(q.view(), &actions, &targets).0
    };
    let cache = net.forward_cached(x.view()).unwrap();
    let (_, grad_q) = squared_error(cache.output().view(), &actions, &targets);
    let grads = net.backward(&cache, grad_q.view()).unwrap();

    let mut analytic = Vec::new();
    for (layer, g) in net.layers().iter().zip(&grads.layers) {
        analytic.extend(g.weights.to_dense(layer.n_in()).iter().copied());
        analytic.extend(g.bias.iter().copied());
    }

    let h = 1e-6;
    let mut numeric = Vec::new();
    for l in 0..net.layers().len() {
        let (n_in, n_out) = (net.layers()[l].n_in(), net.layers()[l].n_out());
        for i in 0..n_in {
            for j in 0..n_out {
                let w = net.layers()[l].weights[[i, j]];
                net.layers_mut()[l].weights[[i, j]] = w + h;
                let up = loss(&net);
                net.layers_mut()[l].weights[[i, j]] = w - h;
                let down = loss(&net);
                net.layers_mut()[l].weights[[i, j]] = w;
                numeric.push((up - down) / (2.0 * h));
            }
        }
        for j in 0..n_out {
            let b = net.layers()[l].bias[j];
            net.layers_mut()[l].bias[j] = b + h;
            let up = loss(&net);
            net.layers_mut()[l].bias[j] = b - h;
            let down = loss(&net);
            net.layers_mut()[l].bias[j] = b;
            numeric.push((up - down) / (2.0 * h));
        }
    }
    let diff: f64 = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let norm_a: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let norm_n: f64 = numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
    if norm_a + norm_n == 0.0 {
        return 0.0;
    }
    diff / (norm_a + norm_n)
}

const KINK_MARGIN: f64 = 1e-3;

fn min_hidden_preactivation(net: &QNetwork<f64>, x: &Array2<f64>) -> f64 {
    let layers = net.layers();
    let mut h = x.clone();
    let mut smallest = f64::INFINITY;
    for layer in &layers[..layers.len() - 1] {
        let z = h.dot(&layer.weights) + &layer.bias;
        smallest = z.iter().fold(smallest, |m, v| m.min(v.abs()));
        h = z.mapv(|v| v.max(0.0));
    }
    smallest
}

/// Layer sizes used by the gradient checks: 47 parameters.
pub const CHECK_SIZES: [usize; 4] = [4, 4, 3, 3];
