//! Seeded credit-like tables for tests, benches and smoke runs.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{standardize, Dataset};

/// `n` individuals with `d` correlated features and roughly 78% positive
/// labels drawn from a noisy linear score. The first half of the columns are
/// flagged actionable.
pub fn credit_like(n: usize, d: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let truth: Vec<f64> = (0..d).map(|j| normal() / (1.0 + j as f64 * 0.3)).collect();
    let mut raw = DMatrix::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let common = normal();
        let mut score = 1.2;
        for j in 0..d {
            let v = 0.4 * common + normal() + 0.1 * j as f64;
            raw[(i, j)] = v;
            score += truth[j] * v;
        }
        labels.push(score);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let y: Vec<f64> = labels
        .iter()
        .map(|&s| {
            let p = 1.0 / (1.0 + (-s).exp());
            if rng.random::<f64>() < p {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    let names: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    let (x, scales) = standardize(&raw, &names, None).expect("gaussian columns have variance");
    let actionable = (0..d).map(|j| j < d.div_ceil(2)).collect();
    Dataset::new(x, DVector::from_vec(y), names, actionable, scales)
        .expect("generated dataset is valid")
}
