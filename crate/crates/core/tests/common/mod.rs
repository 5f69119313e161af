//! Reference routines used to check the library: each one reaches its answer
//! by a different path than the code under test.

#![allow(dead_code)]

use beliefcal::posterior::add_intercept;
use beliefcal::{Belief, Dataset, ObjectiveVector, Posterior};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller, independent of rand_distr
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

pub fn random_vector(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(d, |_, _| scale * gaussian(rng))
}

/// Φ(z) = 1/2 + φ(z)·Σ z^(2k+1)/(2k+1)!!; every term is positive for z > 0,
/// so the sum has no cancellation there.
pub fn normal_cdf_series(z: f64) -> f64 {
    if z < 0.0 {
        return 1.0 - normal_cdf_series(-z);
    }
    let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut term = z;
    let mut total = z;
    let mut k = 1.0;
    while term > 1e-22 * total {
        term *= z * z / (2.0 * k + 1.0);
        total += term;
        k += 1.0;
    }
    0.5 + pdf * total
}

/// Raw table with standard-normal features and ±1 labels from a noisy score.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Dataset {
    let truth = random_vector(rng, d, 1.0);
    let x = DMatrix::from_fn(n, d, |_, _| gaussian(rng));
    let y = DVector::from_fn(n, |i, _| {
        let s = x.row(i).transpose().dot(&truth) + 0.5 * gaussian(rng);
        if s >= 0.0 {
            1.0
        } else {
            -1.0
        }
    });
    Dataset {
        x,
        y,
        feature_names: (0..d).map(|j| format!("f{j}")).collect(),
        actionable: vec![true; d],
        standardization: vec![],
        intercept: None,
    }
}

pub fn with_intercept(ds: &Dataset) -> Dataset {
    add_intercept(ds)
}

/// Gradient of σ⁻²‖y − Xw‖² + wᵀΛw at `w`, assembled row by row.
pub fn ridge_gradient(ds: &Dataset, b: &Belief, w: &DVector<f64>) -> DVector<f64> {
    let d = ds.d();
    let mut g = DVector::zeros(d);
    for i in 0..ds.n() {
        let xi = ds.row(i);
        let resid = ds.y[i] - xi.dot(w);
        g -= xi * (2.0 * resid / (b.sigma * b.sigma));
    }
    for j in 0..d {
        g[j] += 2.0 * b.lambda * b.weight_profile[j] * w[j];
    }
    g
}

/// Augmented-Lagrangian first-order solver for
/// `min ½‖Dc‖² s.t. wᵀ(x + c) ≥ 0` (D = I when `weights` is None).
/// Returns the action; never uses a closed-form projection.
pub fn halfspace_oracle(
    w: &DVector<f64>,
    x: &DVector<f64>,
    weights: Option<&[f64]>,
) -> DVector<f64> {
    let d = w.len();
    let dw = |i: usize| weights.map_or(1.0, |ws| ws[i]);
    let mut c = DVector::zeros(d);
    let mut nu = 0.0;
    let rho = 10.0;
    let lipschitz = (0..d).map(|i| dw(i) * dw(i)).fold(0.0, f64::max) + rho * w.norm_squared();
    let step = 1.0 / lipschitz;
    for _ in 0..400 {
        for _ in 0..400 {
            let h = w.dot(&(x + &c));
            let pen = (nu - rho * h).max(0.0);
            let grad = DVector::from_fn(d, |i, _| dw(i) * dw(i) * c[i] - pen * w[i]);
            c -= grad * step;
        }
        let h = w.dot(&(x + &c));
        nu = (nu - rho * h).max(0.0);
    }
    c
}

/// Minimum of ‖c‖ over a 2-D grid of pitch `pitch` on [−r, r]², restricted
/// to grid points where `feasible(x + c)` holds.
pub fn grid_min_norm_2d(
    x: &DVector<f64>,
    r: f64,
    pitch: f64,
    feasible: impl Fn(f64, f64) -> bool,
) -> f64 {
    let steps = (r / pitch).ceil() as i64;
    let mut best = f64::INFINITY;
    for i in -steps..=steps {
        let c0 = i as f64 * pitch;
        if c0.abs() >= best {
            continue;
        }
        for j in -steps..=steps {
            let c1 = j as f64 * pitch;
            let n = (c0 * c0 + c1 * c1).sqrt();
            if n < best && feasible(x[0] + c0, x[1] + c1) {
                best = n;
            }
        }
    }
    best
}

/// wᵀz + β zᵀA⁻¹z with A⁻¹ formed by an explicit dense inverse.
pub fn policy_g_dense(p: &Posterior, beta: f64) -> impl Fn(&DVector<f64>) -> f64 + '_ {
    let inv = p
        .precision
        .clone()
        .try_inverse()
        .expect("precision is invertible");
    move |z: &DVector<f64>| p.w_post.dot(z) + beta * z.dot(&(&inv * z))
}

/// Brute-force non-dominated index set.
pub fn brute_force_front(points: &[ObjectiveVector]) -> Vec<usize> {
    let mut keep = Vec::new();
    'outer: for (i, p) in points.iter().enumerate() {
        for (j, q) in points.iter().enumerate() {
            if i == j {
                continue;
            }
            let mut all_le = true;
            let mut any_lt = false;
            for k in 0..p.values.len() {
                if q.values[k] > p.values[k] {
                    all_le = false;
                }
                if q.values[k] < p.values[k] {
                    any_lt = true;
                }
            }
            if all_le && any_lt {
                continue 'outer;
            }
        }
        keep.push(i);
    }
    keep
}

/// Random objective set with values on a coarse lattice so ties and exact
/// duplicates occur.
pub fn random_objectives(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<ObjectiveVector> {
    (0..n)
        .map(|_| {
            ObjectiveVector::new(
                (0..k)
                    .map(|_| rng.random_range(0..12) as f64 / 4.0)
                    .collect(),
            )
        })
        .collect()
}

/// Random objective set with continuous values; ties have probability zero.
pub fn random_continuous_objectives(
    rng: &mut ChaCha8Rng,
    n: usize,
    k: usize,
) -> Vec<ObjectiveVector> {
    (0..n)
        .map(|_| ObjectiveVector::new((0..k).map(|_| rng.random::<f64>()).collect()))
        .collect()
}
