use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

use super::Dataset;
use crate::error::{LapsvmError, Result};

const G50C_DIM: usize = 50;
const G50C_BAYES_ERROR: f64 = 0.05;

/// Distance of each class mean from the origin along the first axis, `z`
/// with `Φ(−z) = 0.05`. The Bayes rule `sign(x₀)` then errs 5% of the time.
pub fn g50c_mean_offset() -> f64 {
    Normal::standard().inverse_cdf(1.0 - G50C_BAYES_ERROR)
}

/// Two unit-covariance Gaussians in 50 dimensions with means `±z e₀`,
/// `⌊n/2⌋` points labeled −1 and `⌈n/2⌉` labeled +1, in shuffled order.
pub fn generate_g50c(n: usize, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(LapsvmError::invalid(format!("G50C needs n >= 2, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = g50c_mean_offset();
    let mut labels: Vec<i64> = (0..n).map(|i| if i < n / 2 { -1 } else { 1 }).collect();
    labels.shuffle(&mut rng);
    let points = labels
        .iter()
        .map(|&y| {
            let mut x: Vec<f64> = (0..G50C_DIM).map(|_| rng.sample(StandardNormal)).collect();
            x[0] += y as f64 * z;
            x
        })
        .collect();
    Dataset::new(points, labels)
}

/// Two interleaved half circles of radius 1: `(cos t, sin t)` labeled +1
/// and `(1 − cos t, 1/2 − sin t)` labeled −1, `t` evenly spaced over
/// `[0, π]`, each coordinate jittered by `N(0, noise²)`. The first `⌈n/2⌉`
/// points form the upper moon.
pub fn generate_two_moons(n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n < 4 {
        return Err(LapsvmError::invalid(format!("two moons needs n >= 4, got {n}")));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(LapsvmError::invalid(format!("noise must be >= 0, got {noise}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let upper = n.div_ceil(2);
    let lower = n - upper;
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let angle = |k: usize, m: usize| PI * k as f64 / (m - 1) as f64;
    for k in 0..upper {
        let t = angle(k, upper);
        points.push(vec![t.cos(), t.sin()]);
        labels.push(1);
    }
    for k in 0..lower {
        let t = angle(k, lower);
        points.push(vec![1.0 - t.cos(), 0.5 - t.sin()]);
        labels.push(-1);
    }
    if noise > 0.0 {
        for p in &mut points {
            for v in p.iter_mut() {
                *v += noise * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
    Dataset::new(points, labels)
}
