//! Random problem instances shared by unit tests.

use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{build_laplacian, GraphSpec};
use crate::kernels::{gram, KernelSpec};
use crate::problem::{Operators, Problem};

pub struct Instance {
    pub problem: Problem,
}

/// `n` points in 3-d, the first `l` labeled by the sign of a smooth function
/// with a few flips, Gaussian kernel and a normalized or plain kNN Laplacian.
pub fn random_instance(seed: u64, n: usize, l: usize, gamma_a: f64, gamma_i: f64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let mut labels = DVector::zeros(n);
    for i in 0..l {
        let s = points[i][0] + 0.5 * points[i][1] * points[i][2];
        let mut y = if s >= 0.0 { 1.0 } else { -1.0 };
        if rng.random_bool(0.15) {
            y = -y;
        }
        labels[i] = y;
    }
    let sigma = rng.random_range(0.4..1.2);
    let k = gram(&KernelSpec::gaussian(sigma), &points, 1e-8).unwrap();
    let graph = GraphSpec::new(3.min(n - 1), rng.random_range(1..3), rng.random_bool(0.5));
    let lap = build_laplacian(&points, &graph).unwrap();
    let ops = Arc::new(Operators::new(k, lap).unwrap());
    let problem = Problem::new(ops, labels, gamma_a, gamma_i).unwrap();
    Instance { problem }
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-scale..scale))
}

/// The same problem with `ridge` added to the kernel diagonal, which bounds
/// the condition number of the coefficient-space Hessian.
pub fn with_ridge(p: &Problem, ridge: f64) -> Problem {
    let ops = Arc::new(p.ops.with_added_ridge(ridge));
    Problem::new(ops, p.labels.clone(), p.gamma_a, p.gamma_i).unwrap()
}
