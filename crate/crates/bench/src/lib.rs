//! Shared fixtures for the benchmarks.

use lapsvm::data::{generate_g50c, make_splits};
use lapsvm::models::{prepare, Prepared};
use lapsvm::{GraphSpec, KernelSpec, ModelSpec, Problem, SplitPlan, TrainSet};

/// The G50C setting used throughout the benchmarks: σ = 17.5, 50
/// neighbours, `L⁵` normalized.
pub fn g50c_spec(gamma_a: f64, gamma_i: f64) -> ModelSpec {
    ModelSpec::new(KernelSpec::gaussian(17.5), GraphSpec::new(50, 5, true), gamma_a, gamma_i)
}

/// `points` G50C points, 50 labeled, everything else unlabeled except the
/// first test fold.
pub fn g50c_train(points: usize) -> TrainSet {
    let ds = generate_g50c(points, 0).expect("generator");
    let plan = SplitPlan {
        randomizations: 1,
        ..SplitPlan::new(50, 0, 0)
    };
    let split = &make_splits(&ds, &plan).expect("splits")[0];
    TrainSet::from_split(&ds, split).expect("train set")
}

/// Operators and the binary problem for a G50C training set.
pub fn g50c_problem(points: usize, spec: &ModelSpec) -> (Prepared, Problem) {
    let prep = prepare(g50c_train(points), spec, true).expect("operators");
    let positive = prep.train.classes[1];
    let problem = prep.binary_problem(positive, spec).expect("problem");
    (prep, problem)
}
