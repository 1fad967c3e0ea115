//! End-to-end use of the public API: data, splits, training, prediction
//! and model files.

use std::collections::HashSet;

use lapsvm::data::{generate_g50c, generate_two_moons, load_dataset, make_splits, read_manifest, write_dataset, write_manifest};
use lapsvm::models::{
    error_rate, load_model, predict, save_model, train_laprlsc, train_lapsvm, train_supervised,
};
use lapsvm::problem::objective;
use lapsvm::solvers::{newton_solve, pcg_solve};
use lapsvm::{
    DataFormat, Dataset, GraphSpec, KernelSpec, ModelSpec, NewtonConfig, PcgConfig, PrimalState, Solver, SplitPlan,
    StopKind, StopRule, TrainSet,
};
use proptest::prelude::*;

fn g50c_spec() -> ModelSpec {
    ModelSpec::new(KernelSpec::gaussian(17.5), GraphSpec::new(50, 5, true), 0.1, 1.0)
}

fn newton() -> Solver {
    Solver::Newton(NewtonConfig::default())
}

fn test_error(model: &lapsvm::TrainedModel, ds: &Dataset, idx: &[usize]) -> f64 {
    let points: Vec<Vec<f64>> = idx.iter().map(|&i| ds.points[i].clone()).collect();
    let truth: Vec<i64> = idx.iter().map(|&i| ds.labels[i]).collect();
    error_rate(&predict(model, &points).unwrap().decisions, &truth, false).unwrap()
}

#[test]
fn splits_partition_every_point() {
    let ds = generate_g50c(200, 3).unwrap();
    let splits = make_splits(&ds, &SplitPlan::new(20, 10, 3)).unwrap();
    assert_eq!(splits.len(), 12);
    for s in &splits {
        let mut seen = HashSet::new();
        for idx in [&s.labeled, &s.unlabeled, &s.validation, &s.test] {
            for &i in idx.iter() {
                assert!(seen.insert(i), "point {i} has two roles");
            }
        }
        assert_eq!(seen.len(), ds.len());
        assert_eq!(s.labeled.len(), 20);
        assert_eq!(s.validation.len(), 10);
        for class in ds.classes() {
            assert!(s.labeled.iter().any(|&i| ds.labels[i] == class));
            assert!(s.validation.iter().any(|&i| ds.labels[i] == class));
        }
    }
    // every point is tested exactly once per randomization
    for r in 0..3 {
        let tested: usize = splits.iter().filter(|s| s.randomization == r).map(|s| s.test.len()).sum();
        assert_eq!(tested, ds.len());
    }
}

#[test]
fn newton_and_early_stopped_pcg_classify_alike() {
    let ds = generate_g50c(400, 0).unwrap();
    let split = &make_splits(&ds, &SplitPlan::new(50, 0, 0)).unwrap()[0];
    let train = TrainSet::from_split(&ds, split).unwrap();
    let spec = g50c_spec();
    let exact = train_lapsvm(train.clone(), &spec, &newton()).unwrap();
    let early = train_lapsvm(train, &spec, &Solver::Pcg(PcgConfig::default())).unwrap();
    let (a, b) = (test_error(&exact, &ds, &split.test), test_error(&early, &ds, &split.test));
    assert!(a < 15.0, "Newton test error {a}");
    assert!((a - b).abs() <= 5.0, "{a} vs {b}");
    assert!(early.reports[0].iterations < split.unlabeled.len() + split.labeled.len());
}

#[test]
fn unlabeled_points_help_on_two_moons() {
    let ds = generate_two_moons(200, 0.05, 4).unwrap();
    let plan = SplitPlan::presplit(2, 0, 1, 4);
    let split = &make_splits(&ds, &plan).unwrap()[0];
    let train = TrainSet::from_split(&ds, split).unwrap();
    let spec = ModelSpec::new(KernelSpec::gaussian(0.3), GraphSpec::new(6, 1, false), 1e-3, 100.0);
    let semi = train_lapsvm(train.clone(), &spec, &newton()).unwrap();
    let sup = train_supervised(&train, &spec, &newton()).unwrap();
    let (e_semi, e_sup) = (test_error(&semi, &ds, &split.unlabeled), test_error(&sup, &ds, &split.unlabeled));
    assert_eq!(e_semi, 0.0);
    assert!(e_sup > 5.0, "supervised error {e_sup}");
}

#[test]
fn three_classes_one_vs_all() {
    // three well separated blobs along the first axis
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (c, center) in [(-1, -4.0), (5, 0.0), (7, 4.0)] {
        for k in 0..20 {
            let t = k as f64 / 20.0;
            points.push(vec![center + t - 0.5, (t * 7.0).sin()]);
            labels.push(c);
        }
    }
    let ds = Dataset::new(points, labels).unwrap();
    let split = &make_splits(&ds, &SplitPlan::new(9, 0, 0)).unwrap()[0];
    let train = TrainSet::from_split(&ds, split).unwrap();
    let spec = ModelSpec::new(KernelSpec::gaussian(1.5), GraphSpec::new(5, 1, false), 1e-2, 0.1);
    for model in [train_lapsvm(train.clone(), &spec, &newton()).unwrap(), train_laprlsc(train.clone(), &spec).unwrap()] {
        assert_eq!(model.per_class.len(), 3);
        assert_eq!(model.classes, vec![-1, 5, 7]);
        assert_eq!(test_error(&model, &ds, &split.test), 0.0);
    }
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let ds = generate_two_moons(60, 0.1, 2).unwrap();
    for format in [DataFormat::Csv, DataFormat::Libsvm] {
        let path = dir.path().join(format!("moons.{}", format.name()));
        write_dataset(&path, &ds, format).unwrap();
        assert_eq!(load_dataset(&path, format).unwrap(), ds);
    }

    let splits = make_splits(&ds, &SplitPlan::new(6, 4, 2)).unwrap();
    let manifest = dir.path().join("splits.txt");
    write_manifest(&manifest, &splits).unwrap();
    assert_eq!(read_manifest(&manifest).unwrap(), splits);

    let train = TrainSet::from_split(&ds, &splits[0]).unwrap();
    let spec = ModelSpec::new(KernelSpec::gaussian(0.4), GraphSpec::new(5, 1, false), 1e-2, 1.0);
    let model = train_lapsvm(train, &spec, &newton()).unwrap();
    let path = dir.path().join("model.txt");
    save_model(&path, &model).unwrap();
    let loaded = load_model(&path).unwrap();
    let (a, b) = (predict(&model, &ds.points).unwrap(), predict(&loaded, &ds.points).unwrap());
    assert_eq!(a.decisions, b.decisions);
    assert!((a.scores - b.scores).amax() < 1e-12);
}

fn random_problem(seed: u64, n: usize, l: usize) -> lapsvm::Problem {
    use std::sync::Arc;

    let ds = generate_g50c(n, seed).unwrap();
    let mut y = nalgebra::DVector::zeros(n);
    for i in 0..l {
        y[i] = if ds.labels[i] == ds.labels[0] { 1.0 } else { -1.0 };
    }
    let k = lapsvm::kernels::gram(&KernelSpec::gaussian(17.5), &ds.points, 0.0).unwrap();
    let lap = lapsvm::graph::build_laplacian(&ds.points, &GraphSpec::new(5, 1, true)).unwrap();
    lapsvm::Problem::new(Arc::new(lapsvm::Operators::new(k, lap).unwrap()), y, 0.5, 0.5).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // Every solver and stop rule lowers the objective from the zero start,
    // and never goes below the Newton optimum.
    #[test]
    fn solvers_descend_to_the_optimum(seed in 0u64..1000, rule in 0usize..4) {
        let p = random_problem(seed, 40, 12);
        let start = objective(&p, &PrimalState::zeros(&p));
        let best = objective(&p, &newton_solve(&p, &NewtonConfig::default(), PrimalState::zeros(&p)).unwrap().final_state);
        let kind = [StopKind::Stability, StopKind::GradNorm(1e-3), StopKind::ObjectiveDelta(1e-6), StopKind::MixedProduct(1e-4)][rule];
        let cfg = PcgConfig { stop_rule: StopRule::new(kind), ..Default::default() };
        let r = pcg_solve(&p, &cfg, PrimalState::zeros(&p)).unwrap();
        let obj = objective(&p, &r.final_state);
        prop_assert!(obj <= start);
        prop_assert!(obj >= best - 1e-9 * best.abs());
        // traces hold one entry per iterate including the first
        prop_assert_eq!(r.objective_trace.len(), r.iterations + 1);
        for w in r.objective_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
        }
    }
}
