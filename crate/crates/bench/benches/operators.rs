use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lapsvm::graph::{build_laplacian, GraphSpec};
use lapsvm::kernels::{gram, KernelSpec};
use lapsvm::problem::{gradients, objective, PrimalState};
use lapsvm::solvers::{line_search, Direction};
use lapsvm_bench::{g50c_problem, g50c_spec, g50c_train};

fn construction(c: &mut Criterion) {
    let mut group = c.benchmark_group("construction");
    group.sample_size(10);
    for points in [300, 800] {
        let train = g50c_train(points);
        group.bench_with_input(BenchmarkId::new("gram", train.n()), &train, |b, t| {
            b.iter(|| gram(&KernelSpec::gaussian(17.5), black_box(&t.points), 0.0).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("laplacian_p5", train.n()), &train, |b, t| {
            b.iter(|| build_laplacian(black_box(&t.points), &GraphSpec::new(50, 5, true)).unwrap())
        });
    }
    group.finish();
}

fn primal_evaluations(c: &mut Criterion) {
    let spec = g50c_spec(1e-2, 1.0);
    let (_, p) = g50c_problem(550, &spec);
    let s = PrimalState::zeros(&p);
    let (pg, _) = gradients(&p, &s);
    let d = Direction {
        b: -pg.b,
        alpha: -pg.alpha.clone(),
    };

    let mut group = c.benchmark_group("primal");
    group.bench_function("objective", |b| b.iter(|| objective(&p, black_box(&s))));
    group.bench_function("gradients", |b| b.iter(|| gradients(&p, black_box(&s))));
    group.bench_function("exact_line_search", |b| {
        b.iter(|| line_search(&p, black_box(&s), black_box(&d)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, construction, primal_evaluations);
criterion_main!(benches);
