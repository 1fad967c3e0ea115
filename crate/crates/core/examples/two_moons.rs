//! Two labeled points, 198 unlabeled ones: the graph term spreads the
//! labels along each moon.

use lapsvm::data::generate_two_moons;
use lapsvm::models::{predict, train_lapsvm};
use lapsvm::{GraphSpec, KernelSpec, ModelSpec, PcgConfig, Solver, TrainSet};

fn main() -> lapsvm::Result<()> {
    let ds = generate_two_moons(200, 0.05, 0)?;
    let first = |class| ds.labels.iter().position(|&y| y == class).unwrap();
    let labeled: Vec<usize> = ds.classes().into_iter().map(first).collect();
    let unlabeled: Vec<Vec<f64>> = (0..ds.len())
        .filter(|i| !labeled.contains(i))
        .map(|i| ds.points[i].clone())
        .collect();
    let train = TrainSet::new(
        labeled.iter().map(|&i| ds.points[i].clone()).collect(),
        labeled.iter().map(|&i| ds.labels[i]).collect(),
        unlabeled,
    )?;

    let spec = ModelSpec::new(KernelSpec::gaussian(0.3), GraphSpec::new(6, 1, false), 1e-3, 100.0);
    let model = train_lapsvm(train, &spec, &Solver::Pcg(PcgConfig::default()))?;
    let pred = predict(&model, &ds.points)?;
    let wrong = pred.decisions.iter().zip(&ds.labels).filter(|(a, b)| a != b).count();
    println!(
        "{} PCG iterations, {wrong} of {} points misclassified",
        model.reports[0].iterations,
        ds.len()
    );
    Ok(())
}
