//! Data loading, splitting, fitting and scoring shared by the commands.

use std::time::Instant;

use lapsvm::data::{generate_g50c, generate_two_moons, load_dataset, make_splits};
use lapsvm::models::{
    error_rate, predict, prepare, train_lapsvm_prepared, train_laprlsc_prepared, Prepared,
};
use lapsvm::{Dataset, LapsvmError, ModelSpec, Role, Solver, Split, TrainSet, TrainedModel};

use crate::config::{DataSource, ExperimentConfig, Method};
use crate::error::{CliError, Result};

pub const ROLES: [Role; 4] = [Role::Labeled, Role::Unlabeled, Role::Validation, Role::Test];

pub fn load_data(cfg: &ExperimentConfig) -> Result<Dataset> {
    let mut ds = match &cfg.source {
        DataSource::File { path, format } => load_dataset(path, *format)?,
        DataSource::G50c { points } => generate_g50c(*points, cfg.seed)?,
        DataSource::TwoMoons { points, noise } => generate_two_moons(*points, *noise, cfg.seed)?,
    };
    if let Some((path, format)) = &cfg.test_source {
        let test = load_dataset(path, *format)?;
        if test.dim() != ds.dim() {
            return Err(LapsvmError::DimensionMismatch {
                expected: ds.dim(),
                found: test.dim(),
            }
            .into());
        }
        let mut roles = vec![Role::Unlabeled; ds.len()];
        roles.extend(std::iter::repeat_n(Role::Test, test.len()));
        ds.points.extend(test.points);
        ds.labels.extend(test.labels);
        ds.partition = Some(roles);
    }
    Ok(ds)
}

pub fn splits(cfg: &ExperimentConfig, ds: &Dataset) -> Result<Vec<Split>> {
    if cfg.settings.split.labeled.is_none() {
        return Err(CliError::usage("missing setting 'labeled' (flag --labeled)"));
    }
    Ok(make_splits(ds, &cfg.plan)?)
}

/// Kernel, Laplacian and validation rows for `method`. Supervised methods
/// only see the labeled points.
pub fn prepare_for(method: Method, train: &TrainSet, spec: &ModelSpec) -> Result<Prepared> {
    Ok(if method.uses_graph() {
        prepare(train.clone(), spec, true)?
    } else {
        prepare(train.labeled_only(), &spec.supervised(), false)?
    })
}

pub fn fit(method: Method, prep: &Prepared, spec: &ModelSpec, solver: &Solver) -> Result<TrainedModel> {
    Ok(match method {
        Method::LapSvm => train_lapsvm_prepared(prep, spec, solver)?,
        Method::LapRlsc => train_laprlsc_prepared(prep, spec)?,
        Method::Svm => train_lapsvm_prepared(prep, &spec.supervised(), solver)?,
        Method::Rlsc => train_laprlsc_prepared(prep, &spec.supervised())?,
    })
}

/// A model trained on one split with the time spent building operators.
pub struct Fitted {
    pub model: TrainedModel,
    pub prepare_seconds: f64,
    pub total_seconds: f64,
}

pub fn fit_split(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    split: &Split,
    method: Method,
    solver: &Solver,
) -> Result<Fitted> {
    let start = Instant::now();
    let train = TrainSet::from_split(ds, split)?;
    let prep = prepare_for(method, &train, &cfg.spec)?;
    let prepare_seconds = start.elapsed().as_secs_f64();
    let model = fit(method, &prep, &cfg.spec, solver)?;
    Ok(Fitted {
        model,
        prepare_seconds,
        total_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Percentage error on L, U, V and T; `None` for empty partitions.
pub fn evaluate(model: &TrainedModel, ds: &Dataset, split: &Split, macro_error: bool) -> Result<[Option<f64>; 4]> {
    let mut out = [None; 4];
    for (k, role) in ROLES.iter().enumerate() {
        let idx = split.indices(*role);
        if idx.is_empty() {
            continue;
        }
        let points: Vec<Vec<f64>> = idx.iter().map(|&i| ds.points[i].clone()).collect();
        let truth: Vec<i64> = idx.iter().map(|&i| ds.labels[i]).collect();
        let pred = predict(model, &points)?;
        out[k] = Some(error_rate(&pred.decisions, &truth, macro_error)?);
    }
    Ok(out)
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

/// Sample standard deviation; 0 for a single value.
pub fn std_dev(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    if xs.len() < 2 {
        return Some(0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[k] } else { (v[k - 1] + v[k]) / 2.0 })
}

/// Mean over splits of each partition's error, skipping empty partitions.
pub fn mean_errors(rows: &[[Option<f64>; 4]]) -> [Option<f64>; 4] {
    let mut out = [None; 4];
    for (k, o) in out.iter_mut().enumerate() {
        let v: Vec<f64> = rows.iter().filter_map(|r| r[k]).collect();
        *o = mean(&v);
    }
    out
}
