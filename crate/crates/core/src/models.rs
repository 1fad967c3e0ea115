//! Classifiers built on the primal solvers: LapSVM, LapRLSC, supervised
//! baselines, one-vs-all multiclass, prediction and model files.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::data::{Dataset, Role, Split};
use crate::error::{LapsvmError, Result};
use crate::graph::{build_laplacian, GraphSpec};
use crate::kernels::{cross_gram, gram, DistanceExponent, KernelSpec};
use crate::problem::{objective, Operators, PrimalState, Problem};
use crate::solvers::{
    newton_solve, pcg_solve, NewtonConfig, PcgConfig, SolveReport, StopReason, ValidationData,
};

#[derive(Debug, Clone)]
pub enum Solver {
    Newton(NewtonConfig),
    Pcg(PcgConfig),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub kernel: KernelSpec,
    pub graph: GraphSpec,
    pub gamma_a: f64,
    pub gamma_i: f64,
    /// Added to the Gram diagonal before solving.
    pub ridge: f64,
    /// Train one-vs-all even when there are only two classes.
    pub force_one_vs_all: bool,
}

impl ModelSpec {
    pub fn new(kernel: KernelSpec, graph: GraphSpec, gamma_a: f64, gamma_i: f64) -> Self {
        ModelSpec {
            kernel,
            graph,
            gamma_a,
            gamma_i,
            ridge: 0.0,
            force_one_vs_all: false,
        }
    }

    /// The same model without the manifold term.
    pub fn supervised(&self) -> Self {
        ModelSpec {
            gamma_i: 0.0,
            ..*self
        }
    }
}

/// Training points ordered labeled first, plus optional validation data.
#[derive(Debug, Clone, Default)]
pub struct TrainSet {
    pub points: Vec<Vec<f64>>,
    /// Labels of the first `labels.len()` points.
    pub labels: Vec<i64>,
    pub validation_points: Vec<Vec<f64>>,
    pub validation_labels: Vec<i64>,
    /// Every class the model must know about, increasing.
    pub classes: Vec<i64>,
    /// Caller index of each training point.
    pub source_index: Vec<usize>,
}

impl TrainSet {
    pub fn new(labeled: Vec<Vec<f64>>, labels: Vec<i64>, unlabeled: Vec<Vec<f64>>) -> Result<Self> {
        if labeled.len() != labels.len() {
            return Err(LapsvmError::DimensionMismatch {
                expected: labeled.len(),
                found: labels.len(),
            });
        }
        let mut classes = labels.clone();
        classes.sort_unstable();
        classes.dedup();
        let mut points = labeled;
        points.extend(unlabeled);
        Ok(TrainSet {
            source_index: (0..points.len()).collect(),
            points,
            labels,
            validation_points: Vec::new(),
            validation_labels: Vec::new(),
            classes,
        })
    }

    /// Points of a partitioned dataset: roles L and U train, V validates,
    /// T is left out. Class set is taken from all labels in the dataset.
    pub fn from_partitioned(ds: &Dataset) -> Result<Self> {
        let part = ds
            .partition
            .as_ref()
            .ok_or_else(|| LapsvmError::invalid("dataset has no partition"))?;
        let pick = |role: Role| -> Vec<usize> { (0..ds.len()).filter(|&i| part[i] == role).collect() };
        Self::from_indices(ds, &pick(Role::Labeled), &pick(Role::Unlabeled), &pick(Role::Validation))
    }

    pub fn from_split(ds: &Dataset, split: &Split) -> Result<Self> {
        Self::from_indices(ds, &split.labeled, &split.unlabeled, &split.validation)
    }

    fn from_indices(ds: &Dataset, l: &[usize], u: &[usize], v: &[usize]) -> Result<Self> {
        let mut source_index = l.to_vec();
        source_index.extend_from_slice(u);
        Ok(TrainSet {
            points: source_index.iter().map(|&i| ds.points[i].clone()).collect(),
            labels: l.iter().map(|&i| ds.labels[i]).collect(),
            validation_points: v.iter().map(|&i| ds.points[i].clone()).collect(),
            validation_labels: v.iter().map(|&i| ds.labels[i]).collect(),
            classes: ds.classes(),
            source_index,
        })
    }

    pub fn l(&self) -> usize {
        self.labels.len()
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    /// Only the labeled points (and the validation data).
    pub fn labeled_only(&self) -> TrainSet {
        TrainSet {
            points: self.points[..self.l()].to_vec(),
            labels: self.labels.clone(),
            validation_points: self.validation_points.clone(),
            validation_labels: self.validation_labels.clone(),
            classes: self.classes.clone(),
            source_index: self.source_index[..self.l()].to_vec(),
        }
    }

    fn check(&self) -> Result<()> {
        if self.labels.is_empty() {
            return Err(LapsvmError::Empty("labeled set"));
        }
        if self.classes.len() < 2 {
            return Err(LapsvmError::invalid("need at least two classes"));
        }
        for &c in &self.classes {
            if !self.labels.contains(&c) {
                return Err(LapsvmError::MissingClass(c));
            }
        }
        if let Some(&y) = self.labels.iter().find(|y| !self.classes.contains(y)) {
            return Err(LapsvmError::invalid(format!("label {y} is not a known class")));
        }
        let m = self.points[0].len();
        for p in self.points.iter().chain(&self.validation_points) {
            if p.len() != m {
                return Err(LapsvmError::DimensionMismatch {
                    expected: m,
                    found: p.len(),
                });
            }
        }
        if self.validation_points.len() != self.validation_labels.len() {
            return Err(LapsvmError::DimensionMismatch {
                expected: self.validation_points.len(),
                found: self.validation_labels.len(),
            });
        }
        Ok(())
    }
}

/// Gram matrix, Laplacian and validation kernel rows for one training set,
/// reusable across solvers and regularization parameters that share the
/// kernel and graph.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Arc<TrainSet>,
    pub ops: Arc<Operators>,
    pub kernel: KernelSpec,
    pub validation_rows: Option<Arc<DMatrix<f64>>>,
}

/// Builds the operators. The Laplacian is skipped when `with_graph` is
/// false.
pub fn prepare(train: TrainSet, spec: &ModelSpec, with_graph: bool) -> Result<Prepared> {
    train.check()?;
    let k = gram(&spec.kernel, &train.points, spec.ridge)?;
    let ops = if with_graph && train.n() > 1 {
        Operators::new(k, build_laplacian(&train.points, &spec.graph)?)?
    } else {
        Operators::without_graph(k)
    };
    let validation_rows = if train.validation_points.is_empty() {
        None
    } else {
        Some(Arc::new(cross_gram(
            &spec.kernel,
            &train.points,
            &train.validation_points,
        )?))
    };
    Ok(Prepared {
        train: Arc::new(train),
        ops: Arc::new(ops),
        kernel: spec.kernel,
        validation_rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassModel {
    /// The class scored positive by this function.
    pub label: i64,
    pub alpha: DVector<f64>,
    pub b: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub kernel: KernelSpec,
    /// Known classes in increasing order.
    pub classes: Vec<i64>,
    /// One entry for a binary model (scoring `classes[1]` positive), one per
    /// class for one-vs-all.
    pub per_class: Vec<ClassModel>,
    pub train_points: Arc<Vec<Vec<f64>>>,
    /// Empty for models read from disk.
    pub reports: Vec<SolveReport>,
    /// Wall-clock seconds spent in each solve, excluding Gram and graph
    /// construction.
    pub solve_seconds: Vec<f64>,
}

impl TrainedModel {
    pub fn is_binary(&self) -> bool {
        self.per_class.len() == 1
    }

    pub fn dim(&self) -> usize {
        self.train_points.first().map_or(0, |p| p.len())
    }

    pub fn total_solve_seconds(&self) -> f64 {
        self.solve_seconds.iter().sum()
    }
}

impl Prepared {
    /// The binary problem `positive` against the rest, exactly as training
    /// sets it up.
    pub fn binary_problem(&self, positive: i64, spec: &ModelSpec) -> Result<Problem> {
        if !self.train.classes.contains(&positive) {
            return Err(LapsvmError::invalid(format!("{positive} is not a class of the training set")));
        }
        let y: Vec<f64> = self
            .train
            .labels
            .iter()
            .map(|&t| if t == positive { 1.0 } else { -1.0 })
            .collect();
        problem_for(self.ops.clone(), &y, spec)
    }

    /// Validation kernel rows with `±1` labels for `positive`.
    pub fn binary_validation(&self, positive: i64) -> Option<Arc<ValidationData>> {
        validation_for(self, positive)
    }
}

/// Binary subproblems: `(positive class, ±1 labels)`.
fn subproblems(train: &TrainSet, force_ova: bool) -> Vec<(i64, Vec<f64>)> {
    let targets: Vec<i64> = if train.classes.len() == 2 && !force_ova {
        vec![train.classes[1]]
    } else {
        train.classes.clone()
    };
    targets
        .into_iter()
        .map(|c| {
            let y = train.labels.iter().map(|&t| if t == c { 1.0 } else { -1.0 }).collect();
            (c, y)
        })
        .collect()
}

fn problem_for(ops: Arc<Operators>, y: &[f64], spec: &ModelSpec) -> Result<Problem> {
    let n = ops.n();
    let mut labels = DVector::zeros(n);
    for (i, &v) in y.iter().enumerate() {
        labels[i] = v;
    }
    let gamma_i = if ops.laplacian.nnz() == 0 { 0.0 } else { spec.gamma_i };
    Problem::new(ops, labels, spec.gamma_a, gamma_i)
}

/// Runs `solve` and retries once with a small ridge on the Gram diagonal
/// if the linear algebra turned out singular.
fn with_ridge_retry<T>(
    ops: &Arc<Operators>,
    y: &[f64],
    spec: &ModelSpec,
    solve: impl Fn(&Problem) -> Result<T>,
) -> Result<T> {
    let p = problem_for(ops.clone(), y, spec)?;
    match solve(&p) {
        Err(LapsvmError::Singular(_)) => {
            let ridge = ops.gram.fallback_ridge();
            let bumped = Arc::new(ops.with_added_ridge(ridge));
            solve(&problem_for(bumped, y, spec)?)
        }
        other => other,
    }
}

fn validation_for(prep: &Prepared, positive: i64) -> Option<Arc<ValidationData>> {
    let rows = prep.validation_rows.as_ref()?;
    let labels = prep
        .train
        .validation_labels
        .iter()
        .map(|&t| if t == positive { 1.0 } else { -1.0 })
        .collect();
    Some(Arc::new(ValidationData {
        kernel_rows: (**rows).clone(),
        labels,
    }))
}

fn run_solver(p: &Problem, solver: &Solver, validation: Option<Arc<ValidationData>>) -> Result<SolveReport> {
    let init = PrimalState::zeros(p);
    match solver {
        Solver::Newton(cfg) => newton_solve(p, cfg, init),
        Solver::Pcg(cfg) => {
            if cfg.validation.is_none() && validation.is_some() {
                let cfg = PcgConfig {
                    validation,
                    ..cfg.clone()
                };
                pcg_solve(p, &cfg, init)
            } else {
                pcg_solve(p, cfg, init)
            }
        }
    }
}

fn assemble(
    prep: &Prepared,
    results: Vec<(i64, SolveReport, f64)>,
) -> TrainedModel {
    let mut per_class = Vec::with_capacity(results.len());
    let mut reports = Vec::with_capacity(results.len());
    let mut solve_seconds = Vec::with_capacity(results.len());
    for (label, report, secs) in results {
        per_class.push(ClassModel {
            label,
            alpha: report.final_state.alpha.clone(),
            b: report.final_state.b,
        });
        reports.push(report);
        solve_seconds.push(secs);
    }
    TrainedModel {
        kernel: prep.kernel,
        classes: prep.train.classes.clone(),
        per_class,
        train_points: Arc::new(prep.train.points.clone()),
        reports,
        solve_seconds,
    }
}

/// LapSVM on prepared operators. Binary subproblems of a one-vs-all model
/// are solved in parallel.
pub fn train_lapsvm_prepared(prep: &Prepared, spec: &ModelSpec, solver: &Solver) -> Result<TrainedModel> {
    let tasks = subproblems(&prep.train, spec.force_one_vs_all);
    let results = tasks
        .par_iter()
        .map(|(c, y)| {
            let validation = validation_for(prep, *c);
            let start = Instant::now();
            let report = with_ridge_retry(&prep.ops, y, spec, |p| {
                run_solver(p, solver, validation.clone())
            })?;
            Ok((*c, report, start.elapsed().as_secs_f64()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(prep, results))
}

pub fn train_lapsvm(train: TrainSet, spec: &ModelSpec, solver: &Solver) -> Result<TrainedModel> {
    let prep = prepare(train, spec, spec.gamma_i > 0.0)?;
    train_lapsvm_prepared(&prep, spec, solver)
}

/// Squared loss on every labeled point: one linear solve of the Newton
/// system with the error set frozen to all labeled points.
pub fn train_laprlsc_prepared(prep: &Prepared, spec: &ModelSpec) -> Result<TrainedModel> {
    let tasks = subproblems(&prep.train, spec.force_one_vs_all);
    let results = tasks
        .par_iter()
        .map(|(c, y)| {
            let start = Instant::now();
            let report = with_ridge_retry(&prep.ops, y, spec, laprlsc_solve)?;
            Ok((*c, report, start.elapsed().as_secs_f64()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(prep, results))
}

pub fn train_laprlsc(train: TrainSet, spec: &ModelSpec) -> Result<TrainedModel> {
    let prep = prepare(train, spec, spec.gamma_i > 0.0)?;
    train_laprlsc_prepared(&prep, spec)
}

fn laprlsc_solve(p: &Problem) -> Result<SolveReport> {
    let all: Vec<usize> = (0..p.l).collect();
    let (b, alpha) = crate::solvers::solve_for_error_set(p, &all, 0.0)?;
    let start = PrimalState::zeros(p);
    let state = PrimalState::from_coefficients(p, alpha, b)?;
    Ok(SolveReport {
        objective_trace: vec![objective(p, &start), objective(p, &state)],
        grad_norm_trace: Vec::new(),
        pgrad_norm_trace: Vec::new(),
        mixed_product_trace: Vec::new(),
        final_state: state,
        iterations: 1,
        line_search_iters_total: 0,
        stop_reason: StopReason::ErrorSetStable,
    })
}

/// The same LapSVM objective with `γ_I = 0`, trained on the labeled points
/// only.
pub fn train_supervised(train: &TrainSet, spec: &ModelSpec, solver: &Solver) -> Result<TrainedModel> {
    let prep = prepare(train.labeled_only(), &spec.supervised(), false)?;
    train_lapsvm_prepared(&prep, &spec.supervised(), solver)
}

/// Supervised squared-loss baseline (RLSC) on the labeled points.
pub fn train_supervised_rlsc(train: &TrainSet, spec: &ModelSpec) -> Result<TrainedModel> {
    let prep = prepare(train.labeled_only(), &spec.supervised(), false)?;
    train_laprlsc_prepared(&prep, &spec.supervised())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub decisions: Vec<i64>,
    /// One row per point, one column per entry of `per_class`.
    pub scores: DMatrix<f64>,
}

pub fn predict(model: &TrainedModel, points: &[Vec<f64>]) -> Result<Prediction> {
    let m = model.dim();
    if let Some(p) = points.iter().find(|p| p.len() != m) {
        return Err(LapsvmError::DimensionMismatch {
            expected: m,
            found: p.len(),
        });
    }
    let kx = cross_gram(&model.kernel, &model.train_points, points)?;
    let mut scores = DMatrix::zeros(points.len(), model.per_class.len());
    for (c, cm) in model.per_class.iter().enumerate() {
        let mut col = &kx * &cm.alpha;
        col.add_scalar_mut(cm.b);
        scores.set_column(c, &col);
    }
    let decisions = (0..points.len())
        .map(|i| {
            if model.is_binary() {
                if scores[(i, 0)] >= 0.0 {
                    model.per_class[0].label
                } else {
                    model.classes[0]
                }
            } else {
                let row = scores.row(i);
                let mut best = 0;
                for c in 1..row.len() {
                    if row[c] > row[best] {
                        best = c;
                    }
                }
                model.per_class[best].label
            }
        })
        .collect();
    Ok(Prediction { decisions, scores })
}

/// Percentage error. The macro variant, for two classes only, is
/// `100·(1 − TPR/2 − TNR/2)` with the larger label taken as positive.
pub fn error_rate(decisions: &[i64], truth: &[i64], macro_average: bool) -> Result<f64> {
    if decisions.len() != truth.len() {
        return Err(LapsvmError::DimensionMismatch {
            expected: truth.len(),
            found: decisions.len(),
        });
    }
    if truth.is_empty() {
        return Err(LapsvmError::Empty("evaluation set"));
    }
    if !macro_average {
        let wrong = decisions.iter().zip(truth).filter(|(d, t)| d != t).count();
        return Ok(100.0 * wrong as f64 / truth.len() as f64);
    }
    let mut labels: Vec<i64> = truth.iter().chain(decisions).copied().collect();
    labels.sort_unstable();
    labels.dedup();
    if labels.len() > 2 {
        return Err(LapsvmError::invalid("macro error rate is defined for two classes only"));
    }
    let positive = *truth.iter().max().expect("non-empty");
    let negative = *truth.iter().min().expect("non-empty");
    if positive == negative {
        return Err(LapsvmError::invalid("macro error rate needs both classes in the truth"));
    }
    let rate = |class: i64| {
        let members: Vec<usize> = (0..truth.len()).filter(|&i| truth[i] == class).collect();
        let hit = members.iter().filter(|&&i| decisions[i] == class).count();
        hit as f64 / members.len() as f64
    };
    Ok(100.0 * (1.0 - rate(positive) / 2.0 - rate(negative) / 2.0))
}

const MODEL_TAG: &str = "lapsvm-model v1";

/// Text form of a model. Numbers are written in shortest round-trip form,
/// so reading back yields bit-identical coefficients.
pub fn model_to_string(model: &TrainedModel) -> String {
    let mut out = String::new();
    writeln!(out, "{MODEL_TAG}").unwrap();
    match model.kernel {
        KernelSpec::Gaussian { sigma, exponent } => {
            writeln!(out, "kernel gaussian {sigma} {}", exponent.as_int()).unwrap()
        }
        KernelSpec::Polynomial { degree, offset } => {
            writeln!(out, "kernel polynomial {degree} {offset}").unwrap()
        }
        KernelSpec::Linear => writeln!(out, "kernel linear").unwrap(),
    }
    write!(out, "classes").unwrap();
    for c in &model.classes {
        write!(out, " {c}").unwrap();
    }
    out.push('\n');
    writeln!(out, "points {} {}", model.train_points.len(), model.dim()).unwrap();
    for p in model.train_points.iter() {
        let row: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", row.join(" ")).unwrap();
    }
    writeln!(out, "functions {}", model.per_class.len()).unwrap();
    for cm in &model.per_class {
        writeln!(out, "function {} {}", cm.label, cm.b).unwrap();
        let row: Vec<String> = cm.alpha.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", row.join(" ")).unwrap();
    }
    out
}

pub fn model_from_str(text: &str, source: &str) -> Result<TrainedModel> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let err = |line: usize, msg: &str| LapsvmError::Parse {
        path: source.to_string(),
        line,
        message: msg.to_string(),
    };
    let mut next = |what: &str| lines.next().ok_or_else(|| err(0, &format!("missing {what}")));
    let nums = |line: usize, s: &str| -> Result<Vec<f64>> {
        s.split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| err(line, &format!("bad number '{t}'"))))
            .collect()
    };

    let (no, tag) = next("header")?;
    if tag != MODEL_TAG {
        return Err(err(no, "not a lapsvm model file (or unsupported version)"));
    }
    let (no, kline) = next("kernel")?;
    let kt: Vec<&str> = kline.split_whitespace().collect();
    let kernel = match kt.as_slice() {
        ["kernel", "gaussian", s, e] => KernelSpec::Gaussian {
            sigma: s.parse().map_err(|_| err(no, "bad sigma"))?,
            exponent: DistanceExponent::from_int(e.parse().map_err(|_| err(no, "bad exponent"))?)?,
        },
        ["kernel", "polynomial", d, o] => KernelSpec::Polynomial {
            degree: d.parse().map_err(|_| err(no, "bad degree"))?,
            offset: o.parse().map_err(|_| err(no, "bad offset"))?,
        },
        ["kernel", "linear"] => KernelSpec::Linear,
        _ => return Err(err(no, "malformed kernel line")),
    };
    let (no, cline) = next("classes")?;
    let classes = cline
        .strip_prefix("classes")
        .ok_or_else(|| err(no, "expected classes"))?
        .split_whitespace()
        .map(|t| t.parse::<i64>().map_err(|_| err(no, "bad class label")))
        .collect::<Result<Vec<i64>>>()?;
    let (no, pline) = next("points")?;
    let pt: Vec<&str> = pline.split_whitespace().collect();
    let (n, m): (usize, usize) = match pt.as_slice() {
        ["points", n, m] => (
            n.parse().map_err(|_| err(no, "bad count"))?,
            m.parse().map_err(|_| err(no, "bad dimension"))?,
        ),
        _ => return Err(err(no, "malformed points line")),
    };
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let (no, row) = next("point")?;
        let x = nums(no, row)?;
        if x.len() != m {
            return Err(err(no, "wrong number of coordinates"));
        }
        points.push(x);
    }
    let (no, fline) = next("functions")?;
    let count: usize = fline
        .strip_prefix("functions")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| err(no, "malformed functions line"))?;
    let mut per_class = Vec::with_capacity(count);
    for _ in 0..count {
        let (no, head) = next("function")?;
        let ht: Vec<&str> = head.split_whitespace().collect();
        let (label, b) = match ht.as_slice() {
            ["function", c, b] => (
                c.parse::<i64>().map_err(|_| err(no, "bad label"))?,
                b.parse::<f64>().map_err(|_| err(no, "bad bias"))?,
            ),
            _ => return Err(err(no, "malformed function line")),
        };
        let (no, row) = next("coefficients")?;
        let alpha = nums(no, row)?;
        if alpha.len() != n {
            return Err(err(no, "wrong number of coefficients"));
        }
        per_class.push(ClassModel {
            label,
            alpha: DVector::from_vec(alpha),
            b,
        });
    }
    Ok(TrainedModel {
        kernel,
        classes,
        per_class,
        train_points: Arc::new(points),
        reports: Vec::new(),
        solve_seconds: Vec::new(),
    })
}

pub fn save_model(path: &Path, model: &TrainedModel) -> Result<()> {
    std::fs::write(path, model_to_string(model)).map_err(|e| LapsvmError::io(path, e))
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let text = std::fs::read_to_string(path).map_err(|e| LapsvmError::io(path, e))?;
    model_from_str(&text, &path.display().to_string())
}
