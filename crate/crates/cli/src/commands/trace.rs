use lapsvm::kernels::cross_gram;
use lapsvm::models::error_rate;
use lapsvm::solvers::{pcg_solve_observed, PcgConfig, PcgIterate};
use lapsvm::stopping::NormSnapshot;
use lapsvm::{Dataset, PrimalState, Solver, Split, TrainSet};
use nalgebra::DMatrix;

use super::{fmt_err, out_dir, Outcome};
use crate::config::{ExperimentConfig, Method};
use crate::error::{CliError, Result};
use crate::experiment::{load_data, prepare_for, splits, ROLES};
use crate::table::{num, opt, Table};

/// One PCG iterate. `errors` is filled at t = 0, at check iterations and at
/// the final iterate.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub iteration: usize,
    pub norms: NormSnapshot,
    pub is_check: bool,
    pub errors: Option<[Option<f64>; 4]>,
}

/// Kernel rows of each partition against the training points.
struct Scorer {
    rows: Vec<Option<(DMatrix<f64>, Vec<i64>)>>,
    positive: i64,
    negative: i64,
    macro_error: bool,
}

impl Scorer {
    fn errors(&self, s: &PrimalState) -> Result<[Option<f64>; 4]> {
        let mut out = [None; 4];
        for (k, part) in self.rows.iter().enumerate() {
            if let Some((kx, truth)) = part {
                let f = kx * &s.alpha;
                let dec: Vec<i64> = f
                    .iter()
                    .map(|&v| if v + s.b >= 0.0 { self.positive } else { self.negative })
                    .collect();
                out[k] = Some(error_rate(&dec, truth, self.macro_error)?);
            }
        }
        Ok(out)
    }
}

/// Runs PCG on the configured split and records every iterate.
pub fn trace(cfg: &ExperimentConfig, ds: &Dataset, split: &Split) -> Result<(Vec<TraceRow>, lapsvm::SolveReport)> {
    let pcg = match &cfg.solver {
        Solver::Pcg(c) => c.clone(),
        Solver::Newton(_) => return Err(CliError::usage("trace follows PCG iterates; set solver = \"pcg\"")),
    };
    let spec = match cfg.method {
        Method::LapSvm => cfg.spec,
        Method::Svm => cfg.spec.supervised(),
        other => {
            return Err(CliError::usage(format!(
                "trace needs an iterative method (lapsvm or svm), not {}",
                other.name()
            )))
        }
    };
    let train = TrainSet::from_split(ds, split)?;
    let prep = prepare_for(cfg.method, &train, &spec)?;
    let classes = &prep.train.classes;
    if classes.len() != 2 {
        return Err(CliError::usage(format!(
            "trace needs a two-class problem, the data has {} classes",
            classes.len()
        )));
    }
    let (negative, positive) = (classes[0], classes[1]);
    let problem = prep.binary_problem(positive, &spec)?;

    let mut rows = Vec::with_capacity(4);
    for role in ROLES {
        let idx = split.indices(role);
        if idx.is_empty() {
            rows.push(None);
            continue;
        }
        let points: Vec<Vec<f64>> = idx.iter().map(|&i| ds.points[i].clone()).collect();
        let truth = idx.iter().map(|&i| ds.labels[i]).collect();
        rows.push(Some((cross_gram(&spec.kernel, &prep.train.points, &points)?, truth)));
    }
    let scorer = Scorer {
        rows,
        positive,
        negative,
        macro_error: cfg.macro_error,
    };

    let cfg_pcg = PcgConfig {
        validation: pcg.validation.clone().or_else(|| prep.binary_validation(positive)),
        ..pcg
    };
    let mut trace = Vec::new();
    let mut failure = None;
    let report = pcg_solve_observed(&problem, &cfg_pcg, PrimalState::zeros(&problem), |it: &PcgIterate| {
        let errors = if it.iteration == 0 || it.is_check {
            match scorer.errors(it.state) {
                Ok(e) => Some(e),
                Err(e) => {
                    failure.get_or_insert(e);
                    None
                }
            }
        } else {
            None
        };
        trace.push(TraceRow {
            iteration: it.iteration,
            norms: it.norms,
            is_check: it.is_check,
            errors,
        });
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    if let Some(last) = trace.last_mut() {
        if last.errors.is_none() {
            last.errors = Some(scorer.errors(&report.final_state)?);
        }
    }
    Ok((trace, report))
}

fn relative(x: f64, x0: f64) -> Option<f64> {
    (x0 != 0.0).then(|| x / x0)
}

/// Writes `trace.csv` with one row per iteration and `trace-summary.csv`.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let ds = load_data(cfg)?;
    let all = splits(cfg, &ds)?;
    let split = &all[cfg.split_index];
    let (rows, report) = trace(cfg, &ds, split)?;

    let mut t = Table::new(&[
        "t", "obj", "grad_norm", "pgrad_norm", "mixed_product", "obj_rel", "grad_norm_rel",
        "pgrad_norm_rel", "mixed_product_rel", "check", "err_L", "err_U", "err_V", "err_T",
    ]);
    let first = rows[0].norms;
    for r in &rows {
        let n = r.norms;
        let mut row = vec![
            r.iteration.to_string(),
            num(n.objective),
            num(n.grad),
            num(n.pgrad),
            num(n.mixed),
            opt(relative(n.objective, first.objective)),
            opt(relative(n.grad, first.grad)),
            opt(relative(n.pgrad, first.pgrad)),
            opt(relative(n.mixed, first.mixed)),
            u8::from(r.is_check).to_string(),
        ];
        match r.errors {
            Some(e) => row.extend(e.iter().map(|&v| opt(v))),
            None => row.extend(std::iter::repeat_n(String::new(), 4)),
        }
        t.push(row);
    }

    let dir = out_dir(cfg)?;
    let mut out = Outcome::default();
    t.write(out.file(dir.join("trace.csv")), &cfg.echo())?;
    let mut summary = Table::new(&["key", "value"]);
    summary.push(vec!["iterations".into(), report.iterations.to_string()]);
    summary.push(vec!["line_search_intervals".into(), report.line_search_iters_total.to_string()]);
    summary.push(vec!["stop".into(), report.stop_reason.as_str().into()]);
    summary.write(out.file(dir.join("trace-summary.csv")), &cfg.echo())?;

    let last = rows.last().and_then(|r| r.errors).unwrap_or([None; 4]);
    out.say(format!(
        "{} iterations, stopped by {}; final err L {} U {} V {} T {}",
        report.iterations,
        report.stop_reason.as_str(),
        fmt_err(last[0]),
        fmt_err(last[1]),
        fmt_err(last[2]),
        fmt_err(last[3]),
    ));
    Ok(out)
}
