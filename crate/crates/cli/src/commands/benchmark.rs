use lapsvm::models::Prepared;
use lapsvm::TrainSet;

use super::{fmt_err, iterations, line_searches, out_dir, untraced, Outcome};
use crate::config::{ExperimentConfig, Variant};
use crate::error::{CliError, Result};
use crate::experiment::{evaluate, fit, load_data, mean, mean_errors, median, prepare_for, splits, std_dev, ROLES};
use crate::table::{num, opt, Table};

/// Per-split measurements of one variant.
#[derive(Debug, Clone)]
pub struct SplitRun {
    pub errors: [Option<f64>; 4],
    pub iterations: usize,
    pub line_search: usize,
    pub stop: String,
    pub seconds: f64,
    pub decisions: Vec<i64>,
}

/// Trains every variant on every split. Kernel and graph construction is
/// shared between variants and left out of the timings, and traces are not
/// recorded. Meant to run on a single thread.
pub fn measure(cfg: &ExperimentConfig) -> Result<(Vec<lapsvm::Split>, Vec<Vec<SplitRun>>)> {
    if cfg.benchmark.len() < 2 {
        return Err(CliError::usage("benchmark needs at least two variants (flag --benchmark)"));
    }
    let ds = load_data(cfg)?;
    let all = splits(cfg, &ds)?;
    let mut runs: Vec<Vec<SplitRun>> = vec![Vec::with_capacity(all.len()); cfg.benchmark.len()];
    for split in &all {
        let train = TrainSet::from_split(&ds, split)?;
        let mut with_graph: Option<Prepared> = None;
        let mut labeled_only: Option<Prepared> = None;
        for (v, variant) in cfg.benchmark.iter().enumerate() {
            let slot = if variant.method.uses_graph() {
                &mut with_graph
            } else {
                &mut labeled_only
            };
            if slot.is_none() {
                *slot = Some(prepare_for(variant.method, &train, &cfg.spec)?);
            }
            let prep = slot.as_ref().expect("just prepared");
            runs[v].push(run_variant(cfg, variant, prep, &ds, split)?);
        }
    }
    Ok((all, runs))
}

fn run_variant(
    cfg: &ExperimentConfig,
    variant: &Variant,
    prep: &Prepared,
    ds: &lapsvm::Dataset,
    split: &lapsvm::Split,
) -> Result<SplitRun> {
    let solver = untraced(&variant.solver);
    let mut times = Vec::with_capacity(cfg.repeats);
    let mut model = None;
    for _ in 0..cfg.repeats {
        let m = fit(variant.method, prep, &cfg.spec, &solver)?;
        times.push(m.total_solve_seconds());
        model = Some(m);
    }
    let model = model.expect("repeats >= 1");
    let errors = evaluate(&model, ds, split, cfg.macro_error)?;
    let eval: Vec<usize> = split.labeled.iter().chain(&split.unlabeled).chain(&split.test).copied().collect();
    let points: Vec<Vec<f64>> = eval.iter().map(|&i| ds.points[i].clone()).collect();
    let decisions = lapsvm::models::predict(&model, &points)?.decisions;
    let stop = model
        .reports
        .iter()
        .map(|r| r.stop_reason.as_str())
        .collect::<Vec<_>>()
        .join("+");
    Ok(SplitRun {
        errors,
        iterations: iterations(&model.reports),
        line_search: line_searches(&model.reports),
        stop,
        seconds: median(&times).expect("repeats >= 1"),
        decisions,
    })
}

/// Writes `benchmark.csv` (one row per variant), `benchmark-splits.csv`
/// and `benchmark.timing.csv`.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (all, runs) = measure(cfg)?;

    let mut summary = Table::new(&[
        "variant", "method", "splits", "mean_err_L", "mean_err_U", "mean_err_V", "mean_err_T",
        "std_err_T", "mean_iterations", "max_iterations", "mean_line_search",
    ]);
    let mut detail = Table::new(&[
        "variant", "split", "randomization", "fold", "err_L", "err_U", "err_V", "err_T",
        "iterations", "line_search", "stop",
    ]);
    let mut timing = Table::new(&["variant", "mean_seconds", "std_seconds", "min_seconds", "max_seconds"]);
    let mut out = Outcome::default();

    for (variant, rs) in cfg.benchmark.iter().zip(&runs) {
        let errs: Vec<[Option<f64>; 4]> = rs.iter().map(|r| r.errors).collect();
        let m = mean_errors(&errs);
        let te: Vec<f64> = errs.iter().filter_map(|e| e[3]).collect();
        let its: Vec<f64> = rs.iter().map(|r| r.iterations as f64).collect();
        let ls: Vec<f64> = rs.iter().map(|r| r.line_search as f64).collect();
        let secs: Vec<f64> = rs.iter().map(|r| r.seconds).collect();
        summary.push(vec![
            variant.name.clone(),
            variant.method.name().into(),
            rs.len().to_string(),
            opt(m[0]),
            opt(m[1]),
            opt(m[2]),
            opt(m[3]),
            opt(std_dev(&te)),
            opt(mean(&its)),
            rs.iter().map(|r| r.iterations).max().unwrap_or(0).to_string(),
            opt(mean(&ls)),
        ]);
        for (k, (r, s)) in rs.iter().zip(&all).enumerate() {
            let mut row = vec![
                variant.name.clone(),
                k.to_string(),
                s.randomization.to_string(),
                s.fold.to_string(),
            ];
            row.extend(r.errors.iter().map(|&e| opt(e)));
            row.extend([r.iterations.to_string(), r.line_search.to_string(), r.stop.clone()]);
            detail.push(row);
        }
        let min = secs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = secs.iter().copied().fold(0.0, f64::max);
        timing.push(vec![variant.name.clone(), opt(mean(&secs)), opt(std_dev(&secs)), num(min), num(max)]);
        let errs_text: Vec<String> = ROLES
            .iter()
            .zip(m)
            .map(|(r, e)| format!("{}={}", r.tag(), fmt_err(e)))
            .collect();
        out.say(format!(
            "{:<16} err {}  iterations {:.1}  time {:.4}s ± {:.4}s",
            variant.name,
            errs_text.join(" "),
            mean(&its).unwrap_or(0.0),
            mean(&secs).unwrap_or(0.0),
            std_dev(&secs).unwrap_or(0.0),
        ));
    }

    let dir = out_dir(cfg)?;
    summary.write(out.file(dir.join("benchmark.csv")), &cfg.echo())?;
    detail.write(out.file(dir.join("benchmark-splits.csv")), &cfg.echo())?;
    timing.write(out.file(dir.join("benchmark.timing.csv")), &cfg.echo())?;
    Ok(out)
}

/// Whether two variants made the same decision on every L, U and T point of
/// every split.
pub fn same_decisions(a: &[SplitRun], b: &[SplitRun]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.decisions == y.decisions)
}
