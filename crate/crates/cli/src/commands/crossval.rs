use lapsvm::data::write_manifest;
use lapsvm::TrainSet;
use rayon::prelude::*;

use super::{fmt_err, out_dir, Outcome};
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::experiment::{evaluate, fit, load_data, mean_errors, prepare_for, splits, std_dev};
use crate::table::{num, opt, Table};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub gamma_a: f64,
    pub gamma_i: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellResult {
    /// L, U, V, T errors of each split.
    Done(Vec<[Option<f64>; 4]>),
    Failed(String),
}

impl CellResult {
    pub fn mean_validation(&self) -> Option<f64> {
        match self {
            CellResult::Done(rows) => mean_errors(rows)[2],
            CellResult::Failed(_) => None,
        }
    }
}

/// Every `(γ_A, γ_I)` pair of the grid; supervised methods only vary `γ_A`.
pub fn cells(grid: &[f64], uses_graph: bool) -> Vec<Cell> {
    let mut out = Vec::new();
    for &gamma_a in grid {
        if uses_graph {
            out.extend(grid.iter().map(|&gamma_i| Cell { gamma_a, gamma_i }));
        } else {
            out.push(Cell { gamma_a, gamma_i: 0.0 });
        }
    }
    out
}

/// Runs `score(cell, split)` for every pair, in parallel. A cell fails as a
/// whole when any of its splits fails.
pub fn run_grid<F>(cells: &[Cell], n_splits: usize, score: F) -> Vec<CellResult>
where
    F: Fn(&Cell, usize) -> Result<[Option<f64>; 4]> + Sync,
{
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..n_splits).map(move |s| (c, s)))
        .collect();
    let results: Vec<Result<[Option<f64>; 4]>> =
        jobs.par_iter().map(|&(c, s)| score(&cells[c], s)).collect();
    let mut it = results.into_iter();
    cells
        .iter()
        .map(|_| {
            let mut rows = Vec::with_capacity(n_splits);
            let mut failure = None;
            for r in it.by_ref().take(n_splits) {
                match r {
                    Ok(e) => rows.push(e),
                    Err(e) => {
                        failure.get_or_insert(e.to_string());
                    }
                }
            }
            match failure {
                Some(msg) => CellResult::Failed(msg),
                None => CellResult::Done(rows),
            }
        })
        .collect()
}

/// Lowest mean validation error; ties go to the smaller `γ_I`, then the
/// smaller `γ_A`. Failed cells never win.
pub fn best_cell(cells: &[Cell], results: &[CellResult]) -> Option<usize> {
    (0..cells.len())
        .filter_map(|k| results[k].mean_validation().map(|v| (k, v)))
        .min_by(|&(a, va), &(b, vb)| {
            va.total_cmp(&vb)
                .then(cells[a].gamma_i.total_cmp(&cells[b].gamma_i))
                .then(cells[a].gamma_a.total_cmp(&cells[b].gamma_a))
        })
        .map(|(k, _)| k)
}

/// Grid search over `γ_A × γ_I` by mean validation error over all splits.
/// Writes `crossval.csv` (one row per cell), `crossval-best.csv` and
/// `splits.txt`.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    if cfg.plan.validation == 0 {
        return Err(CliError::usage(
            "crossval selects by validation error; set 'validation' (flag --validation) above 0",
        ));
    }
    let ds = load_data(cfg)?;
    let all = splits(cfg, &ds)?;
    let preps = all
        .par_iter()
        .map(|s| prepare_for(cfg.method, &TrainSet::from_split(&ds, s)?, &cfg.spec))
        .collect::<Result<Vec<_>>>()?;
    let cells = cells(&cfg.grid, cfg.method.uses_graph());
    let solver = super::untraced(&cfg.solver);
    let results = run_grid(&cells, all.len(), |cell, s| {
        let mut spec = cfg.spec;
        spec.gamma_a = cell.gamma_a;
        spec.gamma_i = cell.gamma_i;
        let model = fit(cfg.method, &preps[s], &spec, &solver)?;
        evaluate(&model, &ds, &all[s], cfg.macro_error)
    });
    let best = best_cell(&cells, &results);

    let mut t = Table::new(&[
        "gamma_a", "gamma_i", "status", "mean_err_V", "std_err_V", "mean_err_L", "mean_err_U",
        "mean_err_T", "std_err_T", "message",
    ]);
    for (cell, r) in cells.iter().zip(&results) {
        let mut row = vec![num(cell.gamma_a), num(cell.gamma_i)];
        match r {
            CellResult::Done(rows) => {
                let m = mean_errors(rows);
                let v: Vec<f64> = rows.iter().filter_map(|e| e[2]).collect();
                let te: Vec<f64> = rows.iter().filter_map(|e| e[3]).collect();
                row.extend([
                    "ok".into(),
                    opt(m[2]),
                    opt(std_dev(&v)),
                    opt(m[0]),
                    opt(m[1]),
                    opt(m[3]),
                    opt(std_dev(&te)),
                    String::new(),
                ]);
            }
            CellResult::Failed(msg) => {
                row.push("failed".into());
                row.extend(std::iter::repeat_n(String::new(), 6));
                row.push(msg.clone());
            }
        }
        t.push(row);
    }

    let dir = out_dir(cfg)?;
    let mut out = Outcome::default();
    t.write(out.file(dir.join("crossval.csv")), &cfg.echo())?;
    write_manifest(out.file(dir.join("splits.txt")), &all)?;

    let failed = results.iter().filter(|r| matches!(r, CellResult::Failed(_))).count();
    if failed > 0 {
        out.say(format!("{failed} of {} cells failed and were excluded", cells.len()));
    }
    let mut summary = Table::new(&["key", "value"]);
    match best {
        Some(k) => {
            let m = match &results[k] {
                CellResult::Done(rows) => mean_errors(rows),
                CellResult::Failed(_) => unreachable!("failed cells are never selected"),
            };
            summary.push(vec!["gamma_a".into(), num(cells[k].gamma_a)]);
            summary.push(vec!["gamma_i".into(), num(cells[k].gamma_i)]);
            summary.push(vec!["mean_err_V".into(), opt(m[2])]);
            summary.push(vec!["mean_err_T".into(), opt(m[3])]);
            out.say(format!(
                "best γ_A = {}, γ_I = {}: mean err V {} T {} over {} splits",
                cells[k].gamma_a,
                cells[k].gamma_i,
                fmt_err(m[2]),
                fmt_err(m[3]),
                all.len()
            ));
        }
        None => out.say("every cell failed"),
    }
    summary.write(out.file(dir.join("crossval-best.csv")), &cfg.echo())?;
    if best.is_none() {
        let msg = results
            .iter()
            .find_map(|r| match r {
                CellResult::Failed(m) => Some(m.clone()),
                CellResult::Done(_) => None,
            })
            .unwrap_or_default();
        return Err(CliError::usage(format!("no grid cell could be trained: {msg}")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn errs(v: f64) -> [Option<f64>; 4] {
        [Some(0.0), None, Some(v), None]
    }

    #[test]
    fn cells_cover_the_grid() {
        assert_eq!(cells(&[1.0, 2.0], true).len(), 4);
        let sup = cells(&[1.0, 2.0, 3.0], false);
        assert_eq!(sup.len(), 3);
        assert!(sup.iter().all(|c| c.gamma_i == 0.0));
    }

    #[test]
    fn single_cell_grid_returns_that_cell() {
        let c = cells(&[0.5], true);
        let r = run_grid(&c, 3, |_, s| Ok(errs(s as f64)));
        assert_eq!(best_cell(&c, &r), Some(0));
        assert_eq!(r[0].mean_validation(), Some(1.0));
    }

    #[test]
    fn failed_cell_is_excluded() {
        let c = cells(&[1.0, 2.0], true);
        let r = run_grid(&c, 4, |cell, s| {
            if cell.gamma_a == 1.0 && cell.gamma_i == 1.0 && s == 2 {
                Err(CliError::usage("seeded failure"))
            } else if cell.gamma_a == 1.0 && cell.gamma_i == 1.0 {
                Ok(errs(0.0))
            } else {
                Ok(errs(5.0))
            }
        });
        assert_eq!(r[0], CellResult::Failed("seeded failure".into()));
        assert!(matches!(r[1], CellResult::Done(ref rows) if rows.len() == 4));
        let best = best_cell(&c, &r).unwrap();
        assert_ne!(best, 0);
    }

    #[test]
    fn ties_prefer_small_gamma_i_then_small_gamma_a() {
        let c = cells(&[1.0, 10.0], true);
        let r = run_grid(&c, 1, |_, _| Ok(errs(3.0)));
        assert_eq!(c[best_cell(&c, &r).unwrap()], Cell { gamma_a: 1.0, gamma_i: 1.0 });

        let r = run_grid(&c, 1, |cell, _| Ok(errs(if cell.gamma_a == 10.0 { 3.0 } else { 4.0 })));
        assert_eq!(c[best_cell(&c, &r).unwrap()], Cell { gamma_a: 10.0, gamma_i: 1.0 });

        let r = run_grid(&c, 1, |cell, _| Ok(errs(if cell.gamma_i == 10.0 { 3.0 } else { 4.0 })));
        assert_eq!(c[best_cell(&c, &r).unwrap()], Cell { gamma_a: 1.0, gamma_i: 10.0 });
    }

    #[test]
    fn all_failed_has_no_best() {
        let c = cells(&[1.0], true);
        let r = run_grid(&c, 2, |_, _| Err(CliError::usage("x")));
        assert_eq!(best_cell(&c, &r), None);
    }
}
