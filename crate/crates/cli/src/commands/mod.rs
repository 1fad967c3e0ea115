pub mod benchmark;
pub mod crossval;
pub mod gen_data;
pub mod predict;
pub mod trace;
pub mod train;

use std::fs;
use std::path::{Path, PathBuf};

use lapsvm::{SolveReport, Solver};

use crate::config::{ExperimentConfig, Method};
use crate::error::{CliError, Result};

/// What a command wrote and what it has to say about it.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

impl Outcome {
    fn file(&mut self, path: PathBuf) -> &Path {
        self.files.push(path);
        self.files.last().expect("just pushed")
    }

    fn say(&mut self, line: impl Into<String>) {
        self.summary.push(line.into());
    }
}

pub(crate) fn out_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;
    Ok(cfg.out.clone())
}

pub(crate) fn solver_name(method: Method, solver: &Solver) -> &'static str {
    match (method.uses_solver(), solver) {
        (false, _) => "direct",
        (true, Solver::Newton(_)) => "newton",
        (true, Solver::Pcg(_)) => "pcg",
    }
}

/// The same solver with trace recording switched off.
pub(crate) fn untraced(solver: &Solver) -> Solver {
    match solver {
        Solver::Newton(c) => {
            let mut c = *c;
            c.record_traces = false;
            Solver::Newton(c)
        }
        Solver::Pcg(c) => {
            let mut c = c.clone();
            c.record_traces = false;
            Solver::Pcg(c)
        }
    }
}

pub(crate) fn iterations(reports: &[SolveReport]) -> usize {
    reports.iter().map(|r| r.iterations).sum()
}

pub(crate) fn line_searches(reports: &[SolveReport]) -> usize {
    reports.iter().map(|r| r.line_search_iters_total).sum()
}

pub(crate) fn fmt_err(e: Option<f64>) -> String {
    e.map_or_else(|| "-".to_string(), |v| format!("{v:.2}%"))
}
