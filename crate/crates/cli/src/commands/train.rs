use lapsvm::data::write_manifest;
use lapsvm::models::save_model;

use super::{fmt_err, iterations, line_searches, out_dir, solver_name, Outcome};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::experiment::{evaluate, fit_split, load_data, splits, ROLES};
use crate::table::{num, opt, Table};

/// Trains on the configured split. Writes `model.txt`, `split.txt`,
/// `report.csv` and `report.timing.csv`.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let ds = load_data(cfg)?;
    let all = splits(cfg, &ds)?;
    let split = &all[cfg.split_index];
    let fitted = fit_split(cfg, &ds, split, cfg.method, &cfg.solver)?;
    let model = &fitted.model;
    let errors = evaluate(model, &ds, split, cfg.macro_error)?;

    let dir = out_dir(cfg)?;
    let mut out = Outcome::default();
    save_model(out.file(dir.join("model.txt")), model)?;
    write_manifest(out.file(dir.join("split.txt")), std::slice::from_ref(split))?;

    let mut report = Table::new(&["key", "value"]);
    let mut kv = |k: &str, v: String| report.push(vec![k.to_string(), v]);
    kv("method", cfg.method.name().into());
    kv("solver", solver_name(cfg.method, &cfg.solver).into());
    kv("split", cfg.split_index.to_string());
    kv("randomization", split.randomization.to_string());
    kv("fold", split.fold.to_string());
    for (k, role) in ROLES.iter().enumerate() {
        kv(&format!("n_{}", role.tag()), split.indices(*role).len().to_string());
        kv(&format!("err_{}", role.tag()), opt(errors[k]));
    }
    kv("iterations", iterations(&model.reports).to_string());
    kv("line_search_intervals", line_searches(&model.reports).to_string());
    for (cm, r) in model.per_class.iter().zip(&model.reports) {
        kv(&format!("stop_{}", cm.label), r.stop_reason.as_str().into());
        kv(&format!("iterations_{}", cm.label), r.iterations.to_string());
        if let Some(&obj) = r.objective_trace.last() {
            kv(&format!("objective_{}", cm.label), num(obj));
        }
    }
    report.write(out.file(dir.join("report.csv")), &cfg.echo())?;

    let mut timing = Table::new(&["key", "value"]);
    let solve = model.total_solve_seconds();
    timing.push(vec!["operators_seconds".into(), num(fitted.prepare_seconds)]);
    timing.push(vec!["solve_seconds".into(), num(solve)]);
    timing.push(vec!["total_seconds".into(), num(fitted.total_seconds)]);
    timing.write(out.file(dir.join("report.timing.csv")), &cfg.echo())?;

    out.say(format!(
        "{} ({}) split {}: err L {} U {} V {} T {}, {} iterations",
        cfg.method.name(),
        solver_name(cfg.method, &cfg.solver),
        cfg.split_index,
        fmt_err(errors[0]),
        fmt_err(errors[1]),
        fmt_err(errors[2]),
        fmt_err(errors[3]),
        iterations(&model.reports),
    ));
    out.say(format!(
        "solve {solve:.4}s, with kernel and graph construction {:.4}s",
        fitted.total_seconds
    ));
    Ok(out)
}
