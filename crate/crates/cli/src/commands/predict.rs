use std::path::Path;

use lapsvm::models::{error_rate, load_model, predict};

use super::{out_dir, Outcome};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::experiment::load_data;
use crate::table::{num, Table};

/// Applies a saved model to every point of the dataset and writes
/// `predictions.csv`: the true label, the predicted label and one score per
/// classifier.
pub fn run(cfg: &ExperimentConfig, model_path: &Path) -> Result<Outcome> {
    let model = load_model(model_path)?;
    let ds = load_data(cfg)?;
    let pred = predict(&model, &ds.points)?;

    let mut columns = vec!["index".to_string(), "label".into(), "predicted".into()];
    columns.extend(model.per_class.iter().map(|c| format!("score_{}", c.label)));
    let mut t = Table {
        columns,
        rows: Vec::new(),
    };
    for i in 0..ds.len() {
        let mut row = vec![i.to_string(), ds.labels[i].to_string(), pred.decisions[i].to_string()];
        row.extend(pred.scores.row(i).iter().map(|&s| num(s)));
        t.push(row);
    }
    let dir = out_dir(cfg)?;
    let mut out = Outcome::default();
    t.write(out.file(dir.join("predictions.csv")), &cfg.echo())?;

    let err = error_rate(&pred.decisions, &ds.labels, cfg.macro_error)?;
    out.say(format!("{} points, error {err:.2}%", ds.len()));
    Ok(out)
}
