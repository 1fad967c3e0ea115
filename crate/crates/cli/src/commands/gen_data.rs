use lapsvm::data::write_dataset;
use lapsvm::DataFormat;

use super::{out_dir, Outcome};
use crate::config::{DataSource, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::experiment::load_data;

/// Writes the configured synthetic dataset to `<out>/<generator>.<format>`.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let name = match cfg.source {
        DataSource::G50c { .. } => "g50c",
        DataSource::TwoMoons { .. } => "two-moons",
        DataSource::File { .. } => {
            return Err(CliError::usage("gen-data needs a generator (flag --generator)"))
        }
    };
    let format = match &cfg.settings.data.format {
        Some(f) => f.parse::<DataFormat>()?,
        None => DataFormat::Csv,
    };
    let ds = load_data(cfg)?;
    let dir = out_dir(cfg)?;
    let mut out = Outcome::default();
    let path = out.file(dir.join(format!("{name}.{}", format.name())));
    write_dataset(path, &ds, format)?;
    out.say(format!("{} points of dimension {}", ds.len(), ds.dim()));
    Ok(out)
}
