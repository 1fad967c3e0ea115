//! Experiment configuration.
//!
//! Settings come in layers: built-in defaults, an optional named preset, an
//! optional TOML file, and command-line flags, each overriding the one
//! before. Every key of the file has a flag of the same name. The merged
//! settings are written back as TOML into every output.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use lapsvm::{
    DataFormat, DistanceExponent, EdgeWeight, GraphSpec, KernelSpec, ModelSpec, NewtonConfig,
    PcgConfig, Preconditioner, Solver, SplitPlan, StopKind, StopRule,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

macro_rules! section {
    ($(#[$meta:meta])* $name:ident { $( $(#[$fmeta:meta])* $field:ident: $ty:ty, )* }) => {
        #[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
        #[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
        $(#[$meta])*
        pub struct $name {
            $(
                $(#[$fmeta])*
                #[serde(skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )*
        }

        impl $name {
            fn merge(&mut self, over: &$name) {
                $(
                    if over.$field.is_some() {
                        self.$field = over.$field.clone();
                    }
                )*
            }
        }
    };
}

section! {
    #[command(next_help_heading = "Data")]
    DataSettings {
        /// Dataset file (CSV with the label last, or LibSVM).
        #[arg(long)]
        dataset: PathBuf,
        /// Separate test file; its points form the test set of every split.
        #[arg(long)]
        test_dataset: PathBuf,
        /// csv or libsvm; inferred from the file extension when unset.
        #[arg(long)]
        format: String,
        /// Synthetic data instead of a file: g50c or two-moons.
        #[arg(long)]
        generator: String,
        /// Number of generated points.
        #[arg(long)]
        points: usize,
        /// Gaussian noise of the two-moons generator.
        #[arg(long)]
        noise: f64,
    }
}

section! {
    #[command(next_help_heading = "Kernel")]
    KernelSettings {
        /// gaussian, polynomial or linear.
        #[arg(long)]
        kernel: String,
        /// Gaussian width.
        #[arg(long)]
        sigma: f64,
        /// Gaussian exponent: 2 for squared distances, 1 for plain distances.
        #[arg(long)]
        distance_exponent: u8,
        /// Polynomial degree.
        #[arg(long)]
        degree: u32,
        /// Polynomial offset.
        #[arg(long)]
        offset: f64,
    }
}

section! {
    #[command(next_help_heading = "Graph")]
    GraphSettings {
        /// Neighbours per point in the kNN graph.
        #[arg(long)]
        nn: usize,
        /// Power p of the Laplacian in the smoothness penalty.
        #[arg(long)]
        laplacian_power: u32,
        /// Use the normalized Laplacian.
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        normalize_laplacian: bool,
        /// binary or heat.
        #[arg(long)]
        edge_weight: String,
        /// Width t of heat weights exp(-d²/t).
        #[arg(long)]
        heat_width: f64,
    }
}

section! {
    #[command(next_help_heading = "Model")]
    ModelSettings {
        /// lapsvm, laprlsc, svm (γ_I = 0 on the labeled points) or rlsc.
        #[arg(long)]
        method: String,
        /// Ambient (RKHS) regularization γ_A.
        #[arg(long)]
        gamma_a: f64,
        /// Intrinsic (graph) regularization γ_I.
        #[arg(long)]
        gamma_i: f64,
        /// Added to the Gram diagonal.
        #[arg(long)]
        ridge: f64,
        /// Values tried for both γ_A and γ_I by crossval.
        #[arg(long, value_delimiter = ',')]
        grid: Vec<f64>,
        /// Also try 1e-8 in crossval.
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        extended_grid: bool,
        /// One binary classifier per class even for two classes.
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        one_vs_all: bool,
    }
}

section! {
    #[command(next_help_heading = "Solver")]
    SolverSettings {
        /// newton or pcg.
        #[arg(long)]
        solver: String,
        /// PCG goal condition: stability, validation, mixed, gradnorm,
        /// pgradnorm, mixedproduct, objdelta or never.
        #[arg(long)]
        stop: String,
        /// Threshold of the stop rule: percent of flipped decisions
        /// (stability, mixed), percentage points (validation) or relative
        /// tolerance (norm rules).
        #[arg(long)]
        eta: f64,
        /// Validation-error threshold of the mixed rule; one validation
        /// example when unset.
        #[arg(long)]
        eta_validation: f64,
        /// Iterations between checks; ⌈√n/2⌉ when unset.
        #[arg(long)]
        theta: usize,
        /// PCG iterations (default n) or Newton steps (default 50).
        #[arg(long)]
        max_iters: usize,
        /// kernel or identity.
        #[arg(long)]
        preconditioner: String,
        /// Newton step length.
        #[arg(long)]
        step_size: f64,
        /// Armijo backtracking instead of a fixed Newton step.
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        backtracking: bool,
    }
}

section! {
    #[command(next_help_heading = "Splits")]
    SplitSettings {
        /// Labeled points per split.
        #[arg(long)]
        labeled: usize,
        /// Validation points per split.
        #[arg(long)]
        validation: usize,
        /// Cross-validation folds; 1 takes the test set from --test-dataset
        /// or leaves it empty.
        #[arg(long)]
        folds: usize,
        #[arg(long)]
        randomizations: usize,
        /// Index of the split used by train and trace.
        #[arg(long)]
        split: usize,
    }
}

section! {
    #[command(next_help_heading = "Run")]
    RunSettings {
        /// Named parameter bundle applied below the config file.
        #[arg(long)]
        preset: String,
        /// Seeds data generation and split drawing.
        #[arg(long)]
        seed: u64,
        /// Worker threads; all cores when unset.
        #[arg(long)]
        jobs: usize,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Variants compared by benchmark, e.g. newton,pcg,pcg-mixed,laprlsc.
        #[arg(long, value_delimiter = ',')]
        benchmark: Vec<String>,
        /// Timing repeats per split in benchmark; the median is reported.
        #[arg(long)]
        repeats: usize,
        /// Class-balanced error rate for two-class problems.
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        macro_error: bool,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    #[command(flatten)]
    pub data: DataSettings,
    #[command(flatten)]
    pub kernel: KernelSettings,
    #[command(flatten)]
    pub graph: GraphSettings,
    #[command(flatten)]
    pub model: ModelSettings,
    #[command(flatten)]
    pub solver: SolverSettings,
    #[command(flatten)]
    pub split: SplitSettings,
    #[command(flatten)]
    pub run: RunSettings,
}

pub const DEFAULT_GRID: [f64; 7] = [1e-6, 1e-4, 1e-2, 1e-1, 1.0, 10.0, 100.0];

pub const PRESETS: [&str; 4] = ["g50c-newton", "g50c-laprlsc", "g50c-svm", "two-moons-pcg"];

/// Relative tolerance of the norm-based stop rules when `eta` is unset.
pub const DEFAULT_NORM_TOLERANCE: f64 = 1e-3;

impl Settings {
    pub fn merge(&mut self, over: &Settings) {
        // a data source replaces the other kind from lower layers
        if over.data.dataset.is_some() {
            self.data.generator = None;
        }
        if over.data.generator.is_some() {
            self.data.dataset = None;
        }
        self.data.merge(&over.data);
        self.kernel.merge(&over.kernel);
        self.graph.merge(&over.graph);
        self.model.merge(&over.model);
        self.solver.merge(&over.solver);
        self.split.merge(&over.split);
        self.run.merge(&over.run);
    }

    pub fn defaults() -> Settings {
        Settings {
            data: DataSettings {
                points: Some(550),
                noise: Some(0.05),
                ..Default::default()
            },
            kernel: KernelSettings {
                kernel: Some("gaussian".into()),
                sigma: Some(1.0),
                distance_exponent: Some(2),
                degree: Some(2),
                offset: Some(1.0),
            },
            graph: GraphSettings {
                nn: Some(6),
                laplacian_power: Some(1),
                normalize_laplacian: Some(false),
                edge_weight: Some("binary".into()),
                heat_width: Some(1.0),
            },
            model: ModelSettings {
                method: Some("lapsvm".into()),
                gamma_a: Some(1e-1),
                gamma_i: Some(1.0),
                ridge: Some(0.0),
                grid: Some(DEFAULT_GRID.to_vec()),
                extended_grid: Some(false),
                one_vs_all: Some(false),
            },
            solver: SolverSettings {
                solver: Some("newton".into()),
                stop: Some("stability".into()),
                preconditioner: Some("kernel".into()),
                step_size: Some(1.0),
                backtracking: Some(false),
                ..Default::default()
            },
            split: SplitSettings {
                validation: Some(0),
                folds: Some(4),
                randomizations: Some(3),
                split: Some(0),
                ..Default::default()
            },
            run: RunSettings {
                seed: Some(0),
                out: Some(PathBuf::from(".")),
                benchmark: Some(vec!["newton".into(), "pcg".into()]),
                repeats: Some(1),
                macro_error: Some(false),
                ..Default::default()
            },
        }
    }

    pub fn preset(name: &str) -> Option<Settings> {
        let g50c = || Settings {
            data: DataSettings {
                generator: Some("g50c".into()),
                points: Some(550),
                ..Default::default()
            },
            kernel: KernelSettings {
                kernel: Some("gaussian".into()),
                sigma: Some(17.5),
                ..Default::default()
            },
            graph: GraphSettings {
                nn: Some(50),
                laplacian_power: Some(5),
                normalize_laplacian: Some(true),
                ..Default::default()
            },
            split: SplitSettings {
                labeled: Some(50),
                validation: Some(50),
                folds: Some(4),
                randomizations: Some(3),
                ..Default::default()
            },
            ..Default::default()
        };
        let mut s = match name {
            "g50c-newton" | "g50c-laprlsc" | "g50c-svm" => g50c(),
            "two-moons-pcg" => Settings {
                data: DataSettings {
                    generator: Some("two-moons".into()),
                    points: Some(200),
                    noise: Some(0.05),
                    ..Default::default()
                },
                kernel: KernelSettings {
                    kernel: Some("gaussian".into()),
                    sigma: Some(0.3),
                    ..Default::default()
                },
                graph: GraphSettings {
                    nn: Some(6),
                    laplacian_power: Some(1),
                    normalize_laplacian: Some(false),
                    ..Default::default()
                },
                model: ModelSettings {
                    method: Some("lapsvm".into()),
                    gamma_a: Some(1e-3),
                    gamma_i: Some(100.0),
                    ..Default::default()
                },
                solver: SolverSettings {
                    solver: Some("pcg".into()),
                    stop: Some("stability".into()),
                    ..Default::default()
                },
                split: SplitSettings {
                    labeled: Some(2),
                    validation: Some(0),
                    folds: Some(1),
                    randomizations: Some(1),
                    ..Default::default()
                },
                ..Default::default()
            },
            _ => return None,
        };
        let (method, gamma_a, gamma_i, solver) = match name {
            "g50c-newton" => ("lapsvm", 1e-1, 10.0, "newton"),
            "g50c-laprlsc" => ("laprlsc", 1e-6, 1e-2, "newton"),
            "g50c-svm" => ("svm", 1e-1, 0.0, "newton"),
            _ => return Some(s),
        };
        s.model.method = Some(method.into());
        s.model.gamma_a = Some(gamma_a);
        s.model.gamma_i = Some(gamma_i);
        s.solver.solver = Some(solver.into());
        Some(s)
    }

    pub fn from_toml(text: &str, path: &Path) -> Result<Settings> {
        toml::from_str(text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn from_file(path: &Path) -> Result<Settings> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Settings::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("settings are plain data")
    }

    /// Defaults, then the preset named by the flags or the file, then the
    /// file, then the flags.
    pub fn layered(config: Option<&Path>, flags: &Settings) -> Result<Settings> {
        let file = config.map(Settings::from_file).transpose()?;
        let preset = flags
            .run
            .preset
            .clone()
            .or_else(|| file.as_ref().and_then(|f| f.run.preset.clone()));
        let mut s = Settings::defaults();
        if let Some(name) = &preset {
            let p = Settings::preset(name).ok_or_else(|| {
                CliError::usage(format!(
                    "unknown preset '{name}'; available: {}",
                    PRESETS.join(", ")
                ))
            })?;
            s.merge(&p);
        }
        if let Some(f) = &file {
            s.merge(f);
        }
        s.merge(flags);
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    LapSvm,
    LapRlsc,
    /// Same objective with `γ_I = 0`, trained on the labeled points only.
    Svm,
    Rlsc,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::LapSvm => "lapsvm",
            Method::LapRlsc => "laprlsc",
            Method::Svm => "svm",
            Method::Rlsc => "rlsc",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        match s {
            "lapsvm" => Ok(Method::LapSvm),
            "laprlsc" => Ok(Method::LapRlsc),
            "svm" => Ok(Method::Svm),
            "rlsc" => Ok(Method::Rlsc),
            other => Err(CliError::usage(format!(
                "unknown method '{other}'; expected lapsvm, laprlsc, svm or rlsc"
            ))),
        }
    }

    pub fn uses_graph(self) -> bool {
        matches!(self, Method::LapSvm | Method::LapRlsc)
    }

    pub fn uses_solver(self) -> bool {
        matches!(self, Method::LapSvm | Method::Svm)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    File { path: PathBuf, format: DataFormat },
    G50c { points: usize },
    TwoMoons { points: usize, noise: f64 },
}

/// A method and solver compared by `benchmark`.
#[derive(Debug, Clone)]
pub struct Variant {
    pub name: String,
    pub method: Method,
    pub solver: Solver,
}

/// Fully resolved settings.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// The merged settings this was resolved from.
    pub settings: Settings,
    pub source: DataSource,
    pub test_source: Option<(PathBuf, DataFormat)>,
    pub method: Method,
    pub spec: ModelSpec,
    pub solver: Solver,
    pub newton: NewtonConfig,
    pub pcg: PcgConfig,
    pub grid: Vec<f64>,
    pub plan: SplitPlan,
    pub split_index: usize,
    pub benchmark: Vec<Variant>,
    pub repeats: usize,
    pub macro_error: bool,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub out: PathBuf,
}

fn need<T: Clone>(v: &Option<T>, key: &str) -> Result<T> {
    v.clone()
        .ok_or_else(|| CliError::usage(format!("missing setting '{key}' (flag --{key})")))
}

fn format_for(path: &Path, explicit: &Option<String>) -> Result<DataFormat> {
    if let Some(f) = explicit {
        return f.parse().map_err(|e: lapsvm::LapsvmError| CliError::usage(e.to_string()));
    }
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    Ok(match ext.to_ascii_lowercase().as_str() {
        "libsvm" | "svm" | "svmlight" => DataFormat::Libsvm,
        _ => DataFormat::Csv,
    })
}

fn existing(path: &Path) -> Result<PathBuf> {
    if path.is_file() {
        Ok(path.to_path_buf())
    } else {
        Err(CliError::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset file not found"),
        ))
    }
}

pub fn stop_rule(name: &str, eta: Option<f64>, eta_validation: Option<f64>) -> Result<StopRule> {
    let tau = eta.unwrap_or(DEFAULT_NORM_TOLERANCE);
    let kind = match name {
        "stability" => StopKind::Stability,
        "validation" => StopKind::Validation,
        "mixed" => StopKind::Mixed,
        "gradnorm" => StopKind::GradNorm(tau),
        "pgradnorm" => StopKind::PGradNorm(tau),
        "mixedproduct" => StopKind::MixedProduct(tau),
        "objdelta" => StopKind::ObjectiveDelta(tau),
        "never" => StopKind::Never,
        other => {
            return Err(CliError::usage(format!(
                "unknown stop rule '{other}'; expected stability, validation, mixed, gradnorm, \
                 pgradnorm, mixedproduct, objdelta or never"
            )))
        }
    };
    let mut rule = StopRule::new(kind);
    match kind {
        StopKind::Stability => {
            if let Some(e) = eta {
                rule.eta_stability = e;
            }
        }
        StopKind::Validation => rule.eta_validation = eta.or(eta_validation),
        StopKind::Mixed => {
            if let Some(e) = eta {
                rule.eta_stability = e;
            }
            rule.eta_validation = eta_validation;
        }
        _ => {}
    }
    rule.validate()?;
    Ok(rule)
}

impl ExperimentConfig {
    pub fn resolve(settings: Settings) -> Result<ExperimentConfig> {
        let s = &settings;
        let source = match (&s.data.dataset, &s.data.generator) {
            (Some(_), Some(_)) => {
                return Err(CliError::usage("set either 'dataset' or 'generator', not both"))
            }
            (Some(path), None) => DataSource::File {
                path: existing(path)?,
                format: format_for(path, &s.data.format)?,
            },
            (None, Some(g)) => {
                let points = need(&s.data.points, "points")?;
                match g.as_str() {
                    "g50c" => DataSource::G50c { points },
                    "two-moons" | "moons" => DataSource::TwoMoons {
                        points,
                        noise: need(&s.data.noise, "noise")?,
                    },
                    other => {
                        return Err(CliError::usage(format!(
                            "unknown generator '{other}'; expected g50c or two-moons"
                        )))
                    }
                }
            }
            (None, None) => {
                return Err(CliError::usage(
                    "no data: set 'dataset' (flag --dataset) or 'generator' (flag --generator)",
                ))
            }
        };
        let test_source = match &s.data.test_dataset {
            Some(p) => Some((existing(p)?, format_for(p, &s.data.format)?)),
            None => None,
        };

        let kernel = match need(&s.kernel.kernel, "kernel")?.as_str() {
            "gaussian" | "rbf" => KernelSpec::Gaussian {
                sigma: need(&s.kernel.sigma, "sigma")?,
                exponent: DistanceExponent::from_int(need(
                    &s.kernel.distance_exponent,
                    "distance-exponent",
                )?)?,
            },
            "polynomial" | "poly" => KernelSpec::Polynomial {
                degree: need(&s.kernel.degree, "degree")?,
                offset: need(&s.kernel.offset, "offset")?,
            },
            "linear" => KernelSpec::Linear,
            other => {
                return Err(CliError::usage(format!(
                    "unknown kernel '{other}'; expected gaussian, polynomial or linear"
                )))
            }
        };
        kernel.validate()?;

        let mut graph = GraphSpec::new(
            need(&s.graph.nn, "nn")?,
            need(&s.graph.laplacian_power, "laplacian-power")?,
            need(&s.graph.normalize_laplacian, "normalize-laplacian")?,
        );
        graph.weight = match need(&s.graph.edge_weight, "edge-weight")?.as_str() {
            "binary" => EdgeWeight::Binary,
            "heat" => EdgeWeight::Heat(need(&s.graph.heat_width, "heat-width")?),
            other => {
                return Err(CliError::usage(format!(
                    "unknown edge weight '{other}'; expected binary or heat"
                )))
            }
        };

        let method = Method::parse(&need(&s.model.method, "method")?)?;
        let gamma_a = need(&s.model.gamma_a, "gamma-a")?;
        let gamma_i = need(&s.model.gamma_i, "gamma-i")?;
        for (name, v) in [("gamma-a", gamma_a), ("gamma-i", gamma_i)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CliError::usage(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        let mut spec = ModelSpec::new(kernel, graph, gamma_a, gamma_i);
        spec.ridge = need(&s.model.ridge, "ridge")?;
        spec.force_one_vs_all = need(&s.model.one_vs_all, "one-vs-all")?;

        let mut grid = need(&s.model.grid, "grid")?;
        if need(&s.model.extended_grid, "extended-grid")? && !grid.contains(&1e-8) {
            grid.insert(0, 1e-8);
        }
        if grid.is_empty() {
            return Err(CliError::usage("the γ grid is empty"));
        }
        if let Some(g) = grid.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(CliError::usage(format!("grid values must be finite and >= 0, got {g}")));
        }

        let eta = s.solver.eta;
        let rule = stop_rule(&need(&s.solver.stop, "stop")?, eta, s.solver.eta_validation)?;
        let preconditioner = match need(&s.solver.preconditioner, "preconditioner")?.as_str() {
            "kernel" => Preconditioner::Kernel,
            "identity" | "none" => Preconditioner::Identity,
            other => {
                return Err(CliError::usage(format!(
                    "unknown preconditioner '{other}'; expected kernel or identity"
                )))
            }
        };
        let pcg = PcgConfig {
            max_iters: s.solver.max_iters,
            check_gap: s.solver.theta,
            stop_rule: rule,
            record_traces: true,
            preconditioner,
            validation: None,
        };
        if pcg.check_gap == Some(0) {
            return Err(CliError::usage("theta must be >= 1"));
        }
        let mut newton = NewtonConfig {
            step_size: need(&s.solver.step_size, "step-size")?,
            backtracking: need(&s.solver.backtracking, "backtracking")?,
            ..NewtonConfig::default()
        };
        if let Some(m) = s.solver.max_iters {
            newton.max_steps = m;
        }
        newton.validate()?;
        let solver = match need(&s.solver.solver, "solver")?.as_str() {
            "newton" => Solver::Newton(newton),
            "pcg" => Solver::Pcg(pcg.clone()),
            other => {
                return Err(CliError::usage(format!(
                    "unknown solver '{other}'; expected newton or pcg"
                )))
            }
        };

        let plan = SplitPlan {
            folds: need(&s.split.folds, "folds")?,
            randomizations: need(&s.split.randomizations, "randomizations")?,
            // checked when splits are drawn; predict and gen-data do not need it
            labeled: s.split.labeled.unwrap_or(0),
            validation: need(&s.split.validation, "validation")?,
            seed: need(&s.run.seed, "seed")?,
        };
        if plan.is_empty() {
            return Err(CliError::usage("folds and randomizations must be >= 1"));
        }
        if test_source.is_some() && plan.folds != 1 {
            return Err(CliError::usage("a separate test dataset needs folds = 1"));
        }
        let split_index = need(&s.split.split, "split")?;
        if split_index >= plan.len() {
            return Err(CliError::usage(format!(
                "split {split_index} does not exist; the plan has {} splits",
                plan.len()
            )));
        }

        let benchmark = need(&s.run.benchmark, "benchmark")?
            .iter()
            .map(|name| variant(name, &newton, &pcg, s))
            .collect::<Result<Vec<_>>>()?;
        let repeats = need(&s.run.repeats, "repeats")?;
        if repeats == 0 {
            return Err(CliError::usage("repeats must be >= 1"));
        }
        if s.run.jobs == Some(0) {
            return Err(CliError::usage("jobs must be >= 1"));
        }

        Ok(ExperimentConfig {
            source,
            test_source,
            method,
            spec,
            solver,
            newton,
            pcg,
            grid,
            plan,
            split_index,
            benchmark,
            repeats,
            macro_error: need(&s.run.macro_error, "macro-error")?,
            seed: plan.seed,
            jobs: s.run.jobs,
            out: need(&s.run.out, "out")?,
            settings,
        })
    }

    /// The effective settings as TOML, echoed into outputs.
    pub fn echo(&self) -> String {
        self.settings.to_toml()
    }
}

fn variant(name: &str, newton: &NewtonConfig, pcg: &PcgConfig, s: &Settings) -> Result<Variant> {
    let (method, solver) = match name {
        "newton" => (Method::LapSvm, Solver::Newton(*newton)),
        "pcg" => (Method::LapSvm, Solver::Pcg(pcg.clone())),
        "laprlsc" => (Method::LapRlsc, Solver::Newton(*newton)),
        "svm" => (Method::Svm, Solver::Newton(*newton)),
        "rlsc" => (Method::Rlsc, Solver::Newton(*newton)),
        other => match other.strip_prefix("pcg-") {
            Some(stop) => {
                let same = s.solver.stop.as_deref() == Some(stop);
                let rule = if same {
                    pcg.stop_rule
                } else {
                    stop_rule(stop, None, None)?
                };
                (
                    Method::LapSvm,
                    Solver::Pcg(PcgConfig {
                        stop_rule: rule,
                        ..pcg.clone()
                    }),
                )
            }
            None => {
                return Err(CliError::usage(format!(
                    "unknown benchmark variant '{other}'; expected newton, pcg, pcg-<stop>, \
                     laprlsc, svm or rlsc"
                )))
            }
        },
    };
    Ok(Variant {
        name: name.to_string(),
        method,
        solver,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn generated() -> Settings {
        let mut s = Settings::default();
        s.data.generator = Some("two-moons".into());
        s.split.labeled = Some(2);
        s
    }

    #[test]
    fn layers_override_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "[run]\npreset = \"g50c-newton\"\n[kernel]\nsigma = 3.0\n[graph]\nnn = 7\n").unwrap();
        let mut flags = Settings::default();
        flags.graph.nn = Some(9);
        let s = Settings::layered(Some(&path), &flags).unwrap();
        assert_eq!(s.graph.nn, Some(9));
        assert_eq!(s.kernel.sigma, Some(3.0));
        assert_eq!(s.graph.laplacian_power, Some(5));
        assert_eq!(s.model.gamma_i, Some(10.0));
        assert_eq!(s.solver.solver.as_deref(), Some("newton"));
    }

    #[test]
    fn echo_reads_back_to_the_same_settings() {
        let s = Settings::layered(None, &Settings::preset("two-moons-pcg").unwrap()).unwrap();
        let again = Settings::from_toml(&s.to_toml(), Path::new("echo")).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn every_preset_resolves() {
        for name in PRESETS {
            let mut flags = Settings::default();
            flags.run.preset = Some(name.into());
            let cfg = ExperimentConfig::resolve(Settings::layered(None, &flags).unwrap()).unwrap();
            assert!(matches!(
                cfg.source,
                DataSource::G50c { .. } | DataSource::TwoMoons { .. }
            ));
        }
        let mut flags = Settings::default();
        flags.run.preset = Some("g50c-newton".into());
        let cfg = ExperimentConfig::resolve(Settings::layered(None, &flags).unwrap()).unwrap();
        assert_eq!(cfg.spec.gamma_a, 0.1);
        assert_eq!(cfg.spec.gamma_i, 10.0);
        assert_eq!(cfg.spec.graph, GraphSpec::new(50, 5, true));
        assert_eq!(cfg.spec.kernel, KernelSpec::gaussian(17.5));
        assert_eq!(cfg.plan, SplitPlan::new(50, 50, 0));
    }

    #[test]
    fn unknown_keys_and_values_are_usage_errors() {
        let err = Settings::from_toml("[graph]\nneighbours = 3\n", Path::new("c.toml")).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("neighbours"));

        let mut s = Settings::layered(None, &generated()).unwrap();
        s.solver.stop = Some("sometimes".into());
        assert_eq!(ExperimentConfig::resolve(s).unwrap_err().exit_code(), 1);

        let mut flags = generated();
        flags.run.preset = Some("nope".into());
        assert!(Settings::layered(None, &flags).is_err());
    }

    #[test]
    fn missing_dataset_names_the_path() {
        let mut flags = Settings::default();
        flags.data.dataset = Some("/definitely/not/here.csv".into());
        flags.split.labeled = Some(2);
        let err = ExperimentConfig::resolve(Settings::layered(None, &flags).unwrap()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("/definitely/not/here.csv"));
    }

    #[test]
    fn grid_extension_and_emptiness() {
        let mut s = Settings::layered(None, &generated()).unwrap();
        s.model.extended_grid = Some(true);
        let cfg = ExperimentConfig::resolve(s.clone()).unwrap();
        assert_eq!(cfg.grid.len(), 8);
        assert_eq!(cfg.grid[0], 1e-8);
        s.model.grid = Some(vec![]);
        s.model.extended_grid = Some(false);
        assert!(ExperimentConfig::resolve(s).is_err());
    }

    #[test]
    fn stop_rule_thresholds() {
        let r = stop_rule("stability", Some(2.0), None).unwrap();
        assert_eq!(r.eta_stability, 2.0);
        let r = stop_rule("validation", None, None).unwrap();
        assert_eq!(r.eta_validation, None);
        let r = stop_rule("mixed", Some(1.0), Some(4.0)).unwrap();
        assert_eq!((r.eta_stability, r.eta_validation), (1.0, Some(4.0)));
        assert_eq!(stop_rule("gradnorm", None, None).unwrap().kind, StopKind::GradNorm(1e-3));
        assert_eq!(stop_rule("objdelta", Some(1e-6), None).unwrap().kind, StopKind::ObjectiveDelta(1e-6));
        assert!(stop_rule("gradnorm", Some(-1.0), None).is_err());
    }

    #[test]
    fn benchmark_variants() {
        let mut s = Settings::layered(None, &generated()).unwrap();
        s.run.benchmark = Some(vec!["newton".into(), "pcg-validation".into(), "laprlsc".into()]);
        let cfg = ExperimentConfig::resolve(s.clone()).unwrap();
        assert_eq!(cfg.benchmark.len(), 3);
        match &cfg.benchmark[1].solver {
            Solver::Pcg(c) => assert_eq!(c.stop_rule.kind, StopKind::Validation),
            _ => panic!("expected pcg"),
        }
        assert_eq!(cfg.benchmark[2].method, Method::LapRlsc);
        s.run.benchmark = Some(vec!["simplex".into()]);
        assert!(ExperimentConfig::resolve(s).is_err());
    }
}
