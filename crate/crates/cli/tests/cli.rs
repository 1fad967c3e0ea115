use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use lapsvm::data::{load_dataset, read_manifest};
use lapsvm::DataFormat;
use lapsvm_cli::commands::benchmark::{measure, same_decisions};
use lapsvm_cli::table::Table;
use lapsvm_cli::{ExperimentConfig, Settings};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lapsvm"))
}

fn run_ok(args: &[&str]) -> String {
    let out = bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "lapsvm {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Every CSV in `dir` except timing files, by name.
fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files
        .into_iter()
        .filter(|p| !p.to_str().unwrap().ends_with(".timing.csv"))
        .map(|p| (p.file_name().unwrap().to_str().unwrap().to_string(), fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn two_moons_demo_labels_every_unlabeled_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    run_ok(&["train", "--preset", "two-moons-pcg", "--out", path_str(&out)]);
    let report = Table::read(&out.join("report.csv")).unwrap();
    assert_eq!(report.lookup("err_U"), Some("0"));
    assert_eq!(report.lookup("n_U"), Some("198"));
    assert_eq!(report.lookup("n_L"), Some("2"));
    let timing = Table::read(&out.join("report.timing.csv")).unwrap();
    let solve: f64 = timing.lookup("solve_seconds").unwrap().parse().unwrap();
    let total: f64 = timing.lookup("total_seconds").unwrap().parse().unwrap();
    assert!(solve <= total);
    assert_eq!(read_manifest(&out.join("split.txt")).unwrap().len(), 1);
}

#[test]
fn every_command_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("run");
    let runs = || {
        let o = |name: &str| path_str(&base.join(name)).to_string();
        let common = ["--preset", "g50c-newton", "--points", "120", "--labeled", "10", "--validation", "10"];
        let with = |cmd: &str, extra: &[&str], out: String| {
            let mut a = vec![cmd];
            a.extend(common);
            a.extend(extra);
            a.extend(["--out", out.as_str()]);
            run_ok(&a);
        };
        with("train", &[], o("train"));
        with("crossval", &["--grid", "0.01,1"], o("crossval"));
        with("benchmark", &["--benchmark", "newton,pcg,laprlsc"], o("benchmark"));
        with("trace", &["--solver", "pcg", "--stop", "mixed"], o("trace"));
        with("gen-data", &[], o("gen"));
        run_ok(&[
            "predict",
            "--model",
            &o("train/model.txt"),
            "--dataset",
            &o("gen/g50c.csv"),
            "--out",
            &o("predict"),
        ]);
        ["train", "crossval", "benchmark", "trace", "gen", "predict"].map(|sub| outputs(&base.join(sub)))
    };
    let first = runs();
    let second = runs();
    for (sub, (x, y)) in ["train", "crossval", "benchmark", "trace", "gen", "predict"]
        .iter()
        .zip(first.iter().zip(&second))
    {
        assert!(!x.is_empty());
        assert_eq!(x.len(), y.len());
        for ((nx, cx), (ny, cy)) in x.iter().zip(y.iter()) {
            assert_eq!(nx, ny);
            assert!(cx == cy, "{sub}/{nx} differs between runs");
        }
    }
}

#[test]
fn emitted_csvs_load_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let o = path_str(out);
    run_ok(&["benchmark", "--preset", "two-moons-pcg", "--benchmark", "newton,pcg", "--out", o]);
    run_ok(&["trace", "--preset", "two-moons-pcg", "--out", o]);
    run_ok(&["gen-data", "--generator", "two-moons", "--points", "50", "--out", o]);
    for name in ["benchmark.csv", "benchmark-splits.csv", "benchmark.timing.csv", "trace.csv", "trace-summary.csv"] {
        let path = out.join(name);
        let t = Table::read(&path).unwrap();
        assert!(!t.is_empty(), "{name}");
        assert!(t.rows.iter().all(|r| r.len() == t.columns.len()), "{name}");
        // rewriting what was read reproduces the file
        let copy = out.join(format!("copy-{name}"));
        let text = fs::read_to_string(&path).unwrap();
        let preamble: String = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .map(|l| format!("{}\n", &l[2..]))
            .collect();
        t.write(&copy, &preamble).unwrap();
        assert_eq!(fs::read_to_string(&copy).unwrap(), text, "{name}");
    }
    let ds = load_dataset(&out.join("two-moons.csv"), DataFormat::Csv).unwrap();
    assert_eq!(ds.len(), 50);
    assert_eq!(ds, lapsvm::data::generate_two_moons(50, 0.05, 0).unwrap());
}

#[test]
fn outputs_echo_the_effective_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(
        &cfg,
        "[run]\npreset = \"two-moons-pcg\"\nseed = 4\n[graph]\nnn = 8\n[solver]\nstop = \"never\"\n",
    )
    .unwrap();
    let out = dir.path().join("o");
    run_ok(&["trace", "--config", path_str(&cfg), "--nn", "7", "--max-iters", "5", "--out", path_str(&out)]);
    let text = fs::read_to_string(out.join("trace.csv")).unwrap();
    let echoed: String = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(|l| format!("{}\n", &l[2..]))
        .collect();
    let s = Settings::from_toml(&echoed, Path::new("echo")).unwrap();
    assert_eq!(s.graph.nn, Some(7));
    assert_eq!(s.run.seed, Some(4));
    assert_eq!(s.solver.stop.as_deref(), Some("never"));
    assert_eq!(s.kernel.sigma, Some(0.3));
    let t = Table::read(&out.join("trace.csv")).unwrap();
    assert_eq!(t.len(), 6);
}

#[test]
fn trace_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    run_ok(&["trace", "--preset", "two-moons-pcg", "--out", path_str(out)]);
    let t = Table::read(&out.join("trace.csv")).unwrap();
    for c in ["obj_rel", "grad_norm_rel", "pgrad_norm_rel", "mixed_product_rel"] {
        assert_eq!(t.number(0, c), Some(1.0), "{c}");
    }
    let obj: Vec<f64> = t.numbers("obj_rel").into_iter().map(Option::unwrap).collect();
    assert!(obj.windows(2).all(|w| w[1] <= w[0]));
    let reached = (0..t.len())
        .filter(|&r| t.number(r, "t").unwrap() <= 10.0)
        .any(|r| t.number(r, "err_U") == Some(0.0));
    assert!(reached, "unlabeled error did not reach 0 within 10 iterations");
    let checks: Vec<usize> = (0..t.len()).filter(|&r| t.cell(r, "check") == Some("1")).collect();
    assert!(checks.iter().all(|&r| t.number(r, "err_L").is_some()));
}

#[test]
fn trivial_dataset_all_solvers_agree() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("tiny.csv");
    fs::write(
        &data,
        "0,0,-1\n0.2,0.1,-1\n0.1,0.3,-1\n0.3,0.2,-1\n0.2,0.4,-1\n\
         3,3,1\n3.2,3.1,1\n3.1,3.3,1\n2.9,3.2,1\n3.3,2.9,1\n",
    )
    .unwrap();
    let mut s = Settings::default();
    s.data.dataset = Some(data.clone());
    s.split.labeled = Some(4);
    s.split.folds = Some(1);
    s.split.randomizations = Some(1);
    s.graph.nn = Some(3);
    s.solver.stop = Some("gradnorm".into());
    s.solver.eta = Some(1e-12);
    s.run.benchmark = Some(vec!["newton".into(), "pcg".into(), "pcg-never".into()]);
    s.run.out = Some(dir.path().join("b"));
    let cfg = ExperimentConfig::resolve(Settings::layered(None, &s).unwrap()).unwrap();
    let (splits, runs) = measure(&cfg).unwrap();
    assert_eq!(splits.len(), 1);
    assert!(same_decisions(&runs[0], &runs[1]));
    assert!(same_decisions(&runs[0], &runs[2]));

    run_ok(&[
        "benchmark", "--dataset", path_str(&data), "--labeled", "4", "--folds", "1",
        "--randomizations", "1", "--nn", "3", "--stop", "gradnorm", "--eta", "1e-12",
        "--benchmark", "newton,pcg,pcg-never", "--out", path_str(&dir.path().join("b")),
    ]);
    let t = Table::read(&dir.path().join("b/benchmark.csv")).unwrap();
    assert_eq!(t.len(), 3);
    let u = t.numbers("mean_err_U");
    assert!(u.iter().all(|&e| e == u[0]));
}

#[test]
fn crossval_picks_the_only_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    run_ok(&[
        "crossval", "--generator", "g50c", "--points", "100", "--labeled", "10", "--validation", "10",
        "--sigma", "17.5", "--nn", "5", "--grid", "0.1", "--out", path_str(out),
    ]);
    let best = Table::read(&out.join("crossval-best.csv")).unwrap();
    assert_eq!(best.lookup("gamma_a"), Some("0.1"));
    assert_eq!(best.lookup("gamma_i"), Some("0.1"));
    let grid = Table::read(&out.join("crossval.csv")).unwrap();
    assert_eq!(grid.len(), 1);
    assert_eq!(read_manifest(&out.join("splits.txt")).unwrap().len(), 12);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.csv");
    let out = bin()
        .args(["train", "--dataset", path_str(&missing), "--labeled", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(path_str(&missing)));

    let out = bin().args(["train", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let out = bin().args(["train", "--preset", "two-moons-pcg", "--stop", "eventually"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "1,2,1\n3,oops,-1\n").unwrap();
    let out = bin()
        .args(["train", "--dataset", path_str(&bad), "--labeled", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":2:"));

    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn separate_test_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = path_str(dir.path());
    run_ok(&["gen-data", "--generator", "two-moons", "--points", "120", "--seed", "1", "--out", o]);
    let train = dir.path().join("train.csv");
    fs::rename(dir.path().join("two-moons.csv"), &train).unwrap();
    run_ok(&["gen-data", "--generator", "two-moons", "--points", "40", "--seed", "2", "--out", o]);
    let out = dir.path().join("r");
    run_ok(&[
        "train", "--preset", "two-moons-pcg", "--dataset", path_str(&train),
        "--test-dataset", path_str(&dir.path().join("two-moons.csv")), "--out", path_str(&out),
    ]);
    let report = Table::read(&out.join("report.csv")).unwrap();
    assert_eq!(report.lookup("n_T"), Some("40"));
    assert_eq!(report.lookup("n_U"), Some("118"));
}
