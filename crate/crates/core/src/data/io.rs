use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Dataset, Role, Split};
use crate::error::{LapsvmError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    /// Comma-separated features followed by an integer label.
    Csv,
    /// `label idx:val ...` with 1-based indices.
    Libsvm,
}

impl DataFormat {
    pub fn name(self) -> &'static str {
        match self {
            DataFormat::Csv => "csv",
            DataFormat::Libsvm => "libsvm",
        }
    }
}

impl std::str::FromStr for DataFormat {
    type Err = LapsvmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(DataFormat::Csv),
            "libsvm" | "svmlight" => Ok(DataFormat::Libsvm),
            other => Err(LapsvmError::invalid(format!("unknown data format '{other}'"))),
        }
    }
}

pub fn load_dataset(path: &Path, format: DataFormat) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| LapsvmError::io(path, e))?;
    let name = path.display().to_string();
    match format {
        DataFormat::Csv => parse_csv(&text, &name),
        DataFormat::Libsvm => parse_libsvm(&text, &name),
    }
}

pub fn write_dataset(path: &Path, ds: &Dataset, format: DataFormat) -> Result<()> {
    let text = match format {
        DataFormat::Csv => format_csv(ds),
        DataFormat::Libsvm => format_libsvm(ds),
    };
    fs::write(path, text).map_err(|e| LapsvmError::io(path, e))
}

fn parse_error(path: &str, line: usize, message: impl Into<String>) -> LapsvmError {
    LapsvmError::Parse {
        path: path.to_string(),
        line,
        message: message.into(),
    }
}

fn parse_label(tok: &str, path: &str, line: usize) -> Result<i64> {
    let tok = tok.trim();
    if let Ok(v) = tok.parse::<i64>() {
        return Ok(v);
    }
    match tok.parse::<f64>() {
        Ok(v) if v.fract() == 0.0 && v.abs() < 9.0e15 => Ok(v as i64),
        _ => Err(parse_error(path, line, format!("label '{tok}' is not an integer"))),
    }
}

fn parse_value(tok: &str, path: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .trim()
        .parse()
        .map_err(|_| parse_error(path, line, format!("'{}' is not a number", tok.trim())))?;
    if !v.is_finite() {
        return Err(parse_error(path, line, "non-finite feature value"));
    }
    Ok(v)
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_csv(text: &str, path: &str) -> Result<Dataset> {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (no, line) in content_lines(text) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 2 {
            return Err(parse_error(path, no, "need at least one feature and a label"));
        }
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(parse_error(
                    path,
                    no,
                    format!("expected {w} columns, found {}", fields.len()),
                ))
            }
            _ => {}
        }
        let (label, features) = fields.split_last().expect("checked length");
        labels.push(parse_label(label, path, no)?);
        points.push(
            features
                .iter()
                .map(|f| parse_value(f, path, no))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    Dataset::new(points, labels)
}

fn parse_libsvm(text: &str, path: &str) -> Result<Dataset> {
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut dim = 0;
    for (no, line) in content_lines(text) {
        let line = line.split('#').next().unwrap_or("");
        let mut toks = line.split_whitespace();
        let label = toks.next().ok_or_else(|| parse_error(path, no, "missing label"))?;
        labels.push(parse_label(label, path, no)?);
        let mut row = Vec::new();
        let mut last = 0;
        for tok in toks {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_error(path, no, format!("expected idx:val, got '{tok}'")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_error(path, no, format!("bad index '{idx}'")))?;
            if idx == 0 {
                return Err(parse_error(path, no, "indices are 1-based"));
            }
            if idx <= last {
                return Err(parse_error(path, no, "indices must be increasing"));
            }
            last = idx;
            dim = dim.max(idx);
            row.push((idx - 1, parse_value(val, path, no)?));
        }
        rows.push(row);
    }
    let points = rows
        .into_iter()
        .map(|row| {
            let mut x = vec![0.0; dim];
            for (j, v) in row {
                x[j] = v;
            }
            x
        })
        .collect();
    Dataset::new(points, labels)
}

fn format_csv(ds: &Dataset) -> String {
    let mut out = String::new();
    for (x, y) in ds.points.iter().zip(&ds.labels) {
        for v in x {
            write!(out, "{v},").unwrap();
        }
        writeln!(out, "{y}").unwrap();
    }
    out
}

fn format_libsvm(ds: &Dataset) -> String {
    let mut out = String::new();
    for (x, y) in ds.points.iter().zip(&ds.labels) {
        write!(out, "{y}").unwrap();
        for (j, v) in x.iter().enumerate() {
            if *v != 0.0 {
                write!(out, " {}:{v}", j + 1).unwrap();
            }
        }
        out.push('\n');
    }
    out
}

/// One block per split: a header line followed by one line per role listing
/// dataset indices.
pub fn write_manifest(path: &Path, splits: &[Split]) -> Result<()> {
    let mut out = String::new();
    for (k, s) in splits.iter().enumerate() {
        writeln!(
            out,
            "split {k} randomization {} fold {}",
            s.randomization, s.fold
        )
        .unwrap();
        for role in [Role::Labeled, Role::Unlabeled, Role::Validation, Role::Test] {
            out.push_str(role.tag());
            for i in s.indices(role) {
                write!(out, " {i}").unwrap();
            }
            out.push('\n');
        }
    }
    fs::write(path, out).map_err(|e| LapsvmError::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<Split>> {
    let text = fs::read_to_string(path).map_err(|e| LapsvmError::io(path, e))?;
    let name = path.display().to_string();
    let mut splits: Vec<Split> = Vec::new();
    for (no, line) in content_lines(&text) {
        let mut toks = line.split_whitespace();
        let head = toks.next().unwrap_or("");
        if head == "split" {
            let rest: Vec<&str> = toks.collect();
            let (r, f) = match rest.as_slice() {
                [_, "randomization", r, "fold", f] => (r.parse(), f.parse()),
                _ => return Err(parse_error(&name, no, "malformed split header")),
            };
            let (Ok(randomization), Ok(fold)) = (r, f) else {
                return Err(parse_error(&name, no, "malformed split header"));
            };
            splits.push(Split {
                randomization,
                fold,
                ..Split::default()
            });
            continue;
        }
        let role = Role::from_tag(head)
            .ok_or_else(|| parse_error(&name, no, format!("unknown role '{head}'")))?;
        let split = splits
            .last_mut()
            .ok_or_else(|| parse_error(&name, no, "role line before any split header"))?;
        let idx = toks
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| parse_error(&name, no, format!("bad index '{t}'")))
            })
            .collect::<Result<Vec<usize>>>()?;
        *split.indices_mut(role) = idx;
    }
    Ok(splits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_example() {
        let ds = parse_csv("1,2,-1\n3,4,1\n", "x").unwrap();
        assert_eq!(ds.points, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(ds.labels, vec![-1, 1]);
        assert_eq!(ds.classes(), vec![-1, 1]);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        match parse_csv("1,2,1\n\n1,1\n", "f.csv") {
            Err(LapsvmError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match parse_csv("1,x,1\n", "f.csv") {
            Err(LapsvmError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        assert!(parse_csv("1,2,0.5\n", "f").is_err());
    }

    #[test]
    fn libsvm_example() {
        let ds = parse_libsvm("+1 3:0.5\n", "x").unwrap();
        assert_eq!(ds.points, vec![vec![0.0, 0.0, 0.5]]);
        assert_eq!(ds.labels, vec![1]);
        let ds = parse_libsvm("-1 1:2 # comment\n2 2:1\n", "x").unwrap();
        assert_eq!(ds.points, vec![vec![2.0, 0.0], vec![0.0, 1.0]]);
        assert!(parse_libsvm("1 0:1\n", "x").is_err());
        assert!(parse_libsvm("1 2:1 1:1\n", "x").is_err());
        assert!(parse_libsvm("1 a\n", "x").is_err());
    }

    #[test]
    fn round_trips() {
        let ds = crate::data::generate_two_moons(40, 0.13, 5).unwrap();
        let dir = std::env::temp_dir().join(format!("lapsvm-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        for fmt in [DataFormat::Csv, DataFormat::Libsvm] {
            let path = dir.join(format!("moons.{}", fmt.name()));
            write_dataset(&path, &ds, fmt).unwrap();
            assert_eq!(load_dataset(&path, fmt).unwrap(), ds);
        }
        fs::remove_dir_all(&dir).unwrap();
    }
}
