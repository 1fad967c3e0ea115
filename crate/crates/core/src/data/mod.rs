//! Datasets, synthetic generators, file formats and the experimental split
//! protocol.

mod generators;
mod io;
mod splits;

pub use generators::{g50c_mean_offset, generate_g50c, generate_two_moons};
pub use io::{load_dataset, read_manifest, write_dataset, write_manifest, DataFormat};
pub use splits::{make_splits, Split, SplitPlan};

use crate::error::{LapsvmError, Result};

/// Role of a point within one experimental split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Labeled,
    Unlabeled,
    Validation,
    Test,
}

impl Role {
    pub fn tag(self) -> &'static str {
        match self {
            Role::Labeled => "L",
            Role::Unlabeled => "U",
            Role::Validation => "V",
            Role::Test => "T",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Role> {
        match tag {
            "L" => Some(Role::Labeled),
            "U" => Some(Role::Unlabeled),
            "V" => Some(Role::Validation),
            "T" => Some(Role::Test),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<i64>,
    /// Optional fixed roles, e.g. a predefined train/test division.
    pub partition: Option<Vec<Role>>,
}

impl Dataset {
    pub fn new(points: Vec<Vec<f64>>, labels: Vec<i64>) -> Result<Self> {
        let ds = Dataset {
            points,
            labels,
            partition: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.len() != self.labels.len() {
            return Err(LapsvmError::DimensionMismatch {
                expected: self.points.len(),
                found: self.labels.len(),
            });
        }
        if let Some(first) = self.points.first() {
            let m = first.len();
            for p in &self.points {
                if p.len() != m {
                    return Err(LapsvmError::DimensionMismatch {
                        expected: m,
                        found: p.len(),
                    });
                }
                if p.iter().any(|v| !v.is_finite()) {
                    return Err(LapsvmError::NonFinite("dataset features"));
                }
            }
        }
        if let Some(part) = &self.partition {
            if part.len() != self.points.len() {
                return Err(LapsvmError::DimensionMismatch {
                    expected: self.points.len(),
                    found: part.len(),
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, |p| p.len())
    }

    /// Distinct labels in increasing order.
    pub fn classes(&self) -> Vec<i64> {
        let mut c = self.labels.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            partition: self
                .partition
                .as_ref()
                .map(|p| indices.iter().map(|&i| p[i]).collect()),
        }
    }
}
