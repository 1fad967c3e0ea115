//! Kernel functions and Gram matrices.
//!
//! Points are plain `&[f64]` slices; a point set is a slice of `Vec<f64>`
//! rows. The training Gram matrix is stored dense.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{LapsvmError, Result};

/// Whether the Gaussian exponent uses the Euclidean distance or its square.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceExponent {
    /// `exp(-‖x−y‖ / 2σ²)`
    Unsquared,
    /// `exp(-‖x−y‖² / 2σ²)`, the usual RBF kernel.
    Squared,
}

impl DistanceExponent {
    pub fn as_int(self) -> u8 {
        match self {
            DistanceExponent::Unsquared => 1,
            DistanceExponent::Squared => 2,
        }
    }

    pub fn from_int(e: u8) -> Result<Self> {
        match e {
            1 => Ok(DistanceExponent::Unsquared),
            2 => Ok(DistanceExponent::Squared),
            other => Err(LapsvmError::invalid(format!(
                "distance exponent must be 1 or 2, got {other}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Gaussian {
        sigma: f64,
        exponent: DistanceExponent,
    },
    /// `(x·y + offset)^degree`
    Polynomial { degree: u32, offset: f64 },
    Linear,
}

impl KernelSpec {
    /// Squared-distance Gaussian kernel with bandwidth `sigma`.
    pub fn gaussian(sigma: f64) -> Self {
        KernelSpec::Gaussian {
            sigma,
            exponent: DistanceExponent::Squared,
        }
    }

    /// Inhomogeneous polynomial kernel with unit offset.
    pub fn polynomial(degree: u32) -> Self {
        KernelSpec::Polynomial {
            degree,
            offset: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Gaussian { sigma, .. } => {
                if !(sigma.is_finite() && sigma > 0.0) {
                    return Err(LapsvmError::invalid(format!(
                        "gaussian sigma must be positive, got {sigma}"
                    )));
                }
            }
            KernelSpec::Polynomial { degree, offset } => {
                if degree < 1 {
                    return Err(LapsvmError::invalid("polynomial degree must be >= 1"));
                }
                if !(offset.is_finite() && offset >= 0.0) {
                    return Err(LapsvmError::invalid(format!(
                        "polynomial offset must be >= 0, got {offset}"
                    )));
                }
            }
            KernelSpec::Linear => {}
        }
        Ok(())
    }

    // Unchecked evaluation for inner loops whose inputs were validated upstream.
    #[inline]
    fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::Gaussian { sigma, exponent } => {
                let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                let d = match exponent {
                    DistanceExponent::Squared => sq,
                    DistanceExponent::Unsquared => sq.sqrt(),
                };
                (-d / (2.0 * sigma * sigma)).exp()
            }
            KernelSpec::Polynomial { degree, offset } => {
                (dot(x, y) + offset).powi(degree as i32)
            }
            KernelSpec::Linear => dot(x, y),
        }
    }
}

#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn check_point(p: &[f64], dim: usize) -> Result<()> {
    if p.len() != dim {
        return Err(LapsvmError::DimensionMismatch {
            expected: dim,
            found: p.len(),
        });
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(LapsvmError::NonFinite("point coordinates"));
    }
    Ok(())
}

fn check_points(points: &[Vec<f64>], dim: usize) -> Result<()> {
    points.iter().try_for_each(|p| check_point(p, dim))
}

pub fn eval_kernel(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    check_point(x, x.len())?;
    check_point(y, x.len())?;
    Ok(spec.eval_unchecked(x, y))
}

/// Dense symmetric kernel matrix over the training points.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    pub values: DMatrix<f64>,
    pub ridge: f64,
}

impl GramMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Ridge used when the plain matrix turns out to be singular:
    /// `1e-6 · mean(diag)`.
    pub fn fallback_ridge(&self) -> f64 {
        let n = self.n().max(1) as f64;
        let mean_diag = (self.values.trace() - self.ridge * self.n() as f64) / n;
        1e-6 * mean_diag.abs().max(f64::MIN_POSITIVE)
    }

    /// Returns a copy with `extra` added to the diagonal.
    pub fn with_added_ridge(&self, extra: f64) -> GramMatrix {
        let mut values = self.values.clone();
        for i in 0..values.nrows() {
            values[(i, i)] += extra;
        }
        GramMatrix {
            values,
            ridge: self.ridge + extra,
        }
    }
}

pub fn gram(spec: &KernelSpec, points: &[Vec<f64>], ridge: f64) -> Result<GramMatrix> {
    spec.validate()?;
    if points.is_empty() {
        return Err(LapsvmError::Empty("gram requires at least one point"));
    }
    if !(ridge.is_finite() && ridge >= 0.0) {
        return Err(LapsvmError::invalid(format!("ridge must be >= 0, got {ridge}")));
    }
    check_points(points, points[0].len())?;

    let n = points.len();
    // Upper triangle, one row per task.
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i..n)
                .map(|j| spec.eval_unchecked(&points[i], &points[j]))
                .collect()
        })
        .collect();

    let mut values = DMatrix::zeros(n, n);
    for (i, row) in upper.iter().enumerate() {
        for (offset, &v) in row.iter().enumerate() {
            let j = i + offset;
            values[(i, j)] = v;
            values[(j, i)] = v;
        }
        values[(i, i)] += ridge;
    }
    Ok(GramMatrix { values, ridge })
}

/// Kernel evaluations between query points (rows) and training points (columns).
pub fn cross_gram(
    spec: &KernelSpec,
    train: &[Vec<f64>],
    query: &[Vec<f64>],
) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let dim = match (train.first(), query.first()) {
        (Some(t), _) => t.len(),
        (None, Some(q)) => q.len(),
        (None, None) => 0,
    };
    check_points(train, dim)?;
    check_points(query, dim)?;

    let rows: Vec<Vec<f64>> = query
        .par_iter()
        .map(|q| train.iter().map(|t| spec.eval_unchecked(t, q)).collect())
        .collect();
    let mut out = DMatrix::zeros(query.len(), train.len());
    for (r, row) in rows.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            out[(r, c)] = v;
        }
    }
    Ok(out)
}
