//! kNN data graph and graph Laplacian.
//!
//! The Laplacian keeps only its degree-one sparse factor and applies the
//! requested power by repeated sparse products, so `L^p v` costs `p`
//! sparse matrix-vector products and nothing is densified unless asked.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use rayon::prelude::*;

use crate::error::{LapsvmError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeWeight {
    Binary,
    /// `exp(-‖x_i − x_j‖² / t)`
    Heat(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphSpec {
    pub nn: usize,
    pub weight: EdgeWeight,
    pub normalize: bool,
    pub power: u32,
}

impl GraphSpec {
    pub fn new(nn: usize, power: u32, normalize: bool) -> Self {
        GraphSpec {
            nn,
            weight: EdgeWeight::Binary,
            normalize,
            power,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.nn == 0 {
            return Err(LapsvmError::invalid("nn must be >= 1"));
        }
        if self.nn >= n {
            return Err(LapsvmError::invalid(format!(
                "nn = {} must be smaller than the number of points ({n})",
                self.nn
            )));
        }
        if self.power < 1 {
            return Err(LapsvmError::invalid("laplacian power must be >= 1"));
        }
        if let EdgeWeight::Heat(t) = self.weight {
            if !(t.is_finite() && t > 0.0) {
                return Err(LapsvmError::invalid(format!(
                    "heat kernel width must be positive, got {t}"
                )));
            }
        }
        Ok(())
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Symmetric kNN adjacency: `i ~ j` when either is among the other's `nn`
/// nearest neighbours. Distance ties go to the lower index.
pub fn knn_adjacency(points: &[Vec<f64>], spec: &GraphSpec) -> Result<CsrMatrix<f64>> {
    let n = points.len();
    if n < 2 {
        return Err(LapsvmError::Empty("graph requires at least two points"));
    }
    spec.validate(n)?;
    let dim = points[0].len();
    for p in points {
        if p.len() != dim {
            return Err(LapsvmError::DimensionMismatch {
                expected: dim,
                found: p.len(),
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(LapsvmError::NonFinite("point coordinates"));
        }
    }

    let neighbours: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (sq_dist(&points[i], &points[j]), j))
                .collect();
            // sort is stable and candidates are in index order
            cand.sort_by(|a, b| a.0.total_cmp(&b.0));
            cand.truncate(spec.nn);
            cand.into_iter().map(|(d, j)| (j, d)).collect()
        })
        .collect();

    let weight = |d2: f64| match spec.weight {
        EdgeWeight::Binary => 1.0,
        EdgeWeight::Heat(t) => (-d2 / t).exp(),
    };

    // Union symmetrization: collect both directions, dedupe per row.
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, nbrs) in neighbours.iter().enumerate() {
        for &(j, d2) in nbrs {
            let w = weight(d2);
            rows[i].push((j, w));
            rows[j].push((i, w));
        }
    }
    let mut coo = CooMatrix::new(n, n);
    for (i, row) in rows.iter_mut().enumerate() {
        row.sort_by_key(|&(j, _)| j);
        row.dedup_by_key(|&mut (j, _)| j);
        for &(j, w) in row.iter() {
            coo.push(i, j, w);
        }
    }
    Ok(CsrMatrix::from(&coo))
}

/// Graph Laplacian `base^power`, with `base = D − W` or its normalized form.
#[derive(Debug)]
pub struct Laplacian {
    base: CsrMatrix<f64>,
    pub spec: GraphSpec,
    applications: AtomicUsize,
}

impl Clone for Laplacian {
    fn clone(&self) -> Self {
        Laplacian {
            base: self.base.clone(),
            spec: self.spec,
            applications: AtomicUsize::new(0),
        }
    }
}

pub fn laplacian(w: &CsrMatrix<f64>, spec: &GraphSpec) -> Result<Laplacian> {
    let n = w.nrows();
    if w.ncols() != n {
        return Err(LapsvmError::DimensionMismatch {
            expected: n,
            found: w.ncols(),
        });
    }
    if spec.power < 1 {
        return Err(LapsvmError::invalid("laplacian power must be >= 1"));
    }
    let degree: Vec<f64> = w.row_iter().map(|r| r.values().iter().sum()).collect();

    let mut coo = CooMatrix::new(n, n);
    if spec.normalize {
        if let Some(i) = degree.iter().position(|&d| d <= 0.0) {
            return Err(LapsvmError::IsolatedNode(i));
        }
        let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
        for (i, row) in w.row_iter().enumerate() {
            coo.push(i, i, 1.0);
            for (&j, &v) in row.col_indices().iter().zip(row.values()) {
                if j != i {
                    coo.push(i, j, -v * inv_sqrt[i] * inv_sqrt[j]);
                }
            }
        }
    } else {
        for (i, row) in w.row_iter().enumerate() {
            if degree[i] != 0.0 {
                coo.push(i, i, degree[i]);
            }
            for (&j, &v) in row.col_indices().iter().zip(row.values()) {
                if j != i {
                    coo.push(i, j, -v);
                }
            }
        }
    }
    Ok(Laplacian {
        base: CsrMatrix::from(&coo),
        spec: *spec,
        applications: AtomicUsize::new(0),
    })
}

/// Builds the kNN graph over `points` and returns its Laplacian.
pub fn build_laplacian(points: &[Vec<f64>], spec: &GraphSpec) -> Result<Laplacian> {
    let w = knn_adjacency(points, spec)?;
    laplacian(&w, spec)
}

/// A materialized `L^p`.
#[derive(Debug, Clone)]
pub enum LaplacianMatrix {
    Sparse(CsrMatrix<f64>),
    Dense(DMatrix<f64>),
}

impl Laplacian {
    /// The all-zero Laplacian on `n` nodes (no graph).
    pub fn zero(n: usize) -> Self {
        Laplacian {
            base: CsrMatrix::zeros(n, n),
            spec: GraphSpec::new(1, 1, false),
            applications: AtomicUsize::new(0),
        }
    }

    pub fn n(&self) -> usize {
        self.base.nrows()
    }

    pub fn power(&self) -> u32 {
        self.spec.power
    }

    /// The degree-one factor.
    pub fn base(&self) -> &CsrMatrix<f64> {
        &self.base
    }

    /// Stored nonzeros of the degree-one factor.
    pub fn nnz(&self) -> usize {
        self.base.nnz()
    }

    /// Number of sparse matrix-vector products performed so far.
    pub fn applications(&self) -> usize {
        self.applications.load(Ordering::Relaxed)
    }

    fn base_mul(&self, v: &[f64], out: &mut [f64]) {
        let offsets = self.base.row_offsets();
        let cols = self.base.col_indices();
        let vals = self.base.values();
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in offsets[i]..offsets[i + 1] {
                acc += vals[k] * v[cols[k]];
            }
            *o = acc;
        }
        self.applications.fetch_add(1, Ordering::Relaxed);
    }

    /// `L^p v`.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        assert_eq!(v.len(), self.n(), "laplacian apply: length mismatch");
        let mut cur = v.clone();
        let mut next = DVector::zeros(self.n());
        for _ in 0..self.spec.power {
            self.base_mul(cur.as_slice(), next.as_mut_slice());
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    /// `L^p M`, one column at a time.
    pub fn apply_matrix(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(m.nrows(), self.n(), "laplacian apply: row mismatch");
        let cols: Vec<DVector<f64>> = (0..m.ncols())
            .into_par_iter()
            .map(|c| self.apply(&m.column(c).into_owned()))
            .collect();
        DMatrix::from_columns(&cols)
    }

    /// `f^T L^p f`.
    pub fn intrinsic_norm(&self, f: &DVector<f64>) -> Result<f64> {
        if f.len() != self.n() {
            return Err(LapsvmError::DimensionMismatch {
                expected: self.n(),
                found: f.len(),
            });
        }
        Ok(f.dot(&self.apply(f)))
    }

    /// Materializes `L^p` by repeated sparse products, switching to dense
    /// storage once the fill fraction exceeds `densify_above`.
    pub fn materialize(&self, densify_above: f64) -> LaplacianMatrix {
        let n = self.n();
        let power = self.spec.power as usize;
        let mut acc = self.base.clone();
        let mut reached = 1;
        while reached < power {
            if n > 0 && acc.nnz() as f64 / (n * n) as f64 > densify_above {
                let base_dense = dense_from_csr(&self.base);
                let mut out = dense_from_csr(&acc);
                for _ in reached..power {
                    out = &base_dense * &out;
                }
                return LaplacianMatrix::Dense(out);
            }
            acc = &acc * &self.base;
            reached += 1;
        }
        LaplacianMatrix::Sparse(acc)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self.materialize(f64::INFINITY) {
            LaplacianMatrix::Sparse(s) => dense_from_csr(&s),
            LaplacianMatrix::Dense(d) => d,
        }
    }
}

fn dense_from_csr(m: &CsrMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for (i, row) in m.row_iter().enumerate() {
        for (&j, &v) in row.col_indices().iter().zip(row.values()) {
            out[(i, j)] += v;
        }
    }
    out
}
