//! The primal LapSVM problem
//!
//! ```text
//! min_{α,b} ½ [ Σ_{i≤l} max(1 − y_i f_i, 0)² + γ_A αᵀKα + γ_I (Kα)ᵀ L (Kα) ],   f = Kα + 1b
//! ```
//!
//! Labeled points occupy the first `l` positions. Every quantity here is
//! computed from matrix-vector products; the only dense `n × n` products
//! (`LK`, `KLK`) are built lazily for the Newton system and the explicit
//! Hessian.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};

use crate::error::{LapsvmError, Result};
use crate::graph::Laplacian;
use crate::kernels::GramMatrix;

/// Gram matrix and Laplacian over the same `n` training points. Shared by
/// every problem built on those points (different labels or γ's).
#[derive(Debug)]
pub struct Operators {
    pub gram: GramMatrix,
    pub laplacian: Laplacian,
    lk: OnceLock<DMatrix<f64>>,
}

impl Operators {
    pub fn new(gram: GramMatrix, laplacian: Laplacian) -> Result<Self> {
        if laplacian.n() != gram.n() {
            return Err(LapsvmError::DimensionMismatch {
                expected: gram.n(),
                found: laplacian.n(),
            });
        }
        Ok(Operators {
            gram,
            laplacian,
            lk: OnceLock::new(),
        })
    }

    /// Operators without a graph term.
    pub fn without_graph(gram: GramMatrix) -> Self {
        let n = gram.n();
        Operators {
            gram,
            laplacian: Laplacian::zero(n),
            lk: OnceLock::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.gram.n()
    }

    pub fn k(&self) -> &DMatrix<f64> {
        &self.gram.values
    }

    /// `L^p K`, computed once on first use.
    pub fn lk(&self) -> &DMatrix<f64> {
        self.lk.get_or_init(|| self.laplacian.apply_matrix(&self.gram.values))
    }

    pub fn with_added_ridge(&self, extra: f64) -> Operators {
        Operators {
            gram: self.gram.with_added_ridge(extra),
            laplacian: self.laplacian.clone(),
            lk: OnceLock::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub ops: Arc<Operators>,
    /// `y ∈ {−1, 0, +1}^n`; the first `l` entries are ±1, the rest 0.
    pub labels: DVector<f64>,
    pub l: usize,
    pub gamma_a: f64,
    pub gamma_i: f64,
}

impl Problem {
    pub fn new(ops: Arc<Operators>, labels: DVector<f64>, gamma_a: f64, gamma_i: f64) -> Result<Self> {
        let n = ops.n();
        if labels.len() != n {
            return Err(LapsvmError::DimensionMismatch {
                expected: n,
                found: labels.len(),
            });
        }
        let l = labels.iter().take_while(|&&y| y != 0.0).count();
        for (i, &y) in labels.iter().enumerate() {
            let ok = if i < l { y == 1.0 || y == -1.0 } else { y == 0.0 };
            if !ok {
                return Err(LapsvmError::invalid(format!(
                    "label {i} = {y}: labeled points must come first with labels ±1, unlabeled points are 0"
                )));
            }
        }
        if !(gamma_a.is_finite() && gamma_a > 0.0) {
            return Err(LapsvmError::invalid(format!("gamma_a must be > 0, got {gamma_a}")));
        }
        if !(gamma_i.is_finite() && gamma_i >= 0.0) {
            return Err(LapsvmError::invalid(format!("gamma_i must be >= 0, got {gamma_i}")));
        }
        Ok(Problem {
            ops,
            labels,
            l,
            gamma_a,
            gamma_i,
        })
    }

    pub fn n(&self) -> usize {
        self.ops.n()
    }

    pub fn k(&self) -> &DMatrix<f64> {
        self.ops.k()
    }

    pub fn uses_graph(&self) -> bool {
        self.gamma_i != 0.0
    }

    /// `L^p v`, or zero when the intrinsic term is switched off.
    pub fn apply_laplacian(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.uses_graph() {
            self.ops.laplacian.apply(v)
        } else {
            DVector::zeros(v.len())
        }
    }

    /// Error vectors for the outputs `f`: labeled points with `y_i f_i < 1`.
    pub fn error_set_of(&self, f: &DVector<f64>) -> Vec<usize> {
        (0..self.l)
            .filter(|&i| self.labels[i] * f[i] < 1.0)
            .collect()
    }
}

/// Coefficients `z = [b, α]` with the cached products `Kα` and `LKα`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalState {
    pub alpha: DVector<f64>,
    pub b: f64,
    pub ka: DVector<f64>,
    pub lka: DVector<f64>,
    pub error_set: Vec<usize>,
}

impl PrimalState {
    /// `α = 0, b = 0`.
    pub fn zeros(p: &Problem) -> Self {
        let n = p.n();
        PrimalState {
            alpha: DVector::zeros(n),
            b: 0.0,
            ka: DVector::zeros(n),
            lka: DVector::zeros(n),
            error_set: (0..p.l).collect(),
        }
    }

    pub fn from_coefficients(p: &Problem, alpha: DVector<f64>, b: f64) -> Result<Self> {
        if alpha.len() != p.n() {
            return Err(LapsvmError::DimensionMismatch {
                expected: p.n(),
                found: alpha.len(),
            });
        }
        let mut s = PrimalState {
            ka: DVector::zeros(p.n()),
            lka: DVector::zeros(p.n()),
            alpha,
            b,
            error_set: Vec::new(),
        };
        s.recompute_products(p);
        Ok(s)
    }

    /// Recomputes `Kα`, `LKα` and the error set from `α` and `b`.
    pub fn recompute_products(&mut self, p: &Problem) {
        self.ka = p.k() * &self.alpha;
        self.lka = p.apply_laplacian(&self.ka);
        refresh_error_set(p, self);
    }

    /// `f = Kα + 1b` on the training points.
    pub fn outputs(&self) -> DVector<f64> {
        self.ka.add_scalar(self.b)
    }

    /// The stacked vector `[b, α]`.
    pub fn z(&self) -> DVector<f64> {
        let mut z = DVector::zeros(self.alpha.len() + 1);
        z[0] = self.b;
        z.rows_mut(1, self.alpha.len()).copy_from(&self.alpha);
        z
    }
}

/// Gradient (or preconditioned gradient) split into its bias and α blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub b: f64,
    pub alpha: DVector<f64>,
}

impl Gradient {
    pub fn dot(&self, other: &Gradient) -> f64 {
        self.b * other.b + self.alpha.dot(&other.alpha)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn stacked(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.alpha.len() + 1);
        v[0] = self.b;
        v.rows_mut(1, self.alpha.len()).copy_from(&self.alpha);
        v
    }
}

/// Recomputes the error set from the cached `Kα` and `b`. Points exactly on
/// the margin are not error vectors.
pub fn refresh_error_set(p: &Problem, s: &mut PrimalState) {
    s.error_set = (0..p.l)
        .filter(|&i| p.labels[i] * (s.ka[i] + s.b) < 1.0)
        .collect();
}

pub fn objective(p: &Problem, s: &PrimalState) -> f64 {
    let mut loss = 0.0;
    for i in 0..p.l {
        let slack = 1.0 - p.labels[i] * (s.ka[i] + s.b);
        if slack > 0.0 {
            loss += slack * slack;
        }
    }
    let ambient = s.alpha.dot(&s.ka);
    let intrinsic = if p.uses_graph() { s.ka.dot(&s.lka) } else { 0.0 };
    0.5 * (loss + p.gamma_a * ambient + p.gamma_i * intrinsic)
}

/// `I_E (f − y)` as an n-vector.
fn masked_residual(p: &Problem, s: &PrimalState) -> DVector<f64> {
    let mut r = DVector::zeros(p.n());
    for i in 0..p.l {
        let f = s.ka[i] + s.b;
        if p.labels[i] * f < 1.0 {
            r[i] = f - p.labels[i];
        }
    }
    r
}

/// Returns `(∇̂, ∇)`: the preconditioned gradient and the gradient. The
/// gradient's α block is `K ∇̂_α`, so both cost a single dense product.
pub fn gradients(p: &Problem, s: &PrimalState) -> (Gradient, Gradient) {
    let residual = masked_residual(p, s);
    let grad_b = residual.sum();
    let mut pg = residual;
    pg.axpy(p.gamma_a, &s.alpha, 1.0);
    if p.uses_graph() {
        pg.axpy(p.gamma_i, &s.lka, 1.0);
    }
    let g = p.k() * &pg;
    (
        Gradient {
            b: grad_b,
            alpha: pg,
        },
        Gradient {
            b: grad_b,
            alpha: g,
        },
    )
}

/// `∇ = [Σ_E (f_i − y_i); K I_E (f − y) + γ_A Kα + γ_I KLKα]`.
pub fn gradient(p: &Problem, s: &PrimalState) -> Gradient {
    gradients(p, s).1
}

/// `∇̂ = P⁻¹∇ = [∇_b; I_E (f − y) + γ_A α + γ_I LKα]` with `P = diag(1, K)`.
pub fn preconditioned_gradient(p: &Problem, s: &PrimalState) -> Gradient {
    gradients(p, s).0
}

/// The generalized Hessian as a dense `(n+1) × (n+1)` matrix, with the
/// error set taken from the current outputs.
pub fn hessian(p: &Problem, s: &PrimalState) -> DMatrix<f64> {
    let n = p.n();
    let k = p.k();
    let e = p.error_set_of(&s.outputs());
    let mut h = DMatrix::zeros(n + 1, n + 1);
    h[(0, 0)] = e.len() as f64;
    for &i in &e {
        for j in 0..n {
            h[(0, j + 1)] += k[(i, j)];
        }
    }
    for j in 0..n {
        h[(j + 1, 0)] = h[(0, j + 1)];
    }

    // K I_E K + γ_A K + γ_I K L K
    let mut k_e = DMatrix::zeros(n, n);
    for &i in &e {
        k_e.set_column(i, &k.column(i));
    }
    let mut block = &k_e * k;
    block += k * p.gamma_a;
    if p.uses_graph() {
        block += (k * p.ops.lk()) * p.gamma_i;
    }
    // symmetrize away roundoff
    let block = (&block + block.transpose()) * 0.5;
    h.view_mut((1, 1), (n, n)).copy_from(&block);
    h
}

/// The preconditioned system `P⁻¹H` restricted to error set `e`:
///
/// ```text
/// [ |E|     1ᵀ I_E K                  ]
/// [ I_E 1   I_E K + γ_A I + γ_I L K   ]
/// ```
///
/// together with its right-hand side `[1ᵀ I_E y; I_E y]`.
pub(crate) fn newton_system(p: &Problem, e: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
    let n = p.n();
    let k = p.k();
    let mut m = DMatrix::zeros(n + 1, n + 1);
    let mut rhs = DVector::zeros(n + 1);
    m[(0, 0)] = e.len() as f64;
    for &i in e {
        let y = p.labels[i];
        rhs[0] += y;
        rhs[i + 1] = y;
        m[(i + 1, 0)] = 1.0;
        for j in 0..n {
            let kij = k[(i, j)];
            m[(0, j + 1)] += kij;
            m[(i + 1, j + 1)] = kij;
        }
    }
    for j in 0..n {
        m[(j + 1, j + 1)] += p.gamma_a;
    }
    if p.uses_graph() {
        let lk = p.ops.lk();
        let mut view = m.view_mut((1, 1), (n, n));
        view += lk * p.gamma_i;
    }
    (m, rhs)
}
