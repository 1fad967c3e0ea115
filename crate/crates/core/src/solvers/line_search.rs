use nalgebra::DVector;

use crate::error::{LapsvmError, Result};
use crate::problem::{PrimalState, Problem};

/// Search direction `d = [d_b, d_α]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    pub b: f64,
    pub alpha: DVector<f64>,
}

impl Direction {
    pub fn is_zero(&self) -> bool {
        self.b == 0.0 && self.alpha.iter().all(|&v| v == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchResult {
    pub step: f64,
    /// Linear pieces of the directional derivative that were inspected.
    pub intervals: usize,
}

/// Exact minimizer of `obj(z + s·d)` over `s ≥ 0`.
pub fn line_search(p: &Problem, s: &PrimalState, d: &Direction) -> Result<LineSearchResult> {
    if d.alpha.len() != p.n() {
        return Err(LapsvmError::DimensionMismatch {
            expected: p.n(),
            found: d.alpha.len(),
        });
    }
    if d.is_zero() {
        return Err(LapsvmError::invalid("line search along a zero direction"));
    }
    let kd = p.k() * &d.alpha;
    let lkd = p.apply_laplacian(&kd);
    Ok(exact_line_search(p, s, d, &kd, &lkd))
}

/// The derivative `ψ(s)` of `obj(z + s·d)` is piecewise linear, with a
/// breakpoint wherever a labeled point enters or leaves the error set.
/// Each piece `j` is represented by its values `ψ_j(0)` and `ψ_j(1)` and
/// updated in O(1) as one point changes status.
///
/// `kd = K d_α` and `lkd = L^p K d_α` must be supplied by the caller.
pub(crate) fn exact_line_search(
    p: &Problem,
    s: &PrimalState,
    d: &Direction,
    kd: &DVector<f64>,
    lkd: &DVector<f64>,
) -> LineSearchResult {
    // regularizer part of ψ: γ_A (α + s d)ᵀ K d + γ_I (α + s d)ᵀ K L K d
    let mut reg0 = p.gamma_a * s.ka.dot(&d.alpha);
    let mut reg_slope = p.gamma_a * kd.dot(&d.alpha);
    if p.uses_graph() {
        reg0 += p.gamma_i * s.lka.dot(kd);
        reg_slope += p.gamma_i * kd.dot(lkd);
    }
    let mut psi0 = reg0;
    let mut psi1 = reg0 + reg_slope;

    // (s_i, i, ν_i): ν = −1 leaving the error set, +1 entering it
    let mut breakpoints: Vec<(f64, usize, f64)> = Vec::new();
    for i in 0..p.l {
        let y = p.labels[i];
        let f = s.ka[i] + s.b;
        let fd = kd[i] + d.b;
        let in_error = y * f < 1.0;
        if in_error {
            psi0 += (f - y) * fd;
            psi1 += (f + fd - y) * fd;
        }
        if fd == 0.0 {
            continue;
        }
        let si = (y - f) / fd;
        if in_error && y * fd > 0.0 {
            breakpoints.push((si, i, -1.0));
        } else if !in_error && y * fd < 0.0 {
            breakpoints.push((si.max(0.0), i, 1.0));
        }
    }

    if psi0.is_nan() || psi0 >= 0.0 {
        return LineSearchResult {
            step: 0.0,
            intervals: 0,
        };
    }

    breakpoints.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut start = 0.0;
    let mut intervals = 0;
    let mut next = breakpoints.iter();
    loop {
        intervals += 1;
        let bp = next.next();
        let slope = psi1 - psi0;
        let end = bp.map_or(f64::INFINITY, |b| b.0);
        let crosses = match bp {
            None => true,
            Some(_) => psi0 + slope * end >= 0.0,
        };
        if crosses {
            if slope <= 0.0 {
                // flat and still descending: unbounded along d in this piece
                return LineSearchResult {
                    step: start,
                    intervals,
                };
            }
            let zero = psi0 / (psi0 - psi1);
            return LineSearchResult {
                step: zero.clamp(start, end),
                intervals,
            };
        }
        let &(si, i, nu) = bp.expect("finite end implies a breakpoint");
        let y = p.labels[i];
        let f = s.ka[i] + s.b;
        let fd = kd[i] + d.b;
        psi0 += nu * (f - y) * fd;
        psi1 += nu * (f + fd - y) * fd;
        start = si;
    }
}
