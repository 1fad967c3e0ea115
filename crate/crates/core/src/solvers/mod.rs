//! Newton's method and preconditioned conjugate gradient for the primal
//! problem, sharing the exact breakpoint line search.

mod line_search;
mod newton;
mod pcg;

pub use line_search::{line_search, Direction, LineSearchResult};
pub use newton::{newton_solve, NewtonConfig};
pub(crate) use newton::solve_for_error_set;
pub use pcg::{
    pcg_solve, pcg_solve_observed, PcgConfig, PcgIterate, Preconditioner, ValidationData,
};

use crate::problem::PrimalState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Newton: the error set did not change between two iterations.
    ErrorSetStable,
    StabilityCheck,
    ValidationCheck,
    MixedCheck,
    /// A norm-based goal condition fired, or the gradient vanished.
    GradNormThreshold,
    MaxIters,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::ErrorSetStable => "error-set-stable",
            StopReason::StabilityCheck => "stability",
            StopReason::ValidationCheck => "validation",
            StopReason::MixedCheck => "mixed",
            StopReason::GradNormThreshold => "norm-threshold",
            StopReason::MaxIters => "max-iters",
        }
    }
}

/// Outcome of a solve. Traces hold one entry per iterate starting with the
/// initial one, so they have `iterations + 1` entries when recorded.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub final_state: PrimalState,
    pub iterations: usize,
    pub line_search_iters_total: usize,
    pub objective_trace: Vec<f64>,
    pub grad_norm_trace: Vec<f64>,
    pub pgrad_norm_trace: Vec<f64>,
    pub mixed_product_trace: Vec<f64>,
    pub stop_reason: StopReason,
}

#[derive(Debug, Default)]
struct Traces {
    objective: Vec<f64>,
    grad: Vec<f64>,
    pgrad: Vec<f64>,
    mixed: Vec<f64>,
}

impl Traces {
    fn push(&mut self, norms: &crate::stopping::NormSnapshot) {
        self.objective.push(norms.objective);
        self.grad.push(norms.grad);
        self.pgrad.push(norms.pgrad);
        self.mixed.push(norms.mixed);
    }

    fn into_report(
        self,
        final_state: PrimalState,
        iterations: usize,
        line_search_iters_total: usize,
        stop_reason: StopReason,
    ) -> SolveReport {
        SolveReport {
            final_state,
            iterations,
            line_search_iters_total,
            objective_trace: self.objective,
            grad_norm_trace: self.grad,
            pgrad_norm_trace: self.pgrad,
            mixed_product_trace: self.mixed,
            stop_reason,
        }
    }
}

fn norm_snapshot(
    p: &crate::problem::Problem,
    s: &PrimalState,
    pgrad: &crate::problem::Gradient,
    grad: &crate::problem::Gradient,
) -> crate::stopping::NormSnapshot {
    crate::stopping::NormSnapshot {
        grad: grad.norm(),
        pgrad: pgrad.norm(),
        mixed: pgrad.dot(grad).max(0.0).sqrt(),
        objective: crate::problem::objective(p, s),
    }
}
