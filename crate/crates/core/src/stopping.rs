//! Goal conditions for PCG.
//!
//! The stability, validation and mixed checks look at the classifier's
//! decisions; the norm-based rules look at gradient quantities normalized
//! by their value at the first iterate. All of them are evaluated every
//! `θ` iterations by the solver.

use crate::error::{LapsvmError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopKind {
    Stability,
    Validation,
    Mixed,
    /// `‖∇‖ / ‖∇₀‖ < τ`
    GradNorm(f64),
    /// `‖∇̂‖ / ‖∇̂₀‖ < τ`
    PGradNorm(f64),
    /// `√(∇̂ᵀ∇) / √(∇̂₀ᵀ∇₀) < τ`
    MixedProduct(f64),
    /// `|obj_t − obj_{t−θ}| / |obj₀| < τ`
    ObjectiveDelta(f64),
    Never,
}

impl StopKind {
    pub fn needs_unlabeled(&self) -> bool {
        matches!(self, StopKind::Stability | StopKind::Mixed)
    }

    pub fn needs_validation(&self) -> bool {
        matches!(self, StopKind::Validation | StopKind::Mixed)
    }

    pub fn threshold(&self) -> Option<f64> {
        match *self {
            StopKind::GradNorm(t)
            | StopKind::PGradNorm(t)
            | StopKind::MixedProduct(t)
            | StopKind::ObjectiveDelta(t) => Some(t),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub kind: StopKind,
    /// Percentage of flipped unlabeled decisions below which training stops.
    pub eta_stability: f64,
    /// Required validation-error improvement (percentage points) per check;
    /// `None` means one validation example, `100 / |V|`.
    pub eta_validation: Option<f64>,
    /// Treat the first validation check as initialization only.
    pub skip_first_validation_check: bool,
}

impl StopRule {
    pub const DEFAULT_ETA_STABILITY: f64 = 1.5;

    pub fn new(kind: StopKind) -> Self {
        StopRule {
            kind,
            eta_stability: Self::DEFAULT_ETA_STABILITY,
            eta_validation: None,
            skip_first_validation_check: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.kind.threshold() {
            if t.is_nan() || t < 0.0 {
                return Err(LapsvmError::invalid(format!("stop threshold must be >= 0, got {t}")));
            }
        }
        if self.eta_stability.is_nan() || self.eta_stability < 0.0 {
            return Err(LapsvmError::invalid("eta_stability must be >= 0"));
        }
        if let Some(e) = self.eta_validation {
            if e.is_nan() || e < 0.0 {
                return Err(LapsvmError::invalid("eta_validation must be >= 0"));
            }
        }
        Ok(())
    }

    pub fn eta_validation_for(&self, validation_len: usize) -> f64 {
        self.eta_validation
            .unwrap_or_else(|| 100.0 / validation_len.max(1) as f64)
    }
}

/// Gradient-based quantities at one iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormSnapshot {
    pub grad: f64,
    pub pgrad: f64,
    pub mixed: f64,
    pub objective: f64,
}

/// Mutable memory of the goal conditions between checks.
#[derive(Debug, Clone)]
pub struct StopContext {
    pub unlabeled_decisions_prev: Vec<f64>,
    pub validation_error_prev: f64,
    pub norms_at_start: Option<NormSnapshot>,
    pub objective_prev_check: Option<f64>,
    pub skip_first_validation_check: bool,
    validation_len: usize,
    validation_checks: usize,
}

impl StopContext {
    /// Context for `u` unlabeled points and `validation_len` validation
    /// examples: previous decisions all zero, previous validation error 100%.
    pub fn new(u: usize, validation_len: usize) -> Self {
        StopContext {
            unlabeled_decisions_prev: vec![0.0; u],
            validation_error_prev: 100.0,
            norms_at_start: None,
            objective_prev_check: None,
            skip_first_validation_check: false,
            validation_len,
            validation_checks: 0,
        }
    }
}

/// `sign` with `sign(0) = +1`.
pub fn decision(f: f64) -> f64 {
    if f >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// `τ = 100 · ‖d − d_old‖₁ / u`.
pub fn stability_tau(prev: &[f64], current: &[f64]) -> f64 {
    let l1: f64 = prev.iter().zip(current).map(|(a, b)| (a - b).abs()).sum();
    100.0 * l1 / current.len() as f64
}

fn stability_decide(ctx: &StopContext, decisions: &[f64], eta: f64) -> Result<bool> {
    if decisions.is_empty() {
        return Err(LapsvmError::invalid(
            "stability check needs unlabeled points (u = 0)",
        ));
    }
    if decisions.len() != ctx.unlabeled_decisions_prev.len() {
        return Err(LapsvmError::DimensionMismatch {
            expected: ctx.unlabeled_decisions_prev.len(),
            found: decisions.len(),
        });
    }
    Ok(stability_tau(&ctx.unlabeled_decisions_prev, decisions) < eta)
}

/// Stops when fewer than `eta` percent of the unlabeled decisions moved
/// since the previous check; otherwise remembers the current decisions.
pub fn stability_check(ctx: &mut StopContext, decisions: &[f64], eta: f64) -> Result<bool> {
    let stop = stability_decide(ctx, decisions, eta)?;
    if !stop {
        ctx.unlabeled_decisions_prev = decisions.to_vec();
    }
    Ok(stop)
}

fn validation_decide(ctx: &StopContext, err_v: f64, eta: f64) -> Result<bool> {
    if ctx.validation_len == 0 {
        return Err(LapsvmError::invalid("validation check needs a validation set"));
    }
    if ctx.skip_first_validation_check && ctx.validation_checks == 0 {
        return Ok(false);
    }
    Ok(err_v > ctx.validation_error_prev - eta)
}

/// Stops when the validation error did not improve by at least `eta`
/// percentage points since the previous check.
pub fn validation_check(ctx: &mut StopContext, err_v: f64, eta: f64) -> Result<bool> {
    let stop = validation_decide(ctx, err_v, eta)?;
    ctx.validation_checks += 1;
    if !stop {
        ctx.validation_error_prev = err_v;
    }
    Ok(stop)
}

/// Stops only when both the stability and validation checks would stop.
/// Both memories are updated either way.
pub fn mixed_check(
    ctx: &mut StopContext,
    decisions: &[f64],
    err_v: f64,
    eta_stability: f64,
    eta_validation: f64,
) -> Result<bool> {
    let stable = stability_decide(ctx, decisions, eta_stability)?;
    let validated = validation_decide(ctx, err_v, eta_validation)?;
    ctx.unlabeled_decisions_prev = decisions.to_vec();
    ctx.validation_error_prev = err_v;
    ctx.validation_checks += 1;
    Ok(stable && validated)
}

/// Norm-based goal conditions. The first call records the reference
/// values and never stops.
pub fn norm_rule_check(ctx: &mut StopContext, current: NormSnapshot, kind: &StopKind) -> Result<bool> {
    let start = match ctx.norms_at_start {
        Some(s) => s,
        None => {
            ctx.norms_at_start = Some(current);
            ctx.objective_prev_check = Some(current.objective);
            return Ok(false);
        }
    };
    let ratio = |v: f64, v0: f64| if v0 == 0.0 { 0.0 } else { v / v0 };
    let stop = match *kind {
        StopKind::GradNorm(tau) => ratio(current.grad, start.grad) < tau,
        StopKind::PGradNorm(tau) => ratio(current.pgrad, start.pgrad) < tau,
        StopKind::MixedProduct(tau) => ratio(current.mixed, start.mixed) < tau,
        StopKind::ObjectiveDelta(tau) => {
            let prev = ctx.objective_prev_check.unwrap_or(start.objective);
            ratio((current.objective - prev).abs(), start.objective.abs()) < tau
        }
        StopKind::Never => false,
        other => {
            return Err(LapsvmError::invalid(format!(
                "{other:?} is not a norm-based rule"
            )))
        }
    };
    ctx.objective_prev_check = Some(current.objective);
    Ok(stop)
}
