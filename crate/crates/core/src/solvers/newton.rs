use nalgebra::DVector;

use super::{norm_snapshot, SolveReport, StopReason, Traces};
use crate::error::{LapsvmError, Result};
use crate::problem::{gradients, newton_system, objective, PrimalState, Problem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    /// Fixed step `s` in `z ← (1 − s) z + s z̄`.
    pub step_size: f64,
    pub max_steps: usize,
    /// Halve the step from 1 until the Armijo condition holds; overrides
    /// `step_size`.
    pub backtracking: bool,
    pub record_traces: bool,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            step_size: 1.0,
            max_steps: 50,
            backtracking: false,
            record_traces: true,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size <= 1.0) {
            return Err(LapsvmError::invalid(format!(
                "Newton step size must be in (0, 1], got {}",
                self.step_size
            )));
        }
        if self.max_steps == 0 {
            return Err(LapsvmError::invalid("max_steps must be >= 1"));
        }
        Ok(())
    }
}

const ARMIJO_C: f64 = 1e-4;
const MIN_BACKTRACK_STEP: f64 = 1e-10;

/// Minimizer `[b, α]` of the quadratic that agrees with the objective on
/// the region where the error set is `e`. With `e` empty the loss term
/// vanishes, `α = 0` is optimal and `b` is left at `b_current`.
pub(crate) fn solve_for_error_set(
    p: &Problem,
    e: &[usize],
    b_current: f64,
) -> Result<(f64, DVector<f64>)> {
    if e.is_empty() {
        return Ok((b_current, DVector::zeros(p.n())));
    }
    let (m, rhs) = newton_system(p, e);
    let z = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| LapsvmError::Singular(format!("Newton system with |E| = {}", e.len())))?;
    if z.iter().any(|v| !v.is_finite()) {
        return Err(LapsvmError::Singular(
            "Newton system produced non-finite coefficients".into(),
        ));
    }
    Ok((z[0], z.rows(1, p.n()).into_owned()))
}

/// Primal Newton iterations from `init`. Each step solves the linear
/// system of the current error set, moves towards its solution, and stops
/// once the error set repeats.
pub fn newton_solve(p: &Problem, cfg: &NewtonConfig, init: PrimalState) -> Result<SolveReport> {
    cfg.validate()?;
    if init.alpha.len() != p.n() {
        return Err(LapsvmError::DimensionMismatch {
            expected: p.n(),
            found: init.alpha.len(),
        });
    }
    let mut s = init;
    s.recompute_products(p);
    let mut traces = Traces::default();
    if cfg.record_traces {
        let (pg, g) = gradients(p, &s);
        traces.push(&norm_snapshot(p, &s, &pg, &g));
    }

    for t in 1..=cfg.max_steps {
        let previous_set = s.error_set.clone();
        let (b_bar, alpha_bar) = solve_for_error_set(p, &previous_set, s.b)?;
        let step = if cfg.backtracking {
            armijo_step(p, &s, b_bar, &alpha_bar)?
        } else {
            cfg.step_size
        };
        s.alpha = &s.alpha * (1.0 - step) + alpha_bar * step;
        s.b = (1.0 - step) * s.b + step * b_bar;
        s.recompute_products(p);

        let (pg, g) = gradients(p, &s);
        let snap = norm_snapshot(p, &s, &pg, &g);
        if !snap.objective.is_finite() {
            return Err(LapsvmError::Diverged { iteration: t });
        }
        if cfg.record_traces {
            traces.push(&snap);
        }
        if s.error_set == previous_set {
            return Ok(traces.into_report(s, t, 0, StopReason::ErrorSetStable));
        }
    }
    let iterations = cfg.max_steps;
    Ok(traces.into_report(s, iterations, 0, StopReason::MaxIters))
}

fn armijo_step(p: &Problem, s: &PrimalState, b_bar: f64, alpha_bar: &DVector<f64>) -> Result<f64> {
    let delta_alpha = alpha_bar - &s.alpha;
    let delta_b = b_bar - s.b;
    let (_, g) = gradients(p, s);
    let slope = g.b * delta_b + g.alpha.dot(&delta_alpha);
    let base = objective(p, s);
    let mut step = 1.0;
    while step > MIN_BACKTRACK_STEP {
        let trial = PrimalState::from_coefficients(
            p,
            &s.alpha + &delta_alpha * step,
            s.b + step * delta_b,
        )?;
        if objective(p, &trial) <= base + ARMIJO_C * step * slope {
            return Ok(step);
        }
        step *= 0.5;
    }
    Ok(step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{gradient, hessian};
    use crate::testutil::{random_instance, with_ridge};

    // Gradient descent with a fixed step from the Lipschitz
    // bound of the generalized Hessian at the origin (all labeled points in
    // the error set gives the largest loss curvature).
    fn gradient_descent_oracle(p: &Problem, steps: usize) -> f64 {
        let h = hessian(p, &PrimalState::zeros(p));
        let lip = h.symmetric_eigenvalues().max();
        let eta = 1.0 / lip;
        let mut s = PrimalState::zeros(p);
        for _ in 0..steps {
            let g = gradient(p, &s);
            let alpha = &s.alpha - &g.alpha * eta;
            s = PrimalState::from_coefficients(p, alpha, s.b - eta * g.b).unwrap();
        }
        objective(p, &s)
    }

    #[test]
    fn reaches_the_minimum() {
        for seed in 0..4 {
            let inst = random_instance(500 + seed, 20, 8, 0.5, 0.2);
            let p = &with_ridge(&inst.problem, 0.5);
            let rep = newton_solve(p, &NewtonConfig::default(), PrimalState::zeros(p)).unwrap();
            assert_eq!(rep.stop_reason, StopReason::ErrorSetStable);
            let newton_obj = objective(p, &rep.final_state);
            let gd_obj = gradient_descent_oracle(p, 10_000);
            assert!(newton_obj <= gd_obj + 1e-6, "{newton_obj} vs {gd_obj}");
            assert!(
                (newton_obj - gd_obj).abs() <= 1e-4 * gd_obj.abs().max(1.0),
                "{newton_obj} vs {gd_obj}"
            );
            let g = gradient(p, &rep.final_state);
            assert!(g.norm() < 1e-8, "gradient {}", g.norm());
        }
    }

    #[test]
    fn objective_decreases_with_backtracking() {
        let inst = random_instance(17, 25, 12, 0.05, 1.0);
        let p = &inst.problem;
        let cfg = NewtonConfig {
            backtracking: true,
            ..Default::default()
        };
        let rep = newton_solve(p, &cfg, PrimalState::zeros(p)).unwrap();
        assert_eq!(rep.objective_trace.len(), rep.iterations + 1);
        for w in rep.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
        }
    }

    #[test]
    fn fixed_point_repeats() {
        let inst = random_instance(23, 18, 9, 0.3, 0.5);
        let p = &inst.problem;
        let rep = newton_solve(p, &NewtonConfig::default(), PrimalState::zeros(p)).unwrap();
        let again = newton_solve(p, &NewtonConfig::default(), rep.final_state.clone()).unwrap();
        assert_eq!(again.iterations, 1);
        let dz = &again.final_state.z() - &rep.final_state.z();
        assert!(dz.amax() <= 1e-9 * rep.final_state.z().amax().max(1.0));
    }

    #[test]
    fn damped_steps_never_beat_full_steps() {
        let inst = random_instance(29, 16, 8, 0.3, 0.5);
        let p = &inst.problem;
        let full = newton_solve(p, &NewtonConfig::default(), PrimalState::zeros(p)).unwrap();
        let cfg = NewtonConfig {
            step_size: 0.5,
            max_steps: 200,
            ..Default::default()
        };
        let damped = newton_solve(p, &cfg, PrimalState::zeros(p)).unwrap();
        let a = objective(p, &full.final_state);
        let b = objective(p, &damped.final_state);
        assert!(b >= a - 1e-9 * a.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn bad_config() {
        let inst = random_instance(1, 8, 4, 0.3, 0.5);
        let p = &inst.problem;
        for cfg in [
            NewtonConfig {
                step_size: 0.0,
                ..Default::default()
            },
            NewtonConfig {
                step_size: 1.5,
                ..Default::default()
            },
            NewtonConfig {
                max_steps: 0,
                ..Default::default()
            },
        ] {
            assert!(newton_solve(p, &cfg, PrimalState::zeros(p)).is_err());
        }
    }
}
