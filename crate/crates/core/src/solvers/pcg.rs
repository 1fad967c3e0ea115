use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::line_search::{exact_line_search, Direction};
use super::{norm_snapshot, SolveReport, StopReason, Traces};
use crate::error::{LapsvmError, Result};
use crate::problem::{gradients, refresh_error_set, Gradient, PrimalState, Problem};
use crate::stopping::{
    decision, mixed_check, norm_rule_check, stability_check, validation_check, NormSnapshot,
    StopContext, StopKind, StopRule,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    /// `P = diag(1, K)`.
    Kernel,
    /// Plain nonlinear conjugate gradient. Costs an extra kernel product per
    /// iteration.
    Identity,
}

/// Held-out examples used by the validation-based stop rules.
#[derive(Debug, Clone)]
pub struct ValidationData {
    /// `k(x_v, x_j)` for validation rows `v` against all training points.
    pub kernel_rows: DMatrix<f64>,
    pub labels: Vec<f64>,
}

impl ValidationData {
    pub fn new(kernel_rows: DMatrix<f64>, labels: Vec<f64>) -> Result<Self> {
        if kernel_rows.nrows() != labels.len() {
            return Err(LapsvmError::DimensionMismatch {
                expected: kernel_rows.nrows(),
                found: labels.len(),
            });
        }
        Ok(ValidationData {
            kernel_rows,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Percentage of validation examples misclassified by `(α, b)`.
    pub fn error_percent(&self, alpha: &DVector<f64>, b: f64) -> f64 {
        if self.labels.is_empty() {
            return 0.0;
        }
        let f = &self.kernel_rows * alpha;
        let wrong = self
            .labels
            .iter()
            .zip(f.iter())
            .filter(|(&y, &fv)| decision(fv + b) != y)
            .count();
        100.0 * wrong as f64 / self.labels.len() as f64
    }
}

#[derive(Debug, Clone)]
pub struct PcgConfig {
    /// Defaults to `n`.
    pub max_iters: Option<usize>,
    /// Iterations between goal-condition checks; defaults to `⌈√n / 2⌉`.
    pub check_gap: Option<usize>,
    pub stop_rule: StopRule,
    pub record_traces: bool,
    pub preconditioner: Preconditioner,
    pub validation: Option<Arc<ValidationData>>,
}

impl Default for PcgConfig {
    fn default() -> Self {
        PcgConfig {
            max_iters: None,
            check_gap: None,
            stop_rule: StopRule::new(StopKind::Stability),
            record_traces: true,
            preconditioner: Preconditioner::Kernel,
            validation: None,
        }
    }
}

impl PcgConfig {
    pub fn check_gap_for(&self, n: usize) -> usize {
        self.check_gap
            .unwrap_or_else(|| ((n as f64).sqrt() / 2.0).ceil() as usize)
            .max(1)
    }
}

/// What the observer sees after every iterate, including the initial one.
#[derive(Debug)]
pub struct PcgIterate<'a> {
    pub iteration: usize,
    pub state: &'a PrimalState,
    pub norms: NormSnapshot,
    pub is_check: bool,
}

pub fn pcg_solve(p: &Problem, cfg: &PcgConfig, init: PrimalState) -> Result<SolveReport> {
    pcg_solve_observed(p, cfg, init, |_| {})
}

/// Preconditioned nonlinear conjugate gradient with exact line search and
/// Polak-Ribière updates. The goal condition of `cfg.stop_rule` is checked
/// every `θ` iterations.
pub fn pcg_solve_observed<F>(
    p: &Problem,
    cfg: &PcgConfig,
    init: PrimalState,
    mut observer: F,
) -> Result<SolveReport>
where
    F: FnMut(&PcgIterate<'_>),
{
    let rule = cfg.stop_rule;
    rule.validate()?;
    let n = p.n();
    let u = n - p.l;
    if init.alpha.len() != n {
        return Err(LapsvmError::DimensionMismatch {
            expected: n,
            found: init.alpha.len(),
        });
    }
    if rule.kind.needs_unlabeled() && u == 0 {
        return Err(LapsvmError::Empty("unlabeled set for the stability check"));
    }
    let validation = cfg.validation.as_deref();
    if rule.kind.needs_validation() && validation.is_none_or(|v| v.is_empty()) {
        return Err(LapsvmError::Empty("validation set for the validation check"));
    }
    if let Some(v) = validation {
        if v.kernel_rows.ncols() != n {
            return Err(LapsvmError::DimensionMismatch {
                expected: n,
                found: v.kernel_rows.ncols(),
            });
        }
    }
    let theta = cfg.check_gap_for(n);
    let max_iters = cfg.max_iters.unwrap_or(n);
    let v_len = validation.map_or(0, |v| v.len());
    let eta_v = rule.eta_validation_for(v_len);

    let mut ctx = StopContext::new(u, v_len);
    ctx.skip_first_validation_check = rule.skip_first_validation_check;
    let mut traces = Traces::default();

    let mut s = init;
    s.recompute_products(p);
    let (pg, mut g) = gradients(p, &s);
    let snap = norm_snapshot(p, &s, &pg, &g);
    if !snap.objective.is_finite() {
        return Err(LapsvmError::Diverged { iteration: 0 });
    }
    if cfg.record_traces {
        traces.push(&snap);
    }
    observer(&PcgIterate {
        iteration: 0,
        state: &s,
        norms: snap,
        is_check: false,
    });
    let norm_based = !matches!(
        rule.kind,
        StopKind::Stability | StopKind::Validation | StopKind::Mixed
    );
    if norm_based {
        norm_rule_check(&mut ctx, snap, &rule.kind)?;
    }
    if g.norm() == 0.0 {
        return Ok(traces.into_report(s, 0, 0, StopReason::GradNormThreshold));
    }

    let mut hat = preconditioned(cfg.preconditioner, &pg, &g);
    let mut d = Direction {
        b: -hat.b,
        alpha: -&hat.alpha,
    };
    let mut kd = match cfg.preconditioner {
        Preconditioner::Kernel => -&g.alpha,
        Preconditioner::Identity => p.k() * &d.alpha,
    };
    let mut ls_total = 0;

    for t in 1..=max_iters {
        let lkd = p.apply_laplacian(&kd);
        let ls = exact_line_search(p, &s, &d, &kd, &lkd);
        ls_total += ls.intervals;
        let step = ls.step;
        s.alpha.axpy(step, &d.alpha, 1.0);
        s.b += step * d.b;
        let is_check = t % theta == 0;
        if is_check {
            // discard drift of the recursive products
            s.ka = p.k() * &s.alpha;
            s.lka = p.apply_laplacian(&s.ka);
        } else {
            s.ka.axpy(step, &kd, 1.0);
            if p.uses_graph() {
                s.lka.axpy(step, &lkd, 1.0);
            }
        }
        refresh_error_set(p, &mut s);

        let (pg_new, g_new) = gradients(p, &s);
        let snap = norm_snapshot(p, &s, &pg_new, &g_new);
        if !snap.objective.is_finite() || !g_new.norm().is_finite() {
            return Err(LapsvmError::Diverged { iteration: t });
        }
        if cfg.record_traces {
            traces.push(&snap);
        }
        observer(&PcgIterate {
            iteration: t,
            state: &s,
            norms: snap,
            is_check,
        });

        if is_check {
            let stop = match rule.kind {
                StopKind::Stability => {
                    let dec = unlabeled_decisions(p, &s);
                    stability_check(&mut ctx, &dec, rule.eta_stability)?
                        .then_some(StopReason::StabilityCheck)
                }
                StopKind::Validation => {
                    let err = validation.expect("checked").error_percent(&s.alpha, s.b);
                    validation_check(&mut ctx, err, eta_v)?.then_some(StopReason::ValidationCheck)
                }
                StopKind::Mixed => {
                    let dec = unlabeled_decisions(p, &s);
                    let err = validation.expect("checked").error_percent(&s.alpha, s.b);
                    mixed_check(&mut ctx, &dec, err, rule.eta_stability, eta_v)?
                        .then_some(StopReason::MixedCheck)
                }
                _ => norm_rule_check(&mut ctx, snap, &rule.kind)?
                    .then_some(StopReason::GradNormThreshold),
            };
            if let Some(reason) = stop {
                return Ok(traces.into_report(s, t, ls_total, reason));
            }
        }
        if g_new.norm() == 0.0 {
            return Ok(traces.into_report(s, t, ls_total, StopReason::GradNormThreshold));
        }

        let hat_new = preconditioned(cfg.preconditioner, &pg_new, &g_new);
        let (next_d, rho) = next_direction(&hat_new, &g_new, &hat, &g, &d);
        kd = match (cfg.preconditioner, rho) {
            (Preconditioner::Identity, _) => p.k() * &next_d.alpha,
            (Preconditioner::Kernel, None) => -&g_new.alpha,
            // K d = −K ∇̂_α + ρ K d_old = −∇_α + ρ K d_old
            (Preconditioner::Kernel, Some(rho)) => &kd * rho - &g_new.alpha,
        };
        d = next_d;
        hat = hat_new;
        g = g_new;
    }
    Ok(traces.into_report(s, max_iters, ls_total, StopReason::MaxIters))
}

fn preconditioned(kind: Preconditioner, pg: &Gradient, g: &Gradient) -> Gradient {
    match kind {
        Preconditioner::Kernel => pg.clone(),
        Preconditioner::Identity => g.clone(),
    }
}

fn unlabeled_decisions(p: &Problem, s: &PrimalState) -> Vec<f64> {
    (p.l..p.n()).map(|i| decision(s.ka[i] + s.b)).collect()
}

/// `d = −∇̂ + ρ d_old` with the Polak-Ribière
/// `ρ = max(0, ∇̂ᵀ(∇ − ∇_old) / ∇̂_oldᵀ∇_old)`. Returns `None` for `ρ` when
/// the result is not a descent direction and steepest descent `−∇̂` is used
/// instead.
fn next_direction(
    hat: &Gradient,
    g: &Gradient,
    hat_old: &Gradient,
    g_old: &Gradient,
    d_old: &Direction,
) -> (Direction, Option<f64>) {
    let denom = hat_old.dot(g_old);
    let rho = if denom > 0.0 {
        ((hat.dot(g) - hat.dot(g_old)) / denom).max(0.0)
    } else {
        0.0
    };
    let d = Direction {
        b: -hat.b + rho * d_old.b,
        alpha: &d_old.alpha * rho - &hat.alpha,
    };
    if g.b * d.b + g.alpha.dot(&d.alpha) >= 0.0 {
        let steepest = Direction {
            b: -hat.b,
            alpha: -&hat.alpha,
        };
        return (steepest, None);
    }
    (d, Some(rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{gram, KernelSpec};
    use crate::problem::{gradient, hessian, objective, Operators};
    use crate::solvers::{newton_solve, NewtonConfig};
    use crate::testutil::{random_instance, with_ridge};

    fn tight(kind: Preconditioner) -> PcgConfig {
        PcgConfig {
            max_iters: Some(20_000),
            stop_rule: StopRule::new(StopKind::GradNorm(1e-10)),
            preconditioner: kind,
            ..Default::default()
        }
    }

    #[test]
    fn agrees_with_newton() {
        for seed in 0..12 {
            let inst = random_instance(600 + seed, 60, 20, 0.2, 0.5);
            let p = &inst.problem;
            let newton = newton_solve(p, &NewtonConfig::default(), PrimalState::zeros(p)).unwrap();
            let pcg = pcg_solve(p, &tight(Preconditioner::Kernel), PrimalState::zeros(p)).unwrap();
            assert_eq!(pcg.stop_reason, StopReason::GradNormThreshold);
            let a = objective(p, &newton.final_state);
            let b = objective(p, &pcg.final_state);
            assert!((a - b).abs() <= 1e-8 * a.abs(), "{a} vs {b}");
            let dz = (&newton.final_state.z() - &pcg.final_state.z()).amax();
            assert!(dz <= 1e-5, "z differs by {dz}");
        }
    }

    #[test]
    fn identity_preconditioner_also_converges() {
        let inst = random_instance(11, 25, 10, 0.5, 0.3);
        let p = &inst.problem;
        let newton = newton_solve(p, &NewtonConfig::default(), PrimalState::zeros(p)).unwrap();
        let pcg = pcg_solve(p, &tight(Preconditioner::Identity), PrimalState::zeros(p)).unwrap();
        let a = objective(p, &newton.final_state);
        let b = objective(p, &pcg.final_state);
        assert!((a - b).abs() <= 1e-8 * a.abs(), "{a} vs {b}");
    }

    // With a heavy ambient penalty every labeled output stays inside the
    // margin, so the objective is the quadratic ½ zᵀHz − cᵀz + const and
    // the unpreconditioned method must reproduce linear CG on Hz = c. A
    // kernel ridge keeps H well conditioned so roundoff stays small.
    #[test]
    fn identity_preconditioner_is_textbook_cg() {
        let inst = random_instance(5, 20, 10, 50.0, 0.5);
        let p = &with_ridge(&inst.problem, 0.5);
        let h = hessian(p, &PrimalState::zeros(p));
        let g0 = gradient(p, &PrimalState::zeros(p));
        let c = -g0.stacked();

        let mut iterates = Vec::new();
        let cfg = PcgConfig {
            max_iters: Some(15),
            stop_rule: StopRule::new(StopKind::Never),
            preconditioner: Preconditioner::Identity,
            ..Default::default()
        };
        pcg_solve_observed(p, &cfg, PrimalState::zeros(p), |it| {
            assert_eq!(it.state.error_set.len(), p.l, "left the quadratic region");
            iterates.push((it.state.z(), it.state.outputs(), it.norms.objective));
        })
        .unwrap();
        assert_eq!(iterates.len(), 16);

        let mut x = DVector::zeros(p.n() + 1);
        let mut r = c.clone();
        let mut dir = r.clone();
        for (k, (z, f, obj)) in iterates.iter().enumerate().skip(1) {
            let hd = &h * &dir;
            let a = r.dot(&r) / dir.dot(&hd);
            x += &dir * a;
            let r_new = &r - hd * a;
            let beta = r_new.dot(&r_new) / r.dot(&r);
            dir = &r_new + dir * beta;
            r = r_new;
            let oracle = PrimalState::from_coefficients(p, x.rows(1, p.n()).into_owned(), x[0])
                .unwrap();
            assert!((z - &x).amax() <= 1e-8 * x.amax(), "coefficients at iterate {k}");
            let f_oracle = oracle.outputs();
            assert!(
                (f - &f_oracle).amax() <= 1e-8 * f_oracle.amax(),
                "outputs at iterate {k}"
            );
            let o = objective(p, &oracle);
            assert!((obj - o).abs() <= 1e-10 * o.abs(), "objective at iterate {k}");
        }
    }

    #[test]
    fn objective_is_monotone() {
        for seed in 0..4 {
            let inst = random_instance(700 + seed, 40, 15, 0.05, 1.0);
            let p = &inst.problem;
            let cfg = PcgConfig {
                max_iters: Some(60),
                stop_rule: StopRule::new(StopKind::Never),
                ..Default::default()
            };
            let rep = pcg_solve(p, &cfg, PrimalState::zeros(p)).unwrap();
            assert_eq!(rep.objective_trace.len(), rep.iterations + 1);
            for w in rep.objective_trace.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-14, "{} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn checks_fall_on_multiples_of_theta() {
        let inst = random_instance(77, 49, 10, 0.1, 0.5);
        let p = &inst.problem;
        let cfg = PcgConfig {
            max_iters: Some(30),
            stop_rule: StopRule::new(StopKind::Never),
            ..Default::default()
        };
        assert_eq!(cfg.check_gap_for(49), 4);
        let mut checks = Vec::new();
        pcg_solve_observed(p, &cfg, PrimalState::zeros(p), |it| {
            if it.is_check {
                checks.push(it.iteration);
            }
        })
        .unwrap();
        assert_eq!(checks, vec![4, 8, 12, 16, 20, 24, 28]);

        let stab = PcgConfig {
            stop_rule: StopRule::new(StopKind::Stability),
            ..Default::default()
        };
        let rep = pcg_solve(p, &stab, PrimalState::zeros(p)).unwrap();
        assert_eq!(rep.stop_reason, StopReason::StabilityCheck);
        assert_eq!(rep.iterations % 4, 0);
        assert!(rep.iterations >= 8);
    }

    #[test]
    fn restart_on_ascent() {
        let hat_old = Gradient {
            b: 1.0,
            alpha: DVector::from_vec(vec![1.0, 0.0]),
        };
        let g_old = hat_old.clone();
        // the new gradient makes the Polak-Ribière direction point uphill
        let hat = Gradient {
            b: 0.1,
            alpha: DVector::from_vec(vec![2.0, 0.1]),
        };
        let g = hat.clone();
        let d_old = Direction {
            b: -10.0,
            alpha: DVector::from_vec(vec![10.0, 0.0]),
        };
        let (d, rho) = next_direction(&hat, &g, &hat_old, &g_old, &d_old);
        assert_eq!(rho, None);
        assert_eq!(d.b, -0.1);
        assert_eq!(d.alpha, DVector::from_vec(vec![-2.0, -0.1]));

        // ordinary case keeps the conjugate direction
        let d_small = Direction {
            b: -0.1,
            alpha: DVector::from_vec(vec![-0.1, 0.0]),
        };
        let (d, rho) = next_direction(&hat, &g, &hat_old, &g_old, &d_small);
        let rho = rho.unwrap();
        let expected = (hat.dot(&g) - hat.dot(&g_old)) / hat_old.dot(&g_old);
        assert!((rho - expected).abs() < 1e-15);
        assert!((d.b - (-0.1 + rho * -0.1)).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_start() {
        // two copies of one point with opposite labels cancel out
        let pts = vec![vec![0.3, -0.2], vec![0.3, -0.2], vec![1.0, 1.0], vec![-1.0, 0.5]];
        let k = gram(&KernelSpec::gaussian(1.0), &pts, 0.0).unwrap();
        let ops = Arc::new(Operators::without_graph(k));
        let labels = DVector::from_vec(vec![1.0, -1.0, 0.0, 0.0]);
        let p = Problem::new(ops, labels, 0.1, 0.0).unwrap();
        let rep = pcg_solve(&p, &PcgConfig::default(), PrimalState::zeros(&p)).unwrap();
        assert_eq!(rep.iterations, 0);
        assert_eq!(rep.objective_trace.len(), 1);
        assert_eq!(rep.final_state.alpha, DVector::zeros(4));
    }

    #[test]
    fn traces_can_be_disabled() {
        let inst = random_instance(3, 20, 8, 0.1, 0.5);
        let p = &inst.problem;
        let cfg = PcgConfig {
            record_traces: false,
            ..Default::default()
        };
        let rep = pcg_solve(p, &cfg, PrimalState::zeros(p)).unwrap();
        assert!(rep.objective_trace.is_empty() && rep.grad_norm_trace.is_empty());
    }

    #[test]
    fn missing_stop_rule_inputs() {
        let inst = random_instance(3, 12, 12, 0.1, 0.5);
        let p = &inst.problem;
        // every point labeled: nothing to be stable on
        assert!(pcg_solve(p, &PcgConfig::default(), PrimalState::zeros(p)).is_err());
        let cfg = PcgConfig {
            stop_rule: StopRule::new(StopKind::Validation),
            ..Default::default()
        };
        assert!(pcg_solve(p, &cfg, PrimalState::zeros(p)).is_err());
    }

    #[test]
    fn validation_rule_stops() {
        let inst = random_instance(13, 40, 10, 0.1, 0.5);
        let p = &inst.problem;
        // validate on the training points themselves
        let rows = p.k().rows(0, 10).into_owned();
        let labels: Vec<f64> = (0..10).map(|i| p.labels[i]).collect();
        let v = ValidationData::new(rows, labels).unwrap();
        let cfg = PcgConfig {
            stop_rule: StopRule::new(StopKind::Validation),
            validation: Some(Arc::new(v)),
            ..Default::default()
        };
        let rep = pcg_solve(p, &cfg, PrimalState::zeros(p)).unwrap();
        assert_eq!(rep.stop_reason, StopReason::ValidationCheck);
        assert_eq!(rep.iterations % cfg.check_gap_for(40), 0);
    }
}
