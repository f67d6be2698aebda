//! The outer loop of the inexact dynamic-barrier primal-dual method.
//!
//! Each iteration computes the gated multiplier and direction from the
//! current triplet `(x_k, y_k, w_k)`, takes the primal step
//! `x_{k+1} = x_k + gamma * d_k`, then refreshes the dual blocks with a few
//! warm-started projected ascent steps on `phi(x_{k+1}, .)` and
//! `psi(x_{k+1}, .)`. The update order matters: the direction always uses
//! the duals lagged from the previous iteration.

use std::time::Instant;

use crate::direction::compute_direction;
use crate::linalg::{all_finite, axpy, norm};
use crate::problem::{CountedProblem, DualPoint, Point, Problem};
use crate::projection::{inner_maximize, project_set, tune_ascent_stepsize, AscentOpts};
use crate::schedule::{DualBlock, Schedule, ScheduleMode};
use crate::trace::{IterateTrace, TraceRecord};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub schedule: Schedule,
    pub x0: Point,
    /// Dual initializers; the set center when absent. Projected onto their
    /// sets either way.
    pub y0: Option<DualPoint>,
    pub w0: Option<DualPoint>,
    /// Record every `record_stride`-th iterate (the final iterate is always
    /// recorded).
    pub record_stride: usize,
    /// Nesterov extrapolation in the inner ascent.
    pub momentum: bool,
    /// Replace the inexact dual updates with the problem's exact inner-max
    /// callbacks, when available.
    pub exact_inner: bool,
    /// Optional early stop on `max(||d_k||, [psi]_+) <= tol`. The method runs
    /// fixed horizons by default.
    pub stop_tol: Option<f64>,
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(schedule: Schedule, x0: Point) -> Self {
        SolverConfig {
            schedule,
            x0,
            y0: None,
            w0: None,
            record_stride: 1,
            momentum: false,
            exact_inner: false,
            stop_tol: None,
            seed: 0,
        }
    }
}

/// Residuals of a single direction evaluation at a candidate point, with
/// evaluation-grade dual solves.
#[derive(Clone, Debug)]
pub struct FixedPointReport {
    pub d_norm: f64,
    pub lambda: f64,
    pub zeta: f64,
    pub psi_val: f64,
}

/// Inner ascent stepsizes for the two dual blocks: `1/L` when the constants
/// are known, otherwise a doubling/halving search at the starting point,
/// frozen for the rest of the run. Shared with the baselines so comparisons
/// use the same machinery.
pub(crate) fn inner_stepsizes(
    problem: &dyn Problem,
    x: &[f64],
    y: &[f64],
    w: &[f64],
) -> Result<(f64, f64)> {
    if let Some(s) = problem.smoothness() {
        Ok((
            1.0 / s.l_yy_phi.max(f64::MIN_POSITIVE),
            1.0 / s.l_ww_psi.max(f64::MIN_POSITIVE),
        ))
    } else {
        let step_y = tune_ascent_stepsize(
            |u| problem.phi(x, u),
            |u| problem.grad_y_phi(x, u),
            problem.set_y(),
            y,
        )?;
        let step_w = tune_ascent_stepsize(
            |u| problem.psi(x, u),
            |u| problem.grad_w_psi(x, u),
            problem.set_w(),
            w,
        )?;
        Ok((step_y, step_w))
    }
}

fn validate_config(problem: &dyn Problem, config: &SolverConfig) -> Result<()> {
    config.schedule.validate()?;
    if config.record_stride == 0 {
        return Err(Error::invalid("record_stride must be at least 1"));
    }
    if config.x0.dim() != problem.dim_x() {
        return Err(Error::DimensionMismatch {
            context: "x0",
            expected: problem.dim_x(),
            got: config.x0.dim(),
        });
    }
    if let Some(y0) = &config.y0 {
        if y0.dim() != problem.set_y().dim() {
            return Err(Error::DimensionMismatch {
                context: "y0",
                expected: problem.set_y().dim(),
                got: y0.dim(),
            });
        }
    }
    if let Some(w0) = &config.w0 {
        if w0.dim() != problem.set_w().dim() {
            return Err(Error::DimensionMismatch {
                context: "w0",
                expected: problem.set_w().dim(),
                got: w0.dim(),
            });
        }
    }
    if config.schedule.mode == ScheduleMode::Theory && problem.smoothness().is_none() {
        return Err(Error::invalid(
            "theory mode needs smoothness constants; drive this problem in practical mode",
        ));
    }
    Ok(())
}

/// Runs the solver for the configured horizon and returns the trace.
///
/// On a non-finite iterate the run aborts with [`Error::Aborted`], which
/// carries the partial trace recorded so far.
pub fn solve(problem: &dyn Problem, config: &SolverConfig) -> Result<IterateTrace> {
    validate_config(problem, config)?;
    let counted = CountedProblem::new(problem);
    let problem = &counted as &dyn Problem;
    let schedule = &config.schedule;
    let horizon = schedule.horizon;
    let clock = Instant::now();

    let mut x = config.x0.as_slice().to_vec();
    let mut y = match &config.y0 {
        Some(p) => project_set(p.as_slice(), problem.set_y())?,
        None => problem.set_y().center(),
    };
    let mut w = match &config.w0 {
        Some(p) => project_set(p.as_slice(), problem.set_w())?,
        None => problem.set_w().center(),
    };

    let (step_y, step_w) = inner_stepsizes(problem, &x, &y, &w)?;
    let gamma = schedule.gamma_const(problem.smoothness().map(|s| s.lip_sum()))?;

    let mut trace = IterateTrace {
        records: Vec::with_capacity(horizon / config.record_stride + 2),
        total_iters: 0,
        counts: Default::default(),
        method: "idbpd".into(),
    };

    let abort = |trace: &mut IterateTrace, counted: &CountedProblem, quantity: &str, k: usize| {
        trace.counts = counted.counts();
        Error::Aborted {
            quantity: quantity.to_string(),
            k,
            partial: Box::new(std::mem::take(trace)),
        }
    };

    let mut executed = 0;
    for k in 0..horizon {
        let alpha = schedule.alpha_at(k)?;
        let gphi = problem.grad_x_phi(&x, &y);
        let gpsi = problem.grad_x_psi(&x, &w);
        let psi_val = problem.psi(&x, &w);
        if !all_finite(&gphi) {
            return Err(abort(&mut trace, &counted, "objective gradient", k));
        }
        if !all_finite(&gpsi) || !psi_val.is_finite() {
            return Err(abort(&mut trace, &counted, "constraint oracle", k));
        }
        let dir = compute_direction(&gphi, &gpsi, psi_val, alpha)?;

        if k % config.record_stride == 0 {
            let phi_val = problem.phi(&x, &y);
            trace.records.push(TraceRecord {
                k,
                x: x.clone(),
                y: y.clone(),
                w: w.clone(),
                lambda: dir.lambda,
                zeta: dir.zeta,
                rho: dir.rho,
                alpha,
                d_norm: norm(&dir.d),
                psi_val,
                phi_val,
                elapsed_ns: clock.elapsed().as_nanos() as u64,
            });
        }

        if let Some(tol) = config.stop_tol {
            if norm(&dir.d).max(psi_val.max(0.0)) <= tol {
                executed = k;
                break;
            }
        }

        // Primal step, then the two dual refreshes at the new x.
        axpy(&mut x, gamma, &dir.d);
        if !all_finite(&x) {
            return Err(abort(&mut trace, &counted, "primal iterate", k));
        }

        let exact_y = config.exact_inner.then(|| problem.exact_max_y(&x)).flatten();
        match exact_y {
            Some((y_star, _)) => y = y_star,
            None => {
                let n_k = schedule.inner_steps(k, DualBlock::Y, None);
                let res = inner_maximize(
                    |u| problem.phi(&x, u),
                    |u| problem.grad_y_phi(&x, u),
                    problem.set_y(),
                    &y,
                    &AscentOpts {
                        steps: n_k,
                        stepsize: step_y,
                        momentum: config.momentum,
                        record_values: false,
                    },
                );
                match res {
                    Ok(r) => y = r.maximizer,
                    Err(_) => return Err(abort(&mut trace, &counted, "objective dual ascent", k)),
                }
            }
        }

        let exact_w = config.exact_inner.then(|| problem.exact_max_w(&x)).flatten();
        match exact_w {
            Some((w_star, _)) => w = w_star,
            None => {
                let psi_plus = (dir.zeta > 0.0).then_some(psi_val.max(0.0));
                let m_k = schedule.inner_steps(k, DualBlock::W, psi_plus);
                let res = inner_maximize(
                    |u| problem.psi(&x, u),
                    |u| problem.grad_w_psi(&x, u),
                    problem.set_w(),
                    &w,
                    &AscentOpts {
                        steps: m_k,
                        stepsize: step_w,
                        momentum: config.momentum,
                        record_values: false,
                    },
                );
                match res {
                    Ok(r) => w = r.maximizer,
                    Err(_) => return Err(abort(&mut trace, &counted, "constraint dual ascent", k)),
                }
            }
        }
        executed = k + 1;
    }

    // Final iterate, evaluated with the last barrier weight for diagnostics.
    let alpha_final = schedule.alpha_unchecked(horizon.saturating_sub(1));
    let gphi = problem.grad_x_phi(&x, &y);
    let gpsi = problem.grad_x_psi(&x, &w);
    let psi_val = problem.psi(&x, &w);
    let dir = compute_direction(&gphi, &gpsi, psi_val, alpha_final)?;
    let phi_val = problem.phi(&x, &y);
    // An early stop right after a recorded iterate would duplicate it.
    if trace.records.last().map(|r| r.k) == Some(executed) {
        trace.records.pop();
    }
    trace.records.push(TraceRecord {
        k: executed,
        x,
        y,
        w,
        lambda: dir.lambda,
        zeta: dir.zeta,
        rho: dir.rho,
        alpha: alpha_final,
        d_norm: norm(&dir.d),
        psi_val,
        phi_val,
        elapsed_ns: clock.elapsed().as_nanos() as u64,
    });
    trace.total_iters = executed;
    trace.counts = counted.counts();
    Ok(trace)
}

/// Evaluates one direction computation at a candidate KKT point with
/// evaluation-grade dual solves. Near a KKT point (with `alpha = 0`) the
/// returned direction should be small; far from one it should not be.
pub fn run_fixed_point_check(
    problem: &dyn Problem,
    x_kkt: &Point,
    alpha: f64,
    eval_steps: usize,
) -> Result<FixedPointReport> {
    if x_kkt.dim() != problem.dim_x() {
        return Err(Error::DimensionMismatch {
            context: "x_kkt",
            expected: problem.dim_x(),
            got: x_kkt.dim(),
        });
    }
    let x = x_kkt.as_slice();
    let y_star = evaluation_grade_max(problem, x, DualBlock::Y, eval_steps)?;
    let w_star = evaluation_grade_max(problem, x, DualBlock::W, eval_steps)?;
    let gphi = problem.grad_x_phi(x, &y_star);
    let gpsi = problem.grad_x_psi(x, &w_star);
    let psi_val = problem.psi(x, &w_star);
    let dir = compute_direction(&gphi, &gpsi, psi_val, alpha)?;
    Ok(FixedPointReport {
        d_norm: norm(&dir.d),
        lambda: dir.lambda,
        zeta: dir.zeta,
        psi_val,
    })
}

pub(crate) fn evaluation_grade_max(
    problem: &dyn Problem,
    x: &[f64],
    block: DualBlock,
    eval_steps: usize,
) -> Result<Vec<f64>> {
    let exact = match block {
        DualBlock::Y => problem.exact_max_y(x),
        DualBlock::W => problem.exact_max_w(x),
    };
    if let Some((u_star, _)) = exact {
        return Ok(u_star);
    }
    if eval_steps == 0 {
        return Err(Error::invalid(
            "evaluation-grade inner solve needs eval_steps >= 1 or an exact callback",
        ));
    }
    let set = match block {
        DualBlock::Y => problem.set_y(),
        DualBlock::W => problem.set_w(),
    };
    let start = set.center();
    let (value, grad): (Box<dyn Fn(&[f64]) -> f64>, Box<dyn Fn(&[f64]) -> Vec<f64>>) = match block {
        DualBlock::Y => (
            Box::new(move |u: &[f64]| problem.phi(x, u)),
            Box::new(move |u: &[f64]| problem.grad_y_phi(x, u)),
        ),
        DualBlock::W => (
            Box::new(move |u: &[f64]| problem.psi(x, u)),
            Box::new(move |u: &[f64]| problem.grad_w_psi(x, u)),
        ),
    };
    let stepsize = match problem.smoothness() {
        Some(s) => match block {
            DualBlock::Y => 1.0 / s.l_yy_phi.max(f64::MIN_POSITIVE),
            DualBlock::W => 1.0 / s.l_ww_psi.max(f64::MIN_POSITIVE),
        },
        None => tune_ascent_stepsize(&value, &grad, set, &start)?,
    };
    let r = inner_maximize(&value, &grad, set, &start, &AscentOpts::plain(eval_steps, stepsize))?;
    Ok(r.maximizer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::FeasibleSet;

    /// min_x max_y xy - y^2/2  (f(x) = x^2/4... actually y* = x/2, f = x^2/4)
    /// with a single always-feasible constraint psi = -1 - w^2. Used for loop
    /// structure tests only.
    struct Toy {
        set_y: FeasibleSet,
        set_w: FeasibleSet,
    }

    impl Toy {
        fn new() -> Self {
            Toy {
                set_y: FeasibleSet::WholeSpace { dim: 1 },
                set_w: FeasibleSet::WholeSpace { dim: 1 },
            }
        }
    }

    impl Problem for Toy {
        fn dim_x(&self) -> usize {
            1
        }
        fn phi(&self, x: &[f64], y: &[f64]) -> f64 {
            x[0] * y[0] - 0.5 * y[0] * y[0]
        }
        fn grad_x_phi(&self, _x: &[f64], y: &[f64]) -> Vec<f64> {
            vec![y[0]]
        }
        fn grad_y_phi(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
            vec![x[0] - y[0]]
        }
        fn psi(&self, _x: &[f64], w: &[f64]) -> f64 {
            -1.0 - w[0] * w[0]
        }
        fn grad_x_psi(&self, _x: &[f64], _w: &[f64]) -> Vec<f64> {
            vec![0.0]
        }
        fn grad_w_psi(&self, _x: &[f64], w: &[f64]) -> Vec<f64> {
            vec![-2.0 * w[0]]
        }
        fn set_y(&self) -> &FeasibleSet {
            &self.set_y
        }
        fn set_w(&self) -> &FeasibleSet {
            &self.set_w
        }
    }

    #[test]
    fn single_iteration_trace_structure() {
        let p = Toy::new();
        let mut config = SolverConfig::new(
            Schedule::practical(1, 1.0, 0.1),
            Point::new(vec![1.0]).unwrap(),
        );
        config.record_stride = 1;
        let trace = solve(&p, &config).unwrap();
        assert_eq!(trace.total_iters, 1);
        assert_eq!(trace.records.len(), 2, "k=0 and the final iterate");
        assert_eq!(trace.records[0].k, 0);
        assert_eq!(trace.records[1].k, 1);
        // One direction evaluation per iteration plus the final diagnostic,
        // and N_0 = 2 ascent gradient calls on y, M_0 = 10 on w (plus the
        // stepsize tuner's probes).
        assert!(trace.counts.grad_x_phi >= 2);
        assert!(trace.counts.grad_y_phi >= 2);
        assert!(trace.counts.grad_w_psi >= 10);
    }

    #[test]
    fn zero_gamma_is_rejected_but_tiny_gamma_freezes_x() {
        let p = Toy::new();
        let config = SolverConfig::new(
            Schedule::practical(5, 1.0, 0.0),
            Point::new(vec![1.0]).unwrap(),
        );
        assert!(solve(&p, &config).is_err(), "gamma = 0 fails schedule validation");

        // Degenerate but valid: the smallest positive gamma leaves x visibly
        // constant at this scale.
        let mut config = SolverConfig::new(
            Schedule::practical(5, 1.0, 1e-300),
            Point::new(vec![1.0]).unwrap(),
        );
        config.record_stride = 1;
        let trace = solve(&p, &config).unwrap();
        for rec in &trace.records {
            assert!((rec.x[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn early_stop_cuts_horizon() {
        let p = Toy::new();
        let mut config = SolverConfig::new(
            Schedule::practical(500, 1.0, 0.5),
            Point::new(vec![1.0]).unwrap(),
        );
        // psi is always feasible, so the stop condition is ||d|| <= tol;
        // gradient descent on x^2/4-ish drives d to zero quickly.
        config.stop_tol = Some(1e-6);
        let trace = solve(&p, &config).unwrap();
        assert!(trace.total_iters < 500, "stopped at {}", trace.total_iters);
    }
}
