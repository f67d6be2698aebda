//! The two comparison methods: gradient descent multi-ascent on a penalized
//! single-level reformulation, and adaptive discretization of the constraint
//! index set with a Lagrangian primal-dual subsolver.
//!
//! Both consume the same oracle interface as the main solver, reuse its inner
//! ascent stepsize machinery, and report oracle-call counts so comparisons
//! can be budget-matched.

use std::collections::VecDeque;
use std::time::Instant;

use crate::linalg::{all_finite, axpy, norm};
use crate::problem::{CountedProblem, DualPoint, Point, Problem};
use crate::projection::{inner_maximize, project_set, AscentOpts};
use crate::schedule::DualBlock;
use crate::solver::{evaluation_grade_max, inner_stepsizes};
use crate::trace::{IterateTrace, TraceRecord};
use crate::{Error, Result};

/// Configuration for gradient descent multi-ascent on
/// `min_x max_{y,w} phi(x,y) + penalty * psi(x,w)`.
#[derive(Clone, Debug)]
pub struct GdmaConfig {
    /// Penalty weight on the constraint part.
    pub penalty: f64,
    /// Primal stepsize.
    pub gamma: f64,
    /// Projected ascent steps per dual block per outer iteration.
    pub ascent_steps: usize,
    pub horizon: usize,
    pub record_stride: usize,
}

impl GdmaConfig {
    fn validate(&self) -> Result<()> {
        if !(self.penalty > 0.0) {
            return Err(Error::invalid("penalty must be positive"));
        }
        if !(self.gamma > 0.0) || self.ascent_steps == 0 || self.horizon == 0 {
            return Err(Error::invalid("gamma, ascent_steps and horizon must be positive"));
        }
        if self.record_stride == 0 {
            return Err(Error::invalid("record_stride must be at least 1"));
        }
        Ok(())
    }
}

/// Configuration for the adaptive discretization outer loop.
#[derive(Clone, Debug)]
pub struct DiscretizationConfig {
    pub outer_rounds: usize,
    pub inner_pd_iterations: usize,
    /// A separation point is added only when its violation exceeds this.
    pub violation_tolerance: f64,
    /// Stepsize of the projected multiplier ascent.
    pub multiplier_step: f64,
    /// Working-set cap; oldest entries are evicted past it.
    pub max_active_constraints: usize,
    /// Primal descent stepsize of the subsolver.
    pub primal_step: f64,
    /// Ascent steps for the evaluation-grade separation problem.
    pub eval_steps: usize,
    pub record_stride: usize,
}

impl DiscretizationConfig {
    fn validate(&self) -> Result<()> {
        if self.outer_rounds == 0
            || self.inner_pd_iterations == 0
            || self.max_active_constraints == 0
            || self.eval_steps == 0
        {
            return Err(Error::invalid("discretization iteration counts must be positive"));
        }
        if !(self.violation_tolerance > 0.0)
            || !(self.multiplier_step > 0.0)
            || !(self.primal_step > 0.0)
        {
            return Err(Error::invalid("discretization stepsizes and tolerance must be positive"));
        }
        if self.record_stride == 0 {
            return Err(Error::invalid("record_stride must be at least 1"));
        }
        Ok(())
    }
}

/// Outcome of a discretization run: the trace plus the working-set history
/// the outer loop built up.
#[derive(Debug)]
pub struct DiscretizationOutcome {
    pub trace: IterateTrace,
    pub rounds_run: usize,
    /// Separation violation measured at the end of each round.
    pub violations: Vec<f64>,
    /// Final working set of constraint indices.
    pub working_set: Vec<Vec<f64>>,
}

fn abort(trace: &mut IterateTrace, counted: &CountedProblem, quantity: &str, k: usize) -> Error {
    trace.counts = counted.counts();
    Error::Aborted {
        quantity: quantity.to_string(),
        k,
        partial: Box::new(std::mem::take(trace)),
    }
}

/// Gradient descent multi-ascent on the penalized reformulation. Each outer
/// iteration refreshes both dual blocks with `ascent_steps` projected ascent
/// steps, then takes one primal step along
/// `-(grad phi + penalty * grad psi)`.
pub fn gdma_solve(
    problem: &dyn Problem,
    config: &GdmaConfig,
    x0: &Point,
    y0: Option<&DualPoint>,
    w0: Option<&DualPoint>,
) -> Result<IterateTrace> {
    config.validate()?;
    if x0.dim() != problem.dim_x() {
        return Err(Error::DimensionMismatch {
            context: "x0",
            expected: problem.dim_x(),
            got: x0.dim(),
        });
    }
    let counted = CountedProblem::new(problem);
    let problem = &counted as &dyn Problem;
    let clock = Instant::now();

    let mut x = x0.as_slice().to_vec();
    let mut y = match y0 {
        Some(p) => project_set(p.as_slice(), problem.set_y())?,
        None => problem.set_y().center(),
    };
    let mut w = match w0 {
        Some(p) => project_set(p.as_slice(), problem.set_w())?,
        None => problem.set_w().center(),
    };
    let (step_y, step_w) = inner_stepsizes(problem, &x, &y, &w)?;

    let mut trace = IterateTrace {
        records: Vec::new(),
        total_iters: 0,
        counts: Default::default(),
        method: "gdma".into(),
    };

    for k in 0..config.horizon {
        // Penalty scaling leaves the argmax of each block unchanged, so the
        // ascent runs on the raw couplings.
        let ry = inner_maximize(
            |u| problem.phi(&x, u),
            |u| problem.grad_y_phi(&x, u),
            problem.set_y(),
            &y,
            &AscentOpts::plain(config.ascent_steps, step_y),
        );
        match ry {
            Ok(r) => y = r.maximizer,
            Err(_) => return Err(abort(&mut trace, &counted, "objective dual ascent", k)),
        }
        let rw = inner_maximize(
            |u| problem.psi(&x, u),
            |u| problem.grad_w_psi(&x, u),
            problem.set_w(),
            &w,
            &AscentOpts::plain(config.ascent_steps, step_w),
        );
        match rw {
            Ok(r) => w = r.maximizer,
            Err(_) => return Err(abort(&mut trace, &counted, "constraint dual ascent", k)),
        }

        let gphi = problem.grad_x_phi(&x, &y);
        let gpsi = problem.grad_x_psi(&x, &w);
        let psi_val = problem.psi(&x, &w);
        if !all_finite(&gphi) || !all_finite(&gpsi) || !psi_val.is_finite() {
            return Err(abort(&mut trace, &counted, "penalized gradient", k));
        }
        let d: Vec<f64> = gphi
            .iter()
            .zip(&gpsi)
            .map(|(a, b)| -(a + config.penalty * b))
            .collect();

        if k % config.record_stride == 0 {
            trace.records.push(TraceRecord {
                k,
                x: x.clone(),
                y: y.clone(),
                w: w.clone(),
                lambda: config.penalty,
                zeta: psi_val.max(0.0) * norm(&gpsi),
                rho: norm(&gpsi),
                alpha: 0.0,
                d_norm: norm(&d),
                psi_val,
                phi_val: problem.phi(&x, &y),
                elapsed_ns: clock.elapsed().as_nanos() as u64,
            });
        }

        axpy(&mut x, config.gamma, &d);
        if !all_finite(&x) {
            return Err(abort(&mut trace, &counted, "primal iterate", k));
        }
    }

    let psi_val = problem.psi(&x, &w);
    let gpsi = problem.grad_x_psi(&x, &w);
    let gphi = problem.grad_x_phi(&x, &y);
    let d: Vec<f64> = gphi
        .iter()
        .zip(&gpsi)
        .map(|(a, b)| -(a + config.penalty * b))
        .collect();
    trace.records.push(TraceRecord {
        k: config.horizon,
        x: x.clone(),
        y: y.clone(),
        w: w.clone(),
        lambda: config.penalty,
        zeta: psi_val.max(0.0) * norm(&gpsi),
        rho: norm(&gpsi),
        alpha: 0.0,
        d_norm: norm(&d),
        psi_val,
        phi_val: problem.phi(&x, &y),
        elapsed_ns: clock.elapsed().as_nanos() as u64,
    });
    trace.total_iters = config.horizon;
    trace.counts = counted.counts();
    Ok(trace)
}

/// Blankenship-Falk style outer loop: keep a finite working set of
/// constraint indices, run a first-order Lagrangian primal-dual subsolver on
/// the discretized problem, then separate by maximizing `psi(x, .)` to
/// evaluation grade and appending the maximizer while it is violated.
pub fn adaptive_discretization_solve(
    problem: &dyn Problem,
    config: &DiscretizationConfig,
    x0: &Point,
    y0: Option<&DualPoint>,
) -> Result<DiscretizationOutcome> {
    config.validate()?;
    if x0.dim() != problem.dim_x() {
        return Err(Error::DimensionMismatch {
            context: "x0",
            expected: problem.dim_x(),
            got: x0.dim(),
        });
    }
    let counted = CountedProblem::new(problem);
    let problem = &counted as &dyn Problem;
    let clock = Instant::now();

    let mut x = x0.as_slice().to_vec();
    let mut y = match y0 {
        Some(p) => project_set(p.as_slice(), problem.set_y())?,
        None => problem.set_y().center(),
    };
    let (step_y, _) = inner_stepsizes(problem, &x, &y, &problem.set_w().center())?;

    let mut working: VecDeque<Vec<f64>> = VecDeque::new();
    working.push_back(problem.set_w().center());
    let mut multipliers: VecDeque<f64> = VecDeque::new();
    multipliers.push_back(0.0);

    let mut trace = IterateTrace {
        records: Vec::new(),
        total_iters: 0,
        counts: Default::default(),
        method: "discretization".into(),
    };
    let mut violations = Vec::new();
    let mut rounds_run = 0;
    let mut k = 0usize;

    'outer: for _round in 0..config.outer_rounds {
        rounds_run += 1;
        for _ in 0..config.inner_pd_iterations {
            let gphi = problem.grad_x_phi(&x, &y);
            if !all_finite(&gphi) {
                return Err(abort(&mut trace, &counted, "objective gradient", k));
            }
            let mut grad = gphi;
            let mut worst = (f64::NEG_INFINITY, 0usize);
            let mut psi_vals = Vec::with_capacity(working.len());
            for (i, (w_i, &lam)) in working.iter().zip(multipliers.iter()).enumerate() {
                let v = problem.psi(&x, w_i);
                if !v.is_finite() {
                    return Err(abort(&mut trace, &counted, "constraint value", k));
                }
                psi_vals.push(v);
                if v > worst.0 {
                    worst = (v, i);
                }
                if lam != 0.0 {
                    let gpsi = problem.grad_x_psi(&x, w_i);
                    if !all_finite(&gpsi) {
                        return Err(abort(&mut trace, &counted, "constraint gradient", k));
                    }
                    axpy(&mut grad, lam, &gpsi);
                }
            }

            if k % config.record_stride == 0 {
                let w_worst = &working[worst.1];
                let gpsi_worst = problem.grad_x_psi(&x, w_worst);
                let lambda_total: f64 = multipliers.iter().sum();
                trace.records.push(TraceRecord {
                    k,
                    x: x.clone(),
                    y: y.clone(),
                    w: w_worst.clone(),
                    lambda: lambda_total,
                    zeta: worst.0.max(0.0) * norm(&gpsi_worst),
                    rho: norm(&gpsi_worst),
                    alpha: 0.0,
                    d_norm: norm(&grad),
                    psi_val: worst.0,
                    phi_val: problem.phi(&x, &y),
                    elapsed_ns: clock.elapsed().as_nanos() as u64,
                });
            }

            for v in grad.iter_mut() {
                *v = -*v;
            }
            axpy(&mut x, config.primal_step, &grad);
            if !all_finite(&x) {
                return Err(abort(&mut trace, &counted, "primal iterate", k));
            }

            let ry = inner_maximize(
                |u| problem.phi(&x, u),
                |u| problem.grad_y_phi(&x, u),
                problem.set_y(),
                &y,
                &AscentOpts::plain(1, step_y),
            );
            match ry {
                Ok(r) => y = r.maximizer,
                Err(_) => return Err(abort(&mut trace, &counted, "objective dual ascent", k)),
            }

            // Projected multiplier ascent on the working set.
            for (lam, w_i) in multipliers.iter_mut().zip(working.iter()) {
                let v = problem.psi(&x, w_i);
                *lam = (*lam + config.multiplier_step * v).max(0.0);
            }
            k += 1;
        }

        // Separation: most violated index to evaluation grade.
        let w_max = evaluation_grade_max(problem, &x, DualBlock::W, config.eval_steps)?;
        let violation = problem.psi(&x, &w_max);
        violations.push(violation);
        if violation > config.violation_tolerance {
            working.push_back(w_max);
            multipliers.push_back(0.0);
            while working.len() > config.max_active_constraints {
                working.pop_front();
                multipliers.pop_front();
            }
            if working.is_empty() {
                return Err(Error::invalid("working set emptied by eviction"));
            }
        } else {
            break 'outer;
        }
    }

    // Final record against the currently most violated working-set entry.
    let (final_psi, final_idx) = working
        .iter()
        .map(|w_i| problem.psi(&x, w_i))
        .enumerate()
        .map(|(i, v)| (v, i))
        .fold((f64::NEG_INFINITY, 0), |acc, cur| if cur.0 > acc.0 { cur } else { acc });
    let w_worst = working[final_idx].clone();
    let gpsi = problem.grad_x_psi(&x, &w_worst);
    let gphi = problem.grad_x_phi(&x, &y);
    let lambda_total: f64 = multipliers.iter().sum();
    trace.records.push(TraceRecord {
        k,
        x: x.clone(),
        y: y.clone(),
        w: w_worst,
        lambda: lambda_total,
        zeta: final_psi.max(0.0) * norm(&gpsi),
        rho: norm(&gpsi),
        alpha: 0.0,
        d_norm: norm(&gphi),
        psi_val: final_psi,
        phi_val: problem.phi(&x, &y),
        elapsed_ns: clock.elapsed().as_nanos() as u64,
    });
    trace.total_iters = k;
    trace.counts = counted.counts();
    Ok(DiscretizationOutcome {
        trace,
        rounds_run,
        violations,
        working_set: working.into_iter().collect(),
    })
}
