//! Evaluation-grade implicit functions `f(x) = max_y phi(x, y)` and
//! `g(x) = max_w psi(x, w)`, their Danskin gradients, and the three KKT
//! residuals used to score iterates.
//!
//! Metrics must be much more accurate than the solver's inexact inner solves
//! or the residuals are meaningless: the implicit values use the problem's
//! exact inner-max callback when it has one, and otherwise a long ascent run
//! from the set center.

use serde::{Deserialize, Serialize};

use crate::linalg::norm;
use crate::problem::{Point, Problem};
use crate::schedule::DualBlock;
use crate::solver::evaluation_grade_max;
use crate::trace::IterateTrace;
use crate::{Error, Result};

/// Stationarity, infeasibility, and slackness residuals at a point, together
/// with the implicit values they were computed from.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KktReport {
    /// `|| grad f(x) + lambda * grad g(x) ||`
    pub stationarity: f64,
    /// `[g(x)]_+`
    pub infeasibility: f64,
    /// `| lambda * g(x) |`
    pub slackness: f64,
    pub f_value: f64,
    pub g_value: f64,
    /// Ascent steps used per inexact evaluation-grade solve (0 when the
    /// exact callback was used).
    pub eval_inner_steps: usize,
}

impl KktReport {
    /// The scalar the best-iterate selection minimizes.
    pub fn worst(&self) -> f64 {
        self.stationarity.max(self.infeasibility).max(self.slackness)
    }
}

/// Which implicit function to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImplicitFn {
    F,
    G,
}

/// Evaluation-grade value, Danskin gradient, and maximizer of the implicit
/// max function at `x`.
pub fn implicit_value_and_grad(
    problem: &dyn Problem,
    x: &Point,
    which: ImplicitFn,
    eval_steps: usize,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if x.dim() != problem.dim_x() {
        return Err(Error::DimensionMismatch {
            context: "implicit evaluation point",
            expected: problem.dim_x(),
            got: x.dim(),
        });
    }
    let xs = x.as_slice();
    let block = match which {
        ImplicitFn::F => DualBlock::Y,
        ImplicitFn::G => DualBlock::W,
    };
    let maximizer = evaluation_grade_max(problem, xs, block, eval_steps)?;
    let (value, grad) = match which {
        ImplicitFn::F => (problem.phi(xs, &maximizer), problem.grad_x_phi(xs, &maximizer)),
        ImplicitFn::G => (problem.psi(xs, &maximizer), problem.grad_x_psi(xs, &maximizer)),
    };
    if !value.is_finite() {
        return Err(Error::non_finite("implicit value", 0));
    }
    Ok((value, grad, maximizer))
}

/// The three KKT residuals at `(x, lambda)`.
pub fn kkt_residuals(
    problem: &dyn Problem,
    x: &Point,
    lambda: f64,
    eval_steps: usize,
) -> Result<KktReport> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("multiplier must be finite and nonnegative, got {lambda}")));
    }
    let (f_value, grad_f, _) = implicit_value_and_grad(problem, x, ImplicitFn::F, eval_steps)?;
    let (g_value, grad_g, _) = implicit_value_and_grad(problem, x, ImplicitFn::G, eval_steps)?;
    let combined: Vec<f64> = grad_f
        .iter()
        .zip(&grad_g)
        .map(|(gf, gg)| gf + lambda * gg)
        .collect();
    let used_exact =
        problem.exact_max_y(x.as_slice()).is_some() && problem.exact_max_w(x.as_slice()).is_some();
    Ok(KktReport {
        stationarity: norm(&combined),
        infeasibility: g_value.max(0.0),
        slackness: (lambda * g_value).abs(),
        f_value,
        g_value,
        eval_inner_steps: if used_exact { 0 } else { eval_steps },
    })
}

/// Scores every recorded iterate and returns the index (into
/// `trace.records`) minimizing the max of the three residuals, ties broken
/// by the earlier iterate.
pub fn best_iterate(
    trace: &IterateTrace,
    problem: &dyn Problem,
    eval_steps: usize,
) -> Result<(usize, KktReport)> {
    if trace.records.is_empty() {
        return Err(Error::invalid("cannot score an empty trace"));
    }
    let mut best: Option<(usize, KktReport)> = None;
    for (idx, rec) in trace.records.iter().enumerate() {
        let x = Point::new(rec.x.clone())?;
        let report = kkt_residuals(problem, &x, rec.lambda, eval_steps)?;
        let better = match &best {
            None => true,
            Some((_, b)) => report.worst() < b.worst(),
        };
        if better {
            best = Some((idx, report));
        }
    }
    Ok(best.unwrap())
}
