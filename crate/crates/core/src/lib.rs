//! Solver library for nonconvex min-max optimization under infinitely many
//! nonconvex constraints:
//!
//! ```text
//! min_x max_{y in Y} phi(x, y)   s.t.   psi(x, w) <= 0  for all w in W
//! ```
//!
//! The primary method is an inexact dynamic-barrier primal-dual scheme: at
//! each iterate a one-constraint QP picks a descent direction that trades off
//! the objective gradient against the constraint gradient, gated by an
//! indicator that switches the constraint off at (estimated) feasible points.
//! The dual blocks `y` and `w` are tracked by a few warm-started projected
//! gradient ascent steps per outer iteration.
//!
//! The crate also ships two comparison baselines (penalized gradient descent
//! multi-ascent, and adaptive discretization with a Lagrangian subsolver),
//! evaluation-grade KKT residual metrics, and two problem families: a
//! quadratic testbed with a certified KKT reference point, and a robust
//! multi-task learning instance built on a small tanh MLP.

pub mod baselines;
pub mod direction;
pub mod linalg;
pub mod metrics;
pub mod problem;
pub mod problems;
pub mod projection;
pub mod schedule;
pub mod solver;
pub mod trace;

mod error;

pub use error::{Error, Result};
pub use problem::{DualPoint, FeasibleSet, OracleCounts, Point, Problem, Smoothness};
pub use schedule::{Schedule, ScheduleMode};
pub use solver::{solve, SolverConfig};
pub use trace::{IterateTrace, TraceRecord};
