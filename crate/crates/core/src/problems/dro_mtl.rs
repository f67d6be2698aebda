//! Distributionally robust two-task learning with task priority.
//!
//! The prioritized task's robust loss is the objective coupling
//! `phi(x, y) = sum_i y_i l1_i(x) - (reg*n/2)||y - 1/n||^2` with `y` on the
//! simplex; the secondary task supplies the constraint coupling
//! `psi(x, w) = sum_j w_j l2_j(x) - (reg*m/2)||w - 1/m||^2 - r`. Both inner
//! maximizations have the regularized-simplex closed form over the
//! per-sample loss vectors, which the instance exposes as exact callbacks;
//! the threshold shift commutes with the max because `r` does not depend
//! on `w`.

use crate::linalg::axpy;
use crate::problem::{FeasibleSet, Problem};
use crate::problems::dataset::{DatasetSplit, TaskData};
use crate::problems::mlp::{init_weights, mlp_loss_and_grads, per_sample_losses, MlpSpec};
use crate::projection::{closed_form_regularized_simplex_max, regularized_simplex_value};
use crate::{Error, Result};

pub struct DroMtl {
    spec: MlpSpec,
    task1: TaskData,
    task2: TaskData,
    lambda_reg: f64,
    r: f64,
    set_y: FeasibleSet,
    set_w: FeasibleSet,
}

impl DroMtl {
    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn threshold(&self) -> f64 {
        self.r
    }

    pub fn lambda_reg(&self) -> f64 {
        self.lambda_reg
    }

    /// Seeded parameter initialization matching the instance architecture.
    pub fn initial_weights(&self, seed: u64) -> Vec<f64> {
        init_weights(&self.spec, seed)
    }

    fn task(&self, which: usize) -> &TaskData {
        if which == 0 {
            &self.task1
        } else {
            &self.task2
        }
    }

    fn losses(&self, x: &[f64], which: usize) -> Vec<f64> {
        let t = self.task(which);
        per_sample_losses(&self.spec, x, &t.features, &t.labels, which)
            .expect("loss evaluation on validated task data")
    }

    fn weighted_grad(&self, x: &[f64], which: usize, sample_weights: &[f64]) -> Vec<f64> {
        let t = self.task(which);
        let (_, grad_fn) = mlp_loss_and_grads(&self.spec, x, &t.features, &t.labels, which)
            .expect("gradient evaluation on validated task data");
        grad_fn(sample_weights)
    }
}

impl Problem for DroMtl {
    fn dim_x(&self) -> usize {
        self.spec.param_count()
    }

    fn phi(&self, x: &[f64], y: &[f64]) -> f64 {
        regularized_simplex_value(y, &self.losses(x, 0), self.lambda_reg)
    }

    fn grad_x_phi(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.weighted_grad(x, 0, y)
    }

    fn grad_y_phi(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let losses = self.losses(x, 0);
        let n = losses.len() as f64;
        losses
            .iter()
            .zip(y)
            .map(|(l, yi)| l - self.lambda_reg * n * (yi - 1.0 / n))
            .collect()
    }

    fn psi(&self, x: &[f64], w: &[f64]) -> f64 {
        regularized_simplex_value(w, &self.losses(x, 1), self.lambda_reg) - self.r
    }

    fn grad_x_psi(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        self.weighted_grad(x, 1, w)
    }

    fn grad_w_psi(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        let losses = self.losses(x, 1);
        let m = losses.len() as f64;
        losses
            .iter()
            .zip(w)
            .map(|(l, wi)| l - self.lambda_reg * m * (wi - 1.0 / m))
            .collect()
    }

    fn set_y(&self) -> &FeasibleSet {
        &self.set_y
    }

    fn set_w(&self) -> &FeasibleSet {
        &self.set_w
    }

    fn exact_max_y(&self, x: &[f64]) -> Option<(Vec<f64>, f64)> {
        closed_form_regularized_simplex_max(&self.losses(x, 0), self.lambda_reg).ok()
    }

    fn exact_max_w(&self, x: &[f64]) -> Option<(Vec<f64>, f64)> {
        let (w, value) =
            closed_form_regularized_simplex_max(&self.losses(x, 1), self.lambda_reg).ok()?;
        Some((w, value - self.r))
    }
}

/// Builds the robust two-task instance over a dataset split.
pub fn make_dro_mtl(
    split: DatasetSplit,
    hidden_width: usize,
    lambda_reg: f64,
    r: f64,
) -> Result<DroMtl> {
    if split.task1.features.is_empty() || split.task2.features.is_empty() {
        return Err(Error::invalid("both tasks need at least one sample"));
    }
    if !(lambda_reg > 0.0) {
        return Err(Error::invalid("regularization weight must be positive"));
    }
    if !r.is_finite() {
        return Err(Error::non_finite("constraint threshold", 0));
    }
    let spec = MlpSpec::new(
        split.feature_dim,
        hidden_width,
        [split.task1.num_classes, split.task2.num_classes],
    )?;
    let n = split.task1.features.len();
    let m = split.task2.features.len();
    Ok(DroMtl {
        spec,
        task1: split.task1,
        task2: split.task2,
        lambda_reg,
        r,
        set_y: FeasibleSet::Simplex { dim: n },
        set_w: FeasibleSet::Simplex { dim: m },
    })
}

/// Solves the constraint task's robust learning problem on its own for a
/// fixed iteration budget and returns the robust loss it reaches; callers use
/// the value as the constraint threshold `r`. The descent runs the
/// unconstrained degenerate method (multiplier pinned at zero, exact inner
/// maximization), with a halving stepsize guard for stability.
pub fn calibrate_threshold(
    split: &DatasetSplit,
    hidden_width: usize,
    lambda_reg: f64,
    budget_iters: usize,
    seed: u64,
) -> Result<f64> {
    if budget_iters == 0 {
        return Err(Error::invalid("calibration budget must be at least one iteration"));
    }
    if !(lambda_reg > 0.0) {
        return Err(Error::invalid("regularization weight must be positive"));
    }
    let spec = MlpSpec::new(
        split.feature_dim,
        hidden_width,
        [split.task1.num_classes, split.task2.num_classes],
    )?;
    let task = &split.task2;
    if task.features.is_empty() {
        return Err(Error::invalid("constraint task has no samples"));
    }
    let mut x = init_weights(&spec, seed);
    let robust = |x: &[f64]| -> Result<(Vec<f64>, f64)> {
        let losses = per_sample_losses(&spec, x, &task.features, &task.labels, 1)?;
        closed_form_regularized_simplex_max(&losses, lambda_reg)
    };

    let (_, mut value) = robust(&x)?;
    let mut gamma = 0.5;
    for _ in 0..budget_iters {
        let losses = per_sample_losses(&spec, &x, &task.features, &task.labels, 1)?;
        let (w_star, _) = closed_form_regularized_simplex_max(&losses, lambda_reg)?;
        let grad = {
            let (_, grad_fn) = mlp_loss_and_grads(&spec, &x, &task.features, &task.labels, 1)?;
            grad_fn(&w_star)
        };
        let mut accepted = false;
        for _ in 0..30 {
            let mut candidate = x.clone();
            axpy(&mut candidate, -gamma, &grad);
            match robust(&candidate) {
                Ok((_, v)) if v.is_finite() && v <= value => {
                    x = candidate;
                    value = v;
                    accepted = true;
                    break;
                }
                _ => gamma *= 0.5,
            }
        }
        if !accepted {
            // No descent step down to gamma * 2^-30: the budgeted descent has
            // hit its floor, which is exactly the value callers want.
            break;
        }
        gamma *= 1.25; // recover after conservative halvings
    }
    if !value.is_finite() {
        return Err(Error::non_finite("calibrated threshold", 0));
    }
    Ok(value)
}
