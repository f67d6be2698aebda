//! The oracle interface every problem instance implements, plus
//! finite-difference gradient verification.
//!
//! A problem exposes value/gradient callbacks for the objective coupling
//! `phi(x, y)` and the constraint coupling `psi(x, w)`, together with
//! descriptors of the dual feasible sets `Y` and `W`. Oracles are read-only:
//! callbacks take `&self`, return freshly allocated vectors, and must be safe
//! to call from several workers at once.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::linalg::all_finite;
use crate::{Error, Result};

/// A primal iterate `x`. Construction rejects non-finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("point must have at least one coordinate"));
        }
        if !all_finite(&coords) {
            return Err(Error::non_finite("point coordinate", 0));
        }
        Ok(Point(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// A dual iterate (`y` or `w`). Same finiteness contract as [`Point`].
#[derive(Clone, Debug, PartialEq)]
pub struct DualPoint(Vec<f64>);

impl DualPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("dual point must have at least one coordinate"));
        }
        if !all_finite(&coords) {
            return Err(Error::non_finite("dual point coordinate", 0));
        }
        Ok(DualPoint(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// The closed convex sets supported for the dual blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FeasibleSet {
    /// All of `R^dim`.
    WholeSpace { dim: usize },
    /// The unit probability simplex in `R^dim`.
    Simplex { dim: usize },
    /// Componentwise bounds `lower <= u <= upper`.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Euclidean ball of positive radius.
    EuclideanBall { center: Vec<f64>, radius: f64 },
}

impl FeasibleSet {
    pub fn dim(&self) -> usize {
        match self {
            FeasibleSet::WholeSpace { dim } | FeasibleSet::Simplex { dim } => *dim,
            FeasibleSet::Box { lower, .. } => lower.len(),
            FeasibleSet::EuclideanBall { center, .. } => center.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FeasibleSet::WholeSpace { dim } | FeasibleSet::Simplex { dim } => {
                if *dim == 0 {
                    return Err(Error::invalid("feasible set dimension must be positive"));
                }
            }
            FeasibleSet::Box { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(Error::invalid("box bounds must be non-empty and equal length"));
                }
                if lower.iter().zip(upper).any(|(l, u)| l > u) {
                    return Err(Error::invalid("box requires lower <= upper componentwise"));
                }
            }
            FeasibleSet::EuclideanBall { center, radius } => {
                if center.is_empty() {
                    return Err(Error::invalid("ball center must be non-empty"));
                }
                if !(*radius > 0.0) {
                    return Err(Error::invalid("ball radius must be positive"));
                }
            }
        }
        Ok(())
    }

    /// A canonical interior point: uniform vector for the simplex, the center
    /// for balls and boxes, zero for the whole space. Used as the default
    /// dual initializer and as the start of evaluation-grade inner solves.
    pub fn center(&self) -> Vec<f64> {
        match self {
            FeasibleSet::WholeSpace { dim } => vec![0.0; *dim],
            FeasibleSet::Simplex { dim } => vec![1.0 / *dim as f64; *dim],
            FeasibleSet::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| 0.5 * (l + u))
                .collect(),
            FeasibleSet::EuclideanBall { center, .. } => center.clone(),
        }
    }
}

/// How the inner function behaves in its maximization variable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Concavity {
    /// Strongly concave with the given modulus on the feasible set.
    StronglyConcave(f64),
    /// Polyak-Lojasiewicz with the given constant, over the whole space.
    PolyakLojasiewicz(f64),
}

impl Concavity {
    /// The quantity dividing the squared cross-Lipschitz constant in the
    /// gradient-Lipschitz bound of the implicit max function: the modulus
    /// itself when strongly concave, the squared PL constant otherwise.
    pub fn iota(&self) -> f64 {
        match *self {
            Concavity::StronglyConcave(eta) => eta,
            Concavity::PolyakLojasiewicz(c) => c * c,
        }
    }
}

/// Optional smoothness constants of a problem instance. When present, the
/// solver can run in theory mode (stepsize bounds from the constants); when
/// absent the solver must be driven with tuned stepsizes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Smoothness {
    pub l_xx_phi: f64,
    pub l_xy_phi: f64,
    pub l_yy_phi: f64,
    pub l_xx_psi: f64,
    pub l_xw_psi: f64,
    pub l_ww_psi: f64,
    pub concavity_phi: Concavity,
    pub concavity_psi: Concavity,
}

impl Smoothness {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            self.l_xx_phi,
            self.l_yy_phi,
            self.l_xx_psi,
            self.l_ww_psi,
        ];
        if nonneg.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::invalid("smoothness constants must be finite and nonnegative"));
        }
        // The cross terms must be strictly positive.
        if !(self.l_xy_phi > 0.0) || !(self.l_xw_psi > 0.0) {
            return Err(Error::invalid("cross-Lipschitz constants must be strictly positive"));
        }
        if !(self.concavity_phi.iota() > 0.0) || !(self.concavity_psi.iota() > 0.0) {
            return Err(Error::invalid("concavity moduli must be strictly positive"));
        }
        Ok(())
    }

    /// Gradient-Lipschitz constant of the implicit objective
    /// `f(x) = max_y phi(x, y)`.
    pub fn lip_f(&self) -> f64 {
        self.l_yy_phi + self.l_xy_phi * self.l_xy_phi / self.concavity_phi.iota()
    }

    /// Gradient-Lipschitz constant of the implicit constraint
    /// `g(x) = max_w psi(x, w)`.
    pub fn lip_g(&self) -> f64 {
        self.l_ww_psi + self.l_xw_psi * self.l_xw_psi / self.concavity_psi.iota()
    }

    /// The stepsize denominator of the primal update, `L_f + L_xy`.
    pub fn lip_sum(&self) -> f64 {
        self.lip_f() + self.l_xy_phi
    }
}

/// Evaluation and gradient oracles of one problem instance.
///
/// All methods must be pure with respect to observable state: no call mutates
/// the oracle, and returned vectors are freshly allocated. Implementations
/// returning non-finite values are rejected by the callers that consume them.
pub trait Problem: Sync {
    /// Primal dimension `n`.
    fn dim_x(&self) -> usize;

    fn phi(&self, x: &[f64], y: &[f64]) -> f64;
    fn grad_x_phi(&self, x: &[f64], y: &[f64]) -> Vec<f64>;
    fn grad_y_phi(&self, x: &[f64], y: &[f64]) -> Vec<f64>;

    fn psi(&self, x: &[f64], w: &[f64]) -> f64;
    fn grad_x_psi(&self, x: &[f64], w: &[f64]) -> Vec<f64>;
    fn grad_w_psi(&self, x: &[f64], w: &[f64]) -> Vec<f64>;

    fn set_y(&self) -> &FeasibleSet;
    fn set_w(&self) -> &FeasibleSet;

    fn smoothness(&self) -> Option<&Smoothness> {
        None
    }

    /// Exact inner maximization of `phi(x, .)` over `Y`, when the instance
    /// has one in closed form. Returns `(y*, f(x))`.
    fn exact_max_y(&self, _x: &[f64]) -> Option<(Vec<f64>, f64)> {
        None
    }

    /// Exact inner maximization of `psi(x, .)` over `W`. Returns `(w*, g(x))`.
    fn exact_max_w(&self, _x: &[f64]) -> Option<(Vec<f64>, f64)> {
        None
    }
}

/// Counts of oracle invocations, used to budget-match method comparisons.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleCounts {
    pub phi: u64,
    pub psi: u64,
    pub grad_x_phi: u64,
    pub grad_y_phi: u64,
    pub grad_x_psi: u64,
    pub grad_w_psi: u64,
}

impl OracleCounts {
    pub fn total(&self) -> u64 {
        self.phi + self.psi + self.grad_x_phi + self.grad_y_phi + self.grad_x_psi + self.grad_w_psi
    }
}

/// Transparent wrapper that counts every oracle call. Solvers wrap the user
/// problem in one of these so traces can report consumed budget.
pub struct CountedProblem<'a> {
    inner: &'a dyn Problem,
    phi: AtomicU64,
    psi: AtomicU64,
    grad_x_phi: AtomicU64,
    grad_y_phi: AtomicU64,
    grad_x_psi: AtomicU64,
    grad_w_psi: AtomicU64,
}

impl<'a> CountedProblem<'a> {
    pub fn new(inner: &'a dyn Problem) -> Self {
        CountedProblem {
            inner,
            phi: AtomicU64::new(0),
            psi: AtomicU64::new(0),
            grad_x_phi: AtomicU64::new(0),
            grad_y_phi: AtomicU64::new(0),
            grad_x_psi: AtomicU64::new(0),
            grad_w_psi: AtomicU64::new(0),
        }
    }

    pub fn counts(&self) -> OracleCounts {
        OracleCounts {
            phi: self.phi.load(Ordering::Relaxed),
            psi: self.psi.load(Ordering::Relaxed),
            grad_x_phi: self.grad_x_phi.load(Ordering::Relaxed),
            grad_y_phi: self.grad_y_phi.load(Ordering::Relaxed),
            grad_x_psi: self.grad_x_psi.load(Ordering::Relaxed),
            grad_w_psi: self.grad_w_psi.load(Ordering::Relaxed),
        }
    }
}

impl Problem for CountedProblem<'_> {
    fn dim_x(&self) -> usize {
        self.inner.dim_x()
    }

    fn phi(&self, x: &[f64], y: &[f64]) -> f64 {
        self.phi.fetch_add(1, Ordering::Relaxed);
        self.inner.phi(x, y)
    }

    fn grad_x_phi(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.grad_x_phi.fetch_add(1, Ordering::Relaxed);
        self.inner.grad_x_phi(x, y)
    }

    fn grad_y_phi(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.grad_y_phi.fetch_add(1, Ordering::Relaxed);
        self.inner.grad_y_phi(x, y)
    }

    fn psi(&self, x: &[f64], w: &[f64]) -> f64 {
        self.psi.fetch_add(1, Ordering::Relaxed);
        self.inner.psi(x, w)
    }

    fn grad_x_psi(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        self.grad_x_psi.fetch_add(1, Ordering::Relaxed);
        self.inner.grad_x_psi(x, w)
    }

    fn grad_w_psi(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        self.grad_w_psi.fetch_add(1, Ordering::Relaxed);
        self.inner.grad_w_psi(x, w)
    }

    fn set_y(&self) -> &FeasibleSet {
        self.inner.set_y()
    }

    fn set_w(&self) -> &FeasibleSet {
        self.inner.set_w()
    }

    fn smoothness(&self) -> Option<&Smoothness> {
        self.inner.smoothness()
    }

    fn exact_max_y(&self, x: &[f64]) -> Option<(Vec<f64>, f64)> {
        // One exact solve counts as one value evaluation of its block.
        let r = self.inner.exact_max_y(x);
        if r.is_some() {
            self.phi.fetch_add(1, Ordering::Relaxed);
        }
        r
    }

    fn exact_max_w(&self, x: &[f64]) -> Option<(Vec<f64>, f64)> {
        let r = self.inner.exact_max_w(x);
        if r.is_some() {
            self.psi.fetch_add(1, Ordering::Relaxed);
        }
        r
    }
}

/// Compares an analytic gradient against central finite differences of the
/// value function. Returns the maximum over coordinates of
/// `|estimate - analytic| / (1 + |analytic|)`.
pub fn check_gradient<V, G>(value_fn: V, grad_fn: G, point: &[f64], step: f64) -> Result<f64>
where
    V: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::invalid(format!("difference step must be positive, got {step}")));
    }
    if !all_finite(point) {
        return Err(Error::non_finite("check point", 0));
    }
    let analytic = grad_fn(point);
    if analytic.len() != point.len() {
        return Err(Error::DimensionMismatch {
            context: "gradient",
            expected: point.len(),
            got: analytic.len(),
        });
    }
    if !all_finite(&analytic) {
        return Err(Error::non_finite("analytic gradient", 0));
    }

    let mut worst = 0.0f64;
    let mut probe = point.to_vec();
    for i in 0..point.len() {
        let orig = probe[i];
        probe[i] = orig + step;
        let up = value_fn(&probe);
        probe[i] = orig - step;
        let down = value_fn(&probe);
        probe[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::non_finite("value evaluation", i));
        }
        let estimate = (up - down) / (2.0 * step);
        let err = (estimate - analytic[i]).abs() / (1.0 + analytic[i].abs());
        worst = worst.max(err);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;

    #[test]
    fn linear_form_gradient_is_exact() {
        let y0 = [1.0, 2.0];
        let err = check_gradient(
            |x| dot(x, &y0),
            |_| y0.to_vec(),
            &[0.0, 0.0],
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-8, "central differences are exact on linear forms, err={err}");
    }

    #[test]
    fn constant_field_has_zero_error() {
        let err = check_gradient(|_| 3.0, |p| vec![0.0; p.len()], &[0.4, -0.7, 2.0], 1e-6).unwrap();
        assert!(err < 1e-9, "err={err}");
    }

    #[test]
    fn rejects_bad_step_and_bad_point() {
        assert!(check_gradient(|_| 0.0, |p| vec![0.0; p.len()], &[0.0], 0.0).is_err());
        assert!(check_gradient(|_| 0.0, |p| vec![0.0; p.len()], &[0.0], -1.0).is_err());
        assert!(check_gradient(|_| 0.0, |p| vec![0.0; p.len()], &[f64::NAN], 1e-5).is_err());
    }

    #[test]
    fn detects_corrupted_gradient() {
        // Quadratic with a deliberately wrong gradient component.
        let err = check_gradient(
            |x: &[f64]| 0.5 * dot(x, x),
            |x| {
                let mut g = x.to_vec();
                g[0] += 0.5;
                g
            },
            &[1.0, 2.0],
            1e-5,
        )
        .unwrap();
        assert!(err > 1e-2, "corruption must be visible, err={err}");
    }

    #[test]
    fn point_rejects_non_finite() {
        assert!(Point::new(vec![1.0, f64::INFINITY]).is_err());
        assert!(DualPoint::new(vec![f64::NAN]).is_err());
        assert!(Point::new(vec![]).is_err());
        assert_eq!(Point::new(vec![1.0, 2.0]).unwrap().dim(), 2);
    }

    #[test]
    fn set_validation_and_centers() {
        assert!(FeasibleSet::Box { lower: vec![0.0], upper: vec![-1.0] }
            .validate()
            .is_err());
        assert!(FeasibleSet::EuclideanBall { center: vec![0.0], radius: 0.0 }
            .validate()
            .is_err());
        assert_eq!(FeasibleSet::Simplex { dim: 4 }.center(), vec![0.25; 4]);
        assert_eq!(
            FeasibleSet::Box { lower: vec![0.0, -2.0], upper: vec![1.0, 0.0] }.center(),
            vec![0.5, -1.0]
        );
    }
}
