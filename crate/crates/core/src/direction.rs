//! Closed-form solution of the per-iteration QP subproblem
//!
//! ```text
//! min_d ||d + gphi||^2   s.t.   gpsi' d + alpha * ||gpsi|| <= 0,
//! ```
//!
//! where `gphi = grad_x phi(x, y)` and `gpsi = grad_x psi(x, w)`. The affine
//! constraint is only imposed while the indicator `zeta = [psi]_+ ||gpsi||`
//! is strictly positive; at (estimated) feasible points the multiplier is
//! forced to zero and the direction reduces to plain descent on the
//! objective.

use crate::linalg::{all_finite, dot, norm};
use crate::{Error, Result};

/// The QP output at one iterate.
#[derive(Clone, Debug)]
pub struct DirectionResult {
    /// Search direction `d = -gphi - lambda * gpsi`.
    pub d: Vec<f64>,
    /// Gated dual multiplier, always nonnegative.
    pub lambda: f64,
    /// Indicator `[psi]_+ * ||gpsi||`.
    pub zeta: f64,
    /// Barrier `||gpsi||`.
    pub rho: f64,
    /// True iff `zeta > 0`, i.e. the QP constraint was imposed.
    pub constraint_active: bool,
}

/// The dynamic barrier: the norm of the constraint gradient.
pub fn barrier_rho(gpsi: &[f64]) -> Result<f64> {
    if !all_finite(gpsi) {
        return Err(Error::non_finite("constraint gradient", 0));
    }
    Ok(norm(gpsi))
}

/// The feasibility indicator `[psi]_+ * ||gpsi||`. Zero exactly when the
/// estimated constraint value is nonpositive or its gradient vanishes.
pub fn indicator_zeta(psi_val: f64, gpsi: &[f64]) -> Result<f64> {
    if !psi_val.is_finite() {
        return Err(Error::non_finite("constraint value", 0));
    }
    Ok(psi_val.max(0.0) * barrier_rho(gpsi)?)
}

/// Solves the QP subproblem in closed form.
///
/// While the indicator is positive the multiplier is
/// `[-gpsi' gphi + alpha * ||gpsi||]_+ / ||gpsi||^2`; otherwise it is zero.
/// The gate test is exact (`zeta > 0` in floating point): `[psi]_+` vanishes
/// identically at feasible points, so no epsilon is involved.
pub fn compute_direction(
    gphi: &[f64],
    gpsi: &[f64],
    psi_val: f64,
    alpha: f64,
) -> Result<DirectionResult> {
    if gphi.len() != gpsi.len() {
        return Err(Error::DimensionMismatch {
            context: "direction gradients",
            expected: gphi.len(),
            got: gpsi.len(),
        });
    }
    if !all_finite(gphi) {
        return Err(Error::non_finite("objective gradient", 0));
    }
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::invalid(format!("alpha must be finite and nonnegative, got {alpha}")));
    }
    let rho = barrier_rho(gpsi)?;
    if !psi_val.is_finite() {
        return Err(Error::non_finite("constraint value", 0));
    }
    let zeta = psi_val.max(0.0) * rho;
    let constraint_active = zeta > 0.0;

    let lambda = if constraint_active {
        let denom = rho * rho;
        // zeta > 0 guarantees rho > 0 mathematically; the square can still
        // underflow to zero in the denormal range.
        if denom == 0.0 {
            return Err(Error::invalid(
                "constraint gradient norm underflowed to zero while the indicator is positive",
            ));
        }
        (-dot(gpsi, gphi) + alpha * rho).max(0.0) / denom
    } else {
        0.0
    };

    let d: Vec<f64> = gphi
        .iter()
        .zip(gpsi)
        .map(|(gp, gs)| -gp - lambda * gs)
        .collect();

    Ok(DirectionResult {
        d,
        lambda,
        zeta,
        rho,
        constraint_active,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{norm, sub};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent oracle: projection of `-gphi` onto the half-space
    /// `{d : gpsi' d <= -alpha * ||gpsi||}`.
    fn halfspace_projection(gphi: &[f64], gpsi: &[f64], alpha: f64) -> Vec<f64> {
        let target: Vec<f64> = gphi.iter().map(|g| -g).collect();
        let slack = dot(gpsi, &target) + alpha * norm(gpsi);
        if slack <= 0.0 {
            return target;
        }
        let scale = slack / dot(gpsi, gpsi);
        target.iter().zip(gpsi).map(|(t, g)| t - scale * g).collect()
    }

    /// Tiny projected-gradient QP solver for cross-checking a single case.
    fn numeric_qp(gphi: &[f64], gpsi: &[f64], alpha: f64, iters: usize) -> Vec<f64> {
        let n = gphi.len();
        let mut d = vec![0.0; n];
        let step = 0.25;
        for _ in 0..iters {
            // gradient of ||d + gphi||^2 is 2(d + gphi)
            for i in 0..n {
                d[i] -= step * 2.0 * (d[i] + gphi[i]);
            }
            // project back onto the half-space
            let slack = dot(gpsi, &d) + alpha * norm(gpsi);
            if slack > 0.0 {
                let scale = slack / dot(gpsi, gpsi);
                for i in 0..n {
                    d[i] -= scale * gpsi[i];
                }
            }
        }
        d
    }

    fn random_case(rng: &mut ChaCha8Rng, dim: usize) -> (Vec<f64>, Vec<f64>, f64, f64) {
        let gphi: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
        let gpsi: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
        let psi_val = rng.random_range(-1.0..2.0);
        let alpha = rng.random_range(0.0..2.0);
        (gphi, gpsi, psi_val, alpha)
    }

    #[test]
    fn barrier_and_indicator_basics() {
        assert_eq!(barrier_rho(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(barrier_rho(&[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(barrier_rho(&[1.0]).unwrap(), 1.0);
        assert!(barrier_rho(&[f64::NAN]).is_err());

        assert_eq!(indicator_zeta(-0.3, &[7.0, -2.0]).unwrap(), 0.0);
        assert_eq!(indicator_zeta(0.5, &[0.0, 2.0]).unwrap(), 1.0);
        assert_eq!(indicator_zeta(0.5, &[0.0, 0.0]).unwrap(), 0.0);
        assert!(indicator_zeta(f64::INFINITY, &[1.0]).is_err());
    }

    #[test]
    fn gate_closes_at_feasible_points() {
        let r = compute_direction(&[2.0, -1.0], &[5.0, 5.0], -0.1, 1.0).unwrap();
        assert_eq!(r.lambda, 0.0);
        assert!(!r.constraint_active);
        assert_eq!(r.d, vec![-2.0, 1.0]);
    }

    #[test]
    fn active_case_matches_hand_value_and_numeric_qp() {
        let gphi = [1.0, 0.0];
        let gpsi = [0.0, 2.0];
        let r = compute_direction(&gphi, &gpsi, 0.5, 1.0).unwrap();
        assert!((r.lambda - 0.5).abs() < 1e-15);
        assert!(norm(&sub(&r.d, &[-1.0, -1.0])) < 1e-15);
        assert!(r.constraint_active);

        let qp = numeric_qp(&gphi, &gpsi, 1.0, 20_000);
        assert!(norm(&sub(&r.d, &qp)) < 1e-8, "numeric QP {qp:?} vs {:?}", r.d);
    }

    #[test]
    fn bracket_clamps_to_zero() {
        // -gpsi'gphi + alpha*rho = -1 + 0.5 < 0, so lambda clamps to 0 while
        // the constraint is still (weakly) active.
        let r = compute_direction(&[0.0, 1.0], &[0.0, 1.0], 0.5, 0.5).unwrap();
        assert_eq!(r.lambda, 0.0);
        assert!(r.constraint_active);
        assert_eq!(r.d, vec![0.0, -1.0]);
        // The half-space constraint holds strictly here.
        assert!(dot(&[0.0, 1.0], &r.d) + 0.5 * 1.0 <= 1e-10);
    }

    #[test]
    fn matches_halfspace_projection_on_seeded_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut active_seen = 0;
        for _ in 0..1000 {
            let dim = rng.random_range(1..8);
            let (gphi, gpsi, psi_val, alpha) = random_case(&mut rng, dim);
            let r = compute_direction(&gphi, &gpsi, psi_val, alpha).unwrap();
            if r.constraint_active {
                active_seen += 1;
                let oracle = halfspace_projection(&gphi, &gpsi, alpha);
                assert!(
                    norm(&sub(&r.d, &oracle)) < 1e-10,
                    "direction {:?} vs oracle {oracle:?}",
                    r.d
                );
            } else {
                assert_eq!(r.lambda, 0.0);
            }
        }
        assert!(active_seen > 200, "seeded cases should exercise the active branch");
    }

    #[test]
    fn dual_bound_holds_on_seeded_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..1000 {
            let dim = rng.random_range(1..8);
            let (gphi, gpsi, psi_val, alpha) = random_case(&mut rng, dim);
            let r = compute_direction(&gphi, &gpsi, psi_val, alpha).unwrap();
            assert!(r.lambda >= 0.0);
            assert!(
                r.lambda * r.rho <= norm(&gphi) + alpha + 1e-10,
                "dual bound violated: {} > {} + {}",
                r.lambda * r.rho,
                norm(&gphi),
                alpha
            );
            assert!(norm(&r.d) <= 2.0 * norm(&gphi) + alpha + 1e-10);
        }
    }

    #[test]
    fn complementary_slackness_and_constraint_satisfaction() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let dim = rng.random_range(1..8);
            let (gphi, gpsi, psi_val, alpha) = random_case(&mut rng, dim);
            let r = compute_direction(&gphi, &gpsi, psi_val, alpha).unwrap();
            if !r.constraint_active {
                continue;
            }
            let residual = dot(&gpsi, &r.d) + alpha * r.rho;
            if r.lambda > 0.0 {
                assert!(residual.abs() < 1e-10, "active constraint must be tight: {residual}");
            } else {
                assert!(residual <= 1e-10, "inactive multiplier needs slack: {residual}");
            }
            assert!((r.lambda * residual).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_invalid_inputs() {
        assert!(compute_direction(&[1.0], &[1.0], 0.5, -0.1).is_err());
        assert!(compute_direction(&[f64::NAN], &[1.0], 0.5, 0.1).is_err());
        assert!(compute_direction(&[1.0], &[f64::INFINITY], 0.5, 0.1).is_err());
        assert!(compute_direction(&[1.0], &[1.0], f64::NAN, 0.1).is_err());
        assert!(compute_direction(&[1.0, 2.0], &[1.0], 0.5, 0.1).is_err());
    }

    #[test]
    fn direction_is_recomputable_from_parts() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..200 {
            let (gphi, gpsi, psi_val, alpha) = random_case(&mut rng, 5);
            let r = compute_direction(&gphi, &gpsi, psi_val, alpha).unwrap();
            for i in 0..5 {
                let expect = -gphi[i] - r.lambda * gpsi[i];
                assert_eq!(r.d[i], expect, "d must equal -gphi - lambda*gpsi bitwise");
            }
        }
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use crate::linalg::norm;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn lambda_nonnegative_and_dual_bound(
            gphi in proptest::collection::vec(-10.0f64..10.0, 4),
            gpsi in proptest::collection::vec(-10.0f64..10.0, 4),
            psi_val in -5.0f64..5.0,
            alpha in 0.0f64..5.0
        ) {
            let r = compute_direction(&gphi, &gpsi, psi_val, alpha).unwrap();
            prop_assert!(r.lambda >= 0.0);
            prop_assert!(r.lambda * r.rho <= norm(&gphi) + alpha + 1e-10);
            if !r.constraint_active {
                prop_assert_eq!(r.lambda, 0.0);
            }
        }
    }
}
