//! Synthetic quadratic testbed.
//!
//! The objective coupling is `phi(x, y) = y'(Ax + b) - (eta/2)||y||^2` over
//! `Y = R^m`, so the implicit objective has the closed form
//! `f(x) = ||Ax + b||^2 / (2 eta)` with maximizer `y*(x) = (Ax + b)/eta`.
//! The constraint coupling is
//! `psi(x, w) = w'(Cx - c) - (reg*l/2)||w - 1/l||^2 - r` over the simplex,
//! so `g(x)` is the regularized-simplex closed form shifted by `-r`.
//!
//! Instances are generated so the origin is strictly feasible while the
//! unconstrained minimizer of `f` is infeasible: the threshold `r` is placed
//! between the raw constraint values at those two points, which keeps the
//! feasible set nonempty and the constraint active at the solution. Draws for
//! which the two levels are too close are redrawn deterministically from the
//! same seeded stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{axpy, dot, norm};
use crate::problem::{Concavity, FeasibleSet, Problem, Smoothness};
use crate::projection::closed_form_regularized_simplex_max;
use crate::{Error, Result};

/// Row-major dense matrix, just large enough for the testbed.
#[derive(Clone, Debug)]
pub(crate) struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    fn from_fn(rows: usize, cols: usize, mut f: impl FnMut() -> f64) -> Self {
        let data = (0..rows * cols).map(|_| f()).collect();
        Matrix { rows, cols, data }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| dot(&self.data[i * self.cols..(i + 1) * self.cols], v))
            .collect()
    }

    pub fn mul_transpose_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            axpy(&mut out, v[i], &self.data[i * self.cols..(i + 1) * self.cols]);
        }
        out
    }

    fn frobenius(&self) -> f64 {
        norm(&self.data)
    }
}

/// Gaussian elimination with partial pivoting for the tiny dense systems the
/// generator needs.
fn solve_dense(a: &Matrix, rhs: &[f64]) -> Option<Vec<f64>> {
    let n = a.rows;
    debug_assert_eq!(a.rows, a.cols);
    let mut m = a.data.clone();
    let mut b = rhs.to_vec();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))?;
        if m[pivot * n + col].abs() < 1e-14 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                m.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        for row in col + 1..n {
            let factor = m[row * n + col] / m[col * n + col];
            for k in col..n {
                m[row * n + k] -= factor * m[col * n + k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= m[row * n + k] * x[k];
        }
        x[row] = acc / m[row * n + row];
    }
    Some(x)
}

#[derive(Clone, Debug)]
pub struct QuadraticTestbed {
    a: Matrix,
    b: Vec<f64>,
    c_mat: Matrix,
    c_vec: Vec<f64>,
    eta: f64,
    reg: f64,
    r: f64,
    set_y: FeasibleSet,
    set_w: FeasibleSet,
    smoothness: Smoothness,
}

/// Certified reference solution of a testbed instance.
#[derive(Clone, Debug)]
pub struct KktReference {
    pub x: Vec<f64>,
    pub lambda: f64,
    /// `[g(x)]_+` at the reference point; kept strictly positive but tiny so
    /// the indicator gate stays open at the reference.
    pub residual_feasibility: f64,
    pub residual_stationarity: f64,
}

impl QuadraticTestbed {
    pub fn threshold(&self) -> f64 {
        self.r
    }

    /// Raw (unshifted) constraint level at `x`.
    fn constraint_level(&self, x: &[f64]) -> f64 {
        let loss: Vec<f64> = self
            .c_mat
            .mul_vec(x)
            .iter()
            .zip(&self.c_vec)
            .map(|(v, c)| v - c)
            .collect();
        closed_form_regularized_simplex_max(&loss, self.reg).unwrap().1
    }

    /// Closed-form `f` and its gradient, for tests and the KKT generator.
    pub fn f_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let residual: Vec<f64> = self
            .a
            .mul_vec(x)
            .iter()
            .zip(&self.b)
            .map(|(v, b)| v + b)
            .collect();
        let value = 0.5 * dot(&residual, &residual) / self.eta;
        let grad = self
            .a
            .mul_transpose_vec(&residual)
            .iter()
            .map(|v| v / self.eta)
            .collect();
        (value, grad)
    }

    /// Closed-form `g` and its Danskin gradient.
    pub fn g_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let loss: Vec<f64> = self
            .c_mat
            .mul_vec(x)
            .iter()
            .zip(&self.c_vec)
            .map(|(v, c)| v - c)
            .collect();
        let (w_star, value) = closed_form_regularized_simplex_max(&loss, self.reg).unwrap();
        (value - self.r, self.c_mat.mul_transpose_vec(&w_star))
    }
}

impl Problem for QuadraticTestbed {
    fn dim_x(&self) -> usize {
        self.a.cols
    }

    fn phi(&self, x: &[f64], y: &[f64]) -> f64 {
        let ax_b: Vec<f64> = self.a.mul_vec(x).iter().zip(&self.b).map(|(v, b)| v + b).collect();
        dot(y, &ax_b) - 0.5 * self.eta * dot(y, y)
    }

    fn grad_x_phi(&self, _x: &[f64], y: &[f64]) -> Vec<f64> {
        self.a.mul_transpose_vec(y)
    }

    fn grad_y_phi(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.a
            .mul_vec(x)
            .iter()
            .zip(&self.b)
            .zip(y)
            .map(|((v, b), yi)| v + b - self.eta * yi)
            .collect()
    }

    fn psi(&self, x: &[f64], w: &[f64]) -> f64 {
        let loss: Vec<f64> = self
            .c_mat
            .mul_vec(x)
            .iter()
            .zip(&self.c_vec)
            .map(|(v, c)| v - c)
            .collect();
        let l = w.len() as f64;
        let uniform = 1.0 / l;
        let pen: f64 = w.iter().map(|wi| (wi - uniform) * (wi - uniform)).sum();
        dot(w, &loss) - 0.5 * self.reg * l * pen - self.r
    }

    fn grad_x_psi(&self, _x: &[f64], w: &[f64]) -> Vec<f64> {
        self.c_mat.mul_transpose_vec(w)
    }

    fn grad_w_psi(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        let l = w.len() as f64;
        let uniform = 1.0 / l;
        self.c_mat
            .mul_vec(x)
            .iter()
            .zip(&self.c_vec)
            .zip(w)
            .map(|((v, c), wi)| v - c - self.reg * l * (wi - uniform))
            .collect()
    }

    fn set_y(&self) -> &FeasibleSet {
        &self.set_y
    }

    fn set_w(&self) -> &FeasibleSet {
        &self.set_w
    }

    fn smoothness(&self) -> Option<&Smoothness> {
        Some(&self.smoothness)
    }

    fn exact_max_y(&self, x: &[f64]) -> Option<(Vec<f64>, f64)> {
        let (value, _) = self.f_and_grad(x);
        let y_star: Vec<f64> = self
            .a
            .mul_vec(x)
            .iter()
            .zip(&self.b)
            .map(|(v, b)| (v + b) / self.eta)
            .collect();
        Some((y_star, value))
    }

    fn exact_max_w(&self, x: &[f64]) -> Option<(Vec<f64>, f64)> {
        let loss: Vec<f64> = self
            .c_mat
            .mul_vec(x)
            .iter()
            .zip(&self.c_vec)
            .map(|(v, c)| v - c)
            .collect();
        let (w_star, value) = closed_form_regularized_simplex_max(&loss, self.reg).ok()?;
        Some((w_star, value - self.r))
    }
}

/// Minimum-norm least-squares solution of `min ||Ax + b||`.
fn least_squares_min_norm(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let (m, n) = (a.rows, a.cols);
    let neg_b: Vec<f64> = b.iter().map(|v| -v).collect();
    if m <= n {
        // x = A' z with (A A') z = -b
        let mut gram = Matrix { rows: m, cols: m, data: vec![0.0; m * m] };
        for i in 0..m {
            for j in 0..m {
                gram.data[i * m + j] = dot(
                    &a.data[i * n..(i + 1) * n],
                    &a.data[j * n..(j + 1) * n],
                ) + if i == j { 1e-12 } else { 0.0 };
            }
        }
        let z = solve_dense(&gram, &neg_b)?;
        Some(a.mul_transpose_vec(&z))
    } else {
        // (A' A) x = -A' b
        let mut gram = Matrix { rows: n, cols: n, data: vec![0.0; n * n] };
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..m {
                    acc += a.data[k * n + i] * a.data[k * n + j];
                }
                gram.data[i * n + j] = acc + if i == j { 1e-12 } else { 0.0 };
            }
        }
        let rhs = a.mul_transpose_vec(&neg_b);
        solve_dense(&gram, &rhs)
    }
}

/// Accelerated gradient descent on `f + lambda * g` until the gradient norm
/// falls below `tol`. Returns the final iterate.
fn minimize_lagrangian(tb: &QuadraticTestbed, lambda: f64, start: &[f64], tol: f64) -> Vec<f64> {
    let lip = tb.smoothness.lip_f() + lambda * tb.smoothness.lip_g() + 1e-12;
    let step = 1.0 / lip;
    let mut x = start.to_vec();
    let mut x_prev = x.clone();
    let mut t = 0usize;
    let mut last_value = f64::INFINITY;
    for _ in 0..60_000 {
        let beta = t as f64 / (t as f64 + 3.0);
        let probe: Vec<f64> = x
            .iter()
            .zip(&x_prev)
            .map(|(xi, pi)| xi + beta * (xi - pi))
            .collect();
        let (fv, mut grad) = tb.f_and_grad(&probe);
        let (gv, ggrad) = tb.g_and_grad(&probe);
        axpy(&mut grad, lambda, &ggrad);
        if norm(&grad) <= tol {
            return probe;
        }
        // Restart the momentum when the value stops decreasing.
        let value = fv + lambda * gv;
        if value > last_value {
            t = 0;
            x_prev = x.clone();
            last_value = f64::INFINITY;
            continue;
        }
        last_value = value;
        let next: Vec<f64> = probe.iter().zip(&grad).map(|(p, g)| p - step * g).collect();
        x_prev = std::mem::replace(&mut x, next);
        t += 1;
    }
    x
}

/// Newton iteration on the KKT system `grad f + lambda grad g = 0, g = 0`.
/// The constraint's Hessian is piecewise constant (it depends only on the
/// support of the inner maximizer), so close to the solution the iteration is
/// exact. Returns `None` when it fails to settle, e.g. because the active
/// face keeps changing.
fn kkt_newton(tb: &QuadraticTestbed, x0: &[f64], lambda0: f64) -> Option<(Vec<f64>, f64)> {
    let n = tb.a.cols;
    let l = tb.c_mat.rows;
    let mut x = x0.to_vec();
    let mut lambda = lambda0;

    // Hessian of f: A'A / eta.
    let mut h_f = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..tb.a.rows {
                acc += tb.a.data[k * n + i] * tb.a.data[k * n + j];
            }
            h_f[i * n + j] = acc / tb.eta;
        }
    }

    for _ in 0..60 {
        let loss: Vec<f64> = tb
            .c_mat
            .mul_vec(&x)
            .iter()
            .zip(&tb.c_vec)
            .map(|(v, c)| v - c)
            .collect();
        let target: Vec<f64> = loss
            .iter()
            .map(|li| 1.0 / l as f64 + li / (tb.reg * l as f64))
            .collect();
        let w_star = crate::projection::project_simplex(&target).ok()?;
        let support: Vec<usize> = (0..l).filter(|&i| w_star[i] > 0.0).collect();
        if support.is_empty() {
            return None;
        }
        let (g_val, _) = tb.g_and_grad(&x);
        let ggrad = tb.c_mat.mul_transpose_vec(&w_star);
        let (_, fgrad) = tb.f_and_grad(&x);
        let mut res = vec![0.0; n + 1];
        for i in 0..n {
            res[i] = fgrad[i] + lambda * ggrad[i];
        }
        res[n] = g_val;
        if norm(&res) <= 1e-13 {
            return Some((x, lambda));
        }

        // Hessian of g on the current face: C' (I_S - 1_S 1_S'/|S|) C / (reg*l).
        let s = support.len() as f64;
        let mut kkt = Matrix { rows: n + 1, cols: n + 1, data: vec![0.0; (n + 1) * (n + 1)] };
        // projected rows of C over the support
        let mut mean_row = vec![0.0; n];
        for &i in &support {
            for j in 0..n {
                mean_row[j] += tb.c_mat.data[i * n + j] / s;
            }
        }
        for a in 0..n {
            for b in 0..n {
                let mut acc = 0.0;
                for &i in &support {
                    let ca = tb.c_mat.data[i * n + a] - mean_row[a];
                    let cb = tb.c_mat.data[i * n + b] - mean_row[b];
                    acc += ca * cb;
                }
                kkt.data[a * (n + 1) + b] =
                    h_f[a * n + b] + lambda * acc / (tb.reg * l as f64);
            }
            kkt.data[a * (n + 1) + n] = ggrad[a];
            kkt.data[n * (n + 1) + a] = ggrad[a];
        }
        let rhs: Vec<f64> = res.iter().map(|v| -v).collect();
        let delta = solve_dense(&kkt, &rhs)?;
        for i in 0..n {
            x[i] += delta[i];
        }
        lambda += delta[n];
        if !lambda.is_finite() || lambda < 0.0 {
            return None;
        }
    }
    None
}

/// Locates the active multiplier with a coarse bisection on first-order
/// Lagrangian solves, polishes the KKT system with Newton, then nudges the
/// point to the strictly infeasible side of the boundary so the indicator
/// gate stays open at the reference. Returns `None` on degenerate draws.
fn certify_kkt(tb: &QuadraticTestbed, x_uc: &[f64]) -> Option<KktReference> {
    const GRAD_TOL: f64 = 1e-8;
    const COARSE: f64 = 1e-4;

    let x0 = minimize_lagrangian(tb, 0.0, x_uc, GRAD_TOL);
    let (g0, _) = tb.g_and_grad(&x0);
    if g0 <= COARSE {
        // Constraint (nearly) inactive at the solution; callers redraw to
        // keep the instance interesting.
        return None;
    }

    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mut x_warm = x0.clone();
    let mut bracketed = false;
    for _ in 0..40 {
        let x_hi = minimize_lagrangian(tb, hi, &x_warm, GRAD_TOL);
        let (g_hi, _) = tb.g_and_grad(&x_hi);
        x_warm = x_hi;
        if g_hi <= 0.0 {
            bracketed = true;
            break;
        }
        lo = hi;
        hi *= 2.0;
    }
    if !bracketed {
        return None;
    }

    let mut x_lo = x0;
    for _ in 0..60 {
        if hi - lo <= 1e-3 * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let x_mid = minimize_lagrangian(tb, mid, &x_lo, GRAD_TOL);
        let (g_mid, _) = tb.g_and_grad(&x_mid);
        if g_mid > 0.0 {
            lo = mid;
            x_lo = x_mid;
        } else {
            hi = mid;
        }
    }

    let lambda_coarse = 0.5 * (lo + hi);
    let x_coarse = minimize_lagrangian(tb, lambda_coarse, &x_lo, GRAD_TOL);
    let (mut x, lambda) = kkt_newton(tb, &x_coarse, lambda_coarse)?;
    if lambda <= 1e-8 {
        return None;
    }

    // Step just across the boundary along grad g: the reference must sit on
    // the infeasible side so the estimated indicator is positive there.
    let (_, ggrad) = tb.g_and_grad(&x);
    let gnorm_sq = dot(&ggrad, &ggrad);
    if gnorm_sq < 1e-16 {
        return None;
    }
    axpy(&mut x, 5e-12 / gnorm_sq, &ggrad);

    let (g_final, ggrad) = tb.g_and_grad(&x);
    if g_final <= 0.0 || g_final > 1e-10 {
        return None;
    }
    let (_, mut grad) = tb.f_and_grad(&x);
    axpy(&mut grad, lambda, &ggrad);
    let stat = norm(&grad);
    if stat > 1e-8 {
        return None;
    }
    Some(KktReference {
        x,
        lambda,
        residual_feasibility: g_final,
        residual_stationarity: stat,
    })
}

/// Generates a testbed instance together with its certified KKT reference.
///
/// Draws are redrawn (deterministically, from the continuing seeded stream)
/// until the construction margin between the strictly feasible origin and
/// the infeasible unconstrained minimizer is wide enough and the reference
/// point certifies.
pub fn make_testbed(
    seed: u64,
    n: usize,
    m: usize,
    l: usize,
) -> Result<(QuadraticTestbed, KktReference)> {
    if n == 0 || m == 0 || l == 0 {
        return Err(Error::invalid("testbed dimensions must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eta = 1.0;
    let reg = 1.0;

    for _attempt in 0..32 {
        let a = Matrix::from_fn(m, n, || rng.random_range(-1.0..1.0));
        let b: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c_mat = Matrix::from_fn(l, n, || rng.random_range(-1.0..1.0));
        let c_vec: Vec<f64> = (0..l).map(|_| rng.random_range(0.5..1.5)).collect();

        let l_xy = a.frobenius().max(1e-9);
        let l_xw = c_mat.frobenius().max(1e-9);
        let smoothness = Smoothness {
            l_xx_phi: 0.0,
            l_xy_phi: l_xy,
            l_yy_phi: eta,
            l_xx_psi: 0.0,
            l_xw_psi: l_xw,
            l_ww_psi: reg * l as f64,
            concavity_phi: Concavity::StronglyConcave(eta),
            concavity_psi: Concavity::StronglyConcave(reg * l as f64),
        };

        let mut tb = QuadraticTestbed {
            a,
            b,
            c_mat,
            c_vec,
            eta,
            reg,
            r: 0.0,
            set_y: FeasibleSet::WholeSpace { dim: m },
            set_w: FeasibleSet::Simplex { dim: l },
            smoothness,
        };

        let Some(x_uc) = least_squares_min_norm(&tb.a, &tb.b) else {
            continue;
        };
        let level_origin = tb.constraint_level(&vec![0.0; n]);
        let level_uc = tb.constraint_level(&x_uc);
        // Place the threshold halfway: the origin ends up strictly feasible,
        // the unconstrained minimizer strictly infeasible.
        if level_uc - level_origin < 0.2 {
            continue;
        }
        tb.r = 0.5 * (level_origin + level_uc);

        if let Some(reference) = certify_kkt(&tb, &x_uc) {
            return Ok((tb, reference));
        }
    }
    Err(Error::invalid(format!(
        "testbed generation failed to certify a KKT reference for seed {seed} after 32 draws"
    )))
}
