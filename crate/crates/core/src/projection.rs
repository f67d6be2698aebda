//! Euclidean projections onto the supported feasible sets and the inexact
//! inner maximization used for the dual updates.

use crate::linalg::{all_finite, axpy, norm_sq};
use crate::problem::FeasibleSet;
use crate::{Error, Result};

/// Output of one inexact inner maximization.
#[derive(Clone, Debug)]
pub struct InnerMaxResult {
    /// Final iterate; always inside the feasible set (it is a projection
    /// output).
    pub maximizer: Vec<f64>,
    /// `h(maximizer)`, re-evaluated at the returned point.
    pub value: f64,
    pub steps_taken: usize,
    /// Objective values along the trajectory (initial point first), when
    /// recording was requested.
    pub value_trajectory: Option<Vec<f64>>,
}

/// Options for [`inner_maximize`].
#[derive(Clone, Copy, Debug)]
pub struct AscentOpts {
    pub steps: usize,
    pub stepsize: f64,
    /// Nesterov-style extrapolation with weight `t / (t + 3)`.
    pub momentum: bool,
    pub record_values: bool,
}

impl AscentOpts {
    pub fn plain(steps: usize, stepsize: f64) -> Self {
        AscentOpts {
            steps,
            stepsize,
            momentum: false,
            record_values: false,
        }
    }
}

/// Euclidean projection onto the unit simplex, by the sort-and-threshold
/// method. Sorting uses the total order on finite floats, so ties are
/// resolved deterministically and traces are bit-reproducible.
pub fn project_simplex(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::invalid("cannot project an empty vector onto the simplex"));
    }
    if !all_finite(v) {
        return Err(Error::non_finite("simplex projection input", 0));
    }
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));

    let mut cumsum = 0.0;
    let mut threshold = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (i as f64 + 1.0);
        if u - t > 0.0 {
            threshold = t;
        }
    }
    Ok(v.iter().map(|&x| (x - threshold).max(0.0)).collect())
}

/// Euclidean projection onto a supported feasible set.
pub fn project_set(v: &[f64], set: &FeasibleSet) -> Result<Vec<f64>> {
    if v.len() != set.dim() {
        return Err(Error::DimensionMismatch {
            context: "projection",
            expected: set.dim(),
            got: v.len(),
        });
    }
    match set {
        FeasibleSet::WholeSpace { .. } => Ok(v.to_vec()),
        FeasibleSet::Simplex { .. } => project_simplex(v),
        FeasibleSet::Box { lower, upper } => Ok(v
            .iter()
            .zip(lower.iter().zip(upper))
            .map(|(&x, (&l, &u))| x.clamp(l, u))
            .collect()),
        FeasibleSet::EuclideanBall { center, radius } => {
            let diff: Vec<f64> = v.iter().zip(center).map(|(x, c)| x - c).collect();
            let dist = norm_sq(&diff).sqrt();
            if dist <= *radius {
                Ok(v.to_vec())
            } else {
                let scale = radius / dist;
                Ok(center.iter().zip(&diff).map(|(c, d)| c + scale * d).collect())
            }
        }
    }
}

/// Projected gradient ascent on `h` over `set`, optionally with Nesterov
/// extrapolation. With momentum off and a stepsize no larger than the inverse
/// gradient-Lipschitz constant of `h`, the value trajectory is nondecreasing.
pub fn inner_maximize<V, G>(
    h_value: V,
    h_grad: G,
    set: &FeasibleSet,
    start: &[f64],
    opts: &AscentOpts,
) -> Result<InnerMaxResult>
where
    V: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    if opts.steps == 0 {
        return Err(Error::invalid("inner maximization requires at least one step"));
    }
    if !(opts.stepsize > 0.0) || !opts.stepsize.is_finite() {
        return Err(Error::invalid(format!(
            "inner ascent stepsize must be positive, got {}",
            opts.stepsize
        )));
    }
    let mut u = project_set(start, set)?;
    let mut u_prev = u.clone();
    let mut trajectory = if opts.record_values {
        Some(vec![h_value(&u)])
    } else {
        None
    };

    for t in 0..opts.steps {
        let mut probe = if opts.momentum && t > 0 {
            let beta = t as f64 / (t as f64 + 3.0);
            let mut p = u.clone();
            for ((p_i, u_i), prev_i) in p.iter_mut().zip(&u).zip(&u_prev) {
                *p_i = u_i + beta * (u_i - prev_i);
            }
            p
        } else {
            u.clone()
        };
        let grad = h_grad(&probe);
        if grad.len() != u.len() {
            return Err(Error::DimensionMismatch {
                context: "inner ascent gradient",
                expected: u.len(),
                got: grad.len(),
            });
        }
        if !all_finite(&grad) {
            return Err(Error::non_finite("inner ascent gradient", t));
        }
        axpy(&mut probe, opts.stepsize, &grad);
        let next = project_set(&probe, set)?;
        u_prev = std::mem::replace(&mut u, next);
        if let Some(tr) = trajectory.as_mut() {
            tr.push(h_value(&u));
        }
    }

    let value = h_value(&u);
    if !value.is_finite() {
        return Err(Error::non_finite("inner ascent value", opts.steps));
    }
    Ok(InnerMaxResult {
        maximizer: u,
        value,
        steps_taken: opts.steps,
        value_trajectory: trajectory,
    })
}

/// Closed form of `max_{w in simplex} loss' w - (reg * m / 2) ||w - 1/m||^2`,
/// by completing the square: the maximizer is the projection of
/// `1/m + loss / (reg * m)` onto the simplex.
pub fn closed_form_regularized_simplex_max(loss: &[f64], reg: f64) -> Result<(Vec<f64>, f64)> {
    if !(reg > 0.0) || !reg.is_finite() {
        return Err(Error::invalid(format!("regularization weight must be positive, got {reg}")));
    }
    if loss.is_empty() {
        return Err(Error::invalid("loss vector must be non-empty"));
    }
    if !all_finite(loss) {
        return Err(Error::non_finite("loss vector", 0));
    }
    let m = loss.len() as f64;
    let uniform = 1.0 / m;
    let target: Vec<f64> = loss.iter().map(|&l| uniform + l / (reg * m)).collect();
    let w = project_simplex(&target)?;
    let value = regularized_simplex_value(&w, loss, reg);
    Ok((w, value))
}

/// `w' loss - (reg * m / 2) ||w - 1/m||^2`, the objective the closed form
/// maximizes.
pub fn regularized_simplex_value(w: &[f64], loss: &[f64], reg: f64) -> f64 {
    let m = loss.len() as f64;
    let uniform = 1.0 / m;
    let lin: f64 = w.iter().zip(loss).map(|(wi, li)| wi * li).sum();
    let pen: f64 = w.iter().map(|wi| (wi - uniform) * (wi - uniform)).sum();
    lin - 0.5 * reg * m * pen
}

/// Deterministic doubling/halving search for an ascent stepsize when no
/// Lipschitz constant is supplied. A candidate passes when a short ascent run
/// from `start` stays finite with a nondecreasing value trajectory. Monotone
/// trajectories survive up to twice the inverse curvature (where the
/// iteration merely oscillates), so the search returns half the largest
/// passing power of two.
pub fn tune_ascent_stepsize<V, G>(h_value: V, h_grad: G, set: &FeasibleSet, start: &[f64]) -> Result<f64>
where
    V: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    const PROBE_STEPS: usize = 4;
    let passes = |s: f64| -> bool {
        let opts = AscentOpts {
            steps: PROBE_STEPS,
            stepsize: s,
            momentum: false,
            record_values: true,
        };
        match inner_maximize(&h_value, &h_grad, set, start, &opts) {
            Ok(r) => {
                let tr = r.value_trajectory.as_ref().unwrap();
                tr.iter().all(|v| v.is_finite())
                    && tr.windows(2).all(|p| p[1] >= p[0] - 1e-12 * (1.0 + p[0].abs()))
            }
            Err(_) => false,
        }
    };

    let mut s = 1.0f64;
    if passes(s) {
        for _ in 0..20 {
            if passes(2.0 * s) {
                s *= 2.0;
            } else {
                break;
            }
        }
        Ok(0.5 * s)
    } else {
        for _ in 0..60 {
            s *= 0.5;
            if passes(s) {
                return Ok(0.5 * s);
            }
        }
        Err(Error::invalid(
            "ascent stepsize search failed: no stepsize down to 2^-60 gives a monotone trajectory",
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dist_sq, norm, sub};

    /// Exact simplex projection by enumerating support faces; independent of
    /// the sort-and-threshold path. Practical for dim <= ~10.
    fn project_simplex_by_faces(v: &[f64]) -> Vec<f64> {
        let d = v.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for mask in 1u32..(1 << d) {
            let support: Vec<usize> = (0..d).filter(|i| mask & (1 << i) != 0).collect();
            let sum: f64 = support.iter().map(|&i| v[i]).sum();
            let shift = (sum - 1.0) / support.len() as f64;
            let mut cand = vec![0.0; d];
            let mut ok = true;
            for &i in &support {
                let ci = v[i] - shift;
                if ci < 0.0 {
                    ok = false;
                    break;
                }
                cand[i] = ci;
            }
            if !ok {
                continue;
            }
            let dist = dist_sq(&cand, v);
            if best.as_ref().map_or(true, |(b, _)| dist < *b) {
                best = Some((dist, cand));
            }
        }
        best.unwrap().1
    }

    fn seeded_vec(seed: u64, dim: usize, scale: f64) -> Vec<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..dim).map(|_| rng.random_range(-scale..scale)).collect()
    }

    #[test]
    fn simplex_projection_fixed_points() {
        let p = project_simplex(&[0.4, 0.3, 0.3]).unwrap();
        assert!(norm(&sub(&p, &[0.4, 0.3, 0.3])) < 1e-15);
        for c in [-3.0, 0.0, 0.7, 42.0] {
            let p = project_simplex(&[c, c, c]).unwrap();
            for x in &p {
                assert!((x - 1.0 / 3.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn simplex_projection_vertex_case_matches_grid() {
        // Brute-force grid over the 2-simplex at resolution 1e-4.
        let v = [2.0, 0.0];
        let p = project_simplex(&v).unwrap();
        let mut best = (f64::INFINITY, vec![0.0; 2]);
        let steps = 10_000;
        for i in 0..=steps {
            let t = i as f64 / steps as f64;
            let cand = [t, 1.0 - t];
            let d = dist_sq(&cand, &v);
            if d < best.0 {
                best = (d, cand.to_vec());
            }
        }
        assert!(norm(&sub(&p, &best.1)) <= 2e-4, "grid minimizer {:?} vs {:?}", best.1, p);
        assert!(norm(&sub(&p, &[1.0, 0.0])) < 1e-12);
    }

    #[test]
    fn simplex_projection_matches_face_enumeration() {
        for dim in [2usize, 3] {
            for s in 0..100u64 {
                let v = seeded_vec(s * 7 + dim as u64, dim, 3.0);
                let fast = project_simplex(&v).unwrap();
                let exact = project_simplex_by_faces(&v);
                assert!(
                    norm(&sub(&fast, &exact)) < 1e-10,
                    "dim={dim} seed={s}: {fast:?} vs {exact:?}"
                );
            }
        }
    }

    #[test]
    fn simplex_projection_output_is_feasible() {
        for s in 0..200u64 {
            let dim = 1 + (s as usize % 12);
            let v = seeded_vec(s, dim, 10.0);
            let p = project_simplex(&v).unwrap();
            assert!(p.iter().all(|&x| x >= 0.0));
            let sum: f64 = p.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "sum={sum}");
        }
    }

    #[test]
    fn simplex_projection_rejects_bad_input() {
        assert!(project_simplex(&[]).is_err());
        assert!(project_simplex(&[1.0, f64::NAN]).is_err());
        assert!(project_simplex(&[f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn set_projection_cases() {
        let ws = FeasibleSet::WholeSpace { dim: 2 };
        assert_eq!(project_set(&[5.0, -3.0], &ws).unwrap(), vec![5.0, -3.0]);

        let bx = FeasibleSet::Box { lower: vec![0.0, 0.0], upper: vec![1.0, 1.0] };
        assert_eq!(project_set(&[2.0, -1.0], &bx).unwrap(), vec![1.0, 0.0]);
        assert_eq!(project_set(&[0.5, 0.25], &bx).unwrap(), vec![0.5, 0.25]);

        let ball = FeasibleSet::EuclideanBall { center: vec![0.0, 0.0], radius: 1.0 };
        let p = project_set(&[3.0, 4.0], &ball).unwrap();
        assert!(norm(&sub(&p, &[0.6, 0.8])) < 1e-15);
        assert_eq!(project_set(&[0.1, 0.2], &ball).unwrap(), vec![0.1, 0.2]);

        assert!(project_set(&[1.0], &ws).is_err());
    }

    #[test]
    fn one_exact_step_on_isotropic_quadratic() {
        // h(u) = -||u - u0||^2 has gradient -2(u - u0); stepsize 1/2 lands on
        // u0 in one step from anywhere.
        let u0 = [1.5, -2.0, 0.25];
        let h = |u: &[f64]| -dist_sq(u, &u0);
        let g = |u: &[f64]| u.iter().zip(&u0).map(|(ui, oi)| -2.0 * (ui - oi)).collect::<Vec<_>>();
        let set = FeasibleSet::WholeSpace { dim: 3 };
        let r = inner_maximize(h, g, &set, &[9.0, 9.0, 9.0], &AscentOpts::plain(1, 0.5)).unwrap();
        assert!(norm(&sub(&r.maximizer, &u0)) < 1e-12);
        assert_eq!(r.steps_taken, 1);
    }

    #[test]
    fn ascent_matches_closed_form_on_regularized_simplex() {
        let loss = [0.9, -0.3, 0.1, 0.4];
        let reg = 1.0;
        let (w_star, v_star) = closed_form_regularized_simplex_max(&loss, reg).unwrap();
        let m = loss.len() as f64;
        let set = FeasibleSet::Simplex { dim: loss.len() };
        let h = |w: &[f64]| regularized_simplex_value(w, &loss, reg);
        let g = |w: &[f64]| {
            w.iter()
                .zip(&loss)
                .map(|(wi, li)| li - reg * m * (wi - 1.0 / m))
                .collect::<Vec<_>>()
        };
        // stepsize 1/L with L = reg * m
        let r = inner_maximize(h, g, &set, &set.center(), &AscentOpts::plain(200, 1.0 / (reg * m)))
            .unwrap();
        assert!((r.value - v_star).abs() < 1e-6);
        assert!(norm(&sub(&r.maximizer, &w_star)) < 1e-6);
    }

    #[test]
    fn zero_steps_is_an_error() {
        let set = FeasibleSet::WholeSpace { dim: 1 };
        let r = inner_maximize(|_| 0.0, |_| vec![0.0], &set, &[0.0], &AscentOpts::plain(0, 0.1));
        assert!(r.is_err());
    }

    #[test]
    fn non_finite_gradient_reports_step_index() {
        let set = FeasibleSet::WholeSpace { dim: 1 };
        let g = |u: &[f64]| vec![if u[0] > 0.5 { f64::NAN } else { 1.0 }];
        let err = inner_maximize(|_| 0.0, g, &set, &[0.0], &AscentOpts::plain(10, 1.0)).unwrap_err();
        match err {
            Error::NonFinite { step, .. } => assert_eq!(step, 1),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn plain_ascent_trajectory_is_nondecreasing() {
        // Strongly concave quadratic with admissible stepsize.
        let q = [4.0, 1.0, 0.5];
        let b = [1.0, -2.0, 0.3];
        let h = |u: &[f64]| {
            -0.5 * u.iter().zip(&q).map(|(ui, qi)| qi * ui * ui).sum::<f64>()
                + u.iter().zip(&b).map(|(ui, bi)| ui * bi).sum::<f64>()
        };
        let g = |u: &[f64]| {
            u.iter()
                .zip(&q)
                .zip(&b)
                .map(|((ui, qi), bi)| bi - qi * ui)
                .collect::<Vec<_>>()
        };
        let set = FeasibleSet::Simplex { dim: 3 };
        let opts = AscentOpts {
            steps: 60,
            stepsize: 1.0 / 4.0,
            momentum: false,
            record_values: true,
        };
        let r = inner_maximize(h, g, &set, &[1.0, 0.0, 0.0], &opts).unwrap();
        let tr = r.value_trajectory.unwrap();
        for pair in tr.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-12, "trajectory decreased: {pair:?}");
        }
    }

    #[test]
    fn linear_convergence_rate_on_strongly_concave_quadratic() {
        // Gap contraction per step is at most (1 - stepsize * eta); check the
        // affine slope of log(gap).
        let q = [5.0, 2.0, 1.0]; // eta = 1, L = 5
        let h = |u: &[f64]| -0.5 * u.iter().zip(&q).map(|(ui, qi)| qi * ui * ui).sum::<f64>();
        let g = |u: &[f64]| u.iter().zip(&q).map(|(ui, qi)| -qi * ui).collect::<Vec<_>>();
        let set = FeasibleSet::WholeSpace { dim: 3 };
        let stepsize = 1.0 / 5.0;
        let eta = 1.0;
        let opts = AscentOpts {
            steps: 40,
            stepsize,
            momentum: false,
            record_values: true,
        };
        let r = inner_maximize(h, g, &set, &[1.0, 1.0, 1.0], &opts).unwrap();
        let tr = r.value_trajectory.unwrap();
        let h_star = 0.0;
        let gaps: Vec<f64> = tr.iter().map(|v| (h_star - v).max(1e-300)).collect();
        // Least-squares slope of log(gap) against step index.
        let logs: Vec<f64> = gaps.iter().map(|g| g.ln()).collect();
        let n = logs.len() as f64;
        let mean_t = (logs.len() - 1) as f64 / 2.0;
        let mean_l = logs.iter().sum::<f64>() / n;
        let mut num = 0.0;
        let mut den = 0.0;
        for (t, l) in logs.iter().enumerate() {
            num += (t as f64 - mean_t) * (l - mean_l);
            den += (t as f64 - mean_t) * (t as f64 - mean_t);
        }
        let slope = num / den;
        let bound = (1.0 - stepsize * eta).ln() + 0.05;
        assert!(slope <= bound, "slope {slope} must be at most {bound}");
    }

    #[test]
    fn momentum_still_converges() {
        let loss = [1.0, 0.2, -0.4];
        let reg = 1.0;
        let (w_star, _) = closed_form_regularized_simplex_max(&loss, reg).unwrap();
        let m = loss.len() as f64;
        let set = FeasibleSet::Simplex { dim: 3 };
        let h = |w: &[f64]| regularized_simplex_value(w, &loss, reg);
        let g = |w: &[f64]| {
            w.iter()
                .zip(&loss)
                .map(|(wi, li)| li - reg * m * (wi - 1.0 / m))
                .collect::<Vec<_>>()
        };
        let opts = AscentOpts {
            steps: 300,
            stepsize: 0.2 / (reg * m),
            momentum: true,
            record_values: false,
        };
        let r = inner_maximize(h, g, &set, &set.center(), &opts).unwrap();
        assert!(norm(&sub(&r.maximizer, &w_star)) < 1e-6);
    }

    #[test]
    fn closed_form_examples() {
        // Zero loss: regularizer alone, maximized at uniform with value 0.
        let (w, v) = closed_form_regularized_simplex_max(&[0.0, 0.0, 0.0], 2.0).unwrap();
        for x in &w {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!(v.abs() < 1e-15);

        // Frozen two-dimensional case; confirmed against the grid oracle below.
        let (w, v) = closed_form_regularized_simplex_max(&[1.0, 0.0], 1.0).unwrap();
        assert!((w[0] - 0.75).abs() < 1e-12 && (w[1] - 0.25).abs() < 1e-12);
        assert!((v - 0.625).abs() < 1e-12);

        // Constant loss: symmetry forces uniform, value is the constant.
        let c = -1.7;
        let (w, v) = closed_form_regularized_simplex_max(&[c; 5], 0.3).unwrap();
        for x in &w {
            assert!((x - 0.2).abs() < 1e-14);
        }
        assert!((v - c).abs() < 1e-14);
    }

    #[test]
    fn closed_form_matches_grid_brute_force() {
        // Grid over the 2-simplex at resolution 1e-5.
        let loss = [1.0, 0.0];
        let reg = 1.0;
        let steps = 100_000;
        let mut best = (f64::NEG_INFINITY, 0.0);
        for i in 0..=steps {
            let t = i as f64 / steps as f64;
            let val = regularized_simplex_value(&[t, 1.0 - t], &loss, reg);
            if val > best.0 {
                best = (val, t);
            }
        }
        let (w, v) = closed_form_regularized_simplex_max(&loss, reg).unwrap();
        assert!((v - best.0).abs() < 1e-9);
        assert!((w[0] - best.1).abs() < 1e-5);
    }

    #[test]
    fn closed_form_matches_iterative_on_random_losses() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for k in 0..50usize {
            let m = 2 + k % 6;
            let loss: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
            let reg = 0.5;
            let (_, v_star) = closed_form_regularized_simplex_max(&loss, reg).unwrap();
            let set = FeasibleSet::Simplex { dim: m };
            let mf = m as f64;
            let steps = 10 * ((k as f64 + 2.0).ln().ceil() as usize).max(1) + 40;
            let r = inner_maximize(
                |w| regularized_simplex_value(w, &loss, reg),
                |w| {
                    w.iter()
                        .zip(&loss)
                        .map(|(wi, li)| li - reg * mf * (wi - 1.0 / mf))
                        .collect::<Vec<_>>()
                },
                &set,
                &set.center(),
                &AscentOpts::plain(steps, 1.0 / (reg * mf)),
            )
            .unwrap();
            assert!((r.value - v_star).abs() < 1e-5, "k={k}: {} vs {v_star}", r.value);
        }
    }

    #[test]
    fn closed_form_rejects_nonpositive_reg() {
        assert!(closed_form_regularized_simplex_max(&[1.0], 0.0).is_err());
        assert!(closed_form_regularized_simplex_max(&[1.0], -2.0).is_err());
    }

    #[test]
    fn stepsize_tuner_finds_admissible_step() {
        // Stiff quadratic: L = 100, so the tuner has to come down to <= ~0.01.
        let h = |u: &[f64]| -50.0 * u[0] * u[0];
        let g = |u: &[f64]| vec![-100.0 * u[0]];
        let set = FeasibleSet::WholeSpace { dim: 1 };
        let s = tune_ascent_stepsize(h, g, &set, &[1.0]).unwrap();
        assert!(s <= 0.011, "tuned stepsize {s} too large for L=100");
        assert!(s >= 1e-4, "tuned stepsize {s} uselessly small");
        let r = inner_maximize(
            h,
            g,
            &set,
            &[1.0],
            &AscentOpts {
                steps: 400,
                stepsize: s,
                momentum: false,
                record_values: true,
            },
        )
        .unwrap();
        let tr = r.value_trajectory.unwrap();
        for pair in tr.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-12);
        }
    }
}
