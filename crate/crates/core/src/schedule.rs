//! Per-iteration parameter sequences for the outer loop: the barrier weight
//! `alpha_k`, the primal stepsize `gamma`, and the inner ascent step counts
//! `N_k` (objective block) and `M_k` (constraint block).
//!
//! Two modes are provided. Theory mode follows the horizon-dependent power
//! laws that give the stated complexity guarantees; its unknowable analysis
//! constants are exposed as configuration knobs. Practical mode uses the
//! horizon-free tuned sequences used for the experiments.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleMode {
    /// Horizon-dependent sequences: `alpha_k = scale * T^(1/3) / (k+2)^(1+omega)`,
    /// constant `gamma = min(c / T^(1/3), 1 / lip_sum)`, logarithmic inner
    /// step counts driven by the configured contraction factors.
    Theory,
    /// Tuned sequences: `alpha_k = scale / (k+2)^1.001`, configured constant
    /// `gamma`, and `N_k = base_y * ceil(ln(k+2))`, `M_k = base_w * ceil(ln(k+2))`.
    Practical,
}

/// Which dual block an inner step count is requested for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DualBlock {
    Y,
    W,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Schedule {
    /// Outer horizon `T`.
    pub horizon: usize,
    pub mode: ScheduleMode,
    /// Exponent offset of the `alpha` power law; theory mode only.
    #[serde(default = "defaults::omega")]
    pub omega: f64,
    /// Multiplier on the `alpha` sequence (practical mode: the grid value).
    #[serde(default = "defaults::one")]
    pub alpha_scale: f64,
    /// Practical mode: the primal stepsize itself. Theory mode: the scale `c`
    /// standing in for the unknowable constant in `min(c / T^(1/3), 1/lip)`.
    pub gamma: f64,
    /// Lojasiewicz exponent of the squared infeasibility residual.
    #[serde(default = "defaults::theta")]
    pub theta: f64,
    /// Configured contraction factors of the inner ascent, theory mode only.
    #[serde(default = "defaults::delta")]
    pub delta_y: f64,
    #[serde(default = "defaults::delta")]
    pub delta_w: f64,
    /// Practical-mode inner step multipliers.
    #[serde(default = "defaults::base_y")]
    pub inner_base_y: f64,
    #[serde(default = "defaults::base_w")]
    pub inner_base_w: f64,
    /// Hard cap on inner step counts; guards the theory-mode `M_k` branch,
    /// which blows up as the residual vanishes when `theta < 1/2`.
    #[serde(default = "defaults::max_inner")]
    pub max_inner_steps: usize,
}

mod defaults {
    pub fn omega() -> f64 {
        1e-3
    }
    pub fn one() -> f64 {
        1.0
    }
    pub fn theta() -> f64 {
        0.5
    }
    pub fn delta() -> f64 {
        0.9
    }
    pub fn base_y() -> f64 {
        2.0
    }
    pub fn base_w() -> f64 {
        10.0
    }
    pub fn max_inner() -> usize {
        10_000
    }
}

impl Schedule {
    /// A practical-mode schedule with the default knobs.
    pub fn practical(horizon: usize, alpha_scale: f64, gamma: f64) -> Self {
        Schedule {
            horizon,
            mode: ScheduleMode::Practical,
            omega: defaults::omega(),
            alpha_scale,
            gamma,
            theta: defaults::theta(),
            delta_y: defaults::delta(),
            delta_w: defaults::delta(),
            inner_base_y: defaults::base_y(),
            inner_base_w: defaults::base_w(),
            max_inner_steps: defaults::max_inner(),
        }
    }

    /// A theory-mode schedule with the default knobs and scale `c = gamma_c`.
    pub fn theory(horizon: usize, gamma_c: f64) -> Self {
        Schedule {
            horizon,
            mode: ScheduleMode::Theory,
            omega: defaults::omega(),
            alpha_scale: 1.0,
            gamma: gamma_c,
            theta: defaults::theta(),
            delta_y: defaults::delta(),
            delta_w: defaults::delta(),
            inner_base_y: defaults::base_y(),
            inner_base_w: defaults::base_w(),
            max_inner_steps: defaults::max_inner(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::invalid("schedule horizon must be at least 1"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::invalid(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if !(self.omega > 0.0) {
            return Err(Error::invalid(format!("omega must be positive, got {}", self.omega)));
        }
        if !(self.alpha_scale > 0.0) {
            return Err(Error::invalid("alpha_scale must be positive"));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::invalid(format!("theta must lie in (0, 1), got {}", self.theta)));
        }
        for (name, d) in [("delta_y", self.delta_y), ("delta_w", self.delta_w)] {
            if !(d > 0.0 && d < 1.0) {
                return Err(Error::invalid(format!("{name} must lie in (0, 1), got {d}")));
            }
        }
        if !(self.inner_base_y > 0.0 && self.inner_base_w > 0.0) {
            return Err(Error::invalid("inner step multipliers must be positive"));
        }
        if self.max_inner_steps == 0 {
            return Err(Error::invalid("max_inner_steps must be positive"));
        }
        Ok(())
    }

    /// Barrier weight at iteration `k`; strictly decreasing in `k`.
    pub fn alpha_at(&self, k: usize) -> Result<f64> {
        if k >= self.horizon {
            return Err(Error::ScheduleIndex { k, horizon: self.horizon });
        }
        Ok(self.alpha_unchecked(k))
    }

    pub(crate) fn alpha_unchecked(&self, k: usize) -> f64 {
        let kf = (k + 2) as f64;
        match self.mode {
            ScheduleMode::Theory => {
                self.alpha_scale * (self.horizon as f64).cbrt() / kf.powf(1.0 + self.omega)
            }
            ScheduleMode::Practical => self.alpha_scale / kf.powf(1.001),
        }
    }

    /// The constant primal stepsize. Theory mode needs the gradient-Lipschitz
    /// sum `L_f + L_xy` of the instance.
    pub fn gamma_const(&self, lip_sum: Option<f64>) -> Result<f64> {
        match self.mode {
            ScheduleMode::Practical => Ok(self.gamma),
            ScheduleMode::Theory => {
                let lip = lip_sum.ok_or_else(|| {
                    Error::invalid("theory-mode gamma requires the smoothness constants (L_f + L_xy)")
                })?;
                if !(lip > 0.0) {
                    return Err(Error::invalid("lip_sum must be positive"));
                }
                Ok((self.gamma / (self.horizon as f64).cbrt()).min(1.0 / lip))
            }
        }
    }

    /// Inner ascent step count for the given block at iteration `k`.
    ///
    /// Theory mode's constraint-block count has a branch depending on the
    /// current inexact violation `[psi]_+`; pass it (when positive) through
    /// `psi_plus`. Counts floor at 1 and cap at `max_inner_steps`.
    pub fn inner_steps(&self, k: usize, block: DualBlock, psi_plus: Option<f64>) -> usize {
        let raw = match (self.mode, block) {
            (ScheduleMode::Practical, DualBlock::Y) => {
                self.inner_base_y * ((k + 2) as f64).ln().ceil()
            }
            (ScheduleMode::Practical, DualBlock::W) => {
                self.inner_base_w * ((k + 2) as f64).ln().ceil()
            }
            (ScheduleMode::Theory, DualBlock::Y) => {
                2.0 / (1.0 - self.delta_y) * ((k + 1) as f64).ln()
            }
            (ScheduleMode::Theory, DualBlock::W) => {
                let t = self.horizon as f64;
                let base = (1.0f64).max(1.0 / (2.0 * self.theta)) * t.ln();
                let branch = match psi_plus {
                    Some(p) if p > 0.0 => t.ln() + (4.0 * self.theta - 2.0) * p.ln(),
                    _ => f64::NEG_INFINITY,
                };
                base.max(branch) / (1.0 - self.delta_w)
            }
        };
        let stepped = raw.ceil();
        if !stepped.is_finite() || stepped >= self.max_inner_steps as f64 {
            return self.max_inner_steps;
        }
        (stepped as usize).max(1)
    }
}
