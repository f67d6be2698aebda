//! Per-iteration recording shared by the main solver and the baselines.

use crate::problem::OracleCounts;

/// One recorded iterate.
#[derive(Clone, Debug)]
pub struct TraceRecord {
    pub k: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub w: Vec<f64>,
    pub lambda: f64,
    pub zeta: f64,
    pub rho: f64,
    pub alpha: f64,
    pub d_norm: f64,
    pub psi_val: f64,
    pub phi_val: f64,
    /// Monotonic-clock nanoseconds since the start of the run. Excluded from
    /// determinism comparisons.
    pub elapsed_ns: u64,
}

/// Record of a full run: iterates at stride multiples plus the final iterate,
/// and the oracle budget the run consumed.
#[derive(Clone, Debug, Default)]
pub struct IterateTrace {
    pub records: Vec<TraceRecord>,
    /// Outer iterations actually executed.
    pub total_iters: usize,
    pub counts: OracleCounts,
    /// Label of the method that produced the trace.
    pub method: String,
}

impl IterateTrace {
    pub fn final_record(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// Numeric equality ignoring wall-clock fields; bitwise on every float.
    pub fn same_numeric(&self, other: &IterateTrace) -> bool {
        if self.total_iters != other.total_iters
            || self.records.len() != other.records.len()
            || self.counts != other.counts
        {
            return false;
        }
        let veq = |a: &[f64], b: &[f64]| {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
        };
        let feq = |x: f64, y: f64| x.to_bits() == y.to_bits();
        self.records.iter().zip(&other.records).all(|(a, b)| {
            a.k == b.k
                && veq(&a.x, &b.x)
                && veq(&a.y, &b.y)
                && veq(&a.w, &b.w)
                && feq(a.lambda, b.lambda)
                && feq(a.zeta, b.zeta)
                && feq(a.rho, b.rho)
                && feq(a.alpha, b.alpha)
                && feq(a.d_norm, b.d_norm)
                && feq(a.psi_val, b.psi_val)
                && feq(a.phi_val, b.phi_val)
        })
    }
}
