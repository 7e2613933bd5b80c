//! Quantile-function calculus: `Q`, its integral `H`, the generalized
//! inverse `G`, decay sequences with their generalized inverse, and the
//! integral condition functionals built on them.

mod conditions;
mod decay;
mod quantile;

pub use conditions::{
    alpha_rate, condition_functional_alpha, condition_functional_tau, condition_report,
    exceedance_boundary, tau_rate, weak_lp_tail_functional, ConditionKind, ConditionReport, Trend,
};
pub use decay::{DecayIndex, DecaySeq};
pub use quantile::QuantileFn;

use crate::error::Result;

/// `Q(u)`.
pub fn quantile_eval(q: &QuantileFn, u: f64) -> Result<f64> {
    q.eval(u)
}

/// `inf{k : delta_k <= u}`.
pub fn decay_inverse(delta: &DecaySeq, u: f64) -> DecayIndex {
    delta.inverse(u)
}

/// `H(x) = int_0^x Q(u) du`.
pub fn integrated_quantile(q: &QuantileFn, x: f64) -> Result<f64> {
    q.integrated(x)
}

/// `G(y) = inf{x : H(x) >= y}`, capped at 1.
pub fn integrated_quantile_inverse(q: &QuantileFn, y: f64) -> Result<f64> {
    q.integrated_inverse(y)
}
