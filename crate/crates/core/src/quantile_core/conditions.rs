//! Integral condition functionals
//! `t^(p-1) int_0^1 Q(u) 1{R(u) > t} du` for the tau-dependent and
//! strong-mixing rates, and the weak-moment tail functional of the
//! independent case.

use serde::{Deserialize, Serialize};

use super::{DecaySeq, QuantileFn};
use crate::error::{Error, Result};
use crate::numeric;

/// Relative precision of the indicator-boundary bisection.
const BOUNDARY_REL_TOL: f64 = 1e-15;

/// Which rate function enters the indicator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionKind {
    /// `R(u) = (tau/2)^{-1}(H(u)) Q(u)`.
    Tau,
    /// `R(u) = alpha^{-1}(u) Q(u)`.
    Alpha,
    /// Independent case, `R(u) = Q(u)`.
    WeakLp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trend {
    Decreasing,
    Flat,
    Increasing,
    Mixed,
}

/// Functional values over a grid of thresholds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionReport {
    pub kind: ConditionKind,
    pub p: f64,
    pub t_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub verdict_hint: Trend,
}

fn check_args(p: f64, q: &QuantileFn, t: f64) -> Result<()> {
    if !(p > 2.0) {
        return Err(Error::domain(format!("exponent p = {p} must exceed 2")));
    }
    if !(t > 0.0) {
        return Err(Error::domain(format!("threshold t = {t} must be positive")));
    }
    q.validate()?;
    if !q.is_integrable() {
        return Err(Error::Integrability(format!("{q:?} is not integrable")));
    }
    Ok(())
}

/// Rate `u -> (tau/2)^{-1}(H(u)) Q(u)`; an unreachable level counts as
/// infinite.
pub fn tau_rate(q: &QuantileFn, tau: &DecaySeq, u: f64) -> f64 {
    let half = tau.scaled(0.5);
    let k = half.inverse(q.integrated_unchecked(u));
    rate_product(k.as_f64(), q.eval_unchecked(u))
}

/// Rate `u -> alpha^{-1}(u) Q(u)`.
pub fn alpha_rate(q: &QuantileFn, alpha: &DecaySeq, u: f64) -> f64 {
    rate_product(alpha.inverse(u).as_f64(), q.eval_unchecked(u))
}

fn rate_product(index: f64, quantile: f64) -> f64 {
    if index.is_infinite() {
        f64::INFINITY
    } else {
        index * quantile
    }
}

/// `sup{u : R(u) > t}` for a non-increasing rate `R` on `(0, 1]`.
///
/// The exceedance set of a non-increasing function is an initial segment,
/// so it is determined by this one boundary point.
pub fn exceedance_boundary<R: Fn(f64) -> f64>(rate: R, t: f64) -> f64 {
    numeric::boundary_of_initial_segment(|u| u > 0.0 && rate(u) > t, 0.0, 1.0, BOUNDARY_REL_TOL)
}

fn interval_functional<R: Fn(f64) -> f64>(p: f64, q: &QuantileFn, t: f64, rate: R) -> f64 {
    let boundary = exceedance_boundary(rate, t);
    t.powf(p - 1.0) * q.integrated_unchecked(boundary)
}

/// `t^(p-1) int_0^1 Q(u) 1{(tau/2)^{-1}(G^{-1}(u)) Q(u) > t} du`.
pub fn condition_functional_tau(p: f64, q: &QuantileFn, tau: &DecaySeq, t: f64) -> Result<f64> {
    check_args(p, q, t)?;
    tau.validate()?;
    if *tau == DecaySeq::Zero {
        return Ok(0.0);
    }
    let half = tau.scaled(0.5);
    Ok(interval_functional(p, q, t, |u| {
        rate_product(half.inverse(q.integrated_unchecked(u)).as_f64(), q.eval_unchecked(u))
    }))
}

/// `t^(p-1) int_0^1 Q(u) 1{alpha^{-1}(u) Q(u) > t} du`.
pub fn condition_functional_alpha(p: f64, q: &QuantileFn, alpha: &DecaySeq, t: f64) -> Result<f64> {
    check_args(p, q, t)?;
    alpha.validate()?;
    Ok(interval_functional(p, q, t, |u| alpha_rate(q, alpha, u)))
}

/// `t^(p-1) E[|f| 1{|f| > t}]`, from the tail decomposition
/// `t P(|f| > t) + int_t^inf P(|f| > s) ds`, cross-checked against
/// `t^(p-1) H(P(|f| > t))`.
pub fn weak_lp_tail_functional(p: f64, q: &QuantileFn, t: f64) -> Result<f64> {
    check_args(p, q, t)?;
    let scale = t.powf(p - 1.0);
    let direct = scale * (t * q.tail(t) + q.tail_integral(t)?);
    let via_quantile = scale * q.integrated_unchecked(q.tail(t));
    let tol = 1e-6 * direct.abs().max(via_quantile.abs()) + 1e-300;
    if (direct - via_quantile).abs() > tol {
        return Err(Error::Numerical(format!(
            "tail decomposition {direct} disagrees with quantile route {via_quantile}"
        )));
    }
    Ok(direct)
}

/// Evaluates one functional over a grid of thresholds.
pub fn condition_report(
    kind: ConditionKind,
    p: f64,
    q: &QuantileFn,
    decay: &DecaySeq,
    t_grid: &[f64],
) -> Result<ConditionReport> {
    let values = t_grid
        .iter()
        .map(|&t| match kind {
            ConditionKind::Tau => condition_functional_tau(p, q, decay, t),
            ConditionKind::Alpha => condition_functional_alpha(p, q, decay, t),
            ConditionKind::WeakLp => weak_lp_tail_functional(p, q, t),
        })
        .collect::<Result<Vec<_>>>()?;
    let verdict_hint = trend(&values);
    Ok(ConditionReport { kind, p, t_grid: t_grid.to_vec(), values, verdict_hint })
}

fn trend(values: &[f64]) -> Trend {
    let eq = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
    let mut down = false;
    let mut up = false;
    for w in values.windows(2) {
        if eq(w[0], w[1]) {
            continue;
        }
        if w[1] < w[0] {
            down = true;
        } else {
            up = true;
        }
    }
    match (down, up) {
        (false, false) => Trend::Flat,
        (true, false) => Trend::Decreasing,
        (false, true) => Trend::Increasing,
        (true, true) => Trend::Mixed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_dependence_gives_zero() {
        let q = QuantileFn::pareto(1.0, 4.0);
        for t in [0.5, 10.0, 1e4] {
            assert_eq!(condition_functional_tau(3.0, &q, &DecaySeq::Zero, t).unwrap(), 0.0);
            assert_eq!(condition_functional_alpha(3.0, &q, &DecaySeq::Zero, t).unwrap(), 0.0);
        }
    }

    #[test]
    fn bounded_with_finite_support_vanishes_for_large_t() {
        let alpha = DecaySeq::Table { values: vec![0.25, 0.1, 0.05, 0.0] };
        let q = QuantileFn::bounded(2.0);
        // alpha^{-1}(0+) = 3, so R <= 6
        assert_eq!(condition_functional_alpha(3.0, &q, &alpha, 6.5).unwrap(), 0.0);
        assert!(condition_functional_alpha(3.0, &q, &alpha, 5.0).unwrap() > 0.0);
    }

    #[test]
    fn weak_lp_closed_forms() {
        let q = QuantileFn::pareto(1.0, 3.0);
        let v = weak_lp_tail_functional(2.5, &q, 4.0).unwrap();
        assert!((v - 0.75).abs() < 1e-12);
        assert_eq!(weak_lp_tail_functional(3.0, &QuantileFn::bounded(2.0), 2.5).unwrap(), 0.0);
        let at_p = QuantileFn::pareto(1.0, 3.0);
        for t in [1.0, 7.0, 300.0] {
            let v = weak_lp_tail_functional(3.0, &at_p, t).unwrap();
            assert!((v - 1.5).abs() < 1e-10, "{v}");
        }
    }

    #[test]
    fn tau_sweep_decreases() {
        let q = QuantileFn::pareto(1.0, 4.0);
        let tau = DecaySeq::Geometric { scale: 1.0, ratio: 0.5 };
        let r = condition_report(ConditionKind::Tau, 3.0, &q, &tau, &[1e3, 1e4, 1e5]).unwrap();
        assert!(r.values[0] > r.values[1] && r.values[1] > r.values[2], "{:?}", r.values);
        assert_eq!(r.verdict_hint, Trend::Decreasing);
    }

    #[test]
    fn unreachable_level_forces_indicator() {
        // tau/2 never drops below 0.05, so every u with H(u) < 0.05 is in the set
        let tau = DecaySeq::Table { values: vec![0.2, 0.1] };
        let q = QuantileFn::bounded(1.0);
        let v = condition_functional_tau(3.0, &q, &tau, 1e6).unwrap();
        assert!((v - 1e12 * 0.05).abs() < 1e-1, "{v}");
    }

    #[test]
    fn argument_validation() {
        let q = QuantileFn::bounded(1.0);
        assert!(condition_functional_alpha(2.0, &q, &DecaySeq::Zero, 1.0).is_err());
        assert!(condition_functional_alpha(3.0, &q, &DecaySeq::Zero, 0.0).is_err());
        assert!(weak_lp_tail_functional(3.0, &QuantileFn::pareto(1.0, 1.0), 1.0).is_err());
    }
}
