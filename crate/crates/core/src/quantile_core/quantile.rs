use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::numeric;

/// Quantile function `u -> Q(u) = inf{t : P(|X| > t) <= u}` of the absolute
/// value of a random variable, on `(0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum QuantileFn {
    /// `P(|X| > t) = min(1, (scale / t)^index)`.
    ParetoTail { scale: f64, index: f64 },
    /// `|X| = value` almost surely.
    BoundedConst { value: f64 },
    /// `|X|` with `X ~ N(0, sigma^2)`.
    AbsGaussian { sigma: f64 },
    /// `|X|` uniform on `[0, bound]`.
    UniformAbs { bound: f64 },
    /// Empirical law of `|x_1|, ..., |x_m|`, stored sorted ascending.
    Empirical { sorted: Vec<f64> },
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

impl QuantileFn {
    pub fn pareto(scale: f64, index: f64) -> Self {
        QuantileFn::ParetoTail { scale, index }
    }

    pub fn bounded(value: f64) -> Self {
        QuantileFn::BoundedConst { value }
    }

    pub fn abs_gaussian(sigma: f64) -> Self {
        QuantileFn::AbsGaussian { sigma }
    }

    pub fn uniform_abs(bound: f64) -> Self {
        QuantileFn::UniformAbs { bound }
    }

    /// Empirical quantile function of the absolute values of `sample`.
    pub fn empirical(sample: &[f64]) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::domain("empirical quantile function needs a non-empty sample"));
        }
        if sample.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("empirical sample contains non-finite values"));
        }
        let mut sorted: Vec<f64> = sample.iter().map(|x| x.abs()).collect();
        sorted.sort_by(f64::total_cmp);
        Ok(QuantileFn::Empirical { sorted })
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            QuantileFn::ParetoTail { scale, index } => *scale > 0.0 && *index > 0.0 && scale.is_finite() && index.is_finite(),
            QuantileFn::BoundedConst { value } => *value >= 0.0 && value.is_finite(),
            QuantileFn::AbsGaussian { sigma } => *sigma > 0.0 && sigma.is_finite(),
            QuantileFn::UniformAbs { bound } => *bound > 0.0 && bound.is_finite(),
            QuantileFn::Empirical { sorted } => {
                !sorted.is_empty()
                    && sorted.iter().all(|x| *x >= 0.0 && x.is_finite())
                    && sorted.windows(2).all(|w| w[0] <= w[1])
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("invalid quantile function parameters: {self:?}")))
        }
    }

    /// `E|X| < infinity`.
    pub fn is_integrable(&self) -> bool {
        match self {
            QuantileFn::ParetoTail { index, .. } => *index > 1.0,
            _ => true,
        }
    }

    fn require_integrable(&self) -> Result<()> {
        if self.is_integrable() {
            Ok(())
        } else {
            Err(Error::Integrability(format!("{self:?} has an infinite first moment")))
        }
    }

    /// `Q(u)` for `u` in `(0, 1]`.
    pub fn eval(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u <= 1.0) {
            return Err(Error::domain(format!("quantile argument {u} outside (0, 1]")));
        }
        Ok(self.eval_unchecked(u))
    }

    pub(crate) fn eval_unchecked(&self, u: f64) -> f64 {
        match self {
            QuantileFn::ParetoTail { scale, index } => scale * u.powf(-1.0 / index),
            QuantileFn::BoundedConst { value } => *value,
            QuantileFn::AbsGaussian { sigma } => (-sigma * std_normal().inverse_cdf(0.5 * u)).max(0.0),
            QuantileFn::UniformAbs { bound } => bound * (1.0 - u),
            QuantileFn::Empirical { sorted } => {
                let m = sorted.len();
                let k = empirical_rank(u, m);
                if k >= m {
                    0.0
                } else {
                    sorted[m - 1 - k]
                }
            }
        }
    }

    /// `P(|X| > t)`.
    pub fn tail(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 1.0;
        }
        match self {
            QuantileFn::ParetoTail { scale, index } => {
                if t <= *scale {
                    1.0
                } else {
                    (scale / t).powf(*index)
                }
            }
            QuantileFn::BoundedConst { value } => f64::from(u8::from(*value > t)),
            QuantileFn::AbsGaussian { sigma } => 2.0 * std_normal().sf(t / sigma),
            QuantileFn::UniformAbs { bound } => (1.0 - t / bound).clamp(0.0, 1.0),
            QuantileFn::Empirical { sorted } => {
                let above = sorted.len() - sorted.partition_point(|x| *x <= t);
                above as f64 / sorted.len() as f64
            }
        }
    }

    /// `P(|X| >= t)`; differs from [`tail`](Self::tail) only at atoms.
    pub fn tail_at_least(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        match self {
            QuantileFn::BoundedConst { value } => f64::from(u8::from(*value >= t)),
            QuantileFn::Empirical { sorted } => {
                let above = sorted.len() - sorted.partition_point(|x| *x < t);
                above as f64 / sorted.len() as f64
            }
            _ => self.tail(t),
        }
    }

    /// `int_t^inf P(|X| > s) ds` for `t >= 0`.
    pub fn tail_integral(&self, t: f64) -> Result<f64> {
        self.require_integrable()?;
        let t = t.max(0.0);
        Ok(match self {
            QuantileFn::ParetoTail { scale, index } => {
                if t >= *scale {
                    scale.powf(*index) * t.powf(1.0 - index) / (index - 1.0)
                } else {
                    (scale - t) + scale / (index - 1.0)
                }
            }
            QuantileFn::BoundedConst { value } => (value - t).max(0.0),
            QuantileFn::AbsGaussian { sigma } => {
                let n = std_normal();
                let z = t / sigma;
                sigma * (2.0 * n.pdf(z) - 2.0 * z * n.sf(z))
            }
            QuantileFn::UniformAbs { bound } => {
                if t >= *bound {
                    0.0
                } else {
                    (bound - t) * (bound - t) / (2.0 * bound)
                }
            }
            QuantileFn::Empirical { sorted } => {
                sorted.iter().map(|x| (x - t).max(0.0)).sum::<f64>() / sorted.len() as f64
            }
        })
    }

    /// `E[|X| 1{|X| > t}]`.
    pub fn truncated_mean_above(&self, t: f64) -> Result<f64> {
        let t = t.max(0.0);
        Ok(t * self.tail(t) + self.tail_integral(t)?)
    }

    /// `E|X|^k` for `k > 0`.
    pub fn moment(&self, k: f64) -> Result<f64> {
        if k <= 0.0 {
            return Err(Error::domain("moment order must be positive"));
        }
        Ok(match self {
            QuantileFn::ParetoTail { scale, index } => {
                if k >= *index {
                    return Err(Error::Integrability(format!(
                        "moment of order {k} is infinite for tail index {index}"
                    )));
                }
                scale.powf(k) * index / (index - k)
            }
            QuantileFn::BoundedConst { value } => value.powf(k),
            QuantileFn::AbsGaussian { sigma } => {
                sigma.powf(k) * 2f64.powf(k / 2.0) * gamma((k + 1.0) / 2.0) / std::f64::consts::PI.sqrt()
            }
            QuantileFn::UniformAbs { bound } => bound.powf(k) / (k + 1.0),
            QuantileFn::Empirical { sorted } => {
                sorted.iter().map(|x| x.powf(k)).sum::<f64>() / sorted.len() as f64
            }
        })
    }

    /// `E[|X|^q 1{|X| <= a}]`.
    pub fn lower_partial_moment(&self, q: f64, a: f64) -> Result<f64> {
        if q <= 0.0 {
            return Err(Error::domain("moment order must be positive"));
        }
        if a <= 0.0 {
            return Ok(0.0);
        }
        Ok(match self {
            QuantileFn::ParetoTail { scale, index } => {
                if a < *scale {
                    return Ok(0.0);
                }
                let u0 = (scale / a).powf(*index);
                let e = 1.0 - q / index;
                if e.abs() < 1e-12 {
                    scale.powf(q) * (-u0.ln())
                } else {
                    scale.powf(q) * (1.0 - u0.powf(e)) / e
                }
            }
            QuantileFn::BoundedConst { value } => {
                if *value <= a {
                    value.powf(q)
                } else {
                    0.0
                }
            }
            QuantileFn::AbsGaussian { sigma } => {
                let n = std_normal();
                numeric::integrate(
                    |x| x.powf(q) * 2.0 * n.pdf(x / sigma) / sigma,
                    0.0,
                    a.min(40.0 * sigma),
                    1e-14,
                    1e-11,
                )?
            }
            QuantileFn::UniformAbs { bound } => {
                let c = a.min(*bound);
                c.powf(q + 1.0) / (bound * (q + 1.0))
            }
            QuantileFn::Empirical { sorted } => {
                sorted.iter().filter(|x| **x <= a).map(|x| x.powf(q)).sum::<f64>() / sorted.len() as f64
            }
        })
    }

    /// `H(x) = int_0^x Q(u) du` for `x` in `[0, 1]`.
    pub fn integrated(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::domain(format!("integrated quantile argument {x} outside [0, 1]")));
        }
        self.require_integrable()?;
        Ok(self.integrated_unchecked(x))
    }

    pub(crate) fn integrated_unchecked(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self {
            QuantileFn::ParetoTail { scale, index } => {
                scale * index / (index - 1.0) * x.powf((index - 1.0) / index)
            }
            QuantileFn::BoundedConst { value } => value * x,
            QuantileFn::AbsGaussian { sigma } => {
                let n = std_normal();
                let z = -n.inverse_cdf(0.5 * x);
                2.0 * sigma * n.pdf(z)
            }
            QuantileFn::UniformAbs { bound } => bound * (x - 0.5 * x * x),
            QuantileFn::Empirical { sorted } => {
                let m = sorted.len();
                let w = 1.0 / m as f64;
                let full = empirical_rank(x, m).min(m);
                let mut acc: f64 = sorted[m - full..].iter().sum::<f64>() * w;
                if full < m {
                    let rest = (x - full as f64 * w).max(0.0);
                    acc += rest * sorted[m - 1 - full];
                }
                acc
            }
        }
    }

    /// `G(y) = inf{x : H(x) >= y}`, capped at 1.
    pub fn integrated_inverse(&self, y: f64) -> Result<f64> {
        if y < 0.0 {
            return Err(Error::domain(format!("integrated quantile inverse argument {y} is negative")));
        }
        self.require_integrable()?;
        if y == 0.0 {
            return Ok(0.0);
        }
        if y >= self.integrated_unchecked(1.0) {
            return Ok(1.0);
        }
        Ok(numeric::boundary_of_initial_segment(
            |x| self.integrated_unchecked(x) < y,
            0.0,
            1.0,
            1e-15,
        ))
    }

    /// A draw of `|X|`.
    pub fn sample_abs<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // (0, 1]
        let u = 1.0 - rng.random::<f64>();
        self.eval_unchecked(u)
    }
}

/// `floor(u * m)`, robust to `u = k / m` rounding just below `k`.
fn empirical_rank(u: f64, m: usize) -> usize {
    let raw = u * m as f64;
    let k = (raw + 1e-9 * raw.max(1.0)).floor();
    k as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(QuantileFn::pareto(1.0, 2.0).eval(0.25).unwrap(), 2.0);
        assert_eq!(QuantileFn::bounded(3.0).eval(0.7).unwrap(), 3.0);
        let e = QuantileFn::empirical(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(e.eval(0.5).unwrap(), 2.0);
    }

    #[test]
    fn empirical_matches_inf_definition_by_scan() {
        let sample = [0.3, 1.0, 1.0, 2.5, 4.0, 7.0];
        let e = QuantileFn::empirical(&sample).unwrap();
        let m = sample.len();
        for k in 1..=m {
            let u = k as f64 / m as f64;
            // scan candidate thresholds 0 and sample points in ascending order
            let mut cands: Vec<f64> = sample.to_vec();
            cands.push(0.0);
            cands.sort_by(f64::total_cmp);
            let inf = cands
                .iter()
                .copied()
                .find(|t| sample.iter().filter(|x| **x > *t).count() as f64 / m as f64 <= u)
                .unwrap();
            assert_eq!(e.eval(u).unwrap(), inf, "u = {u}");
        }
    }

    #[test]
    fn domain_errors() {
        let q = QuantileFn::bounded(1.0);
        assert!(q.eval(0.0).is_err());
        assert!(q.eval(1.5).is_err());
        assert!(q.integrated(-0.1).is_err());
        assert!(matches!(
            QuantileFn::pareto(1.0, 0.9).integrated(0.5),
            Err(Error::Integrability(_))
        ));
    }

    #[test]
    fn integrated_examples() {
        assert!(close(QuantileFn::pareto(1.0, 2.0).integrated(1.0).unwrap(), 2.0, 1e-14));
        assert!(close(QuantileFn::bounded(5.0).integrated(0.3).unwrap(), 1.5, 1e-14));
        assert!(close(QuantileFn::pareto(1.0, 4.0).integrated(1.0).unwrap(), 4.0 / 3.0, 1e-14));
        // |N(0,1)| has mean sqrt(2/pi)
        let g = QuantileFn::abs_gaussian(1.0).integrated(1.0).unwrap();
        assert!(close(g, (2.0 / std::f64::consts::PI).sqrt(), 1e-12));
    }

    #[test]
    fn integrated_inverse_examples() {
        let p2 = QuantileFn::pareto(1.0, 2.0);
        assert_eq!(p2.integrated_inverse(2.0).unwrap(), 1.0);
        assert!(close(p2.integrated_inverse(1.0).unwrap(), 0.25, 1e-12));
        assert!(close(QuantileFn::bounded(4.0).integrated_inverse(1.0).unwrap(), 0.25, 1e-12));
    }

    #[test]
    fn closed_forms_agree_with_quadrature() {
        let cases = [
            QuantileFn::pareto(1.5, 3.5),
            QuantileFn::abs_gaussian(2.0),
            QuantileFn::uniform_abs(0.5),
            QuantileFn::empirical(&[0.5, 1.0, 3.0, 3.0, 8.0]).unwrap(),
        ];
        for q in &cases {
            for &x in &[0.05, 0.3, 0.77, 1.0] {
                let quad = numeric::integrate_singular_at_zero(|u| q.eval_unchecked(u), x, 6, 1e-13, 1e-11).unwrap();
                assert!(close(q.integrated(x).unwrap(), quad, 1e-7), "{q:?} x={x}");
            }
            for &t in &[0.2, 1.0, 2.5] {
                // split at every jump or kink of the cases above
                let mut cuts = vec![t];
                cuts.extend([0.5, 1.0, 1.5, 3.0, 8.0, 60.0, 1e4].into_iter().filter(|c| *c > t));
                let quad: f64 = cuts
                    .windows(2)
                    .map(|w| numeric::integrate(|s| q.tail(s), w[0], w[1], 1e-13, 1e-11).unwrap())
                    .sum();
                assert!(close(q.tail_integral(t).unwrap(), quad, 1e-6), "{q:?} t={t}");
            }
            let m2 = numeric::integrate_singular_at_zero(|u| q.eval_unchecked(u).powi(2), 1.0, 6, 1e-13, 1e-11).unwrap();
            assert!(close(q.moment(2.0).unwrap(), m2, 1e-6), "{q:?}");
        }
    }

    #[test]
    fn lower_partial_moment_limits() {
        let q = QuantileFn::pareto(1.0, 5.0);
        let full = q.moment(3.0).unwrap();
        assert!(close(q.lower_partial_moment(3.0, 1e9).unwrap(), full, 1e-9));
        assert_eq!(q.lower_partial_moment(3.0, 0.5).unwrap(), 0.0);
        let g = QuantileFn::abs_gaussian(1.0);
        assert!(close(g.lower_partial_moment(2.0, 1e3).unwrap(), 1.0, 1e-9));
        assert!(close(QuantileFn::uniform_abs(2.0).lower_partial_moment(1.0, 1.0).unwrap(), 0.25, 1e-14));
    }
}
