use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A non-increasing, non-negative sequence `k -> delta_k`, `k >= 0`.
///
/// Holds mixing coefficients `alpha(n)`, `rho(n)` and dependence
/// coefficients `tau(i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum DecaySeq {
    Zero,
    /// `delta_0 = scale`, `delta_k = scale * k^(-exponent)` for `k >= 1`.
    Power { scale: f64, exponent: f64 },
    /// `delta_k = scale * ratio^k`.
    Geometric { scale: f64, ratio: f64 },
    /// Explicit values; the last one repeats forever.
    Table { values: Vec<f64> },
}

/// Value of the generalized inverse `inf{k : delta_k <= u}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DecayIndex {
    Finite(u64),
    /// The sequence never drops to the requested level.
    Infinite,
}

impl DecayIndex {
    pub fn as_f64(self) -> f64 {
        match self {
            DecayIndex::Finite(k) => k as f64,
            DecayIndex::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, DecayIndex::Infinite)
    }
}

impl DecaySeq {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            DecaySeq::Zero => true,
            DecaySeq::Power { scale, exponent } => {
                *scale >= 0.0 && *exponent > 0.0 && scale.is_finite() && exponent.is_finite()
            }
            DecaySeq::Geometric { scale, ratio } => {
                *scale >= 0.0 && scale.is_finite() && *ratio > 0.0 && *ratio < 1.0
            }
            DecaySeq::Table { values } => {
                !values.is_empty()
                    && values.iter().all(|v| *v >= 0.0 && v.is_finite())
                    && values.windows(2).all(|w| w[0] >= w[1])
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("invalid decay sequence: {self:?}")))
        }
    }

    pub fn value(&self, k: u64) -> f64 {
        match self {
            DecaySeq::Zero => 0.0,
            DecaySeq::Power { scale, exponent } => {
                if k == 0 {
                    *scale
                } else {
                    scale * (k as f64).powf(-exponent)
                }
            }
            DecaySeq::Geometric { scale, ratio } => scale * ratio.powf(k as f64),
            DecaySeq::Table { values } => {
                let i = usize::try_from(k).unwrap_or(usize::MAX).min(values.len() - 1);
                values[i]
            }
        }
    }

    /// The sequence `k -> factor * delta_k`.
    pub fn scaled(&self, factor: f64) -> DecaySeq {
        match self {
            DecaySeq::Zero => DecaySeq::Zero,
            DecaySeq::Power { scale, exponent } => DecaySeq::Power { scale: scale * factor, exponent: *exponent },
            DecaySeq::Geometric { scale, ratio } => DecaySeq::Geometric { scale: scale * factor, ratio: *ratio },
            DecaySeq::Table { values } => DecaySeq::Table { values: values.iter().map(|v| v * factor).collect() },
        }
    }

    /// `inf{k >= 0 : delta_k <= u}`.
    ///
    /// Satisfies `inverse(u) <= k  <=>  value(k) <= u`.
    pub fn inverse(&self, u: f64) -> DecayIndex {
        if u >= self.value(0) {
            return DecayIndex::Finite(0);
        }
        match self {
            DecaySeq::Zero => DecayIndex::Finite(0),
            DecaySeq::Power { scale, exponent } => {
                if u <= 0.0 {
                    return DecayIndex::Infinite;
                }
                let guess = (scale / u).powf(1.0 / exponent).ceil().max(1.0);
                self.refine(guess, u)
            }
            DecaySeq::Geometric { scale, ratio } => {
                if u <= 0.0 {
                    return DecayIndex::Infinite;
                }
                let guess = ((u / scale).ln() / ratio.ln()).ceil().max(1.0);
                self.refine(guess, u)
            }
            DecaySeq::Table { values } => values
                .iter()
                .position(|v| *v <= u)
                .map_or(DecayIndex::Infinite, |i| DecayIndex::Finite(i as u64)),
        }
    }

    /// Corrects a floating-point guess so that the Galois property holds
    /// exactly with respect to `value`.
    fn refine(&self, guess: f64, u: f64) -> DecayIndex {
        if !guess.is_finite() || guess >= 9.0e15 {
            return DecayIndex::Finite(u64::MAX);
        }
        let mut k = guess as u64;
        while k > 0 && self.value(k - 1) <= u {
            k -= 1;
        }
        while self.value(k) > u {
            k += 1;
        }
        DecayIndex::Finite(k)
    }

    /// `sum_{i=0}^{floor(log2 n)} delta(2^i)^power`.
    pub fn dyadic_sum(&self, n: u64, power: f64) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let top = 63 - n.leading_zeros() as u64;
        (0..=top).map(|i| self.value(1u64 << i).powf(power)).sum()
    }

    /// `sum_{i>=0} delta(2^i)^power`, truncated once the remaining terms are
    /// provably below `1e-10` (or returned infinite when they do not vanish).
    pub fn dyadic_sum_infinite(&self, power: f64) -> f64 {
        match self {
            DecaySeq::Zero => 0.0,
            DecaySeq::Table { values } if *values.last().unwrap_or(&0.0) > 0.0 => f64::INFINITY,
            DecaySeq::Table { values } => {
                let mut s = 0.0;
                let mut i = 0u32;
                while i < 63 && (1usize << i) < values.len() {
                    s += self.value(1u64 << i).powf(power);
                    i += 1;
                }
                s
            }
            _ => {
                let mut s = 0.0;
                for i in 0..64u32 {
                    let term = self.value(1u64 << i).powf(power);
                    s += term;
                    // terms decay at least geometrically beyond this point
                    if i > 4 && term < 1e-12 {
                        break;
                    }
                }
                s
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_examples() {
        let g = DecaySeq::Geometric { scale: 1.0, ratio: 0.5 };
        assert_eq!(g.inverse(0.125), DecayIndex::Finite(3));
        assert_eq!(DecaySeq::Zero.inverse(0.0), DecayIndex::Finite(0));
        let p = DecaySeq::Power { scale: 1.0, exponent: 2.0 };
        assert_eq!(p.inverse(0.1), DecayIndex::Finite(4));
    }

    #[test]
    fn sentinel_for_unreachable_levels() {
        let t = DecaySeq::Table { values: vec![0.5, 0.3, 0.2] };
        assert_eq!(t.inverse(0.1), DecayIndex::Infinite);
        assert_eq!(t.inverse(0.2), DecayIndex::Finite(2));
        assert!(DecaySeq::Geometric { scale: 1.0, ratio: 0.5 }.inverse(0.0).is_infinite());
    }

    #[test]
    fn validation() {
        assert!(DecaySeq::Table { values: vec![0.1, 0.2] }.validate().is_err());
        assert!(DecaySeq::Geometric { scale: 1.0, ratio: 1.0 }.validate().is_err());
        assert!(DecaySeq::Power { scale: 1.0, exponent: 1.5 }.validate().is_ok());
    }

    #[test]
    fn dyadic_sums() {
        let g = DecaySeq::Geometric { scale: 1.0, ratio: 0.5 };
        // rho(1) + rho(2) + rho(4) = 0.5 + 0.25 + 0.0625
        assert!((g.dyadic_sum(4, 1.0) - 0.8125).abs() < 1e-15);
        assert!((g.dyadic_sum(7, 1.0) - 0.8125).abs() < 1e-15);
        let inf = g.dyadic_sum_infinite(1.0);
        assert!((inf - 0.816421508).abs() < 1e-8, "{inf}");
    }
}
