//! Monte Carlo evaluation of the dyadic tightness sum
//! `n sum_k 2^{-k} P(max_{i <= 2^k} |S_i| > eps 2^{k alpha} n^{1/p})`,
//! `k = 1..floor(log2 floor(n delta))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric;
use crate::process_gen::{prefix_abs_maxima, ProcessModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelContribution {
    pub k: u32,
    pub empirical_prob: f64,
    pub std_error: f64,
    /// `2^{-k}` times the empirical probability.
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightnessEstimate {
    pub n: usize,
    pub delta: f64,
    pub eps: f64,
    pub p: f64,
    pub alpha: f64,
    pub value: f64,
    /// Standard error of `value` from the per-replicate weighted sums.
    pub std_error: f64,
    pub per_level: Vec<LevelContribution>,
    pub paths: usize,
    /// `floor(n delta) < 2`: no levels, value 0.
    pub degenerate: bool,
}

impl TightnessEstimate {
    /// CSV header matching [`csv_rows`](Self::csv_rows).
    pub const CSV_HEADER: &'static str = "n,delta,eps,p,k,empirical_prob,contribution";

    pub fn csv_rows(&self) -> Vec<String> {
        self.per_level
            .iter()
            .map(|l| {
                format!(
                    "{},{},{},{},{},{},{}",
                    self.n, self.delta, self.eps, self.p, l.k, l.empirical_prob, l.contribution
                )
            })
            .collect()
    }
}

fn top_level(n: usize, delta: f64) -> Option<u32> {
    let m = (n as f64 * delta).floor() as usize;
    (m >= 2).then(|| usize::BITS - 1 - m.leading_zeros())
}

fn check_args(n: usize, delta: f64, p: f64, paths: usize) -> Result<()> {
    if n < 4 {
        return Err(Error::domain(format!("n = {n} must be at least 4")));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::domain(format!("delta = {delta} outside (0, 1]")));
    }
    if !(p > 2.0) {
        return Err(Error::domain(format!("p = {p} must exceed 2")));
    }
    if paths < 100 {
        return Err(Error::domain(format!("need at least 100 paths, got {paths}")));
    }
    Ok(())
}

/// Tightness sums for several `eps` on common random numbers.
pub fn tightness_sums(
    model: &ProcessModel,
    n: usize,
    delta: f64,
    eps: &[f64],
    p: f64,
    paths: usize,
    seed: u64,
) -> Result<Vec<TightnessEstimate>> {
    check_args(n, delta, p, paths)?;
    if eps.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::domain("eps must be positive"));
    }
    let alpha = 0.5 - 1.0 / p;
    let Some(top) = top_level(n, delta) else {
        return Ok(eps
            .iter()
            .map(|&e| TightnessEstimate {
                n,
                delta,
                eps: e,
                p,
                alpha,
                value: 0.0,
                std_error: 0.0,
                per_level: Vec::new(),
                paths,
                degenerate: true,
            })
            .collect());
    };
    let checkpoints: Vec<usize> = (1..=top).map(|k| 1usize << k).collect();
    let maxima = prefix_abs_maxima(model, &checkpoints, paths, seed)?;
    let scale = (n as f64).powf(1.0 / p);
    Ok(eps
        .iter()
        .map(|&e| {
            let thresholds: Vec<f64> =
                (1..=top).map(|k| e * (f64::from(k) * alpha).exp2() * scale).collect();
            let mut hits = vec![0usize; top as usize];
            let per_path: Vec<f64> = maxima
                .iter()
                .map(|row| {
                    let mut v = 0.0;
                    for (idx, (m, t)) in row.iter().zip(&thresholds).enumerate() {
                        // strict exceedance
                        if m > t {
                            hits[idx] += 1;
                            v += (-(idx as f64 + 1.0)).exp2();
                        }
                    }
                    n as f64 * v
                })
                .collect();
            let per_level = hits
                .iter()
                .enumerate()
                .map(|(idx, &h)| {
                    let prob = h as f64 / paths as f64;
                    let k = idx as u32 + 1;
                    LevelContribution {
                        k,
                        empirical_prob: prob,
                        std_error: numeric::binomial_se(prob, paths),
                        contribution: (-f64::from(k)).exp2() * prob,
                    }
                })
                .collect::<Vec<_>>();
            TightnessEstimate {
                n,
                delta,
                eps: e,
                p,
                alpha,
                value: n as f64 * per_level.iter().map(|l| l.contribution).sum::<f64>(),
                std_error: numeric::std_error(&per_path),
                per_level,
                paths,
                degenerate: false,
            }
        })
        .collect())
}

/// Single-`eps` version of [`tightness_sums`].
pub fn tightness_sum(
    model: &ProcessModel,
    n: usize,
    delta: f64,
    eps: f64,
    p: f64,
    paths: usize,
    seed: u64,
) -> Result<TightnessEstimate> {
    Ok(tightness_sums(model, n, delta, &[eps], p, paths, seed)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process_gen::IidModel;
    use crate::quantile_core::QuantileFn;

    #[test]
    fn zero_process_gives_zero() {
        let zero = ProcessModel::Iid(IidModel { dist: QuantileFn::bounded(0.0), symmetric: false });
        let t = tightness_sum(&zero, 256, 0.5, 0.1, 3.0, 100, 1).unwrap();
        assert_eq!(t.value, 0.0);
        assert_eq!(t.per_level.len(), 7);
    }

    #[test]
    fn degenerate_window() {
        let t = tightness_sum(&ProcessModel::iid_gaussian(), 8, 0.2, 1.0, 3.0, 100, 1).unwrap();
        assert!(t.degenerate);
        assert_eq!(t.value, 0.0);
    }

    #[test]
    fn monotone_in_eps() {
        let m = ProcessModel::iid_gaussian();
        let r = tightness_sums(&m, 1 << 12, 0.5, &[2.0, 4.0, 8.0], 3.0, 2000, 5).unwrap();
        assert!(r[0].value > r[2].value);
        assert!(r[0].value >= r[1].value && r[1].value >= r[2].value);
        for est in &r {
            let total: f64 = est.per_level.iter().map(|l| l.contribution).sum();
            assert!((est.value - est.n as f64 * total).abs() < 1e-9);
            assert_eq!(est.per_level.len(), 11);
        }
    }
}
