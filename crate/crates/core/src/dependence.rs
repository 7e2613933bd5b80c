//! Exact strong-mixing and maximal-correlation coefficients between two
//! finite partitions, and Monte Carlo tau coefficients of causal linear
//! processes via the one-dimensional Wasserstein distance.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::numeric;
use crate::process_gen::{Innovation, ProcessModel};
use crate::quantile_core::QuantileFn;
use crate::rng::replicate_rng;

/// Largest number of cells per partition accepted by [`alpha_exact`].
pub const MAX_CELLS: usize = 12;
/// Residual coefficient mass beyond the truncation depth that triggers the
/// `truncated` flag.
pub const TRUNCATION_TOL: f64 = 1e-9;
const MAX_FRESH_ATOMS: usize = 1 << 16;
const MAX_MARGINAL_ATOMS: usize = 1 << 22;

/// Joint law `p_ij = P(A_i and B_j)` of two finite partitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinitePartitionPair {
    joint: Vec<Vec<f64>>,
}

impl FinitePartitionPair {
    pub fn new(joint: Vec<Vec<f64>>) -> Result<Self> {
        let cols = joint.first().map_or(0, Vec::len);
        if joint.is_empty() || cols == 0 || joint.iter().any(|r| r.len() != cols) {
            return Err(Error::domain("joint matrix must be non-empty and rectangular"));
        }
        if joint.iter().flatten().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::domain("joint probabilities must be finite and non-negative"));
        }
        let total: f64 = joint.iter().flatten().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("joint probabilities sum to {total}, not 1")));
        }
        Ok(FinitePartitionPair { joint })
    }

    pub fn joint(&self) -> &[Vec<f64>] {
        &self.joint
    }

    pub fn rows(&self) -> usize {
        self.joint.len()
    }

    pub fn cols(&self) -> usize {
        self.joint[0].len()
    }

    pub fn row_marginals(&self) -> Vec<f64> {
        self.joint.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_marginals(&self) -> Vec<f64> {
        (0..self.cols()).map(|j| self.joint.iter().map(|r| r[j]).sum()).collect()
    }
}

/// `sup |P(A and B) - P(A) P(B)|` over unions of rows `A` and unions of
/// columns `B`.
///
/// For a fixed `A` the optimal `B` collects either all columns with positive
/// or all with negative `P(A and B_j) - P(A) P(B_j)`, so only the row unions
/// are enumerated.
pub fn alpha_exact(pair: &FinitePartitionPair) -> Result<f64> {
    let (r, c) = (pair.rows(), pair.cols());
    if r > MAX_CELLS || c > MAX_CELLS {
        return Err(Error::Size(format!("partitions of size {r}x{c} exceed {MAX_CELLS} cells")));
    }
    let q = pair.col_marginals();
    let mut best = 0.0f64;
    let mut v = vec![0.0; c];
    for mask in 1u32..(1 << r) {
        v.iter_mut().for_each(|x| *x = 0.0);
        let mut mu_a = 0.0;
        for (i, row) in pair.joint.iter().enumerate() {
            if mask & (1 << i) != 0 {
                mu_a += row.iter().sum::<f64>();
                v.iter_mut().zip(row).for_each(|(x, p)| *x += p);
            }
        }
        let (mut pos, mut neg) = (0.0, 0.0);
        for (x, qj) in v.iter().zip(&q) {
            let d = x - mu_a * qj;
            if d > 0.0 {
                pos += d;
            } else {
                neg -= d;
            }
        }
        best = best.max(pos).max(neg);
    }
    Ok(best)
}

/// Maximal correlation: the second singular value of
/// `p_ij / sqrt(p_i. p_.j)` after removing null rows and columns.
pub fn rho_exact(pair: &FinitePartitionPair) -> Result<f64> {
    let rm = pair.row_marginals();
    let cm = pair.col_marginals();
    let rows: Vec<usize> = (0..rm.len()).filter(|&i| rm[i] > 0.0).collect();
    let cols: Vec<usize> = (0..cm.len()).filter(|&j| cm[j] > 0.0).collect();
    if rows.len() < 2 || cols.len() < 2 {
        return Ok(0.0);
    }
    let m = DMatrix::from_fn(rows.len(), cols.len(), |a, b| {
        let (i, j) = (rows[a], cols[b]);
        pair.joint[i][j] / (rm[i] * cm[j]).sqrt()
    });
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv.get(1).copied().unwrap_or(0.0).clamp(0.0, 1.0))
}

/// Monte Carlo estimate of `tau(i)` for a causal linear process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauEstimate {
    pub lag: usize,
    pub value: f64,
    pub std_error: f64,
    pub truncation_depth: usize,
    /// Coefficient mass beyond the truncation depth exceeds [`TRUNCATION_TOL`].
    pub truncated: bool,
}

/// Discrete law with sorted atoms and running sums for fast CDF integrals.
struct DiscreteLaw {
    x: Vec<f64>,
    cum_p: Vec<f64>,
    cum_px: Vec<f64>,
}

impl DiscreteLaw {
    fn from_atoms(mut atoms: Vec<(f64, f64)>) -> Self {
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut x = Vec::with_capacity(atoms.len());
        let mut cum_p = Vec::with_capacity(atoms.len());
        let mut cum_px = Vec::with_capacity(atoms.len());
        let (mut p_acc, mut px_acc) = (0.0, 0.0);
        for (v, p) in atoms {
            p_acc += p;
            px_acc += p * v;
            x.push(v);
            cum_p.push(p_acc);
            cum_px.push(px_acc);
        }
        DiscreteLaw { x, cum_p, cum_px }
    }

    /// `int_{-inf}^{y} F(s) ds`.
    fn cdf_integral(&self, y: f64) -> f64 {
        let k = self.x.partition_point(|v| *v <= y);
        if k == 0 {
            0.0
        } else {
            y * self.cum_p[k - 1] - self.cum_px[k - 1]
        }
    }

    /// `int_a^b |F(s) - level| ds` for `a <= b`.
    fn gap_to_level(&self, a: f64, b: f64, level: f64) -> f64 {
        // F >= level from the first atom whose cumulative mass reaches it
        let k = self.cum_p.partition_point(|c| *c < level - 1e-15);
        let s = if k < self.x.len() { self.x[k].clamp(a, b) } else { b };
        let ia = self.cdf_integral(a);
        let is = self.cdf_integral(s);
        let ib = self.cdf_integral(b);
        let below = level * (s - a) - (is - ia);
        let above = (ib - is) - level * (b - s);
        below.max(0.0) + above.max(0.0)
    }

    /// `int |F_cond - F_self|` where `cond` has sorted atoms `ys` with
    /// cumulative masses `levels`.
    fn l1_cdf_distance(&self, ys: &[f64], levels: &[f64]) -> f64 {
        let lo = self.x[0].min(ys[0]);
        let hi = self.x[self.x.len() - 1].max(ys[ys.len() - 1]);
        let mut total = self.gap_to_level(lo, ys[0], 0.0);
        for k in 0..ys.len() - 1 {
            total += self.gap_to_level(ys[k], ys[k + 1], levels[k]);
        }
        total + self.gap_to_level(ys[ys.len() - 1], hi, 1.0)
    }
}

/// All outcomes of `sum_j coeffs[j] * eps_j` with their probabilities.
fn enumerate_sum(coeffs: &[f64], atoms: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 1.0)];
    for a in coeffs {
        let mut next = Vec::with_capacity(out.len() * atoms.len());
        for (s, p) in &out {
            for (e, q) in atoms {
                next.push((s + a * e, p * q));
            }
        }
        out = next;
    }
    out
}

fn checked_pow(base: usize, exp: usize, cap: usize, what: &str) -> Result<usize> {
    let mut acc = 1usize;
    for _ in 0..exp {
        acc = acc.saturating_mul(base);
        if acc > cap {
            return Err(Error::Size(format!("{what}: {base}^{exp} outcomes exceed {cap}")));
        }
    }
    Ok(acc)
}

/// `tau(i) = E int |F_{X_{k+i} | past} - F_X|` for a causal linear process,
/// averaging over `paths` sampled pasts.
///
/// The past is cut at `truncation_depth` innovations. Finite innovation laws
/// are enumerated exactly; Gaussian ones use the closed-form normal CDFs.
pub fn tau_estimate_1d(
    model: &ProcessModel,
    lag: usize,
    truncation_depth: usize,
    paths: usize,
    seed: u64,
) -> Result<TauEstimate> {
    let ProcessModel::CausalLinear(c) = model else {
        return Err(Error::InvalidModel("tau estimation needs a causal linear model".into()));
    };
    if lag == 0 {
        return Err(Error::domain("lag must be at least 1"));
    }
    if truncation_depth == 0 || paths < 2 {
        return Err(Error::domain("truncation depth must be positive and at least two paths are needed"));
    }
    let depth = truncation_depth;
    let coeff = |j: usize| c.coefficients().get(j).copied().unwrap_or(0.0);
    let all: Vec<f64> = (0..depth).map(coeff).collect();
    let fresh: Vec<f64> = all.iter().take(lag).copied().collect();
    let known: Vec<f64> = all.iter().skip(lag).copied().collect();
    let truncated = c.tail_mass_from(depth) > TRUNCATION_TOL;

    let values: Vec<f64> = match c.innovation() {
        Innovation::Finite { .. } => {
            let atoms = c.innovation().centered_atoms().expect("finite law");
            checked_pow(atoms.len(), fresh.len(), MAX_FRESH_ATOMS, "conditional law")?;
            checked_pow(atoms.len(), depth, MAX_MARGINAL_ATOMS, "marginal law")?;
            let marginal = DiscreteLaw::from_atoms(enumerate_sum(&all, &atoms));
            let cond = DiscreteLaw::from_atoms(enumerate_sum(&fresh, &atoms));
            let innovation = c.innovation().clone();
            (0..paths as u64)
                .into_par_iter()
                .map(|r| {
                    let mut rng = replicate_rng(seed, r);
                    let shift: f64 = known.iter().map(|a| a * innovation.sample(&mut rng)).sum();
                    let ys: Vec<f64> = cond.x.iter().map(|y| y + shift).collect();
                    marginal.l1_cdf_distance(&ys, &cond.cum_p)
                })
                .collect()
        }
        Innovation::Gaussian { sigma } => {
            let sd_fresh = sigma * fresh.iter().map(|a| a * a).sum::<f64>().sqrt();
            let sd_known = sigma * known.iter().map(|a| a * a).sum::<f64>().sqrt();
            let sd_all = (sd_fresh * sd_fresh + sd_known * sd_known).sqrt();
            (0..paths as u64)
                .into_par_iter()
                .map(|r| {
                    let mut rng = replicate_rng(seed, r);
                    let shift = sd_known * rng.sample::<f64, _>(StandardNormal);
                    gaussian_l1_cdf_distance(shift, sd_fresh, sd_all)
                })
                .collect::<Result<Vec<f64>>>()?
        }
    };
    Ok(TauEstimate {
        lag,
        value: numeric::mean(&values),
        std_error: numeric::std_error(&values),
        truncation_depth: depth,
        truncated,
    })
}

/// `int |Phi((x - m) / s1) - Phi(x / s2)| dx`.
fn gaussian_l1_cdf_distance(m: f64, s1: f64, s2: f64) -> Result<f64> {
    if s1 == 0.0 && s2 == 0.0 {
        return Ok(m.abs());
    }
    let cdf = |x: f64, mu: f64, s: f64| {
        if s == 0.0 {
            f64::from(u8::from(x >= mu))
        } else {
            Normal::new(mu, s).expect("positive scale").cdf(x)
        }
    };
    let spread = 12.0 * s1.max(s2);
    let lo = m.min(0.0) - spread;
    let hi = m.max(0.0) + spread;
    let f = |x: f64| (cdf(x, m, s1) - cdf(x, 0.0, s2)).abs();
    // the integrand has kinks where the CDFs cross or jump
    let mid = 0.5 * m;
    Ok(numeric::integrate(f, lo, mid, 1e-12, 1e-9)? + numeric::integrate(f, mid, hi, 1e-12, 1e-9)?)
}

/// `tau <= 2 H(min(1, 2 alpha))`.
pub fn tau_alpha_bound_check(tau: f64, alpha: f64, q: &QuantileFn) -> Result<bool> {
    if !(tau >= 0.0) || !(0.0..=0.25).contains(&alpha) {
        return Err(Error::domain(format!("need tau >= 0 and alpha in [0, 1/4], got {tau}, {alpha}")));
    }
    Ok(tau <= tau_alpha_rhs(alpha, q)?)
}

/// `2 H(min(1, 2 alpha))`.
pub fn tau_alpha_rhs(alpha: f64, q: &QuantileFn) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(Error::domain(format!("alpha = {alpha} must be non-negative")));
    }
    Ok(2.0 * q.integrated((2.0 * alpha).min(1.0))?)
}

/// Exact `tau(i)` of the centered Bernoulli shift, `2^{-i} / 3`.
pub fn bernoulli_shift_tau(lag: usize) -> f64 {
    0.5f64.powi(lag as i32) / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process_gen::{CausalLinear, Coefficients};

    fn pair(rows: Vec<Vec<f64>>) -> FinitePartitionPair {
        FinitePartitionPair::new(rows).unwrap()
    }

    #[test]
    fn diagonal_examples() {
        let d = pair(vec![vec![0.5, 0.0], vec![0.0, 0.5]]);
        assert!((alpha_exact(&d).unwrap() - 0.25).abs() < 1e-15);
        assert!((rho_exact(&d).unwrap() - 1.0).abs() < 1e-10);
        let ind = pair(vec![vec![0.06, 0.14], vec![0.24, 0.56]]);
        assert!(alpha_exact(&ind).unwrap() < 1e-15);
        assert!(rho_exact(&ind).unwrap() < 1e-10);
    }

    #[test]
    fn validation_and_size() {
        assert!(FinitePartitionPair::new(vec![vec![0.5, 0.4]]).is_err());
        assert!(FinitePartitionPair::new(vec![vec![1.2, -0.2]]).is_err());
        let big = pair(vec![vec![1.0 / 13.0]; 13]);
        assert!(matches!(alpha_exact(&big), Err(Error::Size(_))));
        assert_eq!(rho_exact(&pair(vec![vec![0.3, 0.7]])).unwrap(), 0.0);
    }

    #[test]
    fn cdf_distance_against_direct_sum() {
        let law = DiscreteLaw::from_atoms(vec![(0.0, 0.25), (1.0, 0.5), (3.0, 0.25)]);
        // point mass at 1.2 against F = 1/4 on [0,1), 3/4 on [1,3)
        let d = law.l1_cdf_distance(&[1.2], &[1.0]);
        let direct = 0.25 * 1.0 + 0.75 * 0.2 + 0.25 * 1.8;
        assert!((d - direct).abs() < 1e-14, "{d}");
        assert!(law.l1_cdf_distance(&law.x.clone(), &law.cum_p.clone()) < 1e-14);
    }

    #[test]
    fn iid_model_has_zero_tau() {
        let m = ProcessModel::CausalLinear(
            CausalLinear::new(Coefficients::Explicit { values: vec![1.0] }, Innovation::fair_coin()).unwrap(),
        );
        let e = tau_estimate_1d(&m, 2, 4, 200, 1).unwrap();
        assert!(e.value.abs() <= 3.0 * e.std_error + 1e-14);
        assert!(!e.truncated);
    }

    #[test]
    fn bernoulli_shift_lag_three() {
        let m = ProcessModel::CausalLinear(CausalLinear::bernoulli_shift());
        let e = tau_estimate_1d(&m, 3, 20, 4000, 9).unwrap();
        assert!((e.value - 1.0 / 24.0).abs() <= 3.0 * e.std_error + 1e-6, "{e:?}");
        let shallow = tau_estimate_1d(&m, 3, 10, 100, 9).unwrap();
        assert!(shallow.truncated);
    }

    #[test]
    fn gaussian_innovations() {
        // one coefficient: X independent of the past
        let m = ProcessModel::CausalLinear(
            CausalLinear::new(Coefficients::Explicit { values: vec![1.0] }, Innovation::Gaussian { sigma: 1.0 }).unwrap(),
        );
        let e = tau_estimate_1d(&m, 1, 3, 100, 2).unwrap();
        assert!(e.value < 1e-8, "{e:?}");
        // point-mass conditional: W1(delta_m, N(0, 1)) = E|Z - m|
        let d = gaussian_l1_cdf_distance(0.7, 0.0, 1.0).unwrap();
        let n = Normal::new(0.0, 1.0).unwrap();
        let expect = 0.7 * (2.0 * n.cdf(0.7) - 1.0) + 2.0 * statrs::distribution::Continuous::pdf(&n, 0.7);
        assert!((d - expect).abs() < 1e-8, "{d} {expect}");
    }

    #[test]
    fn bound_check_examples() {
        let q = QuantileFn::uniform_abs(0.5);
        assert!(tau_alpha_bound_check(0.0, 0.0, &q).unwrap());
        assert!((tau_alpha_rhs(0.25, &q).unwrap() - 0.375).abs() < 1e-15);
        // once 2 alpha >= 1 the bound is the trivial 2 E|X|
        assert!((tau_alpha_rhs(0.5, &q).unwrap() - 2.0 * q.moment(1.0).unwrap()).abs() < 1e-15);
        assert!(tau_alpha_bound_check(tau_alpha_rhs(0.25, &q).unwrap(), 0.25, &q).unwrap());
        assert!(tau_alpha_bound_check(0.1, 0.3, &q).is_err());
    }
}
