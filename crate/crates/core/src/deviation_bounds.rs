//! Fuk–Nagaev type tail bound for maxima of partial sums of tau-dependent
//! sequences, Shao's maximal inequality for rho-mixing sequences, and Monte
//! Carlo checks that the bounds dominate empirical tails.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric;
use crate::process_gen::{prefix_abs_maxima, ProcessModel};
use crate::quantile_core::{exceedance_boundary, tau_rate, DecaySeq, QuantileFn};

/// `sum_{i, j <= N} |Cov(X_i, X_j)|`.
pub fn s_n_squared(model: &ProcessModel, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("N must be at least 1"));
    }
    let mut s = n as f64 * model.covariance(0)?;
    for k in 1..n {
        s += 2.0 * (n - k) as f64 * model.covariance(k)?.abs();
    }
    Ok(s)
}

/// `4N int_0^{||f||_1} (tau/2)^{-1}(u) Q(G(u)) du`, written as
/// `4N sum_{k >= 0} int_0^{G(tau_k / 2)} Q^2`.
pub fn s_n_squared_tau_bound(q: &QuantileFn, tau: &DecaySeq, n: usize) -> Result<f64> {
    tau.validate()?;
    q.moment(2.0)?;
    if *tau == DecaySeq::Zero {
        return Ok(0.0);
    }
    if let DecaySeq::Table { values } = tau {
        if *values.last().expect("validated") > 0.0 {
            return Ok(f64::INFINITY);
        }
    }
    let second = |x: f64| -> Result<f64> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        numeric::integrate_singular_at_zero(|u| q.eval_unchecked(u).powi(2), x, 6, 1e-14, 1e-11)
    };
    let mut total = 0.0;
    for k in 0..1_000_000u64 {
        let level = 0.5 * tau.value(k);
        if level <= 0.0 {
            break;
        }
        let term = second(q.integrated_inverse(level)?)?;
        total += term;
        if k > 8 && term <= 1e-13 * total {
            break;
        }
    }
    Ok(4.0 * n as f64 * total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FukNagaevInput {
    pub lambda: f64,
    pub n: usize,
    pub r: f64,
    pub q: QuantileFn,
    pub tau: DecaySeq,
    pub s_n2: f64,
}

/// `4 (1 + lambda^2 / (r s_N^2))^{-r/2} + (4N / lambda) H(S(lambda / r))`,
/// `S(v) = inf{u : R(u) <= v}` for `R = ((tau/2)^{-1} o H) Q`.
pub fn fuk_nagaev_bound(input: &FukNagaevInput) -> Result<f64> {
    let FukNagaevInput { lambda, n, r, q, tau, s_n2 } = input;
    if !(*lambda > 0.0) || *n == 0 || !(*r >= 1.0) || !(*s_n2 >= 0.0) {
        return Err(Error::domain("need lambda > 0, N >= 1, r >= 1 and s_N^2 >= 0"));
    }
    q.validate()?;
    tau.validate()?;
    let gauss = if *s_n2 == 0.0 {
        0.0
    } else {
        4.0 * (1.0 + lambda * lambda / (r * s_n2)).powf(-r / 2.0)
    };
    let tail = if *tau == DecaySeq::Zero {
        0.0
    } else {
        let s = exceedance_boundary(|u| tau_rate(q, tau, u), lambda / r);
        4.0 * *n as f64 / lambda * q.integrated(s)?
    };
    Ok(gauss + tail)
}

/// `E[|f| 1{|f| >= a}]`.
fn mean_at_least(q: &QuantileFn, a: f64) -> Result<f64> {
    Ok(a * q.tail_at_least(a) + q.tail_integral(a)?)
}

/// Smallest `A >= 0` with `2N E[|f| 1{|f| >= A}] <= x`, to relative
/// precision `1e-10`.
pub fn shao_threshold_a(x: f64, n: usize, q: &QuantileFn) -> Result<f64> {
    if !(x > 0.0) || n == 0 {
        return Err(Error::domain("need x > 0 and N >= 1"));
    }
    let ok = |a: f64| -> Result<bool> { Ok(2.0 * n as f64 * mean_at_least(q, a)? <= x) };
    if ok(0.0)? {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while !ok(hi)? {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::Numerical("no finite threshold A found".into()));
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-10 * hi.max(1e-300) {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Range of the dyadic sums of `rho` in the exponential factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RhoSum {
    /// `i = 0..=floor(log2 N)`.
    Dyadic,
    /// All `i >= 0`.
    Infinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShaoInput {
    pub x: f64,
    pub n: usize,
    pub q_exp: f64,
    pub k: f64,
    pub rho: DecaySeq,
    pub dist: QuantileFn,
    pub a: f64,
    pub rho_sum: RhoSum,
}

fn exp_factors(input: &ShaoInput) -> (f64, f64) {
    let ShaoInput { n, q_exp, k, rho, rho_sum, .. } = input;
    let sum = |power: f64| match rho_sum {
        RhoSum::Dyadic => rho.dyadic_sum(*n as u64, power),
        RhoSum::Infinite => rho.dyadic_sum_infinite(power),
    };
    ((k * sum(1.0)).exp(), (k * sum(2.0 / q_exp)).exp())
}

fn check_shao(input: &ShaoInput) -> Result<()> {
    let ShaoInput { x, n, q_exp, k, a, .. } = input;
    if !(*q_exp >= 2.0) {
        return Err(Error::domain(format!("q = {q_exp} must be at least 2")));
    }
    if !(*x > 0.0) || *n == 0 || !(*k > 0.0) || !(*a >= 0.0) {
        return Err(Error::domain("need x > 0, N >= 1, K > 0 and A >= 0"));
    }
    input.rho.validate()
}

/// `N P(|f| >= A) + K x^{-q} (N^{q/2} e^{K sum rho(2^i)} ||f||_2^q
/// + N e^{K sum rho(2^i)^{2/q}} E[|f|^q 1{|f| <= A}])`.
pub fn shao_bound(input: &ShaoInput) -> Result<f64> {
    check_shao(input)?;
    let ShaoInput { x, n, q_exp, k, dist, a, .. } = input;
    let (e1, e2) = exp_factors(input);
    let nf = *n as f64;
    let l2 = dist.moment(2.0)?.sqrt();
    let big = nf.powf(q_exp / 2.0) * e1 * l2.powf(*q_exp);
    let small = nf * e2 * dist.lower_partial_moment(*q_exp, *a)?;
    Ok(nf * dist.tail_at_least(*a) + k * x.powf(-q_exp) * (big + small))
}

/// The admissible `A` (at least [`shao_threshold_a`]) that minimizes
/// [`shao_bound`]; the `A`-dependent part `N P(|f| >= A) + c E[|f|^q 1{|f| <= A}]`
/// is smallest at `A^q = N / c`.
pub fn shao_best_a(input: &ShaoInput) -> Result<f64> {
    let probe = ShaoInput { a: 0.0, ..input.clone() };
    check_shao(&probe)?;
    let (_, e2) = exp_factors(&probe);
    let c = input.k * input.x.powf(-input.q_exp) * input.n as f64 * e2;
    let a_star = (input.n as f64 / c).powf(1.0 / input.q_exp);
    Ok(shao_threshold_a(input.x, input.n, &input.dist)?.max(a_star))
}

/// One bound-versus-simulation comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationRow {
    pub model: String,
    pub n: usize,
    pub level: f64,
    pub bound: f64,
    pub empirical: f64,
    pub std_error: f64,
    /// `empirical + 3 std_error <= bound`.
    pub dominated: bool,
}

impl DominationRow {
    pub const CSV_HEADER: &'static str = "model,N,lambda_or_x,bound,empirical,stderr,dominated";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.model, self.n, self.level, self.bound, self.empirical, self.std_error, self.dominated
        )
    }
}

fn empirical_row(model_id: &str, n: usize, level: f64, bound: f64, maxima: &[f64], cut: f64) -> DominationRow {
    let hits = maxima.iter().filter(|m| **m >= cut).count();
    let p = hits as f64 / maxima.len() as f64;
    let se = numeric::binomial_se(p, maxima.len());
    DominationRow {
        model: model_id.to_string(),
        n,
        level,
        bound,
        empirical: p,
        std_error: se,
        dominated: p + 3.0 * se <= bound,
    }
}

/// Compares `P(max_{i <= N} |S_i| >= 5 lambda)` with the Fuk–Nagaev bound
/// on a grid of `lambda`. The model must declare its marginal and tau.
pub fn fuk_nagaev_check(
    model: &ProcessModel,
    n: usize,
    r: f64,
    lambdas: &[f64],
    paths: usize,
    seed: u64,
) -> Result<Vec<DominationRow>> {
    let meta = model.metadata();
    let (Some(q), Some(tau)) = (meta.marginal, meta.tau) else {
        return Err(Error::InvalidModel(format!("{} declares no marginal law or tau sequence", model.id())));
    };
    let s_n2 = s_n_squared(model, n)?;
    let maxima: Vec<f64> = prefix_abs_maxima(model, &[n], paths, seed)?.into_iter().map(|v| v[0]).collect();
    let id = model.id();
    lambdas
        .iter()
        .map(|&lambda| {
            let bound = fuk_nagaev_bound(&FukNagaevInput { lambda, n, r, q: q.clone(), tau: tau.clone(), s_n2 })?;
            Ok(empirical_row(&id, n, lambda, bound, &maxima, 5.0 * lambda))
        })
        .collect()
}

/// Smallest `K` on a geometric grid for which the Shao bound dominates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShaoCalibration {
    pub k: f64,
    pub k_grid_index: usize,
    pub n_grid: Vec<usize>,
    pub x_grid: Vec<f64>,
    pub rows: Vec<DominationRow>,
}

/// Search grid `2^{j/2}`, `j = -20..=20`.
pub fn shao_k_grid() -> Vec<f64> {
    (-20..=20).map(|j| (f64::from(j) / 2.0).exp2()).collect()
}

/// Finds the smallest grid `K` such that `P(max_{i <= N} |S_i| >= x) + 3 se`
/// stays below the Shao bound at every `(N, x)`. `x_multipliers` are in
/// units of `sqrt(N) ||f||_2`.
pub fn calibrate_shao_k(
    model: &ProcessModel,
    q_exp: f64,
    n_grid: &[usize],
    x_multipliers: &[f64],
    paths: usize,
    seed: u64,
) -> Result<ShaoCalibration> {
    let meta = model.metadata();
    let (Some(dist), Some(rho)) = (meta.marginal, meta.rho) else {
        return Err(Error::InvalidModel(format!("{} declares no marginal law or rho sequence", model.id())));
    };
    let mut sorted = n_grid.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let maxima = prefix_abs_maxima(model, &sorted, paths, seed)?;
    let l2 = dist.moment(2.0)?.sqrt();
    let id = model.id();
    let grid = shao_k_grid();
    for (gi, &k) in grid.iter().enumerate() {
        let mut rows = Vec::new();
        let mut all = true;
        for (ni, &n) in sorted.iter().enumerate() {
            let column: Vec<f64> = maxima.iter().map(|row| row[ni]).collect();
            for &mult in x_multipliers {
                let x = mult * (n as f64).sqrt() * l2;
                let mut input = ShaoInput {
                    x,
                    n,
                    q_exp,
                    k,
                    rho: rho.clone(),
                    dist: dist.clone(),
                    a: 0.0,
                    rho_sum: RhoSum::Dyadic,
                };
                input.a = shao_best_a(&input)?;
                let row = empirical_row(&id, n, x, shao_bound(&input)?, &column, x);
                all &= row.dominated;
                rows.push(row);
            }
        }
        if all {
            return Ok(ShaoCalibration {
                k,
                k_grid_index: gi,
                n_grid: sorted,
                x_grid: x_multipliers.to_vec(),
                rows,
            });
        }
    }
    Err(Error::Calibration(format!(
        "no K up to {} makes the Shao bound dominate for {id}",
        grid.last().expect("non-empty")
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process_gen::CausalLinear;

    #[test]
    fn s_n_squared_examples() {
        assert!((s_n_squared(&ProcessModel::iid_gaussian(), 17).unwrap() - 17.0).abs() < 1e-12);
        let ar = ProcessModel::GaussianAr1 { phi: 0.5 };
        assert!((s_n_squared(&ar, 2).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn tau_bound_dominates_bernoulli_shift() {
        let m = ProcessModel::CausalLinear(CausalLinear::bernoulli_shift());
        let meta = m.metadata();
        for n in [8, 64, 512] {
            let exact = s_n_squared(&m, n).unwrap();
            let bound = s_n_squared_tau_bound(meta.marginal.as_ref().unwrap(), meta.tau.as_ref().unwrap(), n).unwrap();
            assert!(exact <= bound, "{n}: {exact} > {bound}");
        }
    }

    #[test]
    fn fuk_nagaev_shapes() {
        let q = QuantileFn::bounded(1.0);
        let base = FukNagaevInput { lambda: 1.0, n: 100, r: 4.0, q, tau: DecaySeq::Zero, s_n2: 100.0 };
        let v = fuk_nagaev_bound(&base).unwrap();
        assert!((v - 4.0 * (1.0 + 1.0 / 400.0f64).powf(-2.0)).abs() < 1e-14);
        let tau = DecaySeq::Geometric { scale: 1.0 / 3.0, ratio: 0.5 };
        let mut last = f64::INFINITY;
        for lambda in [1.0, 3.0, 10.0, 30.0, 100.0, 1000.0] {
            let b = fuk_nagaev_bound(&FukNagaevInput {
                lambda,
                tau: tau.clone(),
                q: QuantileFn::uniform_abs(0.5),
                ..base.clone()
            })
            .unwrap();
            assert!(b < last);
            last = b;
        }
        assert!(last < 1e-3);
        let zero = FukNagaevInput { s_n2: 0.0, ..base };
        assert_eq!(fuk_nagaev_bound(&zero).unwrap(), 0.0);
    }

    #[test]
    fn shao_threshold_examples() {
        let c = QuantileFn::bounded(2.0);
        assert!((shao_threshold_a(1e-9, 10, &c).unwrap() - 2.0).abs() < 1e-9);
        assert_eq!(shao_threshold_a(40.0, 10, &c).unwrap(), 0.0);
        let p = QuantileFn::pareto(1.0, 3.0);
        let (n, x) = (50, 2.0);
        let a = shao_threshold_a(x, n, &p).unwrap();
        let expect = (3.0 * n as f64 / x).sqrt();
        assert!((a - expect).abs() < 1e-9 * expect);
    }

    #[test]
    fn shao_bound_decreases_in_x() {
        let dist = QuantileFn::bounded(1.0);
        let mut last = f64::INFINITY;
        for x in [1.0, 2.0, 4.0, 8.0, 16.0, 1e3] {
            let mut input = ShaoInput {
                x,
                n: 64,
                q_exp: 4.0,
                k: 1.0,
                rho: DecaySeq::Zero,
                dist: dist.clone(),
                a: 0.0,
                rho_sum: RhoSum::Dyadic,
            };
            input.a = shao_best_a(&input).unwrap();
            assert!(2.0 * 64.0 * mean_at_least(&dist, input.a).unwrap() <= x);
            let b = shao_bound(&input).unwrap();
            assert!(b.is_finite() && b <= last);
            last = b;
        }
        assert!(last < 1e-3);
    }
}
