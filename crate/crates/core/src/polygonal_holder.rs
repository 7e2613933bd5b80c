//! Partial-sum polygonal paths and discrete Hölder increment statistics.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Largest path length accepted by [`holder_stat_exact`].
pub const EXACT_MAX_N: usize = 1 << 15;

/// `S_0 = 0, S_1, ..., S_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialSumPath {
    sums: Vec<f64>,
}

impl PartialSumPath {
    pub fn from_increments(xs: &[f64]) -> Self {
        let mut sums = Vec::with_capacity(xs.len() + 1);
        let mut acc = 0.0;
        sums.push(0.0);
        for x in xs {
            acc += x;
            sums.push(acc);
        }
        PartialSumPath { sums }
    }

    pub fn from_sums(sums: Vec<f64>) -> Result<Self> {
        if sums.first() != Some(&0.0) {
            return Err(Error::domain("partial sums must start at S_0 = 0"));
        }
        Ok(PartialSumPath { sums })
    }

    pub fn n(&self) -> usize {
        self.sums.len() - 1
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    pub fn increment(&self, k: usize) -> f64 {
        self.sums[k] - self.sums[k - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HolderMethod {
    Exact,
    Dyadic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderStat {
    pub value: f64,
    pub alpha: f64,
    pub method: HolderMethod,
    /// Maximizing pair `(i, i')`, `1 <= i < i' <= n` (exact method only).
    pub argmax: Option<(usize, usize)>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("Hölder exponent {alpha} outside (0, 1]")))
    }
}

/// `sum_{j <= floor(nt)} X_j + (nt - floor(nt)) X_{floor(nt)+1}`.
pub fn polygonal_eval(s: &PartialSumPath, t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain(format!("time {t} outside [0, 1]")));
    }
    let n = s.n();
    let x = n as f64 * t;
    let k = (x.floor() as usize).min(n);
    if k == n {
        return Ok(s.sums[n]);
    }
    Ok(s.sums[k] + (x - k as f64) * s.increment(k + 1))
}

/// `max_{1 <= i < i' <= n} |S_i' - S_i| / (i' - i)^alpha` over the spans
/// `i' - i < max_span`.
fn grid_max(sums: &[f64], alpha: f64, max_span: usize) -> (f64, Option<(usize, usize)>) {
    let n = sums.len() - 1;
    let mut best = 0.0;
    let mut arg = None;
    for d in 1..max_span.min(n) {
        let w = (d as f64).powf(-alpha);
        let (lo, hi) = (&sums[1..=n - d], &sums[1 + d..=n]);
        let mut local = 0.0f64;
        for (a, b) in lo.iter().zip(hi) {
            local = local.max((b - a).abs());
        }
        if local * w > best {
            best = local * w;
            let i = (0..lo.len()).find(|&k| (hi[k] - lo[k]).abs() == local).expect("maximum is attained");
            arg = Some((i + 1, i + 1 + d));
        }
    }
    (best, arg)
}

/// Exact grid statistic `max_{1 <= i < i' <= n} |S_i' - S_i| / (i' - i)^alpha`.
pub fn holder_stat_exact(s: &PartialSumPath, alpha: f64) -> Result<HolderStat> {
    check_alpha(alpha)?;
    let n = s.n();
    if n < 2 {
        return Err(Error::domain("need at least two increments"));
    }
    if n > EXACT_MAX_N {
        return Err(Error::Size(format!(
            "exact statistic is quadratic; n = {n} exceeds {EXACT_MAX_N}, use the dyadic method"
        )));
    }
    let (value, argmax) = grid_max(&s.sums, alpha, n);
    Ok(HolderStat { value, alpha, method: HolderMethod::Exact, argmax })
}

/// Same value as [`holder_stat_exact`] without the size guard.
///
/// Spans are searched by branch and bound: for a span range `[d1, d2]`,
/// `max_i (max_{d1 <= d <= d2} |S_{i+d} - S_i|) d1^{-alpha}` bounds every
/// ratio in the range and costs one sliding-window pass.
pub fn holder_stat_exact_fast(s: &PartialSumPath, alpha: f64) -> Result<HolderStat> {
    check_alpha(alpha)?;
    let n = s.n();
    if n < 2 {
        return Err(Error::domain("need at least two increments"));
    }
    let sums = &s.sums;
    let mut best = 0.0f64;
    let mut arg = None;
    let mut heap: BinaryHeap<SpanRange> = BinaryHeap::new();
    let mut lo = 1usize;
    while lo < n {
        let hi = (2 * lo - 1).min(n - 1);
        heap.push(SpanRange { bound: span_range_bound(sums, lo, hi, alpha), lo, hi });
        lo *= 2;
    }
    while let Some(r) = heap.pop() {
        if r.bound <= best {
            break;
        }
        if r.hi - r.lo < 8 {
            for d in r.lo..=r.hi {
                let w = (d as f64).powf(-alpha);
                let (a, b) = (&sums[1..=n - d], &sums[1 + d..=n]);
                let local = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((y - x).abs()));
                if local * w > best {
                    best = local * w;
                    let i = (0..a.len()).find(|&k| (b[k] - a[k]).abs() == local).expect("maximum is attained");
                    arg = Some((i + 1, i + 1 + d));
                }
            }
            continue;
        }
        let mid = r.lo + (r.hi - r.lo) / 2;
        for (a, b) in [(r.lo, mid), (mid + 1, r.hi)] {
            let bound = span_range_bound(sums, a, b, alpha);
            if bound > best {
                heap.push(SpanRange { bound, lo: a, hi: b });
            }
        }
    }
    Ok(HolderStat { value: best, alpha, method: HolderMethod::Exact, argmax: arg })
}

#[derive(Debug, PartialEq)]
struct SpanRange {
    bound: f64,
    lo: usize,
    hi: usize,
}

impl Eq for SpanRange {}

impl PartialOrd for SpanRange {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SpanRange {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound.total_cmp(&other.bound).then(other.lo.cmp(&self.lo))
    }
}

/// `d1^{-alpha} max_{1 <= i <= n - d1} max_{i + d1 <= j <= min(i + d2, n)} |S_j - S_i|`.
fn span_range_bound(sums: &[f64], d1: usize, d2: usize, alpha: f64) -> f64 {
    let n = sums.len() - 1;
    // monotone deques over the window [i + d1, i + d2]
    let mut maxq: VecDeque<usize> = VecDeque::new();
    let mut minq: VecDeque<usize> = VecDeque::new();
    let mut next = 1 + d1;
    let mut best = 0.0f64;
    for i in 1..=n - d1 {
        let end = (i + d2).min(n);
        while next <= end {
            while maxq.back().is_some_and(|&j| sums[j] <= sums[next]) {
                maxq.pop_back();
            }
            maxq.push_back(next);
            while minq.back().is_some_and(|&j| sums[j] >= sums[next]) {
                minq.pop_back();
            }
            minq.push_back(next);
            next += 1;
        }
        while maxq.front().is_some_and(|&j| j < i + d1) {
            maxq.pop_front();
        }
        while minq.front().is_some_and(|&j| j < i + d1) {
            minq.pop_front();
        }
        let hi = sums[*maxq.front().expect("window is non-empty")];
        let lo = sums[*minq.front().expect("window is non-empty")];
        best = best.max(hi - sums[i]).max(sums[i] - lo);
    }
    best * (d1 as f64).powf(-alpha)
}

/// `max_k max_{1 <= i <= n - 2^k} |S_{i+2^k} - S_i| / 2^{k alpha}`.
///
/// A sub-maximum of the exact statistic; chaining over the binary digits of
/// a span bounds the exact one by [`dyadic_constant`] times this value.
pub fn holder_stat_dyadic(s: &PartialSumPath, alpha: f64) -> Result<HolderStat> {
    check_alpha(alpha)?;
    let n = s.n();
    if n < 2 {
        return Err(Error::domain("need at least two increments"));
    }
    let sums = &s.sums;
    let mut best = 0.0f64;
    let mut span = 1usize;
    while span < n {
        let w = (span as f64).powf(-alpha);
        let local = sums[1..=n - span]
            .iter()
            .zip(&sums[1 + span..])
            .fold(0.0f64, |m, (a, b)| m.max((b - a).abs()));
        best = best.max(local * w);
        span *= 2;
    }
    Ok(HolderStat { value: best, alpha, method: HolderMethod::Dyadic, argmax: None })
}

/// `C(alpha) = 2 / (1 - 2^(alpha - 1))`.
pub fn dyadic_constant(alpha: f64) -> f64 {
    2.0 / (1.0 - 2f64.powf(alpha - 1.0))
}

/// Hölder modulus of `n^{-1/2} S` on grid pairs with `(i' - i) / n < delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledModulus {
    pub value: f64,
    /// `delta n <= 1`: no admissible span.
    pub below_resolution: bool,
}

/// `n^{alpha - 1/2} max_{i' - i < delta n} |S_i' - S_i| / (i' - i)^alpha`.
pub fn scaled_holder_modulus(s: &PartialSumPath, alpha: f64, delta: f64) -> Result<ScaledModulus> {
    check_alpha(alpha)?;
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::domain(format!("delta {delta} outside (0, 1]")));
    }
    let n = s.n();
    if n < 2 {
        return Err(Error::domain("need at least two increments"));
    }
    let limit = delta * n as f64;
    if limit <= 1.0 {
        return Ok(ScaledModulus { value: 0.0, below_resolution: true });
    }
    // spans d with d < limit
    let max_span = (limit.ceil() as usize).min(n);
    let (v, _) = grid_max(&s.sums, alpha, max_span);
    Ok(ScaledModulus { value: (n as f64).powf(alpha - 0.5) * v, below_resolution: false })
}

/// `n^{alpha - 1/2}` times the grid statistic, i.e. the Hölder modulus of
/// the polygonal path of `n^{-1/2} S` over all grid pairs.
pub fn scaled_holder_stat(s: &PartialSumPath, alpha: f64, method: HolderMethod) -> Result<HolderStat> {
    let mut stat = match method {
        HolderMethod::Exact => holder_stat_exact_fast(s, alpha)?,
        HolderMethod::Dyadic => holder_stat_dyadic(s, alpha)?,
    };
    stat.value *= (s.n() as f64).powf(alpha - 0.5);
    Ok(stat)
}

/// Gaussian random walk with increment variance `1/n`.
pub fn sample_bm_path(n: usize, seed: u64) -> PartialSumPath {
    let mut rng = rng_from_seed(seed);
    let sd = (n as f64).powf(-0.5);
    let xs: Vec<f64> = (0..n).map(|_| sd * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
    PartialSumPath::from_increments(&xs)
}

/// Hölder statistic `max |W(t') - W(t)| / |t' - t|^alpha` over grid pairs of
/// a discretized Brownian path.
pub fn sample_bm_reference(n: usize, alpha: f64, seed: u64, method: HolderMethod) -> Result<HolderStat> {
    if n < 2 {
        return Err(Error::domain("need at least two increments"));
    }
    let path = sample_bm_path(n, seed);
    let mut stat = match method {
        HolderMethod::Exact => holder_stat_exact_fast(&path, alpha)?,
        HolderMethod::Dyadic => holder_stat_dyadic(&path, alpha)?,
    };
    stat.value *= (n as f64).powf(alpha);
    Ok(stat)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(sums: &[f64], alpha: f64) -> f64 {
        let n = sums.len() - 1;
        let mut best = 0.0f64;
        for i in 1..=n {
            for j in i + 1..=n {
                best = best.max((sums[j] - sums[i]).abs() / ((j - i) as f64).powf(alpha));
            }
        }
        best
    }

    #[test]
    fn polygonal_examples() {
        let s = PartialSumPath::from_increments(&[1.0, -2.0, 3.0, 0.5]);
        assert_eq!(polygonal_eval(&s, 0.0).unwrap(), 0.0);
        for k in 0..=4 {
            assert_eq!(polygonal_eval(&s, k as f64 / 4.0).unwrap(), s.sums()[k]);
        }
        let mid = polygonal_eval(&s, 1.5 / 4.0).unwrap();
        assert!((mid - 0.5 * (s.sums()[1] + s.sums()[2])).abs() < 1e-15);
        assert!(polygonal_eval(&s, 1.1).is_err());
    }

    #[test]
    fn exact_examples() {
        let s = PartialSumPath::from_sums(vec![0.0, 1.0, -1.0, 2.0]).unwrap();
        let h = holder_stat_exact(&s, 0.5).unwrap();
        assert_eq!(h.value, 3.0);
        assert_eq!(h.argmax, Some((2, 3)));
        let n = 50;
        let lin = PartialSumPath::from_increments(&vec![1.0; n]);
        let h = holder_stat_exact(&lin, 0.25).unwrap();
        assert!((h.value - ((n - 1) as f64).powf(0.75)).abs() < 1e-12);
        let mut spike = vec![0.0; 9];
        spike[4] = 1.0;
        let sp = PartialSumPath::from_increments(&spike);
        assert!((holder_stat_exact(&sp, 0.3).unwrap().value - 1.0).abs() < 1e-15);
        assert!(holder_stat_dyadic(&sp, 0.3).unwrap().value >= 1.0 / dyadic_constant(0.3));
    }

    #[test]
    fn exact_matches_brute_force() {
        let xs: Vec<f64> = (0..97).map(|k| ((k * 37 % 11) as f64 - 5.0) * 0.3).collect();
        let s = PartialSumPath::from_increments(&xs);
        for alpha in [0.1, 0.25, 0.5] {
            let h = holder_stat_exact(&s, alpha).unwrap();
            assert!((h.value - brute(s.sums(), alpha)).abs() < 1e-12);
            let (i, j) = h.argmax.unwrap();
            let r = (s.sums()[j] - s.sums()[i]).abs() / ((j - i) as f64).powf(alpha);
            assert!((r - h.value).abs() < 1e-12);
        }
    }

    #[test]
    fn fast_exact_matches_quadratic() {
        for seed in 0..30 {
            let path = sample_bm_path(300 + seed as usize * 7, seed);
            for alpha in [0.05, 1.0 / 6.0, 0.4, 0.9] {
                let a = holder_stat_exact(&path, alpha).unwrap();
                let b = holder_stat_exact_fast(&path, alpha).unwrap();
                assert_eq!(a.value, b.value);
            }
        }
        let s = PartialSumPath::from_sums(vec![0.0, 1.0, -1.0, 2.0]).unwrap();
        assert_eq!(holder_stat_exact_fast(&s, 0.5).unwrap().argmax, Some((2, 3)));
    }

    #[test]
    fn size_guard() {
        let s = PartialSumPath::from_increments(&vec![0.0; EXACT_MAX_N + 1]);
        assert!(matches!(holder_stat_exact(&s, 0.2), Err(Error::Size(_))));
        assert!(holder_stat_dyadic(&s, 0.2).is_ok());
    }

    #[test]
    fn modulus_examples() {
        let n = 40;
        let lin = PartialSumPath::from_increments(&vec![1.0; n]);
        let a = 0.3;
        let m = scaled_holder_modulus(&lin, a, 0.5).unwrap();
        let expect = (n as f64).powf(a - 0.5) * ((n / 2 - 1) as f64).powf(1.0 - a);
        assert!((m.value - expect).abs() < 1e-12);
        let full = scaled_holder_modulus(&lin, a, 1.0).unwrap().value;
        let exact = holder_stat_exact(&lin, a).unwrap().value;
        assert!((full - (n as f64).powf(a - 0.5) * exact).abs() < 1e-12);
        let zero = PartialSumPath::from_increments(&vec![0.0; n]);
        assert_eq!(scaled_holder_modulus(&zero, a, 0.3).unwrap().value, 0.0);
        assert!(scaled_holder_modulus(&lin, a, 0.01).unwrap().below_resolution);
    }

    #[test]
    fn brownian_terminal_variance() {
        let w: Vec<f64> = (0..10_000).map(|s| *sample_bm_path(64, s).sums().last().unwrap()).collect();
        let v = crate::numeric::variance(&w);
        assert!((v - 1.0).abs() < 0.05, "{v}");
    }
}
