//! The process `f = m + g - g o T` on the dyadic odometer.
//!
//! The odometer adds one with carry to an infinite fair-coin bit sequence.
//! With `A_l = {first b_l bits zero}` the sets `T^m A_l`, `0 <= m < N_l`,
//! partition the space exactly, and the rung of a point is the integer
//! `j_l` formed by its first `b_l` bits. Levels are kept in a `u128`, so
//! `b_l <= MAX_BITS`.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric;
use crate::polygonal_holder::PartialSumPath;
use crate::process_gen::Trajectory;
use crate::rng::replicate_rng;

/// Largest tower exponent representable together with a 64-bit time shift.
pub const MAX_BITS: u32 = 126;
/// Declared bound on the prefix sums of `K_l / K_{l+1}^{1/2}`.
pub const K_RATIO_PREFIX_BOUND: f64 = 1.0;
/// Probability budget for omitted levels to be nonzero over a time window.
pub const OMITTED_LEVEL_TOL: f64 = 1e-9;
/// Cap on pair evaluations in the fallback of [`holder_event_probability`].
const FALLBACK_PAIR_BUDGET: f64 = 2e9;

/// Outcome of each validity check on a tower sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificates {
    pub four_k_le_n: bool,
    pub increasing: bool,
    /// `4 N_l^{-1/p} l N_{l-1} < 1` for `l >= 2`.
    pub growth: bool,
    /// `sum_{i <= l} K_i^{1/2} <= K_{l+1}^{1/2}`.
    pub sqrt_k_dominance: bool,
    /// Prefix sums of `K_l / K_{l+1}^{1/2}` stay below [`K_RATIO_PREFIX_BOUND`].
    pub k_ratio_prefix: bool,
    /// `N_l sum_{l < l'} K_l' / N_l'` decreases in `l`. A finite stand-in
    /// for the limit condition.
    pub tail_surrogate: bool,
    pub tail_surrogate_values: Vec<f64>,
}

impl Certificates {
    pub fn all_pass(&self) -> bool {
        self.four_k_le_n
            && self.increasing
            && self.growth
            && self.sqrt_k_dominance
            && self.k_ratio_prefix
            && self.tail_surrogate
    }
}

/// Tower heights `N_l = 2^{b_l}` and tent half-widths `K_l = 2^{k_l}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TowerParams {
    p: f64,
    b: Vec<u32>,
    k: Vec<u32>,
    certificates: Certificates,
    waived: bool,
    /// `(b, k)` exponents of the first level beyond `l_max`, when the
    /// default sequence continues past it.
    next_level: Option<(f64, f64)>,
}

fn next_exponent(p: f64, level: usize, prev_b: f64) -> f64 {
    // smallest b with 2^b > (4 l N_{l-1})^p
    let x = p * ((4.0 * level as f64).log2() + prev_b);
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r + 1.0
    } else {
        x.floor() + 1.0
    }
}

fn default_exponents(p: f64, levels: usize) -> (Vec<f64>, Vec<f64>) {
    let mut b = vec![4.0];
    for l in 2..=levels {
        let prev = b[l - 2];
        b.push(next_exponent(p, l, prev));
    }
    let k = b.iter().map(|x| (x / 2.0).floor()).collect();
    (b, k)
}

/// Number of levels of the default sequence that fit in [`MAX_BITS`].
pub fn max_feasible_levels(p: f64) -> usize {
    let mut b = 4.0;
    let mut l = 1;
    loop {
        let nb = next_exponent(p, l + 1, b);
        if nb > f64::from(MAX_BITS) {
            return l;
        }
        b = nb;
        l += 1;
    }
}

fn certify(p: f64, b: &[u32], k: &[u32]) -> Certificates {
    let n = |l: usize| 2f64.powi(b[l] as i32);
    let kk = |l: usize| 2f64.powi(k[l] as i32);
    let lm = b.len();
    let four_k_le_n = (0..lm).all(|l| k[l] + 2 <= b[l]);
    let increasing = b.windows(2).all(|w| w[0] < w[1]) && k.windows(2).all(|w| w[0] < w[1]);
    let growth = (1..lm).all(|i| {
        let level = (i + 1) as f64;
        2.0 + level.log2() + f64::from(b[i - 1]) - f64::from(b[i]) / p < 0.0
    });
    let sqrt_k_dominance = (0..lm.saturating_sub(1)).all(|l| {
        let s: f64 = (0..=l).map(|i| kk(i).sqrt()).sum();
        s <= kk(l + 1).sqrt()
    });
    let mut prefix = 0.0;
    let mut k_ratio_prefix = true;
    for l in 0..lm.saturating_sub(1) {
        prefix += kk(l) / kk(l + 1).sqrt();
        k_ratio_prefix &= prefix <= K_RATIO_PREFIX_BOUND;
    }
    let tail_surrogate_values: Vec<f64> = (0..lm)
        .map(|l| n(l) * ((l + 1)..lm).map(|m| kk(m) / n(m)).sum::<f64>())
        .collect();
    let tail_surrogate = tail_surrogate_values.windows(2).all(|w| w[1] < w[0]);
    Certificates {
        four_k_le_n,
        increasing,
        growth,
        sqrt_k_dominance,
        k_ratio_prefix,
        tail_surrogate,
        tail_surrogate_values,
    }
}

impl TowerParams {
    /// Default sequence: `N_1 = 16`, `N_l` the smallest power of two above
    /// `(4 l N_{l-1})^p`, `K_l = 2^{floor(b_l / 2)}`.
    pub fn make(p: f64, l_max: usize) -> Result<Self> {
        if !(p > 2.0) || !p.is_finite() {
            return Err(Error::domain(format!("p = {p} must exceed 2")));
        }
        if l_max == 0 {
            return Err(Error::domain("need at least one level"));
        }
        let feasible = max_feasible_levels(p);
        if l_max > feasible {
            return Err(Error::Size(format!(
                "level {l_max} needs more than {MAX_BITS} bits at p = {p}; largest feasible l_max is {feasible}"
            )));
        }
        let (bf, kf) = default_exponents(p, l_max + 1);
        let b: Vec<u32> = bf[..l_max].iter().map(|x| *x as u32).collect();
        let k: Vec<u32> = kf[..l_max].iter().map(|x| *x as u32).collect();
        Self::build(p, b, k, false, Some((bf[l_max], kf[l_max])))
    }

    /// Default sequence with as many levels as fit, at most three.
    pub fn default_for(p: f64) -> Result<Self> {
        if !(p > 2.0) || !p.is_finite() {
            return Err(Error::domain(format!("p = {p} must exceed 2")));
        }
        Self::make(p, max_feasible_levels(p).min(3))
    }

    /// Explicit exponents. With `waive` the certificates are recorded but
    /// not enforced; omitted levels are then assumed absent.
    pub fn custom(p: f64, b: Vec<u32>, k: Vec<u32>, waive: bool) -> Result<Self> {
        if !(p > 2.0) {
            return Err(Error::domain(format!("p = {p} must exceed 2")));
        }
        if b.is_empty() || b.len() != k.len() {
            return Err(Error::domain("b and K must be non-empty and of equal length"));
        }
        if b.iter().any(|x| *x > MAX_BITS || *x == 0) || k.iter().zip(&b).any(|(kk, bb)| kk >= bb) {
            return Err(Error::Size(format!("exponents must satisfy 0 <= k_l < b_l <= {MAX_BITS}")));
        }
        Self::build(p, b, k, waive, None)
    }

    fn build(p: f64, b: Vec<u32>, k: Vec<u32>, waived: bool, next_level: Option<(f64, f64)>) -> Result<Self> {
        let certificates = certify(p, &b, &k);
        if !waived && !certificates.all_pass() {
            return Err(Error::InvalidModel(format!("tower sequence fails validity checks: {certificates:?}")));
        }
        Ok(TowerParams { p, b, k, certificates, waived, next_level })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn levels(&self) -> usize {
        self.b.len()
    }

    /// `b_l` for `l = 1..=levels`.
    pub fn b(&self, l: usize) -> u32 {
        self.b[l - 1]
    }

    pub fn n(&self, l: usize) -> u128 {
        1u128 << self.b[l - 1]
    }

    pub fn k(&self, l: usize) -> u128 {
        1u128 << self.k[l - 1]
    }

    pub fn certificates(&self) -> &Certificates {
        &self.certificates
    }

    pub fn waived(&self) -> bool {
        self.waived
    }

    /// `N_l^{1/p} / K_l^{1/2 + 1/p}`, the tent slope.
    pub fn slope(&self, l: usize) -> f64 {
        let (b, k) = (f64::from(self.b[l - 1]), f64::from(self.k[l - 1]));
        (b / self.p - k * (0.5 + 1.0 / self.p)).exp2()
    }

    /// Tent peak `N_l^{1/p} K_l^{1/2 - 1/p}`.
    pub fn peak(&self, l: usize) -> f64 {
        let (b, k) = (f64::from(self.b[l - 1]), f64::from(self.k[l - 1]));
        (b / self.p + k * (0.5 - 1.0 / self.p)).exp2()
    }

    /// Bound on the probability that a level above `l_max` is nonzero at
    /// some time in a window of `len` consecutive steps.
    pub fn omitted_mass(&self, len: u64) -> f64 {
        // (2K + len) / N of the first omitted level; the later ones are
        // smaller by far more than a factor two in total
        self.next_level.map_or(0.0, |(b, k)| {
            2.0 * ((k + 1.0 - b).exp2() + len as f64 * (-b).exp2())
        })
    }
}

/// First 128 bits of a point of the odometer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OdometerState {
    bits: u128,
    len: u32,
}

impl OdometerState {
    /// `len` leading bits, least significant first.
    pub fn new(bits: u128, len: u32) -> Result<Self> {
        if len > 128 {
            return Err(Error::domain("an odometer state holds at most 128 bits"));
        }
        let bits = if len == 128 { bits } else { bits & ((1u128 << len) - 1) };
        Ok(OdometerState { bits, len })
    }

    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let lo = u128::from(rng.random::<u64>());
        let hi = u128::from(rng.random::<u64>());
        OdometerState { bits: lo | (hi << 64), len: 128 }
    }

    /// Rung `j_l`: the integer formed by the first `b` bits.
    pub fn position(&self, b: u32) -> Result<u128> {
        if b > self.len {
            return Err(Error::domain(format!("state has {} bits, level needs {b}", self.len)));
        }
        Ok(if b == 128 { self.bits } else { self.bits & ((1u128 << b) - 1) })
    }

    /// `T^i`: add `i` with carry. Carries out of the stored prefix are
    /// dropped; they only touch bits that no level reads.
    pub fn shifted(&self, i: u64) -> Self {
        let mask = if self.len == 128 { u128::MAX } else { (1u128 << self.len) - 1 };
        OdometerState { bits: self.bits.wrapping_add(u128::from(i)) & mask, len: self.len }
    }
}

/// `g_l` on rung `m`: with `j = N_l - m`, `slope * j` for `1 <= j <= K_l`,
/// `slope * (2K_l - j)` for `K_l < j < 2K_l`, else 0.
pub fn g_level_value(params: &TowerParams, l: usize, m: u128) -> Result<f64> {
    if l == 0 || l > params.levels() {
        return Err(Error::domain(format!("level {l} outside 1..={}", params.levels())));
    }
    let (n, k) = (params.n(l), params.k(l));
    if m >= n {
        return Err(Error::domain(format!("rung {m} outside [0, {n})")));
    }
    Ok(tent(n - m, k, params.slope(l)))
}

fn tent(j: u128, k: u128, slope: f64) -> f64 {
    if j >= 1 && j <= k {
        slope * j as f64
    } else if j > k && j < 2 * k {
        slope * (2 * k - j) as f64
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GValue {
    pub value: f64,
    /// An omitted level may be nonzero at this time with probability above
    /// [`OMITTED_LEVEL_TOL`].
    pub truncated: bool,
}

/// Precomputed per-level constants for fast evaluation of `g o T^i`.
#[derive(Debug, Clone)]
pub struct GEvaluator {
    masks: Vec<u128>,
    n: Vec<u128>,
    k: Vec<u128>,
    slope: Vec<f64>,
    base: Vec<u128>,
}

impl GEvaluator {
    pub fn new(params: &TowerParams, state: &OdometerState) -> Result<Self> {
        let lm = params.levels();
        let base = (1..=lm).map(|l| state.position(params.b(l))).collect::<Result<Vec<_>>>()?;
        Ok(GEvaluator {
            masks: (1..=lm).map(|l| params.n(l) - 1).collect(),
            n: (1..=lm).map(|l| params.n(l)).collect(),
            k: (1..=lm).map(|l| params.k(l)).collect(),
            slope: (1..=lm).map(|l| params.slope(l)).collect(),
            base,
        })
    }

    /// Rung of level `l` (1-based) at time `i`.
    pub fn rung(&self, l: usize, i: u64) -> u128 {
        self.base[l - 1].wrapping_add(u128::from(i)) & self.masks[l - 1]
    }

    pub fn level(&self, l: usize, i: u64) -> f64 {
        let m = self.rung(l, i);
        tent(self.n[l - 1] - m, self.k[l - 1], self.slope[l - 1])
    }

    /// `g(T^i omega)` summed over all represented levels.
    pub fn at(&self, i: u64) -> f64 {
        (1..=self.n.len()).map(|l| self.level(l, i)).sum()
    }
}

/// `g(T^i omega) = sum_{l <= l_max} g_l` at rung `(j_l + i) mod N_l`.
pub fn eval_g(params: &TowerParams, state: &OdometerState, i: u64) -> Result<GValue> {
    let ev = GEvaluator::new(params, state)?;
    let truncated = params.omitted_mass(i.saturating_add(1)) > OMITTED_LEVEL_TOL;
    Ok(GValue { value: ev.at(i), truncated })
}

/// `X_j = m_j + g(T^j) - g(T^{j+1})`, `j = 1..n`, with Rademacher `m_j`
/// scaled by `sigma_m`.
pub fn sample_values_into<R: Rng + ?Sized>(
    params: &TowerParams,
    sigma_m: f64,
    n: usize,
    rng: &mut R,
    out: &mut Vec<f64>,
) {
    out.clear();
    let state = OdometerState::sample(rng);
    let ev = GEvaluator::new(params, &state).expect("sampled states carry 128 bits");
    let mut prev = ev.at(1);
    for j in 1..=n as u64 {
        let next = ev.at(j + 1);
        let m = if sigma_m == 0.0 {
            0.0
        } else if rng.random::<bool>() {
            sigma_m
        } else {
            -sigma_m
        };
        out.push(m + prev - next);
        prev = next;
    }
}

/// One path of `f` together with its partial sums.
pub fn sample_f_path(params: &TowerParams, sigma_m: f64, n: usize, seed: u64) -> Result<(Trajectory, PartialSumPath)> {
    if n == 0 {
        return Err(Error::domain("path length must be at least 1"));
    }
    if !(sigma_m >= 0.0) {
        return Err(Error::domain(format!("martingale scale {sigma_m} is negative")));
    }
    let mut rng = crate::rng::rng_from_seed(seed);
    let mut values = Vec::with_capacity(n);
    sample_values_into(params, sigma_m, n, &mut rng, &mut values);
    let path = PartialSumPath::from_increments(&values);
    let model_id = format!("counterexample:{}:sigma_m={sigma_m}", params.p());
    Ok((Trajectory { values, model_id, master_seed: seed, n }, path))
}

/// Monte Carlo estimate of the level-`l` Hölder event probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventEstimate {
    pub level: usize,
    pub probability: f64,
    pub std_error: f64,
    pub replicates: usize,
    /// Replicates that the sparse decision could not settle; counted as
    /// non-events in `probability`.
    pub undecided: usize,
    pub threshold: f64,
}

/// Exponent `1/2 - 1/p` of the event.
fn event_exponent(p: f64) -> f64 {
    0.5 - 1.0 / p
}

/// `max_{1 <= i < i' <= N_l} |g(T^i') - g(T^i)| / (i' - i)^{1/2 - 1/p}` by
/// enumerating all pairs.
pub fn max_ratio_brute_force(params: &TowerParams, l: usize, state: &OdometerState) -> Result<f64> {
    let n = params.n(l);
    if n > 1 << 14 {
        return Err(Error::Size(format!("brute force over N_l = {n} is quadratic")));
    }
    let ev = GEvaluator::new(params, state)?;
    let vals: Vec<f64> = (1..=n as u64).map(|i| ev.at(i)).collect();
    let beta = event_exponent(params.p());
    let mut best = 0.0f64;
    for a in 0..vals.len() {
        for b in a + 1..vals.len() {
            best = best.max((vals[b] - vals[a]).abs() / ((b - a) as f64).powf(beta));
        }
    }
    Ok(best)
}

/// Times in `1..=len` where level `l` is nonzero, as at most two intervals.
fn support_in_window(ev: &GEvaluator, l: usize, len: u64) -> Vec<(u64, u64)> {
    let n = ev.n[l - 1];
    let k = ev.k[l - 1];
    // nonzero rungs m with N - m in [1, 2K - 1], i.e. m in [N - 2K + 1, N - 1]
    let lo_rung = n - 2 * k + 1;
    let m1 = ev.rung(l, 1);
    // time offset from t = 1 to the first nonzero rung
    let mut out = Vec::new();
    let mut push = |start: u128, width: u128| {
        // interval of times [1 + start, 1 + start + width - 1] clipped to len
        if start < u128::from(len) {
            let end = (start + width - 1).min(u128::from(len) - 1);
            out.push((1 + start as u64, 1 + end as u64));
        }
    };
    if m1 >= lo_rung {
        // already inside the support at time 1
        push(0, n - m1);
        let to_next = n - m1 + (lo_rung);
        push(to_next, 2 * k - 1);
    } else {
        push(lo_rung - m1, 2 * k - 1);
    }
    out
}

enum Decision {
    Event,
    NoEvent,
    Undecided,
}

/// Decides the event for one state using only the support windows of the
/// tents at levels `>= l`.
fn decide_event(params: &TowerParams, l: usize, state: &OdometerState) -> Result<Decision> {
    let ev = GEvaluator::new(params, state)?;
    let len = params.n(l) as u64;
    let beta = event_exponent(params.p());
    let threshold = params.peak_threshold(l);
    let ratio = |a: u64, b: u64| (ev.at(b) - ev.at(a)).abs() / ((b - a) as f64).powf(beta);

    // per level: slope, visible height, visible intervals
    let low_peak: f64 = (1..l).map(|m| params.peak(m)).sum();
    let mut terms: Vec<(f64, f64)> = (1..l).map(|m| (params.slope(m), params.peak(m))).collect();
    let mut keys = vec![1u64, len];
    let mut active_high = false;
    let mut windows = Vec::new();
    for m in l..=params.levels() {
        let support = support_in_window(&ev, m, len);
        if support.is_empty() {
            continue;
        }
        let mut height = 0.0f64;
        for &(a, b) in &support {
            // the maximum of a tent piece sits at an end or at the peak rung
            let peak_time = {
                let rung_peak = ev.n[m - 1] - ev.k[m - 1];
                let r = ev.rung(m, a);
                let dt = rung_peak.wrapping_sub(r) & ev.masks[m - 1];
                u64::try_from(u128::from(a) + dt).unwrap_or(u64::MAX)
            };
            for t in [a, b, peak_time] {
                if (a..=b).contains(&t) {
                    height = height.max(ev.level(m, t));
                    keys.push(t);
                }
            }
            keys.push(a.saturating_sub(1).max(1));
            keys.push((b + 1).min(len));
            if m == l {
                windows.push((a, b));
            }
        }
        if m > l {
            active_high = true;
        }
        terms.push((params.slope(m), height));
    }

    keys.sort_unstable();
    keys.dedup();
    for (x, &a) in keys.iter().enumerate() {
        for &b in &keys[x + 1..] {
            if ratio(a, b) >= threshold {
                return Ok(Decision::Event);
            }
        }
    }

    // upper bound sup_s sum_m min(slope_m s, height_m) / s^beta, maximal at
    // breakpoints or ends since each piece is quasi-convex in s
    let bound = |s: f64| terms.iter().map(|(sl, h)| (sl * s).min(*h)).sum::<f64>() / s.powf(beta);
    let mut cands = vec![1.0, (len - 1) as f64];
    for (sl, h) in &terms {
        if *sl > 0.0 {
            let s = h / sl;
            cands.extend([s.floor(), s.ceil()]);
        }
    }
    let upper = cands
        .into_iter()
        .filter(|s| *s >= 1.0 && *s <= (len - 1) as f64)
        .map(bound)
        .fold(0.0f64, f64::max);
    if upper < threshold {
        return Ok(Decision::NoEvent);
    }

    // pairs with both ends off the level-l support move by at most the low
    // levels; pairs further than `reach` from it cannot reach the threshold
    if active_high || low_peak >= threshold {
        return if len <= 1 << 12 {
            brute_decision(&ev, len, beta, threshold)
        } else {
            Ok(Decision::Undecided)
        };
    }
    let height_l = terms.last().map_or(0.0, |t| t.1);
    let reach = ((height_l + low_peak) / threshold).powf(1.0 / beta).ceil() as u64;
    let in_support: Vec<u64> = windows.iter().flat_map(|&(a, b)| a..=b).collect();
    let near: Vec<u64> = {
        let mut v: Vec<u64> = windows
            .iter()
            .flat_map(|&(a, b)| a.saturating_sub(reach).max(1)..=(b.saturating_add(reach)).min(len))
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    if in_support.len() as f64 * near.len() as f64 > FALLBACK_PAIR_BUDGET {
        return Ok(Decision::Undecided);
    }
    let near_vals: Vec<f64> = near.iter().map(|&t| ev.at(t)).collect();
    for &a in &in_support {
        let ga = ev.at(a);
        for (&b, &gb) in near.iter().zip(&near_vals) {
            if b != a && (gb - ga).abs() / (b.abs_diff(a) as f64).powf(beta) >= threshold {
                return Ok(Decision::Event);
            }
        }
    }
    Ok(Decision::NoEvent)
}

fn brute_decision(ev: &GEvaluator, len: u64, beta: f64, threshold: f64) -> Result<Decision> {
    let vals: Vec<f64> = (1..=len).map(|i| ev.at(i)).collect();
    for a in 0..vals.len() {
        for b in a + 1..vals.len() {
            if (vals[b] - vals[a]).abs() / ((b - a) as f64).powf(beta) >= threshold {
                return Ok(Decision::Event);
            }
        }
    }
    Ok(Decision::NoEvent)
}

impl TowerParams {
    /// `N_l^{1/p} / 2`.
    pub fn peak_threshold(&self, l: usize) -> f64 {
        0.5 * (f64::from(self.b[l - 1]) / self.p).exp2()
    }
}

/// Indicator of the level-`l` event for one state, decided sparsely.
/// `None` when the sparse decision is inconclusive.
pub fn holder_event(params: &TowerParams, l: usize, state: &OdometerState) -> Result<Option<bool>> {
    if l == 0 || l > params.levels() {
        return Err(Error::domain(format!("level {l} outside 1..={}", params.levels())));
    }
    Ok(match decide_event(params, l, state)? {
        Decision::Event => Some(true),
        Decision::NoEvent => Some(false),
        Decision::Undecided => None,
    })
}

/// Fraction of `replicates` sampled states on which
/// `max_{1 <= i < i' <= N_l} |g(T^i') - g(T^i)| / (i' - i)^{1/2 - 1/p} >= N_l^{1/p} / 2`.
pub fn holder_event_probability(params: &TowerParams, l: usize, replicates: usize, seed: u64) -> Result<EventEstimate> {
    if l == 0 || l > params.levels() {
        return Err(Error::domain(format!("level {l} outside 1..={}", params.levels())));
    }
    if params.b(l) > 62 {
        return Err(Error::Size(format!("N_{l} = 2^{} exceeds the simulation budget", params.b(l))));
    }
    if replicates == 0 {
        return Err(Error::domain("need at least one replicate"));
    }
    let outcomes = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, r);
            let state = OdometerState::sample(&mut rng);
            holder_event(params, l, &state)
        })
        .collect::<Result<Vec<_>>>()?;
    let hits = outcomes.iter().filter(|o| **o == Some(true)).count();
    let undecided = outcomes.iter().filter(|o| o.is_none()).count();
    let probability = hits as f64 / replicates as f64;
    Ok(EventEstimate {
        level: l,
        probability,
        std_error: numeric::binomial_se(probability, replicates),
        replicates,
        undecided,
        threshold: params.peak_threshold(l),
    })
}

/// One row of [`lp_ratio`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpRatioRow {
    pub n: u64,
    /// Estimate of `E|S_n(f)|^p / n^{p/2}`.
    pub estimate: f64,
    pub std_error: f64,
    /// `||g - g o T^n||_p / sqrt(n)`, reported when `sigma_m = 0`.
    pub coboundary_norm: Option<f64>,
}

/// `E|S_n(f)|^p / n^{p/2}` over `n_grid`, using
/// `S_n = sum m_j + g(T omega) - g(T^{n+1} omega)`.
pub fn lp_ratio(
    params: &TowerParams,
    p: f64,
    sigma_m: f64,
    n_grid: &[u64],
    replicates: usize,
    seed: u64,
) -> Result<Vec<LpRatioRow>> {
    if !(sigma_m >= 0.0) || !(p > 0.0) {
        return Err(Error::domain("need sigma_m >= 0 and p > 0"));
    }
    if replicates < 2 {
        return Err(Error::domain("need at least two replicates"));
    }
    n_grid
        .iter()
        .enumerate()
        .map(|(gi, &n)| {
            if n == 0 {
                return Err(Error::domain("n must be at least 1"));
            }
            let sub = crate::rng::derive_seed(seed, gi as u64);
            let vals: Vec<f64> = (0..replicates as u64)
                .into_par_iter()
                .map(|r| {
                    let mut rng = replicate_rng(sub, r);
                    let state = OdometerState::sample(&mut rng);
                    let ev = GEvaluator::new(params, &state).expect("sampled states carry 128 bits");
                    let mart = if sigma_m == 0.0 {
                        0.0
                    } else {
                        let heads = Binomial::new(n, 0.5).expect("valid binomial").sample(&mut rng);
                        sigma_m * (2.0 * heads as f64 - n as f64)
                    };
                    let s = mart + ev.at(1) - ev.at(n + 1);
                    s.abs().powf(p) / (n as f64).powf(p / 2.0)
                })
                .collect();
            let estimate = numeric::mean(&vals);
            Ok(LpRatioRow {
                n,
                estimate,
                std_error: numeric::std_error(&vals),
                coboundary_norm: (sigma_m == 0.0).then(|| estimate.powf(1.0 / p)),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mini() -> TowerParams {
        TowerParams::custom(3.0, vec![6], vec![2], true).unwrap()
    }

    #[test]
    fn default_sequence_at_p3() {
        let t = TowerParams::make(3.0, 2).unwrap();
        assert_eq!(t.n(1), 16);
        assert_eq!(t.n(2), 1 << 22);
        assert_eq!(t.k(1), 4);
        assert_eq!(t.k(2), 1 << 11);
        assert!(t.certificates().all_pass());
        assert_eq!(max_feasible_levels(3.0), 3);
        let d = TowerParams::default_for(3.0).unwrap();
        assert_eq!(d.b(3), 77);
        match TowerParams::make(3.0, 4) {
            Err(Error::Size(msg)) => assert!(msg.contains("largest feasible l_max is 3")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn k_equal_n_rejected() {
        assert!(TowerParams::custom(3.0, vec![6], vec![6], false).is_err());
        assert!(TowerParams::custom(3.0, vec![4, 22], vec![3, 11], false).is_err());
    }

    #[test]
    fn level_values() {
        let t = TowerParams::make(3.0, 2).unwrap();
        let (n, k) = (t.n(2), t.k(2));
        let peak = g_level_value(&t, 2, n - k).unwrap();
        assert!((peak - t.peak(2)).abs() < 1e-9 * peak);
        let expect = (22.0f64 / 3.0 + 11.0 * (0.5 - 1.0 / 3.0)).exp2();
        assert!((peak - expect).abs() < 1e-9 * expect);
        assert_eq!(g_level_value(&t, 2, 0).unwrap(), 0.0);
        assert!(g_level_value(&t, 2, n).is_err());
    }

    #[test]
    fn zero_state_gives_zero() {
        let t = TowerParams::default_for(3.0).unwrap();
        let s = OdometerState::new(0, 128).unwrap();
        assert_eq!(eval_g(&t, &s, 0).unwrap().value, 0.0);
        assert!(!eval_g(&t, &s, 1 << 22).unwrap().truncated);
        assert!(!eval_g(&TowerParams::make(3.0, 2).unwrap(), &s, 1 << 22).unwrap().truncated);
        assert!(eval_g(&TowerParams::make(3.0, 1).unwrap(), &s, 0).unwrap().truncated);
    }

    #[test]
    fn short_state_is_rejected() {
        let t = TowerParams::default_for(3.0).unwrap();
        let s = OdometerState::new(5, 30).unwrap();
        assert!(eval_g(&t, &s, 0).is_err());
    }

    #[test]
    fn telescoping_is_exact_without_martingale() {
        let t = TowerParams::make(3.0, 2).unwrap();
        for seed in 0..20 {
            let (_, path) = sample_f_path(&t, 0.0, 5000, seed).unwrap();
            let mut rng = crate::rng::rng_from_seed(seed);
            let state = OdometerState::sample(&mut rng);
            let ev = GEvaluator::new(&t, &state).unwrap();
            let direct = ev.at(1) - ev.at(5001);
            assert!((path.sums()[5000] - direct).abs() <= 1e-9);
        }
    }

    #[test]
    fn sparse_event_matches_brute_force_on_mini_tower() {
        let t = mini();
        for bits in 0..64u128 {
            let s = OdometerState::new(bits, 6).unwrap();
            let brute = max_ratio_brute_force(&t, 1, &s).unwrap() >= t.peak_threshold(1);
            assert_eq!(holder_event(&t, 1, &s).unwrap(), Some(brute), "state {bits}");
        }
    }

    #[test]
    fn sparse_event_matches_brute_force_on_two_levels() {
        let t = TowerParams::custom(3.0, vec![4, 10], vec![2, 8], true).unwrap();
        let mut rng = crate::rng::rng_from_seed(77);
        for _ in 0..300 {
            let s = OdometerState::sample(&mut rng);
            let brute = max_ratio_brute_force(&t, 2, &s).unwrap() >= t.peak_threshold(2);
            assert_eq!(holder_event(&t, 2, &s).unwrap(), Some(brute));
        }
    }

    #[test]
    fn rejects_states_below_threshold() {
        // single-rung tent
        let t = TowerParams::custom(3.0, vec![8], vec![0], true).unwrap();
        let s = OdometerState::new(3, 8).unwrap();
        let brute = max_ratio_brute_force(&t, 1, &s).unwrap();
        assert!(brute < t.peak_threshold(1) * 4.0);
        assert_eq!(holder_event(&t, 1, &s).unwrap(), Some(brute >= t.peak_threshold(1)));
    }
}
