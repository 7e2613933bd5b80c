//! Reference implementations that share no code path with the fast routines
//! they check. Slow, and only meant for small inputs.

use crate::counterexample::TowerParams;
use crate::error::{Error, Result};
use crate::numeric;
use crate::quantile_core::{ConditionKind, DecaySeq, QuantileFn};

const QUAD_REL_TOL: f64 = 1e-11;

/// `int_a^b Q(u) du` by adaptive quadrature.
fn quantile_integral(q: &QuantileFn, a: f64, b: f64) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    let f = |u: f64| q.eval_unchecked(u);
    if a <= 0.0 {
        numeric::integrate_singular_at_zero(f, b, 8, 1e-300, QUAD_REL_TOL)
    } else {
        numeric::integrate(f, a, b, 1e-300, QUAD_REL_TOL)
    }
}

/// `G(y)`, the inverse of `H`, by plain bisection on `H` (clamped to 1).
fn h_inverse(q: &QuantileFn, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    if y >= q.integrated_unchecked(1.0) {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    // runs until the bracket collapses in f64, which resolves subnormal
    // boundaries too
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if q.integrated_unchecked(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Condition functional by quadrature of `Q` over the pieces where the
/// decay index is constant.
///
/// On the piece where the index equals `k`, the rate is `k Q(u)` and
/// `k Q(u) > t` iff `u < P(|X| > t / k)`, so the indicator cuts each piece at
/// a point given by the tail function alone.
pub fn condition_functional_oracle(
    kind: ConditionKind,
    p: f64,
    q: &QuantileFn,
    decay: &DecaySeq,
    t: f64,
) -> Result<f64> {
    // piece k is [edge(k), edge(k - 1)) in u
    let edge = |k: u64| -> f64 {
        match kind {
            ConditionKind::Alpha => decay.value(k).min(1.0),
            ConditionKind::Tau => h_inverse(q, 0.5 * decay.value(k)),
            ConditionKind::WeakLp => unreachable!("handled below"),
        }
    };
    if kind == ConditionKind::WeakLp {
        let b = q.tail(t);
        return Ok(t.powf(p - 1.0) * quantile_integral(q, 0.0, b)?);
    }
    // below the last entry of a table with a positive tail the index is
    // infinite, so everything under edge(len - 1) counts
    let constant_from = match decay {
        DecaySeq::Table { values } if *values.last().expect("validated") > 0.0 => Some(values.len() as u64),
        _ => None,
    };
    let mut total = 0.0;
    let mut k: u64 = 1;
    loop {
        if constant_from == Some(k) {
            total += quantile_integral(q, 0.0, edge(k - 1))?;
            break;
        }
        let (lo, hi) = (edge(k), edge(k - 1));
        let cut = q.tail(t / k as f64);
        if cut >= hi {
            // this piece, every later one and the region of infinite index
            // all lie below the cut
            total += quantile_integral(q, 0.0, hi)?;
            break;
        }
        total += quantile_integral(q, lo, cut.min(hi))?;
        k += 1;
        if k > 50_000_000 {
            return Err(Error::Numerical("piece enumeration did not terminate".into()));
        }
    }
    Ok(t.powf(p - 1.0) * total)
}

/// `sup |P(A and B) - P(A) P(B)|` by enumeration over all pairs of unions
/// of cells.
pub fn alpha_brute_force(joint: &[Vec<f64>]) -> f64 {
    let (r, c) = (joint.len(), joint[0].len());
    let row: Vec<f64> = joint.iter().map(|v| v.iter().sum()).collect();
    let col: Vec<f64> = (0..c).map(|j| joint.iter().map(|v| v[j]).sum()).collect();
    let mut best: f64 = 0.0;
    for a in 0u32..(1 << r) {
        for b in 0u32..(1 << c) {
            let (mut pab, mut pa, mut pb) = (0.0, 0.0, 0.0);
            for i in (0..r).filter(|i| a >> i & 1 == 1) {
                pa += row[i];
                for j in (0..c).filter(|j| b >> j & 1 == 1) {
                    pab += joint[i][j];
                }
            }
            for j in (0..c).filter(|j| b >> j & 1 == 1) {
                pb += col[j];
            }
            best = best.max((pab - pa * pb).abs());
        }
    }
    best
}

/// Maximal correlation via power iteration on `M M^T` with
/// `M_ij = p_ij / sqrt(r_i c_j)`, after removing the constant direction.
pub fn rho_power_iteration(joint: &[Vec<f64>]) -> f64 {
    let (r, c) = (joint.len(), joint[0].len());
    let row: Vec<f64> = joint.iter().map(|v| v.iter().sum()).collect();
    let col: Vec<f64> = (0..c).map(|j| joint.iter().map(|v| v[j]).sum()).collect();
    let m: Vec<Vec<f64>> = (0..r)
        .map(|i| (0..c).map(|j| joint[i][j] / (row[i] * col[j]).sqrt() - (row[i] * col[j]).sqrt()).collect())
        .collect();
    let mut v: Vec<f64> = (0..r).map(|i| 1.0 + 0.37 * i as f64).collect();
    let mut sigma2 = 0.0;
    for _ in 0..5000 {
        let w: Vec<f64> = (0..c).map(|j| (0..r).map(|i| m[i][j] * v[i]).sum()).collect();
        let z: Vec<f64> = (0..r).map(|i| (0..c).map(|j| m[i][j] * w[j]).sum()).collect();
        let norm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
        let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        sigma2 = norm / vnorm;
        v = z.iter().map(|x| x / norm).collect();
    }
    sigma2.sqrt()
}

/// One odometer step on little-endian bits: add one with carry.
pub fn odometer_step(bits: &mut [bool]) {
    for b in bits.iter_mut() {
        if *b {
            *b = false;
        } else {
            *b = true;
            return;
        }
    }
}

/// Rung `sum_i bits[i] 2^i` of the first `b` coordinates.
pub fn rung_of(bits: &[bool], b: u32) -> u128 {
    bits.iter().take(b as usize).enumerate().filter(|(_, x)| **x).map(|(i, _)| 1u128 << i).sum()
}

/// Tent `g_l` at rung `m`, counted down from the top of the tower:
/// with `j = N - m` it rises with slope `N^{1/p} / K^{1/2 + 1/p}` for
/// `1 <= j <= K`, falls back to zero at `j = 2K`, vanishes elsewhere.
pub fn tent_value(params: &TowerParams, l: usize, m: u128) -> f64 {
    let (n, k, p) = (params.n(l) as f64, params.k(l) as f64, params.p());
    let height = n.powf(1.0 / p) * k.powf(0.5 - 1.0 / p);
    let j = n - m as f64;
    if (1.0..=k).contains(&j) {
        height * j / k
    } else if j > k && j < 2.0 * k {
        height * (2.0 * k - j) / k
    } else {
        0.0
    }
}

/// `tau(i)` of `X_t = sum_k 2^{-k-1} eps_{t-k}` with fair-coin `eps`.
pub fn bernoulli_shift_tau_exact(lag: usize) -> f64 {
    (-(lag as f64)).exp2() / 3.0
}
