//! Strictly stationary sequence generators with known dependence structure.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counterexample::{self, TowerParams};
use crate::error::{Error, Result};
use crate::polygonal_holder::{sample_bm_reference, scaled_holder_stat, HolderMethod, PartialSumPath};
use crate::quantile_core::{DecaySeq, QuantileFn};
use crate::rng::{replicate_rng, rng_from_seed, SimRng};

/// Tail mass `sum_{j > h} |a_j|` below which a causal linear filter is cut.
pub const COEFF_TAIL_TOL: f64 = 1e-12;

/// Innovation law of a causal linear process. Samples are centered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Innovation {
    Finite { values: Vec<f64>, probs: Vec<f64> },
    Gaussian { sigma: f64 },
}

impl Innovation {
    pub fn fair_coin() -> Self {
        Innovation::Finite { values: vec![0.0, 1.0], probs: vec![0.5, 0.5] }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Innovation::Finite { values, probs } => {
                let total: f64 = probs.iter().sum();
                if values.is_empty()
                    || values.len() != probs.len()
                    || probs.iter().any(|p| *p < 0.0)
                    || (total - 1.0).abs() > 1e-12
                    || values.iter().any(|v| !v.is_finite())
                {
                    return Err(Error::InvalidModel(format!("bad finite innovation law {values:?} / {probs:?}")));
                }
                Ok(())
            }
            Innovation::Gaussian { sigma } if *sigma > 0.0 && sigma.is_finite() => Ok(()),
            Innovation::Gaussian { sigma } => Err(Error::InvalidModel(format!("innovation sigma {sigma}"))),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Innovation::Finite { values, probs } => values.iter().zip(probs).map(|(v, p)| v * p).sum(),
            Innovation::Gaussian { .. } => 0.0,
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Innovation::Finite { values, probs } => {
                let m = self.mean();
                values.iter().zip(probs).map(|(v, p)| p * (v - m) * (v - m)).sum()
            }
            Innovation::Gaussian { sigma } => sigma * sigma,
        }
    }

    /// Centered outcomes with their probabilities (finite laws only).
    pub fn centered_atoms(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            Innovation::Finite { values, probs } => {
                let m = self.mean();
                Some(values.iter().zip(probs).map(|(v, p)| (v - m, *p)).collect())
            }
            Innovation::Gaussian { .. } => None,
        }
    }

    /// One centered draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Innovation::Finite { values, probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let m = self.mean();
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return v - m;
                    }
                }
                values[values.len() - 1] - m
            }
            Innovation::Gaussian { sigma } => sigma * rng.sample::<f64, _>(StandardNormal),
        }
    }
}

/// Coefficient specification of `X_k = sum_j a_j eps_{k-j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Coefficients {
    /// `a_j = scale * ratio^j`.
    Geometric { scale: f64, ratio: f64 },
    Explicit { values: Vec<f64> },
}

/// Causal linear process with centered innovations, cut at the horizon where
/// the remaining absolute coefficient mass drops below [`COEFF_TAIL_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct CausalLinear {
    spec: Coefficients,
    coeffs: Vec<f64>,
    innovation: Innovation,
}

impl CausalLinear {
    pub fn new(spec: Coefficients, innovation: Innovation) -> Result<Self> {
        innovation.validate()?;
        let coeffs = match &spec {
            Coefficients::Geometric { scale, ratio } => {
                if !(ratio.abs() < 1.0) || !scale.is_finite() {
                    return Err(Error::InvalidModel(format!("geometric coefficients need |ratio| < 1, got {ratio}")));
                }
                let mut out = Vec::new();
                let mut j = 0i32;
                loop {
                    out.push(scale * ratio.powi(j));
                    let tail = scale.abs() * ratio.abs().powi(j + 1) / (1.0 - ratio.abs());
                    if tail < COEFF_TAIL_TOL || *scale == 0.0 {
                        break;
                    }
                    j += 1;
                }
                out
            }
            Coefficients::Explicit { values } => {
                if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidModel("explicit coefficients must be finite and non-empty".into()));
                }
                values.clone()
            }
        };
        Ok(CausalLinear { spec, coeffs, innovation })
    }

    /// `X_k = sum_{j>=0} 2^{-j-1} (eps_{k-j} - 1/2)` with fair `{0, 1}` innovations.
    pub fn bernoulli_shift() -> Self {
        CausalLinear::new(Coefficients::Geometric { scale: 0.5, ratio: 0.5 }, Innovation::fair_coin())
            .expect("bernoulli shift parameters are valid")
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn innovation(&self) -> &Innovation {
        &self.innovation
    }

    /// Burn-in horizon: index of the last retained coefficient.
    pub fn horizon(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `sum_{j >= depth} |a_j|` of the untruncated filter.
    pub fn tail_mass_from(&self, depth: usize) -> f64 {
        match &self.spec {
            Coefficients::Geometric { scale, ratio } => {
                scale.abs() * ratio.abs().powi(depth as i32) / (1.0 - ratio.abs())
            }
            Coefficients::Explicit { values } => values.iter().skip(depth).map(|a| a.abs()).sum(),
        }
    }

    /// `Cov(X_0, X_k) = sigma^2 sum_j a_j a_{j+k}`.
    pub fn covariance(&self, k: usize) -> f64 {
        let s: f64 = match &self.spec {
            Coefficients::Geometric { scale, ratio } => {
                scale * scale * ratio.powi(k as i32) / (1.0 - ratio * ratio)
            }
            Coefficients::Explicit { values } => {
                values.iter().zip(values.iter().skip(k)).map(|(a, b)| a * b).sum()
            }
        };
        self.innovation.variance() * s
    }

    fn coefficient_sum(&self) -> f64 {
        match &self.spec {
            Coefficients::Geometric { scale, ratio } => scale / (1.0 - ratio),
            Coefficients::Explicit { values } => values.iter().sum(),
        }
    }

    fn is_bernoulli_shift(&self) -> bool {
        self.spec == Coefficients::Geometric { scale: 0.5, ratio: 0.5 } && self.innovation == Innovation::fair_coin()
    }
}

/// Iid sequence: `|X| = Q(U)`, with an independent random sign when
/// `symmetric` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IidModel {
    pub dist: QuantileFn,
    pub symmetric: bool,
}

/// Counterexample process `f = m + g - g o T` on the dyadic odometer.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleModel {
    pub params: TowerParams,
    pub martingale_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProcessModel {
    Iid(IidModel),
    CausalLinear(CausalLinear),
    /// `X_k = phi X_{k-1} + e_k`, unit innovation variance.
    GaussianAr1 { phi: f64 },
    Counterexample(CounterexampleModel),
}

/// Declared dependence coefficients and marginal law of a model.
#[derive(Debug, Clone, Default)]
pub struct DependenceMetadata {
    pub marginal: Option<QuantileFn>,
    pub alpha: Option<DecaySeq>,
    pub rho: Option<DecaySeq>,
    pub tau: Option<DecaySeq>,
}

/// A sampled path `X_1..X_n` with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub values: Vec<f64>,
    pub model_id: String,
    pub master_seed: u64,
    pub n: usize,
}

/// Names accepted by [`ProcessModel::from_preset`].
pub const PRESETS: [(&str, &str); 5] = [
    ("iid-gauss", "iid standard Gaussian"),
    ("iid-pareto:a", "iid symmetric Pareto with P(|X| > t) = min(1, t^-a)"),
    ("bernoulli-shift", "causal linear X_k = sum 2^(-j-1) (eps_(k-j) - 1/2), fair coin innovations"),
    ("ar1:phi", "Gaussian AR(1) with coefficient phi and unit innovation variance"),
    ("counterexample:p", "f = m + g - g o T on the dyadic odometer, Rademacher martingale part"),
];

fn parse_param(name: &str, raw: &str) -> Result<f64> {
    raw.parse::<f64>()
        .map_err(|_| Error::Config(format!("preset {name}: cannot parse parameter {raw:?}")))
}

impl ProcessModel {
    pub fn iid_gaussian() -> Self {
        ProcessModel::Iid(IidModel { dist: QuantileFn::abs_gaussian(1.0), symmetric: true })
    }

    pub fn iid_pareto(index: f64) -> Self {
        ProcessModel::Iid(IidModel { dist: QuantileFn::pareto(1.0, index), symmetric: true })
    }

    pub fn from_preset(name: &str) -> Result<Self> {
        let (head, arg) = match name.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (name, None),
        };
        let model = match (head, arg) {
            ("iid-gauss", None) => Self::iid_gaussian(),
            ("iid-pareto", Some(a)) => Self::iid_pareto(parse_param(name, a)?),
            ("bernoulli-shift", None) => ProcessModel::CausalLinear(CausalLinear::bernoulli_shift()),
            ("ar1", Some(phi)) => ProcessModel::GaussianAr1 { phi: parse_param(name, phi)? },
            ("counterexample", Some(p)) => {
                let p = parse_param(name, p)?;
                ProcessModel::Counterexample(CounterexampleModel {
                    params: TowerParams::default_for(p)?,
                    martingale_scale: 1.0,
                })
            }
            _ => return Err(Error::Config(format!("unknown model preset {name:?}"))),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ProcessModel::Iid(m) => m.dist.validate(),
            ProcessModel::CausalLinear(c) => c.innovation.validate(),
            ProcessModel::GaussianAr1 { phi } if phi.abs() < 1.0 => Ok(()),
            ProcessModel::GaussianAr1 { phi } => Err(Error::InvalidModel(format!("AR(1) needs |phi| < 1, got {phi}"))),
            ProcessModel::Counterexample(c) if c.martingale_scale >= 0.0 => Ok(()),
            ProcessModel::Counterexample(c) => {
                Err(Error::InvalidModel(format!("martingale scale {} is negative", c.martingale_scale)))
            }
        }
    }

    pub fn id(&self) -> String {
        match self {
            ProcessModel::Iid(m) => {
                let dist: String =
                    format!("{:?}", m.dist).chars().filter(|c| !c.is_whitespace()).map(|c| if c == ',' { ';' } else { c }).collect();
                format!("iid:{dist}:symmetric={}", m.symmetric)
            }
            ProcessModel::CausalLinear(c) if c.is_bernoulli_shift() => "bernoulli-shift".into(),
            ProcessModel::CausalLinear(c) => {
                let spec: String =
                    format!("{:?}", c.spec).chars().filter(|c| !c.is_whitespace()).map(|c| if c == ',' { ';' } else { c }).collect();
                format!("causal-linear:{spec}")
            }
            ProcessModel::GaussianAr1 { phi } => format!("ar1:{phi}"),
            ProcessModel::Counterexample(c) => {
                format!("counterexample:{}:sigma_m={}", c.params.p(), c.martingale_scale)
            }
        }
    }

    /// Fills `out` with `X_1..X_n` drawn from `rng`.
    pub fn sample_into<R: Rng + ?Sized>(&self, n: usize, rng: &mut R, out: &mut Vec<f64>) {
        out.clear();
        out.reserve(n);
        match self {
            ProcessModel::Iid(m) => {
                for _ in 0..n {
                    let x = m.dist.sample_abs(rng);
                    let signed = if m.symmetric && rng.random::<bool>() { -x } else { x };
                    out.push(signed);
                }
            }
            ProcessModel::CausalLinear(c) => {
                let h = c.horizon();
                let eps: Vec<f64> = (0..n + h).map(|_| c.innovation.sample(rng)).collect();
                for k in 0..n {
                    // eps[k + h] plays the role of the current innovation
                    let x = c.coeffs.iter().enumerate().map(|(j, a)| a * eps[k + h - j]).sum();
                    out.push(x);
                }
            }
            ProcessModel::GaussianAr1 { phi } => {
                let sd0 = (1.0 / (1.0 - phi * phi)).sqrt();
                let mut x = sd0 * rng.sample::<f64, _>(StandardNormal);
                for _ in 0..n {
                    out.push(x);
                    x = phi * x + rng.sample::<f64, _>(StandardNormal);
                }
            }
            ProcessModel::Counterexample(c) => {
                counterexample::sample_values_into(&c.params, c.martingale_scale, n, rng, out);
            }
        }
    }

    pub fn sample_with(&self, n: usize, rng: &mut SimRng) -> Vec<f64> {
        let mut v = Vec::with_capacity(n);
        self.sample_into(n, rng, &mut v);
        v
    }

    /// Autocovariance `Cov(X_0, X_k)` where a closed form exists.
    pub fn covariance(&self, k: usize) -> Result<f64> {
        match self {
            ProcessModel::Iid(m) => Ok(if k == 0 { iid_variance(m)? } else { 0.0 }),
            ProcessModel::CausalLinear(c) => Ok(c.covariance(k)),
            ProcessModel::GaussianAr1 { phi } => Ok(phi.powi(k as i32) / (1.0 - phi * phi)),
            ProcessModel::Counterexample(_) => Err(Error::InvalidModel(
                "no closed-form covariance for the counterexample process".into(),
            )),
        }
    }

    pub fn metadata(&self) -> DependenceMetadata {
        match self {
            ProcessModel::Iid(m) => DependenceMetadata {
                marginal: Some(m.dist.clone()),
                alpha: Some(DecaySeq::Table { values: vec![0.25, 0.0] }),
                rho: Some(DecaySeq::Table { values: vec![1.0, 0.0] }),
                tau: Some(DecaySeq::Zero),
            },
            ProcessModel::CausalLinear(c) if c.is_bernoulli_shift() => DependenceMetadata {
                marginal: Some(QuantileFn::uniform_abs(0.5)),
                alpha: Some(DecaySeq::Table { values: vec![0.25] }),
                rho: Some(DecaySeq::Table { values: vec![1.0] }),
                // tau(i) = 2^{-i} / 3, see `dependence::tau_estimate_1d`
                tau: Some(DecaySeq::Geometric { scale: 1.0 / 3.0, ratio: 0.5 }),
            },
            ProcessModel::CausalLinear(_) => DependenceMetadata::default(),
            ProcessModel::GaussianAr1 { phi } => DependenceMetadata {
                marginal: Some(QuantileFn::abs_gaussian((1.0 / (1.0 - phi * phi)).sqrt())),
                alpha: None,
                rho: Some(DecaySeq::Geometric { scale: 1.0, ratio: phi.abs().max(f64::MIN_POSITIVE) }),
                tau: None,
            },
            ProcessModel::Counterexample(_) => DependenceMetadata::default(),
        }
    }
}

fn iid_variance(m: &IidModel) -> Result<f64> {
    let second = m.dist.moment(2.0).map_err(|_| {
        Error::InvalidModel(format!("{:?} has infinite variance; covariances are not summable", m.dist))
    })?;
    if m.symmetric {
        Ok(second)
    } else {
        let first = m.dist.moment(1.0)?;
        Ok(second - first * first)
    }
}

/// Stationary sample of `X_1..X_n`.
pub fn sample_path(model: &ProcessModel, n: usize, seed: u64) -> Result<Trajectory> {
    if n == 0 {
        return Err(Error::domain("path length must be at least 1"));
    }
    model.validate()?;
    let mut rng = rng_from_seed(seed);
    let values = model.sample_with(n, &mut rng);
    Ok(Trajectory { values, model_id: model.id(), master_seed: seed, n })
}

/// `Var(X_0) + 2 sum_{k>=1} Cov(X_0, X_k)`.
pub fn long_run_variance(model: &ProcessModel) -> Result<f64> {
    match model {
        ProcessModel::Iid(m) => iid_variance(m),
        ProcessModel::CausalLinear(c) => {
            let s = c.coefficient_sum();
            Ok(c.innovation.variance() * s * s)
        }
        ProcessModel::GaussianAr1 { phi } => Ok(1.0 / ((1.0 - phi) * (1.0 - phi))),
        // the coboundary part has bounded partial sums
        ProcessModel::Counterexample(c) => Ok(c.martingale_scale * c.martingale_scale),
    }
}

/// `Var(X_0) + 2 sum_{k=1}^{K} Cov(X_0, X_k)`, extended until the
/// remainder bound drops below `tol` (geometric models only).
pub fn long_run_variance_series(model: &ProcessModel, tol: f64) -> Result<f64> {
    let ratio = match model {
        ProcessModel::GaussianAr1 { phi } => phi.abs(),
        ProcessModel::CausalLinear(c) => match &c.spec {
            Coefficients::Geometric { ratio, .. } => ratio.abs(),
            Coefficients::Explicit { values } => {
                let mut s = model.covariance(0)?;
                for k in 1..values.len() {
                    s += 2.0 * model.covariance(k)?;
                }
                return Ok(s);
            }
        },
        ProcessModel::Iid(_) => return model.covariance(0),
        ProcessModel::Counterexample(_) => return long_run_variance(model),
    };
    let mut s = model.covariance(0)?;
    let mut k = 1usize;
    loop {
        let c = model.covariance(k)?;
        s += 2.0 * c;
        let remainder = 2.0 * c.abs() * ratio / (1.0 - ratio);
        if remainder < tol || k > 100_000 {
            break;
        }
        k += 1;
    }
    Ok(s)
}

/// For each of `paths` replicates, `max_{i <= c} |S_i|` at every checkpoint
/// `c` (ascending). All checkpoints of a replicate share one path.
pub fn prefix_abs_maxima(model: &ProcessModel, checkpoints: &[usize], paths: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    model.validate()?;
    if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[0] > w[1]) || checkpoints[0] == 0 {
        return Err(Error::domain("checkpoints must be positive and ascending"));
    }
    let n = *checkpoints.last().expect("non-empty");
    Ok((0..paths as u64)
        .into_par_iter()
        .map_init(Vec::new, |buf, r| {
            let mut rng = replicate_rng(seed, r);
            model.sample_into(n, &mut rng, buf);
            let mut out = Vec::with_capacity(checkpoints.len());
            let (mut s, mut m) = (0.0f64, 0.0f64);
            let mut next = 0;
            for (i, x) in buf.iter().enumerate() {
                s += x;
                m = m.max(s.abs());
                while next < checkpoints.len() && checkpoints[next] == i + 1 {
                    out.push(m);
                    next += 1;
                }
            }
            out
        })
        .collect())
}

/// Scaled Hölder statistics of `paths` independent paths of `X / scale`,
/// each of length `n`.
pub fn scaled_stat_ensemble(
    model: &ProcessModel,
    n: usize,
    alpha: f64,
    scale: f64,
    method: HolderMethod,
    paths: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    model.validate()?;
    if !(scale > 0.0) {
        return Err(Error::domain(format!("scale {scale} must be positive")));
    }
    (0..paths as u64)
        .into_par_iter()
        .map_init(Vec::new, |buf, r| {
            let mut rng = replicate_rng(seed, r);
            model.sample_into(n, &mut rng, buf);
            buf.iter_mut().for_each(|x| *x /= scale);
            Ok(scaled_holder_stat(&PartialSumPath::from_increments(buf), alpha, method)?.value)
        })
        .collect()
}

/// Reference ensemble of [`sample_bm_reference`] values.
pub fn bm_reference_ensemble(n: usize, alpha: f64, method: HolderMethod, paths: usize, seed: u64) -> Result<Vec<f64>> {
    (0..paths as u64)
        .into_par_iter()
        .map(|r| Ok(sample_bm_reference(n, alpha, crate::rng::derive_seed(seed, r), method)?.value))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{ks_two_sample, mean};

    #[test]
    fn presets_parse() {
        for name in ["iid-gauss", "iid-pareto:4", "bernoulli-shift", "ar1:0.5", "counterexample:3"] {
            ProcessModel::from_preset(name).unwrap();
        }
        assert!(ProcessModel::from_preset("ar1:1.5").is_err());
        assert!(ProcessModel::from_preset("nope").is_err());
        assert!(ProcessModel::from_preset("iid-pareto:x").is_err());
    }

    #[test]
    fn long_run_variance_examples() {
        assert!((long_run_variance(&ProcessModel::iid_gaussian()).unwrap() - 1.0).abs() < 1e-14);
        let ar = ProcessModel::GaussianAr1 { phi: 0.5 };
        assert!((long_run_variance(&ar).unwrap() - 4.0).abs() < 1e-12);
        assert!((long_run_variance_series(&ar, 1e-12).unwrap() - 4.0).abs() < 1e-8);
        let bs = ProcessModel::CausalLinear(CausalLinear::bernoulli_shift());
        // (sum a_j)^2 Var(eps) = 1 * 1/4
        assert!((long_run_variance(&bs).unwrap() - 0.25).abs() < 1e-12);
        assert!((long_run_variance_series(&bs, 1e-12).unwrap() - 0.25).abs() < 1e-8);
        assert!(long_run_variance(&ProcessModel::iid_pareto(2.0)).is_err());
    }

    #[test]
    fn iid_gaussian_mean() {
        let n = 10_000;
        let t = sample_path(&ProcessModel::iid_gaussian(), n, 11).unwrap();
        assert!(mean(&t.values).abs() < 4.0 / (n as f64).sqrt());
        assert_eq!(t.values.len(), n);
    }

    #[test]
    fn seed_determinism() {
        let m = ProcessModel::from_preset("bernoulli-shift").unwrap();
        assert_eq!(sample_path(&m, 500, 3).unwrap(), sample_path(&m, 500, 3).unwrap());
        assert_ne!(sample_path(&m, 500, 3).unwrap().values, sample_path(&m, 500, 4).unwrap().values);
    }

    #[test]
    fn ar1_with_zero_coefficient_is_iid_gaussian() {
        let ar: Vec<f64> = (0..10_000).map(|i| sample_path(&ProcessModel::GaussianAr1 { phi: 0.0 }, 1, 100 + i).unwrap().values[0]).collect();
        let iid: Vec<f64> = (0..10_000).map(|i| sample_path(&ProcessModel::iid_gaussian(), 1, 90_000 + i).unwrap().values[0]).collect();
        assert!(ks_two_sample(&ar, &iid) <= 0.03);
    }

    #[test]
    fn bernoulli_shift_is_centered_uniform() {
        let t = sample_path(&ProcessModel::CausalLinear(CausalLinear::bernoulli_shift()), 20_000, 5).unwrap();
        assert!(t.values.iter().all(|x| (-0.5..=0.5).contains(x)));
        assert!(mean(&t.values).abs() < 0.02);
    }
}
