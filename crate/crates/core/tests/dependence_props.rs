use holder_lab::dependence::{alpha_exact, bernoulli_shift_tau, rho_exact, tau_alpha_bound_check, tau_estimate_1d, FinitePartitionPair};
use holder_lab::process_gen::{CausalLinear, Coefficients, Innovation, ProcessModel};
use holder_lab::quantile_core::QuantileFn;
use holder_lab::verification::oracles::{alpha_brute_force, rho_power_iteration};
use proptest::prelude::*;

fn joint_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..=5, 2usize..=5).prop_flat_map(|(r, c)| {
        prop::collection::vec(prop::collection::vec(0.01f64..1.0, c), r).prop_map(|m| {
            let total: f64 = m.iter().flatten().sum();
            m.iter().map(|row| row.iter().map(|x| x / total).collect()).collect()
        })
    })
}

proptest! {
    #[test]
    fn four_alpha_at_most_rho(j in joint_strategy()) {
        let pair = FinitePartitionPair::new(j).unwrap();
        let (a, r) = (alpha_exact(&pair).unwrap(), rho_exact(&pair).unwrap());
        prop_assert!(a <= 0.25 + 1e-15);
        prop_assert!(r <= 1.0 + 1e-12);
        prop_assert!(4.0 * a <= r + 1e-10);
    }

    #[test]
    fn coefficients_match_oracles(j in joint_strategy()) {
        let pair = FinitePartitionPair::new(j.clone()).unwrap();
        prop_assert!((alpha_exact(&pair).unwrap() - alpha_brute_force(&j)).abs() <= 1e-12);
        prop_assert!((rho_exact(&pair).unwrap() - rho_power_iteration(&j)).abs() <= 1e-6);
    }

    #[test]
    fn coefficients_invariant_under_relabeling(j in joint_strategy(), shift in 1usize..5) {
        let pair = FinitePartitionPair::new(j.clone()).unwrap();
        let mut rows = j.clone();
        let k = shift % rows.len();
        rows.rotate_left(k);
        let cols: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.reverse();
                r
            })
            .collect();
        let permuted = FinitePartitionPair::new(cols).unwrap();
        prop_assert!((alpha_exact(&pair).unwrap() - alpha_exact(&permuted).unwrap()).abs() <= 1e-14);
        prop_assert!((rho_exact(&pair).unwrap() - rho_exact(&permuted).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn product_joint_is_independent(r in prop::collection::vec(0.05f64..1.0, 2..5), c in prop::collection::vec(0.05f64..1.0, 2..5)) {
        let (sr, sc): (f64, f64) = (r.iter().sum(), c.iter().sum());
        let j: Vec<Vec<f64>> = r.iter().map(|a| c.iter().map(|b| a * b / (sr * sc)).collect()).collect();
        let pair = FinitePartitionPair::new(j).unwrap();
        prop_assert!(alpha_exact(&pair).unwrap() <= 1e-15);
        prop_assert!(rho_exact(&pair).unwrap() <= 1e-7);
    }
}

#[test]
fn diagonal_joint() {
    let pair = FinitePartitionPair::new(vec![vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
    assert_eq!(alpha_exact(&pair).unwrap(), 0.25);
    assert_eq!(rho_exact(&pair).unwrap(), 1.0);
}

#[test]
fn rejects_unnormalized_joint() {
    assert!(FinitePartitionPair::new(vec![vec![0.5, 0.1], vec![0.0, 0.5]]).is_err());
    assert!(FinitePartitionPair::new(vec![vec![0.5], vec![0.25, 0.25]]).is_err());
}

#[test]
fn bernoulli_shift_tau_matches_exact_values() {
    let model = ProcessModel::from_preset("bernoulli-shift").unwrap();
    for lag in 1..=4 {
        let est = tau_estimate_1d(&model, lag, 20, 4000, 11 + lag as u64).unwrap();
        let exact = bernoulli_shift_tau(lag);
        assert!((est.value - exact).abs() <= 4.0 * est.std_error + 1e-6 * exact, "lag {lag}: {} vs {exact}", est.value);
    }
}

#[test]
fn gaussian_linear_tau_decays_geometrically() {
    let lin = CausalLinear::new(Coefficients::Geometric { scale: 1.0, ratio: 0.5 }, Innovation::Gaussian { sigma: 1.0 }).unwrap();
    let model = ProcessModel::CausalLinear(lin);
    let t1 = tau_estimate_1d(&model, 1, 40, 4000, 3).unwrap().value;
    let t3 = tau_estimate_1d(&model, 3, 40, 4000, 3).unwrap().value;
    assert!(t3 < t1 / 2.0);
}

#[test]
fn tau_alpha_bound_holds_on_bernoulli_shift() {
    let q = QuantileFn::uniform_abs(0.5);
    for lag in 1..=6 {
        assert!(tau_alpha_bound_check(bernoulli_shift_tau(lag), 0.25, &q).unwrap());
    }
    assert!(tau_alpha_bound_check(0.1, 0.3, &q).is_err());
}
