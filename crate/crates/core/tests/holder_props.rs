use holder_lab::polygonal_holder::{
    dyadic_constant, holder_stat_dyadic, holder_stat_exact, holder_stat_exact_fast, polygonal_eval, sample_bm_path,
    scaled_holder_modulus, HolderMethod, PartialSumPath,
};
use holder_lab::process_gen::{bm_reference_ensemble, scaled_stat_ensemble, ProcessModel};
use proptest::prelude::*;

fn increments() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 2..200)
}

proptest! {
    #[test]
    fn scaling_equivariance(xs in increments(), c in -5.0f64..5.0, alpha in 0.05f64..1.0) {
        prop_assume!(c.abs() > 1e-3);
        let s = PartialSumPath::from_increments(&xs);
        let scaled: Vec<f64> = xs.iter().map(|x| c * x).collect();
        let t = PartialSumPath::from_increments(&scaled);
        let (a, b) = (holder_stat_exact(&s, alpha).unwrap(), holder_stat_exact(&t, alpha).unwrap());
        prop_assert!((b.value - c.abs() * a.value).abs() <= 1e-10 * b.value.max(1e-300));
        let (da, db) = (holder_stat_dyadic(&s, alpha).unwrap(), holder_stat_dyadic(&t, alpha).unwrap());
        prop_assert!((db.value - c.abs() * da.value).abs() <= 1e-10 * db.value.max(1e-300));
    }

    #[test]
    fn dyadic_bracket(xs in increments(), alpha in 0.05f64..0.95) {
        let s = PartialSumPath::from_increments(&xs);
        let exact = holder_stat_exact(&s, alpha).unwrap().value;
        let dyadic = holder_stat_dyadic(&s, alpha).unwrap().value;
        prop_assert!(dyadic <= exact);
        prop_assert!(exact <= dyadic_constant(alpha) * dyadic * (1.0 + 1e-12));
    }

    #[test]
    fn fast_exact_agrees(xs in increments(), alpha in 0.01f64..1.0) {
        let s = PartialSumPath::from_increments(&xs);
        prop_assert_eq!(holder_stat_exact(&s, alpha).unwrap().value, holder_stat_exact_fast(&s, alpha).unwrap().value);
    }

    #[test]
    fn exact_is_non_increasing_in_alpha(xs in increments(), a in 0.05f64..1.0, b in 0.05f64..1.0) {
        let s = PartialSumPath::from_increments(&xs);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(holder_stat_exact(&s, hi).unwrap().value <= holder_stat_exact(&s, lo).unwrap().value);
    }

    #[test]
    fn polygonal_interpolates_vertices(xs in increments(), k in 0usize..200) {
        let s = PartialSumPath::from_increments(&xs);
        let n = s.n();
        let k = k % (n + 1);
        let v = polygonal_eval(&s, k as f64 / n as f64).unwrap();
        prop_assert!((v - s.sums()[k]).abs() <= 1e-9 * (1.0 + v.abs()));
    }

    #[test]
    fn modulus_grows_with_delta(xs in increments(), alpha in 0.05f64..0.5) {
        let s = PartialSumPath::from_increments(&xs);
        let small = scaled_holder_modulus(&s, alpha, 0.1).unwrap().value;
        let large = scaled_holder_modulus(&s, alpha, 0.9).unwrap().value;
        prop_assert!(small <= large);
    }
}

#[test]
fn fast_exact_beyond_quadratic_limit() {
    let path = sample_bm_path(1 << 16, 9);
    assert!(holder_stat_exact(&path, 0.25).is_err());
    let fast = holder_stat_exact_fast(&path, 0.25).unwrap();
    let dyadic = holder_stat_dyadic(&path, 0.25).unwrap().value;
    assert!(dyadic <= fast.value && fast.value <= dyadic_constant(0.25) * dyadic);
}

#[test]
fn gaussian_walk_matches_reference() {
    // iid N(0, 1) increments have the same law as the reference walk
    let model = ProcessModel::iid_gaussian();
    let walk = scaled_stat_ensemble(&model, 512, 0.25, 1.0, HolderMethod::Exact, 1500, 1).unwrap();
    let reference = bm_reference_ensemble(512, 0.25, HolderMethod::Exact, 1500, 2).unwrap();
    let ks = holder_lab::numeric::ks_two_sample(&walk, &reference);
    assert!(ks < 0.06, "KS = {ks}");
}

#[test]
fn ensembles_are_reproducible() {
    let model = ProcessModel::iid_pareto(4.0);
    let a = scaled_stat_ensemble(&model, 256, 1.0 / 6.0, 1.0, HolderMethod::Dyadic, 200, 4).unwrap();
    let b = scaled_stat_ensemble(&model, 256, 1.0 / 6.0, 1.0, HolderMethod::Dyadic, 200, 4).unwrap();
    assert_eq!(a, b);
}
