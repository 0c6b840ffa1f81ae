use entropia::bounds::{
    c_bound, catoni_identity_check, dp_pac_bayes_bound, estimate_kl_gibbs_prior, h_bound,
    kl_bernoulli, kl_inverse_lower, kl_inverse_upper, linear_pac_bayes,
};
use entropia::harness::{format_float, ExperimentConfig};
use proptest::prelude::*;

fn unit() -> impl Strategy<Value = f64> {
    0.0..=1.0f64
}

proptest! {
    #[test]
    fn kl_inverse_brackets_q(q in unit(), c in 0.0..5.0f64) {
        let up = kl_inverse_upper(q, c).unwrap();
        let lo = kl_inverse_lower(q, c).unwrap();
        prop_assert!(lo <= q && q <= up);
        // Roots this close to 1 are not resolvable in double precision.
        let resolvable = up < 1.0 && up > 0.0 && (up - q) / (up * (1.0 - up)) * f64::EPSILON < 1e-10;
        if resolvable {
            prop_assert!(kl_bernoulli(q, up).unwrap() <= c + 1e-9);
        }
    }

    #[test]
    fn kl_inverse_grows_with_budget(q in unit(), c in 0.0..3.0f64, dc in 0.0..1.0f64) {
        prop_assert!(kl_inverse_upper(q, c + dc).unwrap() >= kl_inverse_upper(q, c).unwrap());
    }

    #[test]
    fn linear_bound_dominates_empirical_risk(
        emp in 0.0..4.0f64, kl in 0.0..100.0f64, m in 1usize..100_000, lambda in 0.51..10.0f64, delta in 0.001..1.0f64,
    ) {
        prop_assert!(linear_pac_bayes(emp, kl, m, lambda, delta, 4.0).unwrap() >= emp);
    }

    #[test]
    fn dp_bound_is_ordered_and_monotone_in_epsilon(
        emp in unit(), kl in 0.0..50.0f64, m in 10usize..100_000, eps in 0.0..1.0f64, deps in 0.0..1.0f64,
    ) {
        let a = dp_pac_bayes_bound(emp, kl, m, eps, 0.05).unwrap();
        let b = dp_pac_bayes_bound(emp, kl, m, eps + deps, 0.05).unwrap();
        prop_assert!(a.risk_lower <= emp && emp <= a.risk_upper);
        prop_assert!(b.risk_upper >= a.risk_upper);
    }

    #[test]
    fn hoeffding_and_chernoff_bounds_dominate_emp(emp in unit(), eps in 0.0..2.0f64, m in 1usize..1_000_000) {
        prop_assert!(h_bound(emp, eps, m, 0.05).unwrap().value >= emp);
        prop_assert!(c_bound(emp, eps, m, 0.05).unwrap().value >= emp);
    }

    #[test]
    fn catoni_identity_holds(
        raw_p in prop::collection::vec(0.01..1.0f64, 2..8),
        seed_r in prop::collection::vec(-3.0..3.0f64, 8),
        seed_q in prop::collection::vec(0.0..1.0f64, 8),
    ) {
        let n = raw_p.len();
        let sp: f64 = raw_p.iter().sum();
        let p: Vec<f64> = raw_p.iter().map(|x| x / sp).collect();
        let mut q: Vec<f64> = seed_q[..n].to_vec();
        q[0] += 0.1;
        let sq: f64 = q.iter().sum();
        q.iter_mut().for_each(|x| *x /= sq);
        let check = catoni_identity_check(&p, &seed_r[..n], &q).unwrap();
        prop_assert!(check.residual < 1e-12);
    }

    #[test]
    fn kl_estimate_is_never_negative(
        chain in prop::collection::vec(0.0..10.0f64, 100..200),
        prior in prop::collection::vec(0.0..10.0f64, 100..200),
    ) {
        let est = estimate_kl_gibbs_prior(&chain, &prior).unwrap();
        prop_assert!(est.value >= 0.0 && est.std_error >= 0.0);
    }

    #[test]
    fn csv_floats_round_trip_to_nine_digits(x in -1e6..1e6f64) {
        let back: f64 = format_float(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 1e-8 * x.abs().max(1e-300));
    }

    #[test]
    fn config_overrides_parse(tau in 1.0..1e6f64, seed in any::<u32>()) {
        let mut cfg = ExperimentConfig::default();
        cfg.set("tau", &tau.to_string()).unwrap();
        cfg.set("seed", &seed.to_string()).unwrap();
        prop_assert_eq!(cfg.tau, Some(tau));
        prop_assert_eq!(cfg.seed, seed as u64);
    }
}
