mod common;

use proptest::prelude::*;

use sysrisk::gaussian::{conditional_moments, es_mean_normal, var_normal, RiskParams};
use sysrisk::measures::{self as m, GaussianPair};

fn pair_strategy() -> impl Strategy<Value = GaussianPair> {
    (
        -2.0..2.0f64,
        -2.0..2.0f64,
        -2.0..2.0f64,
        -2.0..2.0f64,
        -0.999..0.999f64,
    )
        .prop_map(|(mu_i, mu_a, li, la, rho)| {
            let (var_i, var_a) = (10f64.powf(li), 10f64.powf(la));
            GaussianPair::new(mu_i, mu_a, var_i, var_a, rho * (var_i * var_a).sqrt()).unwrap()
        })
}

fn params_strategy() -> impl Strategy<Value = RiskParams> {
    (0.51..0.9999f64).prop_map(|a| RiskParams::new(a).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn all_identities_hold(pair in pair_strategy(), params in params_strategy()) {
        let v = common::identity_violations(&pair, &params, common::IDENTITY_TOLERANCE);
        prop_assert!(v.is_empty(), "{v:?}");
    }

    #[test]
    fn report_passes_its_own_checks(pair in pair_strategy(), params in params_strategy()) {
        let r = m::full_report(&pair, &params).unwrap();
        prop_assert!((r.delta_coll_var - (r.covar_ai - r.covare_ai)).abs() <= 1e-12 * r.covar_ai.abs().max(1.0));
        prop_assert!((r.var_mean_i - (r.var_i - pair.mu_i())).abs() <= 1e-12 * r.var_i.abs().max(1.0));
    }

    #[test]
    fn betas_sum_to_one(pair in pair_strategy()) {
        let view = m::to_system_view(&pair);
        let b_is = m::beta_coefficient(view.cov_is, view.var_s).unwrap();
        let b_as = m::beta_coefficient(pair.cov_ia() + pair.var_a(), view.var_s).unwrap();
        // var_s is formed by cancellation near a perfect hedge, so rounding
        // grows with the condition number of that sum.
        let kappa = (pair.var_i() + pair.var_a() + 2.0 * pair.cov_ia().abs()) / view.var_s;
        prop_assert!((b_is + b_as - 1.0).abs() <= 1e-15 * kappa,
            "{} + {} = {} (kappa {})", b_is, b_as, b_is + b_as, kappa);
    }

    #[test]
    fn collateral_spillover_ignores_bank_size(pair in pair_strategy(), params in params_strategy(), c in 0.01..100.0f64) {
        let scaled = GaussianPair::new(c * pair.mu_i(), pair.mu_a(), c * c * pair.var_i(), pair.var_a(), c * pair.cov_ia()).unwrap();
        let a = m::delta_coll_var(&pair, &params).unwrap();
        let b = m::delta_coll_var(&scaled, &params).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (params.quantile() * pair.std_a()).max(1e-300));
    }

    #[test]
    fn expected_shortfall_dominates(pair in pair_strategy(), params in params_strategy()) {
        let var = m::delta_coll_var(&pair, &params).unwrap();
        let es = m::delta_coll_es(&pair, &params).unwrap();
        prop_assert!(es.abs() > var.abs());
        prop_assert!(es.signum() == var.signum());
        prop_assert!(es_mean_normal(pair.var_i(), &params).unwrap() < -params.quantile() * pair.std_i());
    }

    #[test]
    fn delta_statistics_decrease_in_covariance(
        li in -2.0..2.0f64, la in -2.0..2.0f64, r1 in -0.999..0.999f64, r2 in -0.999..0.999f64,
        params in params_strategy(),
    ) {
        let (var_i, var_a) = (10f64.powf(li), 10f64.powf(la));
        let s = (var_i * var_a).sqrt();
        let (lo, hi) = if r1 < r2 { (r1 * s, r2 * s) } else { (r2 * s, r1 * s) };
        prop_assume!(hi - lo > 1e-9 * s);
        let a = GaussianPair::new(0.0, 0.0, var_i, var_a, lo).unwrap();
        let b = GaussianPair::new(0.0, 0.0, var_i, var_a, hi).unwrap();
        prop_assert!(m::delta_coll_var(&b, &params).unwrap() < m::delta_coll_var(&a, &params).unwrap());
        prop_assert!(m::delta_cond_var(&b, &params).unwrap() < m::delta_cond_var(&a, &params).unwrap());
        // Contribution is monotone only while cov_ia > -var_a.
        if lo > -var_a {
            prop_assert!(m::delta_contr_var(&b, &params).unwrap() < m::delta_contr_var(&a, &params).unwrap());
        }
    }

    #[test]
    fn conditional_variance_is_constant_and_reduced(pair in pair_strategy(), x1 in -10.0..10.0f64, x2 in -10.0..10.0f64) {
        let c1 = pair.conditional_on_bank(x1).unwrap();
        let c2 = pair.conditional_on_bank(x2).unwrap();
        prop_assert_eq!(c1.variance.to_bits(), c2.variance.to_bits());
        prop_assert!(c1.variance <= pair.var_a());
    }

    #[test]
    fn normal_var_is_monotone(mu in -5.0..5.0f64, var in 0.0..10.0f64, d in 0.001..1.0f64, params in params_strategy()) {
        let base = var_normal(mu, var, &params).unwrap();
        prop_assert!(var_normal(mu + d, var, &params).unwrap() > base);
        prop_assert!(var_normal(mu, var + d, &params).unwrap() < base);
    }
}

#[test]
fn contribution_can_rise_with_covariance_below_minus_var_a() {
    // var_i = 4, var_a = 1: raising cov from -1.9 to -1.5 makes the
    // contribution statistic less negative, not more.
    let p = RiskParams::new(0.99).unwrap();
    let a = GaussianPair::new(0.0, 0.0, 4.0, 1.0, -1.9).unwrap();
    let b = GaussianPair::new(0.0, 0.0, 4.0, 1.0, -1.5).unwrap();
    let (ca, cb) = (
        m::delta_contr_var(&a, &p).unwrap(),
        m::delta_contr_var(&b, &p).unwrap(),
    );
    assert!(cb > ca, "{ca} {cb}");
}

#[test]
fn independence_gives_no_spillover() {
    let p = RiskParams::new(0.999).unwrap();
    let pair = GaussianPair::new(1.0, 2.0, 3.0, 4.0, 0.0).unwrap();
    assert_eq!(m::delta_coll_var(&pair, &p).unwrap(), 0.0);
    assert_eq!(m::delta_coll_es(&pair, &p).unwrap(), 0.0);
    let cm = conditional_moments(2.0, 1.0, 3.0, 4.0, 0.0, -7.0).unwrap();
    assert_eq!((cm.mean, cm.variance), (2.0, 4.0));
    assert_eq!(
        m::covar_collateral(&pair, &p).unwrap(),
        m::covar_at_mean(&pair, &p).unwrap()
    );
}
