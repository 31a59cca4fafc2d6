#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use sysrisk::estimation::{PanelMeta, ReturnPanel};
use sysrisk::gaussian::{es_mean_normal, var_normal, RiskParams};
use sysrisk::measures::{self as m, GaussianPair};

pub const IDENTITY_TOLERANCE: f64 = 1e-12;

/// Random valid pair with variances spread over four decades and |ρ| < 1.
pub fn random_pair(rng: &mut impl Rng) -> GaussianPair {
    let var_i = 10f64.powf(rng.random_range(-2.0..2.0));
    let var_a = 10f64.powf(rng.random_range(-2.0..2.0));
    let rho: f64 = rng.random_range(-0.999..0.999);
    let cov = rho * (var_i * var_a).sqrt();
    GaussianPair::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        var_i,
        var_a,
        cov,
    )
    .unwrap()
}

pub fn random_params(rng: &mut impl Rng) -> RiskParams {
    RiskParams::new(rng.random_range(0.9..0.9999)).unwrap()
}

#[derive(Debug)]
pub struct Violation {
    pub identity: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub scale: f64,
}

/// Checks every equality between the statistics of `pair` and returns the
/// ones that fail at relative tolerance `tol`. The reference scale is
/// `quantile * (|mu_i| + |mu_a| + std_i + std_a)`, the magnitude of the terms
/// that enter each statistic.
pub fn identity_violations(pair: &GaussianPair, params: &RiskParams, tol: f64) -> Vec<Violation> {
    let q = params.quantile();
    let scale = q.max(1.0) * (pair.mu_i().abs() + pair.mu_a().abs() + pair.std_i() + pair.std_a());
    let swapped = pair.swapped();
    let view = m::to_system_view(pair);
    let var_mean_s = -q * view.var_s.sqrt();

    let d_coll = m::delta_coll_var(pair, params).unwrap();
    let d_cond = m::delta_cond_var(pair, params).unwrap();
    let d_cond_a = m::delta_cond_var(&swapped, params).unwrap();
    let d_contr = m::delta_contr_var(pair, params).unwrap();
    let d_contr_a = m::delta_contr_var(&swapped, params).unwrap();
    let contr = m::var_contribution(pair, params).unwrap();
    let contr_a = m::var_contribution(&swapped, params).unwrap();
    let var_mean_i = m::var_mean(pair, params);
    let var_i = m::value_at_risk(pair, params);
    let beta_ai = m::beta_coefficient(pair.cov_ia(), pair.var_i()).unwrap();
    let beta_si = m::beta_coefficient(view.cov_is, pair.var_i()).unwrap();
    let beta_is = m::beta_coefficient(view.cov_is, view.var_s).unwrap();
    let beta_as = m::beta_coefficient(pair.cov_ia() + pair.var_a(), view.var_s).unwrap();
    let cm = pair.conditional_on_bank(var_i).unwrap();
    let cm_s = view
        .conditional_on_system(m::system_value_at_risk(pair, params).unwrap())
        .unwrap();

    let c = 3.7;
    let scaled = GaussianPair::new(
        c * pair.mu_i(),
        pair.mu_a(),
        c * c * pair.var_i(),
        pair.var_a(),
        c * pair.cov_ia(),
    )
    .unwrap();

    let checks: Vec<(&'static str, f64, f64)> = vec![
        (
            "collateral spillover = CoVaR - CoVaRe",
            d_coll,
            m::covar_collateral(pair, params).unwrap() - m::covar_at_mean(pair, params).unwrap(),
        ),
        (
            "collateral spillover = beta_Ai * VaR_mean(X_i)",
            d_coll,
            beta_ai * var_mean_i,
        ),
        (
            "collateral spillover = -q * rho * std(X_A)",
            d_coll,
            -q * pair.rho() * pair.std_a(),
        ),
        (
            "collateral spillover = E(X_A | X_i = VaR) - mu_A",
            d_coll,
            cm.mean - pair.mu_a(),
        ),
        (
            "collateral spillover independent of bank size",
            d_coll,
            m::delta_coll_var(&scaled, params).unwrap(),
        ),
        (
            "CoVaR = VaR of the conditional law",
            m::covar_collateral(pair, params).unwrap(),
            var_normal(cm.mean, cm.variance, params).unwrap(),
        ),
        (
            "collateral ES = beta_Ai * ES_mean(X_i)",
            m::delta_coll_es(pair, params).unwrap(),
            beta_ai * es_mean_normal(pair.var_i(), params).unwrap(),
        ),
        (
            "conditional = collateral + VaR_mean(X_i)",
            d_cond,
            d_coll + var_mean_i,
        ),
        (
            "conditional = beta_Si * VaR_mean(X_i)",
            d_cond,
            beta_si * var_mean_i,
        ),
        (
            "contribution = beta_iS * VaR_mean(X_S)",
            d_contr,
            beta_is * var_mean_s,
        ),
        ("beta_iS + beta_AS = 1", beta_is + beta_as, 1.0),
        (
            "contribution(i) + contribution(A) = VaR_mean(X_S)",
            d_contr + d_contr_a,
            var_mean_s,
        ),
        (
            "conditional = sqrt(var_S / var_i) * contribution",
            d_cond,
            (view.var_s / pair.var_i()).sqrt() * d_contr,
        ),
        (
            "weighted conditional sum = VaR_mean(X_S)",
            (pair.var_i() / view.var_s).sqrt() * d_cond
                + (pair.var_a() / view.var_s).sqrt() * d_cond_a,
            var_mean_s,
        ),
        (
            "VaR-Contribution(i) + VaR-Contribution(A) = VaR(X_S)",
            contr + contr_a,
            m::system_value_at_risk(pair, params).unwrap(),
        ),
        (
            "VaR-Contribution = mu_i + contribution",
            contr,
            pair.mu_i() + d_contr,
        ),
        (
            "VaR-Contribution = E(X_i | X_S = VaR(X_S))",
            contr,
            cm_s.mean,
        ),
        (
            "-q * std allocation = contribution",
            -q * m::std_allocation(pair).unwrap(),
            d_contr,
        ),
        (
            "std allocations sum to std(X_S)",
            m::std_allocation(pair).unwrap() + m::std_allocation(&swapped).unwrap(),
            view.var_s.sqrt(),
        ),
        ("VaR_mean = VaR - mu_i", var_mean_i, var_i - pair.mu_i()),
    ];
    checks
        .into_iter()
        .filter(|(_, lhs, rhs)| {
            let diff = (lhs - rhs).abs();
            diff.is_nan() || diff > tol * scale.max(lhs.abs()).max(rhs.abs())
        })
        .map(|(identity, lhs, rhs)| Violation {
            identity,
            lhs,
            rhs,
            scale,
        })
        .collect()
}

/// `t` rows drawn from `N(means, cov)`.
pub fn simulate_panel(
    labels: &[&str],
    means: &DVector<f64>,
    cov: &DMatrix<f64>,
    t: usize,
    seed: u64,
) -> ReturnPanel {
    let n = means.len();
    let l = cov
        .clone()
        .cholesky()
        .expect("covariance must be positive definite")
        .l();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut obs = DMatrix::zeros(t, n);
    let mut z = DVector::zeros(n);
    for r in 0..t {
        for k in 0..n {
            z[k] = rng.sample::<f64, _>(StandardNormal);
        }
        let x = means + &l * &z;
        obs.row_mut(r).copy_from(&x.transpose());
    }
    ReturnPanel::new(
        labels.iter().map(|s| s.to_string()).collect(),
        obs,
        PanelMeta::default(),
    )
    .unwrap()
}

/// Pair for bank `i` computed directly from a known covariance matrix.
pub fn true_pair(means: &DVector<f64>, cov: &DMatrix<f64>, i: usize) -> GaussianPair {
    let n = means.len();
    let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
    let mu_a = others.iter().map(|&j| means[j]).sum();
    let cov_ia = others.iter().map(|&j| cov[(i, j)]).sum();
    let var_a = others
        .iter()
        .flat_map(|&j| others.iter().map(move |&k| (j, k)))
        .map(|(j, k)| cov[(j, k)])
        .sum();
    GaussianPair::new(means[i], mu_a, cov[(i, i)], var_a, cov_ia).unwrap()
}
