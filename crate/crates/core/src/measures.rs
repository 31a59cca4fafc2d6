//! Systemic-risk statistics of a bank `i` against the rest of the system `A`.
//!
//! Every statistic here compares a stressed with an unstressed conditional VaR
//! (or expectation) under a joint Gaussian law of `(X_i, X_A)`. The
//! conditional variance enters both terms identically and cancels, so each
//! delta reduces to a beta coefficient times a mean-corrected VaR:
//!
//! | statistic          | closed form                           |
//! |--------------------|---------------------------------------|
//! | `delta_coll_var`   | `beta_Ai * VaR_mean(X_i)`             |
//! | `delta_coll_es`    | `beta_Ai * ES_mean(X_i)`              |
//! | `delta_cond_var`   | `beta_Si * VaR_mean(X_i)`             |
//! | `delta_contr_var`  | `beta_iS * VaR_mean(X_S)`             |
//! | `var_contribution` | `mu_i + delta_contr_var`              |
//!
//! with `X_S = X_i + X_A`. Statistics of `A` (needed for aggregation
//! identities) are obtained by running the same functions on
//! [`GaussianPair::swapped`].

use serde::Serialize;

use crate::error::{Result, RiskError};
use crate::gaussian::{
    conditional_moments, es_mean_normal, var_normal, ConditionalMoments, RiskParams, PSD_SLACK,
};

/// Relative tolerance of the runtime cross-checks in [`full_report`].
pub const CONSISTENCY_TOLERANCE: f64 = 1e-9;

/// `var_s` at or below this fraction of `var_i` counts as zero.
const DEGENERATE_SYSTEM_REL: f64 = 1e-12;

/// Jointly Gaussian `(X_i, X_A)`: a bank and the rest of the system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianPair {
    mu_i: f64,
    mu_a: f64,
    var_i: f64,
    var_a: f64,
    cov_ia: f64,
}

impl GaussianPair {
    pub fn new(mu_i: f64, mu_a: f64, var_i: f64, var_a: f64, cov_ia: f64) -> Result<Self> {
        for (name, v) in [
            ("mu_i", mu_i),
            ("mu_a", mu_a),
            ("var_i", var_i),
            ("var_a", var_a),
            ("cov_ia", cov_ia),
        ] {
            if !v.is_finite() {
                return Err(RiskError::Domain(format!("{name} must be finite, got {v}")));
            }
        }
        if var_i <= 0.0 {
            return Err(RiskError::DegenerateModel(format!(
                "var_i must be positive, got {var_i}"
            )));
        }
        if var_a <= 0.0 {
            return Err(RiskError::DegenerateModel(format!(
                "var_a must be positive, got {var_a}"
            )));
        }
        if cov_ia * cov_ia > var_i * var_a * (1.0 + PSD_SLACK) {
            return Err(RiskError::InvalidCovariance(format!(
                "cov_ia^2 = {} exceeds var_i * var_a = {}",
                cov_ia * cov_ia,
                var_i * var_a
            )));
        }
        Ok(Self {
            mu_i,
            mu_a,
            var_i,
            var_a,
            cov_ia,
        })
    }

    pub fn mu_i(&self) -> f64 {
        self.mu_i
    }

    pub fn mu_a(&self) -> f64 {
        self.mu_a
    }

    pub fn var_i(&self) -> f64 {
        self.var_i
    }

    pub fn var_a(&self) -> f64 {
        self.var_a
    }

    pub fn cov_ia(&self) -> f64 {
        self.cov_ia
    }

    pub fn std_i(&self) -> f64 {
        self.var_i.sqrt()
    }

    pub fn std_a(&self) -> f64 {
        self.var_a.sqrt()
    }

    /// Correlation of `X_i` and `X_A`, clamped to `[-1, 1]`.
    pub fn rho(&self) -> f64 {
        (self.cov_ia / (self.var_i * self.var_a).sqrt()).clamp(-1.0, 1.0)
    }

    /// The same model with the roles of `i` and `A` exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            mu_i: self.mu_a,
            mu_a: self.mu_i,
            var_i: self.var_a,
            var_a: self.var_i,
            cov_ia: self.cov_ia,
        }
    }

    /// Moments of `X_A` given `X_i = x`.
    pub fn conditional_on_bank(&self, x: f64) -> Result<ConditionalMoments> {
        conditional_moments(self.mu_a, self.mu_i, self.var_i, self.var_a, self.cov_ia, x)
    }

    fn scale(&self) -> f64 {
        self.mu_i.abs() + self.mu_a.abs() + self.std_i() + self.std_a()
    }
}

/// `(X_i, X_S)` with `X_S = X_i + X_A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SystemView {
    pub mu_i: f64,
    pub mu_s: f64,
    pub var_i: f64,
    pub var_s: f64,
    pub cov_is: f64,
}

impl SystemView {
    pub fn is_degenerate(&self) -> bool {
        self.var_s <= DEGENERATE_SYSTEM_REL * self.var_i
    }

    /// Moments of `X_S` given `X_i = x`.
    pub fn conditional_on_bank(&self, x: f64) -> Result<ConditionalMoments> {
        conditional_moments(self.mu_s, self.mu_i, self.var_i, self.var_s, self.cov_is, x)
    }

    /// Moments of `X_i` given `X_S = x`.
    pub fn conditional_on_system(&self, x: f64) -> Result<ConditionalMoments> {
        if self.is_degenerate() {
            return Err(RiskError::DegenerateSystem);
        }
        conditional_moments(self.mu_i, self.mu_s, self.var_s, self.var_i, self.cov_is, x)
    }

    fn nondegenerate_var_s(&self) -> Result<f64> {
        if self.is_degenerate() {
            Err(RiskError::DegenerateSystem)
        } else {
            Ok(self.var_s)
        }
    }
}

/// Regression slope `cov / var`.
pub fn beta_coefficient(cov: f64, var: f64) -> Result<f64> {
    if !var.is_finite() || var <= 0.0 {
        return Err(RiskError::DegenerateModel(format!(
            "regressor variance must be positive, got {var}"
        )));
    }
    if !cov.is_finite() {
        return Err(RiskError::Domain(format!(
            "covariance must be finite, got {cov}"
        )));
    }
    Ok(cov / var)
}

/// `VaR(X_i)`.
pub fn value_at_risk(pair: &GaussianPair, params: &RiskParams) -> f64 {
    pair.mu_i - params.quantile() * pair.std_i()
}

/// `VaR_mean(X_i) = -q sqrt(var_i)`.
pub fn var_mean(pair: &GaussianPair, params: &RiskParams) -> f64 {
    -params.quantile() * pair.std_i()
}

/// `VaR(X_A | X_i = VaR(X_i))`.
pub fn covar_collateral(pair: &GaussianPair, params: &RiskParams) -> Result<f64> {
    let q = params.quantile();
    let cond_var = (pair.var_a - pair.cov_ia * pair.cov_ia / pair.var_i).max(0.0);
    Ok(pair.mu_a - q * pair.cov_ia / pair.std_i() - q * cond_var.sqrt())
}

/// `VaR(X_A | X_i = E(X_i))`, the unstressed benchmark.
pub fn covar_at_mean(pair: &GaussianPair, params: &RiskParams) -> Result<f64> {
    let cond_var = (pair.var_a - pair.cov_ia * pair.cov_ia / pair.var_i).max(0.0);
    var_normal(pair.mu_a, cond_var, params)
}

/// `CoVaR - CoVaRe = -q cov_ia / sqrt(var_i)`.
pub fn delta_coll_var(pair: &GaussianPair, params: &RiskParams) -> Result<f64> {
    Ok(-params.quantile() * pair.cov_ia / pair.std_i())
}

/// Expected-shortfall analogue of [`delta_coll_var`]:
/// `-(pdf(q) / (1 - alpha)) cov_ia / sqrt(var_i)`.
pub fn delta_coll_es(pair: &GaussianPair, params: &RiskParams) -> Result<f64> {
    Ok(-params.es_multiplier() * pair.cov_ia / pair.std_i())
}

pub fn to_system_view(pair: &GaussianPair) -> SystemView {
    let var_s = pair.var_i + 2.0 * pair.cov_ia + pair.var_a;
    // PSD pairs give var_s >= 0 up to rounding.
    debug_assert!(var_s >= -1e-9 * (pair.var_i + pair.var_a));
    SystemView {
        mu_i: pair.mu_i,
        mu_s: pair.mu_i + pair.mu_a,
        var_i: pair.var_i,
        var_s: var_s.max(0.0),
        cov_is: pair.cov_ia + pair.var_i,
    }
}

/// `VaR(X_S)`.
pub fn system_value_at_risk(pair: &GaussianPair, params: &RiskParams) -> Result<f64> {
    let view = to_system_view(pair);
    var_normal(view.mu_s, view.var_s, params)
}

/// `VaR(X_S | X_i = VaR(X_i))`.
pub fn covar_system(pair: &GaussianPair, params: &RiskParams) -> Result<f64> {
    let view = to_system_view(pair);
    let q = params.quantile();
    let cond_var = (view.var_s - view.cov_is * view.cov_is / view.var_i).max(0.0);
    Ok(view.mu_s - q * view.cov_is / view.var_i.sqrt() - q * cond_var.sqrt())
}

/// `VaR(X_S | X_i = VaR(X_i)) - VaR(X_S | X_i = E(X_i)) = -q (cov_ia + var_i) / sqrt(var_i)`.
pub fn delta_cond_var(pair: &GaussianPair, params: &RiskParams) -> Result<f64> {
    Ok(-params.quantile() * (pair.cov_ia + pair.var_i) / pair.std_i())
}

/// `VaR(X_i | X_S = VaR(X_S)) - VaR(X_i | X_S = E(X_S)) = -q (cov_ia + var_i) / sqrt(var_s)`.
///
/// Fails with [`RiskError::DegenerateSystem`] when `var_s = 0`.
pub fn delta_contr_var(pair: &GaussianPair, params: &RiskParams) -> Result<f64> {
    let view = to_system_view(pair);
    let var_s = view.nondegenerate_var_s()?;
    Ok(-params.quantile() * view.cov_is / var_s.sqrt())
}

/// Euler allocation of system VaR to the bank, `E(X_i | X_S = VaR(X_S))`.
pub fn var_contribution(pair: &GaussianPair, params: &RiskParams) -> Result<f64> {
    Ok(pair.mu_i + delta_contr_var(pair, params)?)
}

/// Standard-deviation allocation `cov(X_S, X_i) / std(X_S)`.
pub fn std_allocation(pair: &GaussianPair) -> Result<f64> {
    let view = to_system_view(pair);
    let var_s = view.nondegenerate_var_s()?;
    Ok(view.cov_is / var_s.sqrt())
}

/// Every statistic for one bank.
///
/// The three fields that condition on the system are `None` when
/// `var_s = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BankRiskReport {
    pub var_i: f64,
    pub var_mean_i: f64,
    pub covar_ai: f64,
    pub covare_ai: f64,
    pub delta_coll_var: f64,
    pub delta_coll_es: f64,
    pub delta_cond_var: f64,
    pub delta_contr_var: Option<f64>,
    pub var_contribution: Option<f64>,
    pub beta_ai: f64,
    pub beta_si: f64,
    pub beta_is: Option<f64>,
    pub rho: f64,
}

struct Checker {
    scale: f64,
}

impl Checker {
    fn check(&self, identity: &'static str, lhs: f64, rhs: f64) -> Result<()> {
        let scale = self.scale.max(lhs.abs()).max(rhs.abs());
        if lhs.is_finite() && rhs.is_finite() && (lhs - rhs).abs() <= CONSISTENCY_TOLERANCE * scale
        {
            Ok(())
        } else {
            Err(RiskError::InternalConsistency { identity, lhs, rhs })
        }
    }
}

/// Computes the full set of statistics and re-derives each one through a
/// second route (conditional moments, beta form, correlation form).
/// Disagreement beyond [`CONSISTENCY_TOLERANCE`] is an error.
pub fn full_report(pair: &GaussianPair, params: &RiskParams) -> Result<BankRiskReport> {
    let q = params.quantile();
    let chk = Checker {
        scale: pair.scale() * q.max(1.0),
    };
    let view = to_system_view(pair);

    let var_i = value_at_risk(pair, params);
    let var_mean_i = var_mean(pair, params);
    let covar_ai = covar_collateral(pair, params)?;
    let covare_ai = covar_at_mean(pair, params)?;
    let d_coll = delta_coll_var(pair, params)?;
    let d_coll_es = delta_coll_es(pair, params)?;
    let d_cond = delta_cond_var(pair, params)?;
    let beta_ai = beta_coefficient(pair.cov_ia, pair.var_i)?;
    let beta_si = beta_coefficient(view.cov_is, pair.var_i)?;
    let rho = pair.rho();

    chk.check("VaR_mean = VaR - mu", var_mean_i, var_i - pair.mu_i)?;

    let stressed = pair.conditional_on_bank(var_i)?;
    let unstressed = pair.conditional_on_bank(pair.mu_i)?;
    chk.check(
        "CoVaR = VaR of conditional law at VaR(X_i)",
        covar_ai,
        stressed.value_at_risk(params),
    )?;
    chk.check(
        "CoVaRe = VaR of conditional law at E(X_i)",
        covare_ai,
        unstressed.value_at_risk(params),
    )?;
    chk.check("dCollVaR = CoVaR - CoVaRe", d_coll, covar_ai - covare_ai)?;
    chk.check("dCollVaR = beta_Ai VaR_mean", d_coll, beta_ai * var_mean_i)?;
    chk.check(
        "dCollVaR = -q rho std(X_A)",
        d_coll,
        -q * rho * pair.std_a(),
    )?;
    chk.check(
        "dCollVaR = E(X_A | X_i = VaR) - mu_A",
        d_coll,
        stressed.mean - pair.mu_a,
    )?;
    chk.check(
        "dCollES = beta_Ai ES_mean",
        d_coll_es,
        beta_ai * es_mean_normal(pair.var_i, params)?,
    )?;

    let sys_stressed = view.conditional_on_bank(var_i)?;
    let sys_unstressed = view.conditional_on_bank(pair.mu_i)?;
    chk.check(
        "dCondVaR = VaR(X_S | VaR) - VaR(X_S | mean)",
        d_cond,
        sys_stressed.value_at_risk(params) - sys_unstressed.value_at_risk(params),
    )?;
    chk.check(
        "dCondVaR = dCollVaR + VaR_mean",
        d_cond,
        d_coll + var_mean_i,
    )?;
    chk.check("dCondVaR = beta_Si VaR_mean", d_cond, beta_si * var_mean_i)?;

    let (delta_contr_var, var_contribution, beta_is) = if view.is_degenerate() {
        (None, None, None)
    } else {
        let d_contr = delta_contr_var(pair, params)?;
        let contribution = var_contribution(pair, params)?;
        let beta_is = beta_coefficient(view.cov_is, view.var_s)?;
        let var_s_mean = -q * view.var_s.sqrt();
        let var_s = view.mu_s + var_s_mean;
        let by_system = view.conditional_on_system(var_s)?;
        let at_system_mean = view.conditional_on_system(view.mu_s)?;

        chk.check(
            "dContrVaR = beta_iS VaR_mean(X_S)",
            d_contr,
            beta_is * var_s_mean,
        )?;
        chk.check(
            "dContrVaR = VaR(X_i | X_S = VaR) - VaR(X_i | X_S = mean)",
            d_contr,
            by_system.value_at_risk(params) - at_system_mean.value_at_risk(params),
        )?;
        chk.check(
            "VaR-Contribution = E(X_i | X_S = VaR(X_S))",
            contribution,
            by_system.mean,
        )?;
        chk.check("dContrVaR = -q AC_std", d_contr, -q * std_allocation(pair)?)?;
        chk.check(
            "dCondVaR = sqrt(var_s / var_i) dContrVaR",
            d_cond,
            (view.var_s / pair.var_i).sqrt() * d_contr,
        )?;
        (Some(d_contr), Some(contribution), Some(beta_is))
    };

    Ok(BankRiskReport {
        var_i,
        var_mean_i,
        covar_ai,
        covare_ai,
        delta_coll_var: d_coll,
        delta_coll_es: d_coll_es,
        delta_cond_var: d_cond,
        delta_contr_var,
        var_contribution,
        beta_ai,
        beta_si,
        beta_is,
        rho,
    })
}
