//! Standard-normal primitives, conditional moments of a bivariate Gaussian,
//! and closed-form Value at Risk / Expected Shortfall of a normal variable.
//!
//! Sign convention: VaR is a quantile of the statistic `X` itself,
//! `VaR(X) = mu - q * sqrt(var)` with `q = Phi^-1(alpha)`. For `alpha` close
//! to one this is a low (usually negative) value of `X`, not a positive loss
//! figure. The mean-corrected VaR is `VaR(X) - E(X) = -q * sqrt(var)`.

use libm::erfc;
use serde::Serialize;
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Result, RiskError};

/// 1 / sqrt(2 pi)
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Relative slack allowed on `cov^2 <= var_x * var_y` before a 2x2
/// covariance is rejected as indefinite.
pub(crate) const PSD_SLACK: f64 = 1e-12;

fn ensure_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(RiskError::Domain(format!("{name} must be finite, got {x}")))
    }
}

/// Density of the standard normal distribution.
pub fn std_normal_pdf(x: f64) -> Result<f64> {
    ensure_finite("x", x)?;
    Ok(density(x))
}

/// Standard normal distribution function, absolute accuracy around 1e-16.
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    ensure_finite("x", x)?;
    Ok(cdf(x))
}

/// Inverse of the standard normal distribution function.
///
/// Wichura's AS241 (PPND16) rational approximation followed by one Newton
/// step against [`std_normal_cdf`]. The residual is evaluated on the tail
/// closest to `p` so that `1 - p` never loses digits.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(RiskError::Domain(format!(
            "probability must lie in (0, 1), got {p}"
        )));
    }
    let x = as241(p);
    let residual = if p > 0.5 {
        (1.0 - p) - cdf(-x)
    } else {
        cdf(x) - p
    };
    let d = density(x);
    if d > 0.0 {
        Ok(x - residual / d)
    } else {
        Ok(x)
    }
}

#[inline]
pub(crate) fn density(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

#[inline]
pub(crate) fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

#[allow(clippy::excessive_precision, clippy::unreadable_literal)]
pub(crate) fn as241(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.3871328727963666080e0,
        1.3314166789178437745e+2,
        1.9715909503065514427e+3,
        1.3731693765509461125e+4,
        4.5921953931549871457e+4,
        6.7265770927008700853e+4,
        3.3430575583588128105e+4,
        2.5090809287301226727e+3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.2313330701600911252e+1,
        6.8718700749205790830e+2,
        5.3941960214247511077e+3,
        2.1213794301586595867e+4,
        3.9307895800092710610e+4,
        2.8729085735721942674e+4,
        5.2264952788528545610e+3,
    ];
    const C: [f64; 8] = [
        1.42343711074968357734e0,
        4.63033784615654529590e0,
        5.76949722146069140550e0,
        3.64784832476320460504e0,
        1.27045825245236838258e0,
        2.41780725177450611770e-1,
        2.27238449892691845833e-2,
        7.74545014278341407640e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.05319162663775882187e0,
        1.67638483018380384940e0,
        6.89767334985100004550e-1,
        1.48103976427480074590e-1,
        1.51986665636164571966e-2,
        5.47593808499534494600e-4,
        1.05075007164441684324e-9,
    ];
    const E: [f64; 8] = [
        6.65790464350110377720e0,
        5.46378491116411436990e0,
        1.78482653991729133580e0,
        2.96560571828504891230e-1,
        2.65321895265761230930e-2,
        1.24266094738807843860e-3,
        2.71155556874348757815e-5,
        2.01033439929228813265e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.99832206555887937690e-1,
        1.36929880922735805310e-1,
        1.48753612908506148525e-2,
        7.86869131145613259100e-4,
        1.84631831751005468180e-5,
        1.42151175831644588870e-7,
        2.04426310338993978564e-15,
    ];

    fn horner(c: &[f64; 8], x: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
    }

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * horner(&A, r) / horner(&B, r);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let x = if r <= 5.0 {
        r -= 1.6;
        horner(&C, r) / horner(&D, r)
    } else {
        r -= 5.0;
        horner(&E, r) / horner(&F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// VaR threshold `alpha` together with its standard-normal quantile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskParams {
    alpha: f64,
    quantile: f64,
}

impl RiskParams {
    /// `alpha` must lie in `(0.5, 1)`; smaller values would make the quantile
    /// non-positive and turn the stressed condition into an upside one.
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.5 && alpha < 1.0) {
            return Err(RiskError::InvalidAlpha(alpha));
        }
        let quantile = std_normal_quantile(alpha)?;
        Ok(Self { alpha, quantile })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `Phi^-1(alpha)`, strictly positive.
    pub fn quantile(&self) -> f64 {
        self.quantile
    }

    /// Probability mass of the lower tail, `1 - alpha`.
    pub fn tail_probability(&self) -> f64 {
        1.0 - self.alpha
    }

    /// `pdf(Phi^-1(alpha)) / (1 - alpha)`, the expected-shortfall counterpart
    /// of [`quantile`](Self::quantile).
    pub fn es_multiplier(&self) -> f64 {
        density(self.quantile) / self.tail_probability()
    }
}

/// Mean and variance of one component of a bivariate Gaussian given the other.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionalMoments {
    pub mean: f64,
    pub variance: f64,
}

impl ConditionalMoments {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    /// VaR of the conditional law.
    pub fn value_at_risk(&self, params: &RiskParams) -> f64 {
        self.mean - params.quantile() * self.std_dev()
    }
}

/// Moments of `X_A` given `X_i = x` when `(X_i, X_A)` is jointly Gaussian.
///
/// `mean = mu_a + (cov_ai / var_i) (x - mu_i)` and
/// `variance = var_a - cov_ai^2 / var_i`; the variance does not depend on `x`.
/// A conditioned variable with zero variance (`var_a = 0`, `cov_ai = 0`) is
/// accepted; the conditioning variable must have positive variance.
pub fn conditional_moments(
    mu_a: f64,
    mu_i: f64,
    var_i: f64,
    var_a: f64,
    cov_ai: f64,
    x: f64,
) -> Result<ConditionalMoments> {
    for (name, v) in [
        ("mu_a", mu_a),
        ("mu_i", mu_i),
        ("var_i", var_i),
        ("var_a", var_a),
        ("cov_ai", cov_ai),
        ("x", x),
    ] {
        ensure_finite(name, v)?;
    }
    if var_i <= 0.0 {
        return Err(RiskError::DegenerateModel(format!(
            "variance of the conditioning variable must be positive, got {var_i}"
        )));
    }
    if var_a < 0.0 {
        return Err(RiskError::InvalidCovariance(format!(
            "negative variance {var_a}"
        )));
    }
    if cov_ai * cov_ai > var_i * var_a * (1.0 + PSD_SLACK) {
        return Err(RiskError::InvalidCovariance(format!(
            "cov^2 = {} exceeds var_i * var_a = {}",
            cov_ai * cov_ai,
            var_i * var_a
        )));
    }
    let slope = cov_ai / var_i;
    Ok(ConditionalMoments {
        mean: mu_a + slope * (x - mu_i),
        variance: (var_a - cov_ai * slope).max(0.0),
    })
}

/// Closed-form VaR of `N(mu, var)`: `mu - Phi^-1(alpha) sqrt(var)`.
pub fn var_normal(mu: f64, var: f64, params: &RiskParams) -> Result<f64> {
    ensure_finite("mu", mu)?;
    ensure_variance(var)?;
    Ok(mu - params.quantile() * var.sqrt())
}

/// Mean-corrected expected shortfall of `N(., var)`:
/// `-(pdf(Phi^-1(alpha)) / (1 - alpha)) sqrt(var)`.
pub fn es_mean_normal(var: f64, params: &RiskParams) -> Result<f64> {
    ensure_variance(var)?;
    Ok(-params.es_multiplier() * var.sqrt())
}

fn ensure_variance(var: f64) -> Result<()> {
    ensure_finite("var", var)?;
    if var < 0.0 {
        return Err(RiskError::Domain(format!(
            "variance must be non-negative, got {var}"
        )));
    }
    Ok(())
}
