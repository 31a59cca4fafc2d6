//! Monte Carlo cross-check of the closed forms.
//!
//! Samples `(X_i, X_A)` from the bivariate Gaussian and recomputes every
//! statistic empirically. Conditioning on `{X = x}` is approximated by a hard
//! band `|X - x| <= h * std(X)`; nothing here evaluates the conditional law
//! analytically, so the empirical side never shares code with
//! [`crate::measures`].
//!
//! Quantile convention: VaR at level `alpha` is the lower `1 - alpha`
//! quantile, taken as the order statistic with 1-based rank
//! `ceil((1 - alpha) * N)` of the ascending sample.
//!
//! Each statistic gets a tolerance of four estimated standard errors
//! (binomial/density for quantiles, delta method for tail means), floored at
//! [`TOLERANCE_FLOOR`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, RiskError};
use crate::gaussian::{density, RiskParams};
use crate::measures::{self, GaussianPair};

/// Minimum number of samples inside a conditioning band.
pub const MIN_BAND_MEMBERS: usize = 1000;
/// Minimum number of samples in a tail used for a tail mean.
pub const MIN_TAIL_SAMPLES: usize = 500;
/// Standard errors per tolerance.
pub const TOLERANCE_SIGMAS: f64 = 4.0;
/// Absolute lower bound on any tolerance.
pub const TOLERANCE_FLOOR: f64 = 1e-6;

/// Draws per independently seeded block. Changing it changes every sample.
const BLOCK_LEN: usize = 1 << 16;

/// Identifies the random source so that reports can be reproduced.
pub const RNG_METHOD: &str = "chacha8 (rand_chacha 0.9) seeded from u64, stream = block index, \
    65536 draws per block; standard normals by ziggurat (rand_distr 0.5 StandardNormal); \
    correlation via 2x2 Cholesky factor";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McConfig {
    pub sample_count: usize,
    /// Half-width of the conditioning band in units of the conditioning
    /// variable's sample standard deviation.
    pub bandwidth: f64,
    pub seed: u64,
    pub alpha: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            sample_count: 2_000_000,
            bandwidth: 0.05,
            seed: 1,
            alpha: 0.99,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_count < 10_000 {
            return Err(RiskError::InvalidConfig(format!(
                "sample_count must be at least 10000, got {}",
                self.sample_count
            )));
        }
        if !(self.bandwidth > 0.0 && self.bandwidth <= 0.5) {
            return Err(RiskError::InvalidConfig(format!(
                "bandwidth must lie in (0, 0.5], got {}",
                self.bandwidth
            )));
        }
        RiskParams::new(self.alpha)?;
        Ok(())
    }

    pub fn params(&self) -> Result<RiskParams> {
        RiskParams::new(self.alpha)
    }
}

/// Joint draws of `(X_i, X_A)`, stored column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSamples {
    pub bank: Vec<f64>,
    pub rest: Vec<f64>,
}

impl PairSamples {
    pub fn len(&self) -> usize {
        self.bank.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bank.is_empty()
    }

    /// `X_S = X_i + X_A` for every draw.
    pub fn system(&self) -> Vec<f64> {
        self.bank
            .iter()
            .zip(&self.rest)
            .map(|(a, b)| a + b)
            .collect()
    }
}

/// Draws `config.sample_count` pairs.
///
/// Samples are produced in fixed-size blocks, each from its own ChaCha stream,
/// so the output depends only on `(pair, config)` and not on the number of
/// worker threads.
pub fn sample_pair(pair: &GaussianPair, config: &McConfig) -> Result<PairSamples> {
    config.validate()?;
    let n = config.sample_count;
    let l11 = pair.std_i();
    let l21 = pair.cov_ia() / l11;
    let l22 = (pair.var_a() - l21 * l21).max(0.0).sqrt();
    let (mu_i, mu_a) = (pair.mu_i(), pair.mu_a());

    let mut bank = vec![0.0; n];
    let mut rest = vec![0.0; n];
    bank.par_chunks_mut(BLOCK_LEN)
        .zip(rest.par_chunks_mut(BLOCK_LEN))
        .enumerate()
        .for_each(|(block, (xi, xa))| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(block as u64);
            for (bi, ai) in xi.iter_mut().zip(xa.iter_mut()) {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                *bi = mu_i + l11 * z1;
                *ai = mu_a + l21 * z1 + l22 * z2;
            }
        });
    Ok(PairSamples { bank, rest })
}

/// An empirical statistic with its estimated standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    /// Samples that determine the value: tail size for quantiles and tail
    /// means, band size for band means.
    pub effective_samples: usize,
}

fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(RiskError::Domain(format!(
            "probability must lie in (0, 1), got {p}"
        )))
    }
}

fn rank(p: f64, n: usize) -> usize {
    ((p * n as f64).ceil() as usize).clamp(1, n)
}

/// Order statistic of rank `ceil(p N)` (1-based) of the ascending sample.
pub fn empirical_quantile(values: &[f64], p: f64) -> Result<f64> {
    check_probability(p)?;
    if values.is_empty() {
        return Err(RiskError::EmptySample);
    }
    let mut buf = values.to_vec();
    Ok(select(&mut buf, rank(p, values.len()) - 1))
}

fn select(buf: &mut [f64], k: usize) -> f64 {
    *buf.select_nth_unstable_by(k, f64::total_cmp).1
}

#[derive(Debug, Clone, Copy)]
struct Moments {
    mean: f64,
    variance: f64,
}

fn moments(values: &[f64]) -> Moments {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    let variance = if values.len() > 1 {
        ss / (n - 1.0)
    } else {
        0.0
    };
    Moments { mean, variance }
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let mx = moments(x).mean;
    let my = moments(y).mean;
    let (sxy, sxx) = x.iter().zip(y).fold((0.0, 0.0), |(sxy, sxx), (a, b)| {
        (sxy + (a - mx) * (b - my), sxx + (a - mx) * (a - mx))
    });
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

/// Lower `p`-quantile with a binomial standard error
/// `sqrt(p (1 - p) / m) / f(q)`, `f` the normal density fitted to the sample.
fn quantile_estimate(values: &mut [f64], p: f64) -> Estimate {
    let m = values.len();
    let k = rank(p, m);
    let q = select(values, k - 1);
    let mom = moments(values);
    let sd = mom.variance.sqrt();
    let std_error = if sd > 0.0 {
        let f = density((q - mom.mean) / sd) / sd;
        (p * (1.0 - p) / m as f64).sqrt() / f
    } else {
        0.0
    };
    Estimate {
        value: q,
        std_error,
        effective_samples: k,
    }
}

fn band_members(conditioning: &[f64], target: &[f64], x: f64, bandwidth: f64) -> Result<Vec<f64>> {
    let half_width = bandwidth * moments(conditioning).variance.sqrt();
    let members: Vec<f64> = conditioning
        .iter()
        .zip(target)
        .filter(|(c, _)| (*c - x).abs() <= half_width)
        .map(|(_, t)| *t)
        .collect();
    if members.len() < MIN_BAND_MEMBERS {
        return Err(RiskError::ThinBand {
            members: members.len(),
            required: MIN_BAND_MEMBERS,
        });
    }
    Ok(members)
}

/// Lower `p`-quantile of `target` among draws whose `conditioning` value lies
/// within `bandwidth * std(conditioning)` of `x`.
pub fn band_quantile(
    conditioning: &[f64],
    target: &[f64],
    x: f64,
    bandwidth: f64,
    p: f64,
) -> Result<Estimate> {
    check_probability(p)?;
    let mut members = band_members(conditioning, target, x, bandwidth)?;
    Ok(quantile_estimate(&mut members, p))
}

/// Mean of `target` among draws in the conditioning band around `x`.
pub fn band_mean(conditioning: &[f64], target: &[f64], x: f64, bandwidth: f64) -> Result<Estimate> {
    let members = band_members(conditioning, target, x, bandwidth)?;
    let mom = moments(&members);
    Ok(Estimate {
        value: mom.mean,
        std_error: (mom.variance / members.len() as f64).sqrt(),
        effective_samples: members.len(),
    })
}

/// Empirical `VaR(X_A | X_i = x)`.
pub fn empirical_conditional_var(
    samples: &PairSamples,
    x: f64,
    bandwidth: f64,
    params: &RiskParams,
) -> Result<Estimate> {
    band_quantile(
        &samples.bank,
        &samples.rest,
        x,
        bandwidth,
        params.tail_probability(),
    )
}

/// `E(Y | X <= q_p(X)) - E(Y)` with `q_p` the empirical lower `p`-quantile.
///
/// The standard error is the delta-method value
/// `sqrt((Var(Y | tail) + (1 - p) b^2 (q - E(X | tail))^2) / k)` with `b` the
/// least-squares slope of `Y` on `X` and `k` the tail size; for `Y = X` it is
/// the usual expected-shortfall standard error.
pub fn tail_conditional_mean(conditioning: &[f64], target: &[f64], p: f64) -> Result<Estimate> {
    check_probability(p)?;
    if conditioning.is_empty() {
        return Err(RiskError::EmptySample);
    }
    let q = empirical_quantile(conditioning, p)?;
    let (tail_x, tail_y): (Vec<f64>, Vec<f64>) = conditioning
        .iter()
        .zip(target)
        .filter(|(c, _)| **c <= q)
        .map(|(c, t)| (*c, *t))
        .unzip();
    if tail_y.len() < MIN_TAIL_SAMPLES {
        return Err(RiskError::ThinTail {
            count: tail_y.len(),
            required: MIN_TAIL_SAMPLES,
        });
    }
    let k = tail_y.len() as f64;
    let all_y = moments(target);
    let ty = moments(&tail_y);
    let tx = moments(&tail_x);
    let slope = ols_slope(conditioning, target);
    let quantile_term = (1.0 - p) * (slope * (q - tx.mean)).powi(2);
    let std_error =
        ((ty.variance + quantile_term) / k + all_y.variance / target.len() as f64).sqrt();
    Ok(Estimate {
        value: ty.mean - all_y.mean,
        std_error,
        effective_samples: tail_y.len(),
    })
}

/// Mean-corrected empirical expected shortfall: the average of the values at
/// or below the lower `1 - alpha` quantile minus the sample mean.
pub fn empirical_es(values: &[f64], params: &RiskParams) -> Result<Estimate> {
    tail_conditional_mean(values, values, params.tail_probability())
}

/// The statistics checked by [`validate_closed_forms`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// `VaR(X_i)`, empirical lower quantile of `X_i`.
    VarI,
    /// `VaR(X_A | X_i = VaR(X_i))`, band quantile.
    CovarAi,
    /// `VaR(X_A | X_i = E(X_i))`, band quantile.
    CovareAi,
    DeltaCollVar,
    /// Mean of `X_A` over the `X_i` tail, minus the mean of `X_A`.
    DeltaCollEs,
    /// Band quantiles of `X_S` around the stressed and mean values of `X_i`.
    DeltaCondVar,
    /// Band quantiles of `X_i` around the stressed and mean values of `X_S`.
    DeltaContrVar,
    /// Band mean of `X_i` around the empirical `VaR(X_S)`.
    VarContribution,
    /// Least-squares slope of `X_A` on `X_i`.
    BetaAi,
    /// Band mean of `X_A` around the empirical `VaR(X_i)`, minus the mean of
    /// `X_A`; the expected-value form of `delta_coll_var`.
    CollMeanShift,
}

impl Statistic {
    pub const ALL: [Statistic; 10] = [
        Statistic::VarI,
        Statistic::CovarAi,
        Statistic::CovareAi,
        Statistic::DeltaCollVar,
        Statistic::DeltaCollEs,
        Statistic::DeltaCondVar,
        Statistic::DeltaContrVar,
        Statistic::VarContribution,
        Statistic::BetaAi,
        Statistic::CollMeanShift,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Statistic::VarI => "var_i",
            Statistic::CovarAi => "covar_ai",
            Statistic::CovareAi => "covare_ai",
            Statistic::DeltaCollVar => "delta_coll_var",
            Statistic::DeltaCollEs => "delta_coll_es",
            Statistic::DeltaCondVar => "delta_cond_var",
            Statistic::DeltaContrVar => "delta_contr_var",
            Statistic::VarContribution => "var_contribution",
            Statistic::BetaAi => "beta_ai",
            Statistic::CollMeanShift => "coll_mean_shift",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Closed-form values of every [`Statistic`] for one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedForms {
    values: [f64; Statistic::ALL.len()],
}

impl ClosedForms {
    /// Fails with [`RiskError::DegenerateSystem`] when `var_s = 0`.
    pub fn from_pair(pair: &GaussianPair, params: &RiskParams) -> Result<Self> {
        let mut values = [0.0; Statistic::ALL.len()];
        let d_coll = measures::delta_coll_var(pair, params)?;
        values[Statistic::VarI.index()] = measures::value_at_risk(pair, params);
        values[Statistic::CovarAi.index()] = measures::covar_collateral(pair, params)?;
        values[Statistic::CovareAi.index()] = measures::covar_at_mean(pair, params)?;
        values[Statistic::DeltaCollVar.index()] = d_coll;
        values[Statistic::DeltaCollEs.index()] = measures::delta_coll_es(pair, params)?;
        values[Statistic::DeltaCondVar.index()] = measures::delta_cond_var(pair, params)?;
        values[Statistic::DeltaContrVar.index()] = measures::delta_contr_var(pair, params)?;
        values[Statistic::VarContribution.index()] = measures::var_contribution(pair, params)?;
        values[Statistic::BetaAi.index()] =
            measures::beta_coefficient(pair.cov_ia(), pair.var_i())?;
        values[Statistic::CollMeanShift.index()] = d_coll;
        Ok(Self { values })
    }

    pub fn get(&self, stat: Statistic) -> f64 {
        self.values[stat.index()]
    }

    pub fn set(&mut self, stat: Statistic, value: f64) {
        self.values[stat.index()] = value;
    }
}

/// Closed form against simulation for one statistic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatisticCheck {
    pub statistic: Statistic,
    pub closed_form: f64,
    pub empirical: f64,
    pub abs_error: f64,
    pub tolerance: f64,
    pub effective_tail_samples: usize,
    pub pass: bool,
}

/// A statistic that could not be estimated, e.g. because its band was thin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Unevaluated {
    pub statistic: Statistic,
    pub closed_form: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub pair: GaussianPair,
    pub config: McConfig,
    pub rng: &'static str,
    pub records: Vec<StatisticCheck>,
    pub unevaluated: Vec<Unevaluated>,
}

impl ValidationReport {
    /// True when every evaluated statistic is within tolerance.
    pub fn passed(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn record(&self, stat: Statistic) -> Option<&StatisticCheck> {
        self.records.iter().find(|r| r.statistic == stat)
    }
}

/// An estimate, or the reason it could not be formed from the sample.
type Sampled = std::result::Result<Estimate, String>;

/// Turns thin-band and thin-tail failures into [`Sampled`] errors and
/// propagates everything else.
fn sampled(r: Result<Estimate>) -> Result<Sampled> {
    match r {
        Ok(e) => Ok(Ok(e)),
        Err(e @ (RiskError::ThinBand { .. } | RiskError::ThinTail { .. })) => {
            Ok(Err(e.to_string()))
        }
        Err(e) => Err(e),
    }
}

fn difference(a: &Sampled, b: &Sampled) -> Sampled {
    let (a, b) = (
        a.as_ref().map_err(Clone::clone)?,
        b.as_ref().map_err(Clone::clone)?,
    );
    Ok(Estimate {
        value: a.value - b.value,
        std_error: a.std_error.hypot(b.std_error),
        effective_samples: a.effective_samples.min(b.effective_samples),
    })
}

/// Adds the error from estimating the conditioning point itself:
/// a shift `dx` moves the conditional statistic by `slope * dx`.
fn with_point_error(mut e: Estimate, slope: f64, point_se: f64) -> Estimate {
    e.std_error = e.std_error.hypot(slope * point_se);
    e
}

/// Simulates the pair and checks every closed form against its empirical
/// counterpart.
pub fn validate_closed_forms(pair: &GaussianPair, config: &McConfig) -> Result<ValidationReport> {
    let params = config.params()?;
    let closed = ClosedForms::from_pair(pair, &params)?;
    validate_against(pair, config, &closed)
}

/// Like [`validate_closed_forms`] but with caller-supplied closed forms.
pub fn validate_against(
    pair: &GaussianPair,
    config: &McConfig,
    closed: &ClosedForms,
) -> Result<ValidationReport> {
    let params = config.params()?;
    let p = params.tail_probability();
    let h = config.bandwidth;
    let samples = sample_pair(pair, config)?;
    let system = samples.system();
    let (xi, xa) = (&samples.bank, &samples.rest);
    let n = samples.len() as f64;

    let mi = moments(xi);
    let ma = moments(xa);
    let ms = moments(&system);

    let mut buf = xi.clone();
    let var_i = quantile_estimate(&mut buf, p);
    buf.copy_from_slice(&system);
    let var_s = quantile_estimate(&mut buf, p);
    drop(buf);

    let slope_ai = ols_slope(xi, xa);
    let slope_si = ols_slope(xi, &system);
    let slope_is = ols_slope(&system, xi);

    let stressed_a = sampled(band_quantile(xi, xa, var_i.value, h, p))?
        .map(|e| with_point_error(e, slope_ai, var_i.std_error));
    let unstressed_a = sampled(band_quantile(xi, xa, mi.mean, h, p))?;
    let stressed_s = sampled(band_quantile(xi, &system, var_i.value, h, p))?
        .map(|e| with_point_error(e, slope_si, var_i.std_error));
    let unstressed_s = sampled(band_quantile(xi, &system, mi.mean, h, p))?;
    let by_system = sampled(band_quantile(&system, xi, var_s.value, h, p))?
        .map(|e| with_point_error(e, slope_is, var_s.std_error));
    let at_system_mean = sampled(band_quantile(&system, xi, ms.mean, h, p))?;

    let beta = {
        let resid_var = (ma.variance - slope_ai * slope_ai * mi.variance).max(0.0);
        Estimate {
            value: slope_ai,
            std_error: (resid_var / (n * mi.variance)).sqrt(),
            effective_samples: samples.len(),
        }
    };

    let empirical: Vec<(Statistic, Sampled)> = vec![
        (Statistic::VarI, Ok(var_i)),
        (Statistic::CovarAi, stressed_a.clone()),
        (Statistic::CovareAi, unstressed_a.clone()),
        (
            Statistic::DeltaCollVar,
            difference(&stressed_a, &unstressed_a),
        ),
        (
            Statistic::DeltaCollEs,
            sampled(tail_conditional_mean(xi, xa, p))?,
        ),
        (
            Statistic::DeltaCondVar,
            difference(&stressed_s, &unstressed_s),
        ),
        (
            Statistic::DeltaContrVar,
            difference(&by_system, &at_system_mean),
        ),
        (
            Statistic::VarContribution,
            sampled(band_mean(&system, xi, var_s.value, h))?
                .map(|e| with_point_error(e, slope_is, var_s.std_error)),
        ),
        (Statistic::BetaAi, Ok(beta)),
        (
            Statistic::CollMeanShift,
            sampled(band_mean(xi, xa, var_i.value, h))?.map(|e| {
                let mut e = with_point_error(e, slope_ai, var_i.std_error);
                e.value -= ma.mean;
                e.std_error = e.std_error.hypot((ma.variance / n).sqrt());
                e
            }),
        ),
    ];

    let mut records = Vec::new();
    let mut unevaluated = Vec::new();
    for (statistic, estimate) in empirical {
        let closed_form = closed.get(statistic);
        match estimate {
            Ok(e) => {
                let abs_error = (e.value - closed_form).abs();
                let tolerance = (TOLERANCE_SIGMAS * e.std_error).max(TOLERANCE_FLOOR);
                records.push(StatisticCheck {
                    statistic,
                    closed_form,
                    empirical: e.value,
                    abs_error,
                    tolerance,
                    effective_tail_samples: e.effective_samples,
                    pass: abs_error <= tolerance,
                });
            }
            Err(reason) => unevaluated.push(Unevaluated {
                statistic,
                closed_form,
                reason,
            }),
        }
    }

    Ok(ValidationReport {
        pair: *pair,
        config: *config,
        rng: RNG_METHOD,
        records,
        unevaluated,
    })
}
