//! Likelihood-ratio tail bounds: the exponential-family factor
//! `M(z, theta)`, its Berry-Esseen refinement, the per-family closed forms
//! and a numerical Chernoff minimisation used as an independent check.

use serde::{Deserialize, Serialize};

use crate::distributions::{DistributionSpec, ExpFamilyModel, Family};
use crate::error::{Error, Result};
use crate::special::{ln_choose, xlnxy};

/// Berry-Esseen constant of Tyurin.
pub const C_BE_TYURIN: f64 = 0.4785;
/// Berry-Esseen constant of Shevtsova.
pub const C_BE_SHEVTSOVA: f64 = 0.7056;
/// Environment variable that overrides the Berry-Esseen constant.
pub const C_BE_ENV: &str = "TAILBOUND_CBE";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConfig {
    pub c_be: f64,
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self { c_be: C_BE_TYURIN }
    }
}

impl BoundConfig {
    pub fn with_c_be(c_be: f64) -> Result<Self> {
        if c_be > 0.0 && c_be.is_finite() {
            Ok(Self { c_be })
        } else {
            Err(Error::InvalidParameter(format!("C_BE must be a positive real, got {c_be}")))
        }
    }

    /// Reads [`C_BE_ENV`]. Returns the configuration and, for values other
    /// than the two published constants, a warning message.
    pub fn from_env() -> Result<(Self, Option<String>)> {
        match std::env::var(C_BE_ENV) {
            Err(_) => Ok((Self::default(), None)),
            Ok(raw) => {
                let c_be: f64 = raw.trim().parse().map_err(|_| {
                    Error::InvalidParameter(format!("{C_BE_ENV}={raw:?} is not a number"))
                })?;
                let config = Self::with_c_be(c_be)?;
                let warning = (c_be != C_BE_TYURIN && c_be != C_BE_SHEVTSOVA).then(|| {
                    format!(
                        "{C_BE_ENV}={c_be} is neither {C_BE_TYURIN} nor {C_BE_SHEVTSOVA}; bounds rely on it being a valid Berry-Esseen constant"
                    )
                });
                Ok((config, warning))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `Pr{statistic >= z}`.
    Upper,
    /// `Pr{statistic <= z}`.
    Lower,
}

/// How the Bernoulli trials are collected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// `n` trials; the statistic is the success fraction.
    #[default]
    Fixed,
    /// Sample until `n` successes; the statistic is `n / (trials used)`.
    Inverse,
}

/// One tail probability `Pr{statistic >= z}` or `Pr{statistic <= z}`.
///
/// The statistic per family:
/// * Bernoulli: `K / n`, or `gamma / trials` in inverse mode (`n` = gamma);
/// * negative binomial: `sum T(X_i) / n` with `T(x) = (r + x) / r`;
/// * Poisson, normal: the sample mean;
/// * gamma: `sum X_i / (k n)`, an estimate of the scale;
/// * hypergeometric: the success count `K` among the draws;
/// * waiting time: the number of units inspected;
/// * Student t: `|X|`; F: `X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailQuery {
    pub spec: DistributionSpec,
    pub n: u64,
    pub z: f64,
    pub side: Side,
    #[serde(default)]
    pub sampling: Sampling,
    /// Estimator value for the finite-population families; the maximum
    /// likelihood value is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_hat: Option<u64>,
}

impl TailQuery {
    pub fn new(spec: DistributionSpec, n: u64, z: f64, side: Side) -> Self {
        Self {
            spec,
            n,
            z,
            side,
            sampling: Sampling::Fixed,
            m_hat: None,
        }
    }

    pub fn inverse(mut self) -> Self {
        self.sampling = Sampling::Inverse;
        self
    }

    pub fn with_m_hat(mut self, m_hat: u64) -> Self {
        self.m_hat = Some(m_hat);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound: f64,
    pub m_factor: f64,
    /// Natural log of `m_factor`, kept for values that underflow.
    pub ln_m_factor: f64,
    pub delta: Option<f64>,
    pub c_be: f64,
    pub refined: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_hat: Option<u64>,
    pub notes: Vec<String>,
}

impl BoundReport {
    fn plain(ln_m: f64, c_be: f64, notes: Vec<String>) -> Self {
        let m_factor = ln_m.exp();
        let mut report = Self {
            bound: m_factor,
            m_factor,
            ln_m_factor: ln_m,
            delta: None,
            c_be,
            refined: false,
            m_hat: None,
            notes,
        };
        if m_factor > 1.0 {
            report.bound = 1.0;
            report.notes.push(format!("factor {m_factor} exceeds 1; bound clamped to 1"));
        }
        report
    }

    fn refined(ln_m: f64, delta: f64, c_be: f64, notes: Vec<String>) -> Self {
        let m_factor = ln_m.exp();
        Self {
            bound: (0.5 + delta) * m_factor,
            m_factor,
            ln_m_factor: ln_m,
            delta: Some(delta),
            c_be,
            refined: true,
            m_hat: None,
            notes,
        }
    }

    /// Natural log of `bound`.
    pub fn ln_bound(&self) -> f64 {
        if self.refined {
            (0.5 + self.delta.unwrap_or(0.0)).ln() + self.ln_m_factor
        } else {
            self.ln_m_factor.min(0.0)
        }
    }
}

fn check_in_domain(model: &ExpFamilyModel, name: &str, v: f64) -> Result<()> {
    if model.theta_domain().contains(v) {
        Ok(())
    } else {
        let d = model.theta_domain();
        Err(Error::Domain(format!(
            "{name} = {v} lies outside the parameter domain ({}, {}) of {}",
            d.lo,
            d.hi,
            model.name()
        )))
    }
}

/// `ln M(z, theta)` for `n` samples:
/// `n [eta(theta) z - A(theta) - eta(z) z + A(z)]`.
pub fn ln_m_factor_expfam(model: &ExpFamilyModel, z: f64, theta: f64, n: u64) -> Result<f64> {
    check_in_domain(model, "z", z)?;
    check_in_domain(model, "theta", theta)?;
    if n == 0 {
        return Err(Error::InvalidParameter("sample count must be positive".into()));
    }
    if z == theta {
        return Ok(0.0);
    }
    let per_sample = model.eta(theta) * z - model.big_a(theta) - model.eta(z) * z + model.big_a(z);
    Ok(n as f64 * per_sample)
}

/// `M(z, theta)` for `n` samples.
pub fn m_factor_expfam(model: &ExpFamilyModel, z: f64, theta: f64, n: u64) -> Result<f64> {
    ln_m_factor_expfam(model, z, theta, n).map(f64::exp)
}

/// `ln M(z, theta)` for `n` samples in the closed form of each of the five
/// exponential families, with `theta` the parameter of `spec` and `z` on the
/// scale of the statistic described at [`TailQuery`]. Boundary thresholds
/// (`z` = 0 or 1 for Bernoulli, 0 for Poisson, 1 for the negative
/// binomial) use the limits of the expression.
pub fn ln_m_closed(spec: &DistributionSpec, z: f64, n: u64) -> Result<f64> {
    let nf = n as f64;
    let out_of_range = || Error::Domain(format!("threshold {z} is outside the range of the {} statistic", spec.name()));
    let v = match *spec.family() {
        Family::Bernoulli { p } => {
            if !(0.0..=1.0).contains(&z) {
                return Err(out_of_range());
            }
            -nf * (xlnxy(z, p) + xlnxy(1.0 - z, 1.0 - p))
        }
        Family::NegBinomial { r, p } => {
            if !(z >= 1.0 && z.is_finite()) {
                return Err(out_of_range());
            }
            if z == 1.0 {
                nf * r * p.ln()
            } else if z == 1.0 / p {
                0.0
            } else {
                nf * r * (((p * z - p) / (1.0 - p)).ln() + z * ((z - z * p) / (z - 1.0)).ln())
            }
        }
        Family::Poisson { lambda } => {
            if !(z >= 0.0 && z.is_finite()) {
                return Err(out_of_range());
            }
            nf * (z - lambda - xlnxy(z, lambda))
        }
        Family::Normal { mu, sigma } => {
            if !z.is_finite() {
                return Err(out_of_range());
            }
            let u = (z - mu) / sigma;
            -0.5 * nf * u * u
        }
        Family::Gamma { shape, scale } => {
            if !(z > 0.0 && z.is_finite()) {
                return Err(out_of_range());
            }
            let rho = z / scale;
            shape * nf * (rho.ln() + 1.0 - rho)
        }
        _ => {
            return Err(Error::UnsupportedFamily(format!(
                "{} is not one of the exponential families",
                spec.name()
            )))
        }
    };
    Ok(v)
}

/// Berry-Esseen correction `Delta` for the refined bound `(1/2 + Delta) M`.
///
/// `z` is the threshold of the statistic, except for the gamma family where
/// it is the ratio `rho` (and does not enter the formula). `n_or_gamma` is
/// the sample count, or the number of required successes in inverse mode.
/// Returns `Ok(None)` for families without a refinement.
pub fn be_delta(
    spec: &DistributionSpec,
    z: f64,
    n_or_gamma: u64,
    sampling: Sampling,
    c_be: f64,
) -> Result<Option<f64>> {
    if n_or_gamma == 0 {
        return Err(Error::InvalidParameter("sample count must be positive".into()));
    }
    let count = n_or_gamma as f64;
    let raw = match (spec.family(), sampling) {
        (Family::Bernoulli { .. }, _) => {
            if !(0.0..=1.0).contains(&z) {
                return Err(Error::Domain(format!("Bernoulli threshold {z} is outside [0, 1]")));
            }
            let spread = z * z + (1.0 - z) * (1.0 - z);
            match sampling {
                Sampling::Fixed => c_be * spread / (count * z * (1.0 - z)).sqrt(),
                Sampling::Inverse => c_be * spread / (count * (1.0 - z)).sqrt(),
            }
        }
        (_, Sampling::Inverse) => {
            return Err(Error::UnsupportedFamily(format!(
                "inverse sampling is defined for Bernoulli trials, not {}",
                spec.name()
            )))
        }
        (Family::Poisson { .. }, _) => {
            if !(z >= 0.0) {
                return Err(Error::Domain(format!("Poisson threshold {z} is negative")));
            }
            c_be / count.sqrt() * (3.0 * z * z + 8.0 * z + 3.0 + 1.0 / z).powf(0.75)
        }
        (Family::Gamma { shape, .. }, _) => {
            if !(z > 0.0) {
                return Err(Error::Domain(format!("gamma ratio {z} must be positive")));
            }
            (3.0 + 6.0 / shape).powf(0.75) * c_be / count.sqrt()
        }
        _ => return Ok(None),
    };
    // division by zero at the edges yields +inf or NaN; both cap at 1/2
    Ok(Some(if raw.is_nan() { 0.5 } else { raw.min(0.5) }))
}

/// Maximum-likelihood estimate of the number of marked units when `k`
/// marked units are seen in `draws` draws from a population of `population`,
/// ties broken toward the smaller value.
pub fn mle_population(population: u64, draws: u64, k: u64) -> u64 {
    // The likelihood C(m,k) C(N-m, n-k) increases in m while
    // m + 1 <= k (N + 1) / n, so the mode is ceil(k (N + 1) / n) - 1.
    let num = k as u128 * (population as u128 + 1);
    let den = draws as u128;
    let ceil = num.div_ceil(den);
    let m = ceil.saturating_sub(1) as u64;
    m.clamp(k, population - (draws - k))
}

fn ln_population_ratio(population: u64, m: u64, m_hat: u64, hits: u64, draws: u64) -> f64 {
    let (n_pop, m, m_hat, k, n) = (
        population as f64,
        m as f64,
        m_hat as f64,
        hits as f64,
        draws as f64,
    );
    ln_choose(m, k) + ln_choose(n_pop - m, n - k) - ln_choose(m_hat, k) - ln_choose(n_pop - m_hat, n - k)
}

fn integer_threshold(z: f64, what: &str) -> Result<u64> {
    if z >= 0.0 && z.fract() == 0.0 && z.is_finite() {
        Ok(z as u64)
    } else {
        Err(Error::Domain(format!("{what} must be a non-negative integer, got {z}")))
    }
}

fn side_check(side: Side, z: f64, pivot: f64, what: &str) -> Result<()> {
    let ok = match side {
        Side::Upper => z >= pivot,
        Side::Lower => z <= pivot,
    };
    if ok {
        Ok(())
    } else {
        let rel = match side {
            Side::Upper => "at least",
            Side::Lower => "at most",
        };
        Err(Error::Precondition(format!(
            "{side:?} tail needs the threshold {z} to be {rel} {what} {pivot}"
        )))
    }
}

/// Bound on the tail probability described by `query`, with the default
/// Berry-Esseen constant.
pub fn tail_bound(query: &TailQuery) -> Result<BoundReport> {
    tail_bound_with(query, &BoundConfig::default())
}

/// Bound on the tail probability described by `query`.
pub fn tail_bound_with(query: &TailQuery, config: &BoundConfig) -> Result<BoundReport> {
    let TailQuery {
        spec, n, z, side, ..
    } = query;
    let (n, z, side) = (*n, *z, *side);
    if n == 0 {
        return Err(Error::InvalidParameter("sample count must be positive".into()));
    }
    if !z.is_finite() {
        return Err(Error::Domain(format!("threshold must be finite, got {z}")));
    }
    let c_be = config.c_be;
    let nf = n as f64;

    if query.sampling == Sampling::Inverse {
        let Family::Bernoulli { p } = *spec.family() else {
            return Err(Error::UnsupportedFamily(format!(
                "inverse sampling is defined for Bernoulli trials, not {}",
                spec.name()
            )));
        };
        if !(z > 0.0 && z <= 1.0) {
            return Err(Error::Domain(format!("inverse-sampling threshold {z} is outside (0, 1]")));
        }
        side_check(side, z, p, "p =")?;
        let trials = nf / z;
        let ln_m = -trials * (xlnxy(z, p) + xlnxy(1.0 - z, 1.0 - p));
        let delta = be_delta(spec, z, n, Sampling::Inverse, c_be)?.expect("Bernoulli refinement");
        let mut notes = Vec::new();
        if (trials - trials.round()).abs() > 1e-9 * trials {
            notes.push(format!(
                "gamma / z = {trials} is not an integer; the bound is stated for integer gamma / z and is evaluated as is"
            ));
        }
        return Ok(BoundReport::refined(ln_m, delta, c_be, notes));
    }

    let fixed_count = |family: &str| -> Result<()> {
        if n == 1 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "{family} bounds are for a single observation; n must be 1, got {n}"
            )))
        }
    };

    match *spec.family() {
        Family::Bernoulli { p } => {
            if !(0.0..=1.0).contains(&z) {
                return Err(Error::Domain(format!("Bernoulli threshold {z} is outside [0, 1]")));
            }
            side_check(side, z, p, "p =")?;
            let ln_m = ln_m_closed(spec, z, n)?;
            let delta = be_delta(spec, z, n, Sampling::Fixed, c_be)?.expect("Bernoulli refinement");
            Ok(BoundReport::refined(ln_m, delta, c_be, Vec::new()))
        }
        Family::NegBinomial { r, p } => {
            let theta = 1.0 / p;
            if z < 1.0 {
                return Err(Error::Domain(format!(
                    "negative binomial statistic (r + X)/r is at least 1; threshold {z} is below it"
                )));
            }
            if z == 1.0 {
                return Err(Error::Singularity(format!(
                    "the negative binomial factor is singular at z = 1; its limit p^(n r) = {} equals Pr{{all X_i = 0}} exactly",
                    (nf * r * p.ln()).exp()
                )));
            }
            side_check(side, z, theta, "theta = 1/p =")?;
            let ln_m = ln_m_closed(spec, z, n)?;
            let note = "valid ranges taken as z >= 1/p (upper) and 1 < z <= 1/p (lower)".to_string();
            Ok(BoundReport::plain(ln_m, c_be, vec![note]))
        }
        Family::Poisson { lambda } => {
            if z < 0.0 {
                return Err(Error::Domain(format!("Poisson threshold {z} is negative")));
            }
            side_check(side, z, lambda, "lambda =")?;
            let ln_m = ln_m_closed(spec, z, n)?;
            let delta = be_delta(spec, z, n, Sampling::Fixed, c_be)?.expect("Poisson refinement");
            Ok(BoundReport::refined(ln_m, delta, c_be, Vec::new()))
        }
        Family::Normal { mu, .. } => {
            side_check(side, z, mu, "mu =")?;
            let ln_m = ln_m_closed(spec, z, n)?;
            Ok(BoundReport::refined(ln_m, 0.0, c_be, Vec::new()))
        }
        Family::Gamma { scale, .. } => {
            if !(z > 0.0) {
                return Err(Error::Domain(format!("gamma threshold {z} must be positive")));
            }
            side_check(side, z, scale, "scale =")?;
            let rho = z / scale;
            let ln_m = ln_m_closed(spec, z, n)?;
            let delta = be_delta(spec, rho, n, Sampling::Fixed, c_be)?.expect("gamma refinement");
            Ok(BoundReport::refined(ln_m, delta, c_be, Vec::new()))
        }
        Family::Hypergeometric {
            population,
            successes,
            draws,
        } => {
            fixed_count("hypergeometric")?;
            let k = integer_threshold(z, "hypergeometric threshold")?;
            if k > draws {
                return Err(Error::Domain(format!("threshold {k} exceeds the {draws} draws")));
            }
            let lo = k;
            let hi = population - (draws - k).min(population);
            if lo > hi {
                return Err(Error::Domain(format!(
                    "no population is consistent with {k} marked units in {draws} draws"
                )));
            }
            let (m_hat, note) = pick_m_hat(query.m_hat, lo, hi, || mle_population(population, draws, k))?;
            side_check(side, m_hat as f64, successes as f64, "M =")
                .map_err(|_| estimator_side_error(side, m_hat, successes))?;
            let ln_m = ln_population_ratio(population, successes, m_hat, k, draws);
            let mut report = BoundReport::plain(ln_m, c_be, vec![note]);
            report.m_hat = Some(m_hat);
            Ok(report)
        }
        Family::WaitingTime {
            population,
            successes,
            required,
        } => {
            fixed_count("waiting-time")?;
            let t = integer_threshold(z, "waiting-time threshold")?;
            if t < required || t > population {
                return Err(Error::Domain(format!(
                    "stopping count {t} is outside {required}..={population}"
                )));
            }
            let lo = required;
            let hi = population - (t - required);
            let (m_hat, note) = pick_m_hat(query.m_hat, lo, hi, || mle_population(population, t, required))?;
            // small counts point to many marked units, so the lower tail of
            // the stopping count pairs with an estimator above M
            let flipped = match side {
                Side::Upper => Side::Lower,
                Side::Lower => Side::Upper,
            };
            side_check(flipped, m_hat as f64, successes as f64, "M =")
                .map_err(|_| estimator_side_error(flipped, m_hat, successes))?;
            let ln_m = ln_population_ratio(population, successes, m_hat, required, t);
            let mut report = BoundReport::plain(ln_m, c_be, vec![note]);
            report.m_hat = Some(m_hat);
            Ok(report)
        }
        Family::StudentT { dof } => {
            fixed_count("Student t")?;
            if z < 0.0 {
                return Err(Error::Domain(format!("|X| threshold {z} is negative")));
            }
            side_check(side, z, 1.0, "the pivot")?;
            let d = dof as f64;
            let ln_m = if z == 0.0 {
                f64::NEG_INFINITY
            } else {
                z.ln() + 0.5 * (d + 1.0) * ((d + 1.0) / (d + z * z)).ln()
            };
            let note = "statistic is |X|: upper tail Pr{|X| >= x}, lower tail Pr{|X| <= x}".to_string();
            Ok(BoundReport::plain(ln_m, c_be, vec![note]))
        }
        Family::FDist { m, n: dof_n } => {
            fixed_count("F")?;
            if z < 0.0 {
                return Err(Error::Domain(format!("F threshold {z} is negative")));
            }
            side_check(side, z, 1.0, "the pivot")?;
            let (m, dn) = (m as f64, dof_n as f64);
            let ln_m = if z == 0.0 {
                f64::NEG_INFINITY
            } else {
                0.5 * m * z.ln() + 0.5 * (m + dn) * ((dn + m) / (dn + m * z)).ln()
            };
            Ok(BoundReport::plain(ln_m, c_be, Vec::new()))
        }
    }
}

fn pick_m_hat(supplied: Option<u64>, lo: u64, hi: u64, mle: impl Fn() -> u64) -> Result<(u64, String)> {
    match supplied {
        Some(m) if m < lo || m > hi => Err(Error::Domain(format!(
            "estimator value {m} is outside the admissible range {lo}..={hi}"
        ))),
        Some(m) => Ok((m, format!("caller-supplied M_hat = {m}"))),
        None => {
            let m = mle();
            Ok((m, format!("M_hat = {m} (maximum likelihood)")))
        }
    }
}

fn estimator_side_error(needed: Side, m_hat: u64, m: u64) -> Error {
    let rel = match needed {
        Side::Upper => ">=",
        Side::Lower => "<=",
    };
    Error::Precondition(format!(
        "this tail needs M_hat {rel} M, but M_hat = {m_hat} and M = {m}"
    ))
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;
const MAX_DOUBLINGS: usize = 200;

/// `inf_t E[exp(n t (theta_hat - z))]` found by golden-section search on
/// `n [K(t) - t z]`, where `K` is the cumulant generating function of
/// `T(X)` under `theta`.
pub fn chernoff_numeric(model: &ExpFamilyModel, z: f64, theta: f64, n: u64) -> Result<f64> {
    ln_chernoff_numeric(model, z, theta, n).map(f64::exp)
}

/// Natural log of [`chernoff_numeric`].
pub fn ln_chernoff_numeric(model: &ExpFamilyModel, z: f64, theta: f64, n: u64) -> Result<f64> {
    check_in_domain(model, "z", z)?;
    check_in_domain(model, "theta", theta)?;
    if n == 0 {
        return Err(Error::InvalidParameter("sample count must be positive".into()));
    }
    if model.cumulant(theta, 0.0).is_none() {
        return Err(Error::UnsupportedFamily(format!(
            "{} does not provide a cumulant generating function",
            model.name()
        )));
    }
    if z == theta {
        return Ok(0.0);
    }
    let nf = n as f64;
    let g = |t: f64| match model.cumulant(theta, t) {
        Some(k) => nf * (k - t * z),
        None => f64::INFINITY,
    };
    let dir = if z > theta { 1.0 } else { -1.0 };

    // bracket the minimiser of the convex exponent
    let mut lo = 0.0;
    let mut mid = dir;
    let mut g_mid = g(mid);
    let mut hi;
    if !(g_mid < 0.0) {
        hi = mid;
        mid *= 0.5;
        g_mid = g(mid);
        // shrink until the inner point improves on t = 0
        let mut halvings = 0;
        while !(g_mid < 0.0) {
            halvings += 1;
            if halvings > MAX_DOUBLINGS {
                // the exponent is flat to rounding: the minimum is 0
                return Ok(0.0);
            }
            hi = mid;
            mid *= 0.5;
            g_mid = g(mid);
        }
    } else {
        let mut doublings = 0;
        loop {
            let next = 2.0 * mid;
            let g_next = g(next);
            if !(g_next < g_mid) {
                hi = next;
                break;
            }
            doublings += 1;
            if doublings > MAX_DOUBLINGS {
                return Err(Error::Bracket(format!(
                    "exponent keeps decreasing beyond t = {next} for z = {z}, theta = {theta}"
                )));
            }
            lo = mid;
            mid = next;
            g_mid = g_next;
        }
    }

    // an outer end past a singularity of the cumulant is pulled back into
    // the finite region so the golden-section comparisons stay meaningful
    let mut pulls = 0;
    while !g(hi).is_finite() {
        pulls += 1;
        if pulls > MAX_DOUBLINGS {
            return Err(Error::Bracket(format!(
                "no finite outer end next to t = {mid} for z = {z}, theta = {theta}"
            )));
        }
        let cand = 0.5 * (mid + hi);
        let g_cand = g(cand);
        if g_cand < g_mid {
            lo = mid;
            mid = cand;
            g_mid = g_cand;
        } else {
            hi = cand;
        }
    }

    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut best = g_mid.min(0.0);
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut gc = g(c);
    let mut gd = g(d);
    for _ in 0..200 {
        best = best.min(gc).min(gd);
        if (b - a).abs() <= 4.0 * f64::EPSILON * (a.abs() + b.abs()) {
            break;
        }
        if gc < gd {
            b = d;
            d = c;
            gd = gc;
            c = b - GOLDEN * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + GOLDEN * (b - a);
            gd = g(d);
        }
    }
    Ok(best.min(gc).min(gd))
}
