//! Ground truth for the bounds: exact log-space summation for discrete
//! statistics, adaptive quadrature for continuous ones, and seeded Monte
//! Carlo for the distribution of the likelihood ratio.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution, Gamma, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{DistributionSpec, Family};
use crate::error::{Error, Result};
use crate::inference::confidence_interval;
use crate::lr_bounds::{ln_m_closed, Sampling, Side, TailQuery};
use crate::quadrature::{integrate_pieces, integrate_upper_pieces, QuadResult, Tolerance};
use crate::special::{
    ln_binom_pmf, ln_gamma, ln_hypergeom_pmf, ln_negbin_pmf, ln_poisson_pmf, LogSum,
};

/// Largest number of mass terms an exact sum may visit.
pub const MAX_EXACT_TERMS: u64 = 10_000_000;

/// Default seed of the Monte Carlo generator.
pub const DEFAULT_SEED: u64 = 42;

/// Relative rounding allowance attached to every exact sum.
const SUM_REL_ERROR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMethod {
    ExactSum,
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub value: f64,
    pub error_bound: f64,
    pub method: OracleMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl OracleResult {
    fn exact(sum: Sum) -> Self {
        Self {
            value: sum.value.min(1.0),
            error_bound: sum.error,
            method: OracleMethod::ExactSum,
            seed: None,
        }
    }

    fn quadrature(q: QuadResult, factor: f64) -> Self {
        Self {
            value: (factor * q.value).clamp(0.0, 1.0),
            error_bound: factor * q.error,
            method: OracleMethod::Quadrature,
            seed: None,
        }
    }

    fn certain(value: f64) -> Self {
        Self {
            value,
            error_bound: 0.0,
            method: OracleMethod::ExactSum,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Sum {
    value: f64,
    error: f64,
}

fn capacity_error(terms: u64) -> Error {
    Error::Capacity(format!(
        "exact summation needs about {terms} terms (limit {MAX_EXACT_TERMS}); use Monte Carlo instead"
    ))
}

/// Sum of `exp(ln_pmf(k))` for `k` in `lo..=hi`.
fn finite_sum(ln_pmf: impl Fn(u64) -> f64, lo: u64, hi: u64) -> Result<Sum> {
    if lo > hi {
        return Ok(Sum::default());
    }
    let terms = hi - lo + 1;
    if terms > MAX_EXACT_TERMS {
        return Err(capacity_error(terms));
    }
    let acc: LogSum = (lo..=hi).map(ln_pmf).collect();
    let value = acc.value();
    Ok(Sum {
        value,
        error: SUM_REL_ERROR * value,
    })
}

/// Sum of `exp(ln_pmf(k))` for `k >= lo`. `ratio_sup(k)` bounds
/// `pmf(j + 1) / pmf(j)` for every `j >= k`; once it drops below one the
/// remainder is bounded by a geometric series and added to the error.
fn upper_sum(ln_pmf: impl Fn(u64) -> f64, lo: u64, ratio_sup: impl Fn(u64) -> f64) -> Result<Sum> {
    let mut acc = LogSum::default();
    let mut k = lo;
    loop {
        let ln_t = ln_pmf(k);
        acc.add(ln_t);
        let q = ratio_sup(k);
        if q < 1.0 {
            let ln_rest = ln_t + (q / (1.0 - q)).ln();
            let ln_total = acc.ln();
            if ln_rest <= ln_total - 37.0 || ln_rest < -745.0 {
                let value = acc.value();
                return Ok(Sum {
                    value,
                    error: SUM_REL_ERROR * value + ln_rest.exp(),
                });
            }
        }
        k += 1;
        if k - lo > MAX_EXACT_TERMS {
            return Err(capacity_error(k - lo));
        }
    }
}

fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        x
    }
}

/// Lowest integer `>= x` clamped at zero, or `None` when `x` is infinite.
fn ceil_count(x: f64) -> u64 {
    let c = snap(x).ceil();
    if c <= 0.0 {
        0
    } else {
        c as u64
    }
}

fn floor_count(x: f64) -> Option<u64> {
    let f = snap(x).floor();
    (f >= 0.0).then_some(f as u64)
}

fn binomial_tail(n: u64, p: f64, side: Side, k: f64) -> Result<Sum> {
    let pmf = |j: u64| ln_binom_pmf(j, n, p);
    match side {
        Side::Upper => finite_sum(pmf, ceil_count(k), n),
        Side::Lower => match floor_count(k) {
            Some(hi) => finite_sum(pmf, 0, hi.min(n)),
            None => Ok(Sum::default()),
        },
    }
}

fn poisson_tail(mu: f64, side: Side, s: f64) -> Result<Sum> {
    let pmf = |j: u64| ln_poisson_pmf(j, mu);
    match side {
        Side::Upper => upper_sum(pmf, ceil_count(s), |j| mu / (j as f64 + 1.0)),
        Side::Lower => match floor_count(s) {
            Some(hi) => finite_sum(pmf, 0, hi),
            None => Ok(Sum::default()),
        },
    }
}

fn negbin_tail(size: f64, p: f64, side: Side, s: f64) -> Result<Sum> {
    let pmf = |j: u64| ln_negbin_pmf(j, size, p);
    let q = 1.0 - p;
    match side {
        Side::Upper => upper_sum(pmf, ceil_count(s), |j| {
            let here = (j as f64 + size) / (j as f64 + 1.0) * q;
            if size >= 1.0 {
                here
            } else {
                q
            }
        }),
        Side::Lower => match floor_count(s) {
            Some(hi) => finite_sum(pmf, 0, hi),
            None => Ok(Sum::default()),
        },
    }
}

fn hypergeom_tail(population: u64, marked: u64, draws: u64, side: Side, k: f64) -> Result<Sum> {
    let unmarked = population - marked;
    let lo = draws.saturating_sub(unmarked);
    let hi = draws.min(marked);
    let pmf = |j: u64| ln_hypergeom_pmf(j, marked, unmarked, draws);
    match side {
        Side::Upper => finite_sum(pmf, ceil_count(k).max(lo), hi),
        Side::Lower => match floor_count(k) {
            Some(top) => finite_sum(pmf, lo, top.min(hi)),
            None => Ok(Sum::default()),
        },
    }
}

const QUAD_TOL: Tolerance = Tolerance { abs: 1e-10, rel: 0.0 };

/// Break points `center + j * spread` for `j = -8..=8`, restricted to
/// `(lo, hi)` and framed by the two ends.
fn breaks(lo: f64, hi: f64, center: f64, spread: f64) -> Vec<f64> {
    let mut pts = vec![lo];
    pts.extend(
        (-8..=8)
            .map(|j| center + j as f64 * spread)
            .filter(|&x| x > lo && x < hi),
    );
    if hi.is_finite() {
        pts.push(hi);
    }
    pts
}

fn upper_integral(f: impl Fn(f64) -> f64, from: f64, center: f64, spread: f64) -> QuadResult {
    integrate_upper_pieces(f, &breaks(from, f64::INFINITY, center, spread), QUAD_TOL)
}

fn finite_integral(f: impl Fn(f64) -> f64, lo: f64, hi: f64, center: f64, spread: f64) -> QuadResult {
    integrate_pieces(f, &breaks(lo, hi, center, spread), QUAD_TOL)
}

/// Exact (or quadrature-grade) value of the tail probability in `query`,
/// using the statistic conventions of [`TailQuery`].
pub fn exact_tail(query: &TailQuery) -> Result<OracleResult> {
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
        let gamma = n;
        let trials = nf / z;
        let sum = match side {
            // gamma / N >= z  <=>  N <= gamma / z  <=>  Bin(floor, p) >= gamma
            Side::Upper => {
                let m = floor_count(trials).unwrap_or(0);
                if m < gamma {
                    Sum::default()
                } else {
                    binomial_tail(m, p, Side::Upper, gamma as f64)?
                }
            }
            // gamma / N <= z  <=>  N >= ceil(gamma / z)  <=>  Bin(m - 1, p) <= gamma - 1
            Side::Lower => {
                let m = ceil_count(trials);
                if m <= gamma {
                    return Ok(OracleResult::certain(1.0));
                }
                binomial_tail(m - 1, p, Side::Lower, (gamma - 1) as f64)?
            }
        };
        return Ok(OracleResult::exact(sum));
    }

    let single = |family: &str| -> Result<()> {
        if n == 1 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "{family} tails are for a single observation; n must be 1, got {n}"
            )))
        }
    };

    match *spec.family() {
        Family::Bernoulli { p } => Ok(OracleResult::exact(binomial_tail(n, p, side, nf * z)?)),
        Family::Poisson { lambda } => Ok(OracleResult::exact(poisson_tail(nf * lambda, side, nf * z)?)),
        Family::NegBinomial { r, p } => {
            let size = nf * r;
            Ok(OracleResult::exact(negbin_tail(size, p, side, size * (z - 1.0))?))
        }
        Family::Hypergeometric {
            population,
            successes,
            draws,
        } => {
            single("hypergeometric")?;
            Ok(OracleResult::exact(hypergeom_tail(population, successes, draws, side, z)?))
        }
        Family::WaitingTime {
            population,
            successes,
            required,
        } => {
            single("waiting-time")?;
            let sum = match side {
                // N_stop <= t  <=>  at least r marked units among the first t
                Side::Lower => {
                    let Some(t) = floor_count(z) else {
                        return Ok(OracleResult::certain(0.0));
                    };
                    if t >= population {
                        return Ok(OracleResult::certain(1.0));
                    }
                    hypergeom_tail(population, successes, t, Side::Upper, required as f64)?
                }
                // N_stop >= t  <=>  at most r - 1 marked units among the first t - 1
                Side::Upper => {
                    let t = ceil_count(z);
                    if t > population {
                        return Ok(OracleResult::certain(0.0));
                    }
                    if t <= required {
                        return Ok(OracleResult::certain(1.0));
                    }
                    hypergeom_tail(population, successes, t - 1, Side::Lower, (required - 1) as f64)?
                }
            };
            Ok(OracleResult::exact(sum))
        }
        Family::Normal { mu, sigma } => {
            let sd = sigma / nf.sqrt();
            let pdf = move |x: f64| {
                let u = (x - mu) / sd;
                (-0.5 * u * u).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
            };
            let q = match side {
                Side::Upper => upper_integral(pdf, z, mu, sd),
                Side::Lower => upper_integral(|y| pdf(-y), -z, -mu, sd),
            };
            Ok(OracleResult::quadrature(q, 1.0))
        }
        Family::Gamma { shape, scale } => {
            if !(z > 0.0) {
                return Err(Error::Domain(format!("gamma threshold {z} must be positive")));
            }
            // the scale estimate sum X / (k n) is Gamma(n k, scale / (n k))
            let a = nf * shape;
            let s = scale / a;
            let ln_norm = ln_gamma(a) + a * s.ln();
            let pdf = move |x: f64| {
                if x <= 0.0 {
                    return 0.0;
                }
                ((a - 1.0) * x.ln() - x / s - ln_norm).exp()
            };
            let (mean, sd) = (scale, scale / a.sqrt());
            let q = match side {
                Side::Upper => upper_integral(pdf, z, mean, sd),
                Side::Lower if a < 1.0 => {
                    // x = u^(1/a) removes the x^(a-1) singularity at 0
                    let g = move |u: f64| {
                        if u <= 0.0 {
                            return (-ln_gamma(a + 1.0) - a * s.ln()).exp();
                        }
                        (-u.powf(1.0 / a) / s - ln_gamma(a + 1.0) - a * s.ln()).exp()
                    };
                    let top = z.powf(a);
                    finite_integral(g, 0.0, top, mean.powf(a), sd.powf(a))
                }
                Side::Lower => finite_integral(pdf, 0.0, z, mean, sd),
            };
            Ok(OracleResult::quadrature(q, 1.0))
        }
        Family::StudentT { dof } => {
            single("Student t")?;
            if z < 0.0 {
                return Err(Error::Domain(format!("|X| threshold {z} is negative")));
            }
            let pdf = student_pdf(dof);
            let q = match side {
                Side::Upper => upper_integral(pdf, z, 0.0, 1.0),
                Side::Lower => finite_integral(pdf, 0.0, z, 0.0, 1.0),
            };
            Ok(OracleResult::quadrature(q, 2.0))
        }
        Family::FDist { m, n: dof_n } => {
            single("F")?;
            if z < 0.0 {
                return Err(Error::Domain(format!("F threshold {z} is negative")));
            }
            let pdf = f_pdf(m, dof_n);
            let q = match side {
                Side::Upper => upper_integral(pdf, z, 1.0, 0.25),
                Side::Lower => {
                    // x = u^2 keeps the integrand bounded at 0 when m = 1
                    let g = move |u: f64| 2.0 * u * pdf(u * u);
                    finite_integral(g, 0.0, z.sqrt(), 1.0, 0.25)
                }
            };
            Ok(OracleResult::quadrature(q, 1.0))
        }
    }
}

fn student_pdf(dof: u64) -> impl Fn(f64) -> f64 + Copy {
    let d = dof as f64;
    let ln_c = ln_gamma(0.5 * (d + 1.0)) - ln_gamma(0.5 * d) - 0.5 * (d * std::f64::consts::PI).ln();
    move |x: f64| (ln_c - 0.5 * (d + 1.0) * (x * x / d).ln_1p()).exp()
}

fn f_pdf(m: u64, n: u64) -> impl Fn(f64) -> f64 + Copy {
    let (m, n) = (m as f64, n as f64);
    let ln_c = ln_gamma(0.5 * (m + n)) - ln_gamma(0.5 * m) - ln_gamma(0.5 * n) + 0.5 * m * (m / n).ln();
    move |x: f64| {
        if x <= 0.0 {
            return if m == 2.0 { ln_c.exp() } else { 0.0 };
        }
        (ln_c + 0.5 * (m - 2.0) * x.ln() - 0.5 * (m + n) * (m * x / n).ln_1p()).exp()
    }
}

/// Monte Carlo estimates of the likelihood-ratio events
/// `LR <= alpha/2` overall, with the estimate below the truth, and above it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McLrTail {
    pub overall: OracleResult,
    pub below: OracleResult,
    pub above: OracleResult,
    pub replicates: u64,
}

/// Generator for stream `stream` of `seed`. Disjoint streams give
/// independent sequences for callers that split work.
pub fn mc_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws the maximum-likelihood estimate on the statistic scale of
/// [`TailQuery`] for `n` samples of `spec`.
struct EstimateSampler {
    spec: DistributionSpec,
    n: u64,
}

impl EstimateSampler {
    fn new(spec: &DistributionSpec, n: u64) -> Result<Self> {
        match spec.family() {
            Family::Bernoulli { .. }
            | Family::NegBinomial { .. }
            | Family::Poisson { .. }
            | Family::Normal { .. }
            | Family::Gamma { .. } => Ok(Self {
                spec: spec.clone(),
                n,
            }),
            _ => Err(Error::UnsupportedFamily(format!(
                "likelihood-ratio simulation covers the exponential families, not {}",
                spec.name()
            ))),
        }
    }

    fn draw(&self, rng: &mut ChaCha20Rng) -> f64 {
        let nf = self.n as f64;
        match *self.spec.family() {
            Family::Bernoulli { p } => {
                let k = Binomial::new(self.n, p).expect("valid binomial").sample(rng);
                k as f64 / nf
            }
            Family::NegBinomial { r, p } => {
                // negative binomial as a gamma mixture of Poisson counts
                let rate = Gamma::new(nf * r, (1.0 - p) / p).expect("valid gamma").sample(rng);
                let s = if rate > 0.0 {
                    Poisson::new(rate).expect("valid Poisson").sample(rng)
                } else {
                    0.0
                };
                1.0 + s / (nf * r)
            }
            Family::Poisson { lambda } => {
                let s: f64 = Poisson::new(nf * lambda).expect("valid Poisson").sample(rng);
                s / nf
            }
            Family::Normal { mu, sigma } => Normal::new(mu, sigma / nf.sqrt()).expect("valid normal").sample(rng),
            Family::Gamma { shape, scale } => {
                let s = Gamma::new(nf * shape, scale).expect("valid gamma").sample(rng);
                s / (nf * shape)
            }
            _ => unreachable!("checked at construction"),
        }
    }
}

fn mc_result(hits: u64, replicates: u64, seed: u64) -> OracleResult {
    let r = replicates as f64;
    let p = hits as f64 / r;
    OracleResult {
        value: p,
        error_bound: 3.0 * (p * (1.0 - p) / r).sqrt(),
        method: OracleMethod::MonteCarlo,
        seed: Some(seed),
    }
}

fn check_mc_inputs(alpha: f64, replicates: u64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 2), got {alpha}")));
    }
    if replicates < 10_000 {
        return Err(Error::InvalidParameter(format!(
            "at least 10^4 replicates are required, got {replicates}"
        )));
    }
    Ok(())
}

/// Estimates `Pr{f(X; theta) / f(X; theta_hat) <= alpha/2}` and its two
/// one-sided parts under `theta`, for `n` samples of `spec` with its
/// parameter replaced by `theta`.
pub fn mc_lr_tail(
    spec: &DistributionSpec,
    theta: f64,
    n: u64,
    alpha: f64,
    replicates: u64,
    seed: u64,
) -> Result<McLrTail> {
    mc_lr_subset_tail(spec, &[theta], theta, n, alpha, replicates, seed)
}

/// Estimates the events of the set form: with `S = subset`,
/// `sup_S f(X; v) / f(X; theta_hat) <= alpha/2` overall, together with
/// `theta_hat <= inf S`, and together with `theta_hat >= sup S`, when the
/// data come from `theta`, an element of `S`.
pub fn mc_lr_subset_tail(
    spec: &DistributionSpec,
    subset: &[f64],
    theta: f64,
    n: u64,
    alpha: f64,
    replicates: u64,
    seed: u64,
) -> Result<McLrTail> {
    check_mc_inputs(alpha, replicates)?;
    if n == 0 {
        return Err(Error::InvalidParameter("sample count must be positive".into()));
    }
    if subset.is_empty() || !subset.contains(&theta) {
        return Err(Error::Precondition(format!(
            "the true parameter {theta} must belong to the subset {subset:?}"
        )));
    }
    let truth = spec.with_parameter(theta)?;
    let members: Vec<DistributionSpec> = subset
        .iter()
        .map(|&v| spec.with_parameter(v))
        .collect::<Result<_>>()?;
    let sampler = EstimateSampler::new(&truth, n)?;
    let inf = subset.iter().copied().fold(f64::INFINITY, f64::min);
    let sup = subset.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ln_cut = (0.5 * alpha).ln();

    let mut rng = mc_rng(seed, 0);
    let (mut all, mut below, mut above) = (0u64, 0u64, 0u64);
    for _ in 0..replicates {
        let est = sampler.draw(&mut rng);
        let mut ln_lr = f64::NEG_INFINITY;
        for m in &members {
            ln_lr = ln_lr.max(ln_m_closed(m, est, n)?);
        }
        if ln_lr <= ln_cut {
            all += 1;
            if est <= inf {
                below += 1;
            }
            if est >= sup {
                above += 1;
            }
        }
    }
    Ok(McLrTail {
        overall: mc_result(all, replicates, seed),
        below: mc_result(below, replicates, seed),
        above: mc_result(above, replicates, seed),
        replicates,
    })
}

/// Monte Carlo estimate of the tail in `query`, for cross-checking the
/// exact routes.
pub fn mc_tail(query: &TailQuery, replicates: u64, seed: u64) -> Result<OracleResult> {
    if query.sampling == Sampling::Inverse {
        return Err(Error::UnsupportedFamily("inverse sampling is not simulated".into()));
    }
    let sampler = EstimateSampler::new(&query.spec, query.n)?;
    let mut rng = mc_rng(seed, 0);
    let hits = (0..replicates)
        .filter(|_| {
            let est = sampler.draw(&mut rng);
            match query.side {
                Side::Upper => est >= query.z,
                Side::Lower => est <= query.z,
            }
        })
        .count() as u64;
    Ok(mc_result(hits, replicates, seed))
}

/// What a coverage computation counts as a success.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoverageTarget {
    /// `|p_hat - p| < eps` with `n` fixed trials.
    AbsoluteMargin { eps: f64 },
    /// `|p_hat - p| < eps p` under inverse sampling with `n` successes.
    RelativeMargin { eps: f64 },
    /// The bisection confidence interval at level `delta` contains the
    /// parameter.
    Interval { delta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    /// Smallest coverage over the grid.
    pub min_coverage: f64,
    /// Largest non-coverage probability, computed directly so that it keeps
    /// its relative accuracy when tiny.
    pub max_miss: f64,
    /// Grid point attaining the minimum.
    pub argmin: f64,
    pub error_bound: f64,
}

/// `(Pr{p_hat - p <= -eps}, Pr{p_hat - p >= eps})` for `n` Bernoulli trials.
pub fn binomial_margin_tails(n: u64, p: f64, eps: f64) -> Result<(f64, f64)> {
    let nf = n as f64;
    let inside = |k: u64| (k as f64 / nf - p).abs() < eps;
    let high = |k: u64| k as f64 / nf - p >= eps;
    let low = |k: u64| p - k as f64 / nf >= eps;

    // first k on the high side
    let mut c = ((p + eps) * nf).ceil().clamp(0.0, nf + 1.0) as u64;
    while c > 0 && high(c - 1) {
        c -= 1;
    }
    while c <= n && !high(c) {
        c += 1;
    }
    // last k on the low side, as a count d with k < d
    let mut d = ((p - eps) * nf).floor().clamp(-1.0, nf) as i64 + 1;
    while d > 0 && !low((d - 1) as u64) {
        d -= 1;
    }
    while (d as u64) <= n && low(d as u64) {
        d += 1;
    }
    debug_assert!((d as u64..c).all(inside));
    let pmf = |k: u64| ln_binom_pmf(k, n, p);
    let below = if d > 0 { finite_sum(pmf, 0, d as u64 - 1)?.value } else { 0.0 };
    let above = finite_sum(pmf, c, n)?.value;
    Ok((below, above))
}

/// Non-coverage `Pr{|gamma / N - p| >= eps p}` under inverse sampling.
fn inverse_miss(gamma: u64, p: f64, eps: f64) -> Result<f64> {
    let g = gamma as f64;
    let high = |m: u64| g / m as f64 - p >= eps * p;
    let low = |m: u64| p - g / m as f64 >= eps * p;
    // high side: N <= m_hi
    let mut m_hi = (g / (p * (1.0 + eps))).floor().max(g) as u64;
    while m_hi >= gamma && !high(m_hi) {
        if m_hi == gamma {
            break;
        }
        m_hi -= 1;
    }
    while high(m_hi + 1) {
        m_hi += 1;
    }
    let above = if high(m_hi) {
        binomial_tail(m_hi, p, Side::Upper, g)?.value
    } else {
        0.0
    };
    // low side: N >= m_lo, impossible when eps >= 1
    let below = if eps >= 1.0 {
        0.0
    } else {
        let mut m_lo = (g / (p * (1.0 - eps))).ceil().max(g) as u64;
        while m_lo > gamma && low(m_lo - 1) {
            m_lo -= 1;
        }
        while !low(m_lo) {
            m_lo += 1;
        }
        if m_lo <= gamma {
            1.0
        } else {
            binomial_tail(m_lo - 1, p, Side::Lower, g - 1.0)?.value
        }
    };
    Ok(above + below)
}

/// Minimum over `grid` of the exact coverage probability of `target` with
/// `n` trials (or successes, or draws for the hypergeometric family).
pub fn coverage_exact(spec: &DistributionSpec, n: u64, target: CoverageTarget, grid: &[f64]) -> Result<Coverage> {
    if grid.is_empty() {
        return Err(Error::Domain("coverage grid is empty".into()));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("sample count must be positive".into()));
    }
    if !spec.is_discrete() {
        return Err(Error::UnsupportedFamily(format!(
            "exact coverage needs a discrete family, not {}",
            spec.name()
        )));
    }
    let misses: Vec<f64> = match (spec.family().clone(), target) {
        (Family::Bernoulli { .. }, CoverageTarget::AbsoluteMargin { eps }) => {
            check_grid_unit(grid)?;
            grid.par_iter()
                .map(|&p| binomial_margin_tails(n, p, eps).map(|(lo, hi)| lo + hi))
                .collect::<Result<_>>()?
        }
        (Family::Bernoulli { .. }, CoverageTarget::RelativeMargin { eps }) => {
            check_grid_unit(grid)?;
            grid.par_iter().map(|&p| inverse_miss(n, p, eps)).collect::<Result<_>>()?
        }
        (Family::Bernoulli { .. }, CoverageTarget::Interval { delta }) => {
            check_grid_unit(grid)?;
            let base = spec.clone();
            let limits: Vec<(f64, f64)> = (0..=n)
                .into_par_iter()
                .map(|k| confidence_interval(&base, n, k as f64 / n as f64, delta).map(|ci| (ci.lower, ci.upper)))
                .collect::<Result<_>>()?;
            grid.par_iter()
                .map(|&p| {
                    let acc: LogSum = limits
                        .iter()
                        .enumerate()
                        .filter(|(_, (l, u))| !(*l <= p && p <= *u))
                        .map(|(k, _)| ln_binom_pmf(k as u64, n, p))
                        .collect();
                    Ok(acc.value())
                })
                .collect::<Result<_>>()?
        }
        (
            Family::Hypergeometric {
                population, draws, ..
            },
            CoverageTarget::Interval { delta },
        ) => {
            let base = spec.clone();
            let limits: Vec<(f64, f64)> = (0..=draws)
                .into_par_iter()
                .map(|k| confidence_interval(&base, 1, k as f64, delta).map(|ci| (ci.lower, ci.upper)))
                .collect::<Result<_>>()?;
            grid.par_iter()
                .map(|&m| {
                    if !(m >= 0.0 && m <= population as f64 && m.fract() == 0.0) {
                        return Err(Error::Domain(format!("grid value {m} is not a valid population count")));
                    }
                    let marked = m as u64;
                    let acc: LogSum = limits
                        .iter()
                        .enumerate()
                        .filter(|(_, (l, u))| !(*l <= m && m <= *u))
                        .map(|(k, _)| ln_hypergeom_pmf(k as u64, marked, population - marked, draws))
                        .collect();
                    Ok(acc.value())
                })
                .collect::<Result<_>>()?
        }
        _ => {
            return Err(Error::UnsupportedFamily(format!(
                "coverage target {target:?} is not available for {}",
                spec.name()
            )))
        }
    };
    let (idx, &max_miss) = misses
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty grid");
    Ok(Coverage {
        min_coverage: 1.0 - max_miss,
        max_miss,
        argmin: grid[idx],
        error_bound: SUM_REL_ERROR + f64::EPSILON,
    })
}

fn check_grid_unit(grid: &[f64]) -> Result<()> {
    match grid.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
        Some(p) => Err(Error::Domain(format!("grid value {p} is outside (0, 1)"))),
        None => Ok(()),
    }
}
