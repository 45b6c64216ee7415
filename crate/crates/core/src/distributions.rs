//! The nine supported families, their exact log densities, and the
//! single-parameter exponential-family decomposition used by the
//! likelihood-ratio bounds.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_lr;

use crate::error::{Error, Result};
use crate::special::{ln_choose, ln_gamma, xlny};

/// Raw family tag with parameters. Use [`DistributionSpec`] for a validated
/// value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Bernoulli { p: f64 },
    NegBinomial { r: f64, p: f64 },
    Poisson { lambda: f64 },
    Hypergeometric { population: u64, successes: u64, draws: u64 },
    WaitingTime { population: u64, successes: u64, required: u64 },
    Normal { mu: f64, sigma: f64 },
    Gamma { shape: f64, scale: f64 },
    StudentT { dof: u64 },
    FDist { m: u64, n: u64 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Bernoulli { .. } => "bernoulli",
            Family::NegBinomial { .. } => "neg_binomial",
            Family::Poisson { .. } => "poisson",
            Family::Hypergeometric { .. } => "hypergeometric",
            Family::WaitingTime { .. } => "waiting_time",
            Family::Normal { .. } => "normal",
            Family::Gamma { .. } => "gamma",
            Family::StudentT { .. } => "student_t",
            Family::FDist { .. } => "f_dist",
        }
    }
}

/// A family with parameters that passed validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Family", into = "Family")]
pub struct DistributionSpec(Family);

impl TryFrom<Family> for DistributionSpec {
    type Error = Error;

    fn try_from(family: Family) -> Result<Self> {
        DistributionSpec::new(family)
    }
}

impl From<DistributionSpec> for Family {
    fn from(spec: DistributionSpec) -> Self {
        spec.0
    }
}

fn open_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must lie in (0, 1), got {v}")))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be a positive real, got {v}")))
    }
}

/// Support of a distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Support {
    /// Integers `lo..=hi`; `hi = None` means unbounded.
    Integers { lo: u64, hi: Option<u64> },
    /// Real interval; endpoints may be infinite. Open at finite endpoints.
    Reals { lo: f64, hi: f64 },
}

impl DistributionSpec {
    pub fn new(family: Family) -> Result<Self> {
        match family {
            Family::Bernoulli { p } => open_unit("p", p)?,
            Family::NegBinomial { r, p } => {
                positive("r", r)?;
                open_unit("p", p)?;
            }
            Family::Poisson { lambda } => positive("lambda", lambda)?,
            Family::Hypergeometric {
                population,
                successes,
                draws,
            } => {
                if population == 0 {
                    return Err(Error::InvalidParameter("population must be positive".into()));
                }
                if successes > population {
                    return Err(Error::InvalidParameter(format!(
                        "successes {successes} exceed population {population}"
                    )));
                }
                if draws == 0 || draws > population {
                    return Err(Error::InvalidParameter(format!(
                        "draws must lie in 1..={population}, got {draws}"
                    )));
                }
            }
            Family::WaitingTime {
                population,
                successes,
                required,
            } => {
                if population == 0 || successes > population {
                    return Err(Error::InvalidParameter(format!(
                        "need 0 < population and successes <= population, got N={population}, M={successes}"
                    )));
                }
                if required == 0 || required > successes {
                    return Err(Error::InvalidParameter(format!(
                        "required successes must lie in 1..={successes}, got {required}"
                    )));
                }
            }
            Family::Normal { mu, sigma } => {
                if !mu.is_finite() {
                    return Err(Error::InvalidParameter(format!("mu must be finite, got {mu}")));
                }
                positive("sigma", sigma)?;
            }
            Family::Gamma { shape, scale } => {
                positive("shape", shape)?;
                positive("scale", scale)?;
            }
            Family::StudentT { dof } => {
                if dof == 0 {
                    return Err(Error::InvalidParameter("degrees of freedom must be positive".into()));
                }
            }
            Family::FDist { m, n } => {
                if m == 0 || n == 0 {
                    return Err(Error::InvalidParameter(format!(
                        "F degrees of freedom must be positive, got ({m}, {n})"
                    )));
                }
            }
        }
        Ok(Self(family))
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        Self::new(Family::Bernoulli { p })
    }
    pub fn neg_binomial(r: f64, p: f64) -> Result<Self> {
        Self::new(Family::NegBinomial { r, p })
    }
    pub fn poisson(lambda: f64) -> Result<Self> {
        Self::new(Family::Poisson { lambda })
    }
    pub fn hypergeometric(population: u64, successes: u64, draws: u64) -> Result<Self> {
        Self::new(Family::Hypergeometric {
            population,
            successes,
            draws,
        })
    }
    pub fn waiting_time(population: u64, successes: u64, required: u64) -> Result<Self> {
        Self::new(Family::WaitingTime {
            population,
            successes,
            required,
        })
    }
    pub fn normal(mu: f64, sigma: f64) -> Result<Self> {
        Self::new(Family::Normal { mu, sigma })
    }
    pub fn gamma(shape: f64, scale: f64) -> Result<Self> {
        Self::new(Family::Gamma { shape, scale })
    }
    pub fn student_t(dof: u64) -> Result<Self> {
        Self::new(Family::StudentT { dof })
    }
    pub fn f_dist(m: u64, n: u64) -> Result<Self> {
        Self::new(Family::FDist { m, n })
    }

    pub fn family(&self) -> &Family {
        &self.0
    }

    pub fn name(&self) -> &'static str {
        self.0.name()
    }

    pub fn is_discrete(&self) -> bool {
        matches!(
            self.0,
            Family::Bernoulli { .. }
                | Family::NegBinomial { .. }
                | Family::Poisson { .. }
                | Family::Hypergeometric { .. }
                | Family::WaitingTime { .. }
        )
    }

    /// Same family with its primary parameter replaced. The parameter is the
    /// one the likelihood-ratio bounds move: `p`, `1/p` for the negative
    /// binomial, `lambda`, `mu`, the gamma scale, and `M` for the two
    /// finite-population families.
    pub fn with_parameter(&self, value: f64) -> Result<Self> {
        let family = match self.0 {
            Family::Bernoulli { .. } => Family::Bernoulli { p: value },
            Family::NegBinomial { r, .. } => Family::NegBinomial { r, p: 1.0 / value },
            Family::Poisson { .. } => Family::Poisson { lambda: value },
            Family::Normal { sigma, .. } => Family::Normal { mu: value, sigma },
            Family::Gamma { shape, .. } => Family::Gamma { shape, scale: value },
            Family::Hypergeometric {
                population, draws, ..
            } => Family::Hypergeometric {
                population,
                successes: integral_parameter(value)?,
                draws,
            },
            Family::WaitingTime {
                population,
                required,
                ..
            } => Family::WaitingTime {
                population,
                successes: integral_parameter(value)?,
                required,
            },
            Family::StudentT { .. } | Family::FDist { .. } => {
                return Err(Error::UnsupportedFamily(format!(
                    "{} has no free location parameter",
                    self.name()
                )))
            }
        };
        Self::new(family)
    }

    /// The parameter moved by [`Self::with_parameter`], or `None` for the
    /// two fixed scale-pivot families.
    pub fn parameter(&self) -> Option<f64> {
        match self.0 {
            Family::Bernoulli { p } => Some(p),
            Family::NegBinomial { p, .. } => Some(1.0 / p),
            Family::Poisson { lambda } => Some(lambda),
            Family::Normal { mu, .. } => Some(mu),
            Family::Gamma { scale, .. } => Some(scale),
            Family::Hypergeometric { successes, .. } | Family::WaitingTime { successes, .. } => {
                Some(successes as f64)
            }
            Family::StudentT { .. } | Family::FDist { .. } => None,
        }
    }

    pub fn support(&self) -> Support {
        match self.0 {
            Family::Bernoulli { .. } => Support::Integers { lo: 0, hi: Some(1) },
            Family::NegBinomial { .. } | Family::Poisson { .. } => Support::Integers { lo: 0, hi: None },
            Family::Hypergeometric {
                population,
                successes,
                draws,
            } => Support::Integers {
                lo: draws.saturating_sub(population - successes),
                hi: Some(draws.min(successes)),
            },
            Family::WaitingTime {
                population,
                successes,
                required,
            } => Support::Integers {
                lo: required,
                hi: Some(population - successes + required),
            },
            Family::Normal { .. } | Family::StudentT { .. } => Support::Reals {
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
            },
            Family::Gamma { .. } | Family::FDist { .. } => Support::Reals {
                lo: 0.0,
                hi: f64::INFINITY,
            },
        }
    }
}

fn integral_parameter(value: f64) -> Result<u64> {
    if value >= 0.0 && value.fract() == 0.0 && value.is_finite() {
        Ok(value as u64)
    } else {
        Err(Error::InvalidParameter(format!(
            "finite-population parameter must be a non-negative integer, got {value}"
        )))
    }
}

fn check_support(spec: &DistributionSpec, x: f64) -> Result<()> {
    let inside = match spec.support() {
        Support::Integers { lo, hi } => {
            x.fract() == 0.0 && x >= lo as f64 && hi.map_or(x.is_finite(), |h| x <= h as f64)
        }
        Support::Reals { lo, hi } => {
            x.is_finite() && (lo == f64::NEG_INFINITY || x > lo) && (hi == f64::INFINITY || x < hi)
        }
    };
    if inside {
        Ok(())
    } else {
        Err(Error::Domain(format!("x = {x} is outside the support of {}", spec.name())))
    }
}

/// Natural-log density (continuous families) or mass (discrete families).
pub fn log_density(spec: &DistributionSpec, x: f64) -> Result<f64> {
    check_support(spec, x)?;
    let v = match *spec.family() {
        Family::Bernoulli { p } => xlny(x, p) + xlny(1.0 - x, 1.0 - p),
        Family::NegBinomial { r, p } => {
            ln_gamma(x + r) - ln_gamma(x + 1.0) - ln_gamma(r) + xlny(x, 1.0 - p) + r * p.ln()
        }
        Family::Poisson { lambda } => xlny(x, lambda) - lambda - ln_gamma(x + 1.0),
        Family::Hypergeometric {
            population,
            successes,
            draws,
        } => {
            let (n_pop, m, n) = (population as f64, successes as f64, draws as f64);
            ln_choose(m, x) + ln_choose(n_pop - m, n - x) - ln_choose(n_pop, n)
        }
        Family::WaitingTime {
            population,
            successes,
            required,
        } => {
            let (n_pop, m, r) = (population as f64, successes as f64, required as f64);
            ln_choose(x - 1.0, r - 1.0) + ln_choose(n_pop - x, m - r) - ln_choose(n_pop, m)
        }
        Family::Normal { mu, sigma } => {
            let u = (x - mu) / sigma;
            -0.5 * u * u - sigma.ln() - 0.5 * (2.0 * PI).ln()
        }
        Family::Gamma { shape, scale } => {
            (shape - 1.0) * x.ln() - x / scale - ln_gamma(shape) - shape * scale.ln()
        }
        Family::StudentT { dof } => {
            let n = dof as f64;
            ln_gamma(0.5 * (n + 1.0)) - ln_gamma(0.5 * n) - 0.5 * (n * PI).ln()
                - 0.5 * (n + 1.0) * (x * x / n).ln_1p()
        }
        Family::FDist { m, n } => {
            let (m, n) = (m as f64, n as f64);
            ln_gamma(0.5 * (m + n)) - ln_gamma(0.5 * m) - ln_gamma(0.5 * n) + 0.5 * m * (m / n).ln()
                + 0.5 * (m - 2.0) * x.ln()
                - 0.5 * (m + n) * (m * x / n).ln_1p()
        }
    };
    Ok(v)
}

/// Open parameter interval `(lo, hi)`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamDomain {
    pub lo: f64,
    pub hi: f64,
}

impl ParamDomain {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta > self.lo && theta < self.hi
    }

    /// Interior grid used by the construction-time checks.
    pub fn check_grid(&self, count: usize) -> Vec<f64> {
        let count = count.max(2);
        let frac = |i: usize| i as f64 / (count - 1) as f64;
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (true, true) => (0..count)
                .map(|i| self.lo + (self.hi - self.lo) * (i + 1) as f64 / (count + 1) as f64)
                .collect(),
            (true, false) => (0..count)
                .map(|i| self.lo + 0.05 * 1000f64.powf(frac(i)))
                .collect(),
            (false, true) => (0..count)
                .map(|i| self.hi - 0.05 * 1000f64.powf(frac(i)))
                .collect(),
            (false, false) => (0..count).map(|i| -10.0 + 20.0 * frac(i)).collect(),
        }
    }

    /// Central-difference step `1e-5 * max(1, |theta|)`, shrunk so that
    /// both stencil points stay inside the domain.
    pub fn step(&self, theta: f64) -> f64 {
        let h = 1e-5 * theta.abs().max(1.0);
        let room = (theta - self.lo).min(self.hi - theta);
        h.min(0.5 * room)
    }
}

/// Components of a single-parameter exponential family
/// `h(x) exp(eta(theta) T(x) - A(theta))`, parameterised so that the
/// mean of `T(X)` is `theta` when the mean identity holds.
pub trait ExponentialFamily: fmt::Debug + Send + Sync {
    fn name(&self) -> &str;
    fn eta(&self, theta: f64) -> f64;
    fn log_partition(&self, theta: f64) -> f64;
    fn sufficient_stat(&self, x: f64) -> f64;
    fn domain(&self) -> ParamDomain;

    /// `E|T(X) - theta|^order` under `theta`, for orders 2 to 4.
    fn central_moment(&self, _theta: f64, _order: u32) -> Option<f64> {
        None
    }

    /// `ln E_theta[exp(t T(X))]`, `None` where the transform diverges.
    fn cumulant(&self, _theta: f64, _t: f64) -> Option<f64> {
        None
    }
}

/// Validated exponential-family model.
#[derive(Clone)]
pub struct ExpFamilyModel {
    family: Arc<dyn ExponentialFamily>,
    mean_identity: bool,
}

impl fmt::Debug for ExpFamilyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExpFamilyModel")
            .field("family", &self.family)
            .field("mean_identity", &self.mean_identity)
            .finish()
    }
}

const CHECK_POINTS: usize = 50;
const MEAN_IDENTITY_RTOL: f64 = 1e-8;

fn central_diff<F: Fn(f64) -> f64>(f: &F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Central difference with one Richardson step.
fn richardson_diff<F: Fn(f64) -> f64>(f: &F, x: f64, h: f64) -> f64 {
    let coarse = central_diff(f, x, h);
    let fine = central_diff(f, x, 0.5 * h);
    (4.0 * fine - coarse) / 3.0
}

impl ExpFamilyModel {
    /// Checks `d eta / d theta > 0` on an interior grid and, when
    /// `claims_mean_identity` is set, `dA/dtheta = theta * d eta/dtheta`.
    pub fn new<F: ExponentialFamily + 'static>(family: F, claims_mean_identity: bool) -> Result<Self> {
        let domain = family.domain();
        if !(domain.lo < domain.hi) {
            return Err(Error::InvalidParameter(format!(
                "empty parameter domain ({}, {})",
                domain.lo, domain.hi
            )));
        }
        let eta = |t: f64| family.eta(t);
        let big_a = |t: f64| family.log_partition(t);
        for theta in domain.check_grid(CHECK_POINTS) {
            let h = domain.step(theta);
            let d_eta = richardson_diff(&eta, theta, h);
            if !(d_eta > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{}: d eta/d theta = {d_eta} is not positive at theta = {theta}",
                    family.name()
                )));
            }
            if claims_mean_identity {
                let d_a = richardson_diff(&big_a, theta, h);
                let rhs = theta * d_eta;
                let gap = (d_a - rhs).abs();
                if gap > MEAN_IDENTITY_RTOL * d_a.abs().max(rhs.abs()) + 1e-14 {
                    return Err(Error::InvalidParameter(format!(
                        "{}: mean identity fails at theta = {theta} (dA = {d_a}, theta*d eta = {rhs})",
                        family.name()
                    )));
                }
            }
        }
        Ok(Self {
            family: Arc::new(family),
            mean_identity: claims_mean_identity,
        })
    }

    pub fn name(&self) -> &str {
        self.family.name()
    }
    pub fn eta(&self, theta: f64) -> f64 {
        self.family.eta(theta)
    }
    pub fn big_a(&self, theta: f64) -> f64 {
        self.family.log_partition(theta)
    }
    pub fn t_of(&self, x: f64) -> f64 {
        self.family.sufficient_stat(x)
    }
    pub fn theta_domain(&self) -> ParamDomain {
        self.family.domain()
    }
    pub fn t_moment(&self, theta: f64, order: u32) -> Option<f64> {
        if !(2..=4).contains(&order) || !self.theta_domain().contains(theta) {
            return None;
        }
        self.family.central_moment(theta, order)
    }
    pub fn cumulant(&self, theta: f64, t: f64) -> Option<f64> {
        self.family.cumulant(theta, t)
    }
    pub fn has_mean_identity(&self) -> bool {
        self.mean_identity
    }
}

/// Decompositions of the five exponential families. The second parameter
/// of the negative binomial, normal and gamma families is held fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StandardFamily {
    /// `theta = p`, `T(x) = x`.
    Bernoulli,
    /// `theta = 1/p`, `T(x) = (r + x) / r`.
    NegBinomial { r: f64 },
    /// `theta = lambda`, `T(x) = x`.
    Poisson,
    /// `theta = mu / sigma`, `T(x) = x / sigma`.
    Normal { sigma: f64 },
    /// `theta` = scale, `T(x) = x / k`.
    Gamma { shape: f64 },
}

fn gamma_abs_third_moment(shape: f64) -> f64 {
    // E|X - k|^3 for X ~ Gamma(k, 1): E(X-k)^3 + 2 E[(k-X)^3; X < k]
    let k = shape;
    let mut partial = 0.0;
    let mut rising = 1.0; // Gamma(k + j) / Gamma(k)
    for j in 0..=3 {
        let binom = [1.0, 3.0, 3.0, 1.0][j];
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        partial += binom * sign * k.powi(3 - j as i32) * rising * gamma_lr(k + j as f64, k);
        rising *= k + j as f64;
    }
    2.0 * k + 2.0 * partial
}

fn poisson_abs_third_moment(lambda: f64) -> f64 {
    // E(X-l)^3 = l, plus twice the mass-weighted (l - x)^3 below the mean
    let mut below = 0.0;
    let mut x = 0.0;
    while x < lambda {
        let ln_pmf = xlny(x, lambda) - lambda - ln_gamma(x + 1.0);
        below += (lambda - x).powi(3) * ln_pmf.exp();
        x += 1.0;
    }
    lambda + 2.0 * below
}

impl ExponentialFamily for StandardFamily {
    fn name(&self) -> &str {
        match self {
            StandardFamily::Bernoulli => "bernoulli",
            StandardFamily::NegBinomial { .. } => "neg_binomial",
            StandardFamily::Poisson => "poisson",
            StandardFamily::Normal { .. } => "normal",
            StandardFamily::Gamma { .. } => "gamma",
        }
    }

    fn eta(&self, theta: f64) -> f64 {
        match *self {
            StandardFamily::Bernoulli => (theta / (1.0 - theta)).ln(),
            StandardFamily::NegBinomial { r } => r * (-1.0 / theta).ln_1p(),
            StandardFamily::Poisson => theta.ln(),
            StandardFamily::Normal { .. } => theta,
            StandardFamily::Gamma { shape } => -shape / theta,
        }
    }

    fn log_partition(&self, theta: f64) -> f64 {
        match *self {
            StandardFamily::Bernoulli => -(-theta).ln_1p(),
            StandardFamily::NegBinomial { r } => r * (theta - 1.0).ln(),
            StandardFamily::Poisson => theta,
            StandardFamily::Normal { .. } => 0.5 * theta * theta,
            StandardFamily::Gamma { shape } => shape * theta.ln(),
        }
    }

    fn sufficient_stat(&self, x: f64) -> f64 {
        match *self {
            StandardFamily::Bernoulli | StandardFamily::Poisson => x,
            StandardFamily::NegBinomial { r } => (r + x) / r,
            StandardFamily::Normal { sigma } => x / sigma,
            StandardFamily::Gamma { shape } => x / shape,
        }
    }

    fn domain(&self) -> ParamDomain {
        match self {
            StandardFamily::Bernoulli => ParamDomain::new(0.0, 1.0),
            StandardFamily::NegBinomial { .. } => ParamDomain::new(1.0, f64::INFINITY),
            StandardFamily::Poisson | StandardFamily::Gamma { .. } => ParamDomain::new(0.0, f64::INFINITY),
            StandardFamily::Normal { .. } => ParamDomain::new(f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    fn central_moment(&self, theta: f64, order: u32) -> Option<f64> {
        match (*self, order) {
            (StandardFamily::Bernoulli, k) => {
                let q = 1.0 - theta;
                Some(theta * q.powi(k as i32) + q * theta.powi(k as i32))
            }
            (StandardFamily::Poisson, 2) => Some(theta),
            (StandardFamily::Poisson, 3) => Some(poisson_abs_third_moment(theta)),
            (StandardFamily::Poisson, 4) => Some(theta * (1.0 + 3.0 * theta)),
            (StandardFamily::Normal { .. }, 2) => Some(1.0),
            (StandardFamily::Normal { .. }, 3) => Some(2.0 * (2.0 / PI).sqrt()),
            (StandardFamily::Normal { .. }, 4) => Some(3.0),
            (StandardFamily::Gamma { shape }, 2) => Some(theta * theta / shape),
            (StandardFamily::Gamma { shape }, 3) => {
                Some((theta / shape).powi(3) * gamma_abs_third_moment(shape))
            }
            (StandardFamily::Gamma { shape }, 4) => {
                Some(3.0 * (shape + 2.0) * theta.powi(4) / shape.powi(3))
            }
            _ => None,
        }
    }

    fn cumulant(&self, theta: f64, t: f64) -> Option<f64> {
        let v = match *self {
            StandardFamily::Bernoulli => {
                if t > 0.0 {
                    t + (theta + (1.0 - theta) * (-t).exp()).ln()
                } else {
                    (theta * t.exp_m1()).ln_1p()
                }
            }
            StandardFamily::Poisson => theta * t.exp_m1(),
            StandardFamily::Normal { .. } => theta * t + 0.5 * t * t,
            StandardFamily::Gamma { shape } => {
                let u = theta * t / shape;
                if u >= 1.0 {
                    return None;
                }
                -shape * (-u).ln_1p()
            }
            StandardFamily::NegBinomial { r } => {
                let p = 1.0 / theta;
                let s = (1.0 - p) * (t / r).exp();
                if s >= 1.0 {
                    return None;
                }
                t + r * p.ln() - r * (-s).ln_1p()
            }
        };
        v.is_finite().then_some(v)
    }
}

/// Exponential-family decomposition of `spec`, with the second parameter
/// of the negative binomial, normal and gamma families held fixed.
pub fn exp_family_of(spec: &DistributionSpec) -> Result<ExpFamilyModel> {
    let fam = standard_family(spec)?;
    ExpFamilyModel::new(fam, true)
}

pub(crate) fn standard_family(spec: &DistributionSpec) -> Result<StandardFamily> {
    match *spec.family() {
        Family::Bernoulli { .. } => Ok(StandardFamily::Bernoulli),
        Family::NegBinomial { r, .. } => Ok(StandardFamily::NegBinomial { r }),
        Family::Poisson { .. } => Ok(StandardFamily::Poisson),
        Family::Normal { sigma, .. } => Ok(StandardFamily::Normal { sigma }),
        Family::Gamma { shape, .. } => Ok(StandardFamily::Gamma { shape }),
        _ => Err(Error::UnsupportedFamily(format!(
            "{} is not decomposed as an exponential family; use the direct ratio bound",
            spec.name()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_rejects_bad_parameters() {
        assert!(DistributionSpec::bernoulli(0.0).is_err());
        assert!(DistributionSpec::bernoulli(1.0).is_err());
        assert!(DistributionSpec::neg_binomial(-1.0, 0.5).is_err());
        assert!(DistributionSpec::poisson(f64::NAN).is_err());
        assert!(DistributionSpec::hypergeometric(10, 11, 3).is_err());
        assert!(DistributionSpec::hypergeometric(10, 5, 0).is_err());
        assert!(DistributionSpec::hypergeometric(10, 5, 11).is_err());
        assert!(DistributionSpec::waiting_time(10, 3, 4).is_err());
        assert!(DistributionSpec::waiting_time(10, 3, 0).is_err());
        assert!(DistributionSpec::normal(0.0, 0.0).is_err());
        assert!(DistributionSpec::gamma(1.0, -2.0).is_err());
        assert!(DistributionSpec::student_t(0).is_err());
        assert!(DistributionSpec::f_dist(3, 0).is_err());
    }

    #[test]
    fn deserialisation_validates() {
        let bad = r#"{"family":"bernoulli","p":1.5}"#;
        assert!(serde_json::from_str::<DistributionSpec>(bad).is_err());
        let good = r#"{"family":"poisson","lambda":2.0}"#;
        let spec: DistributionSpec = serde_json::from_str(good).unwrap();
        assert_eq!(spec, DistributionSpec::poisson(2.0).unwrap());
    }

    #[test]
    fn density_examples() {
        let b = DistributionSpec::bernoulli(0.5).unwrap();
        assert!((log_density(&b, 1.0).unwrap() - 0.5f64.ln()).abs() < 1e-15);
        let p = DistributionSpec::poisson(1.0).unwrap();
        assert!((log_density(&p, 0.0).unwrap() + 1.0).abs() < 1e-15);
        let h = DistributionSpec::hypergeometric(10, 5, 4).unwrap();
        assert!((log_density(&h, 4.0).unwrap() - (5.0f64 / 210.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn outside_support_is_a_domain_error() {
        let h = DistributionSpec::hypergeometric(10, 5, 4).unwrap();
        assert!(matches!(log_density(&h, 5.0), Err(Error::Domain(_))));
        let b = DistributionSpec::bernoulli(0.3).unwrap();
        assert!(log_density(&b, 0.5).is_err());
        let g = DistributionSpec::gamma(2.0, 1.0).unwrap();
        assert!(log_density(&g, 0.0).is_err());
        let w = DistributionSpec::waiting_time(10, 4, 2).unwrap();
        assert!(log_density(&w, 1.0).is_err());
        assert!(log_density(&w, 9.0).is_err());
        assert!(log_density(&w, 8.0).unwrap().is_finite());
    }

    #[test]
    fn decomposition_examples() {
        let m = exp_family_of(&DistributionSpec::bernoulli(0.25).unwrap()).unwrap();
        assert!((m.eta(0.25) - (1.0f64 / 3.0).ln()).abs() < 1e-15);
        assert!((m.big_a(0.25) - (4.0f64 / 3.0).ln()).abs() < 1e-15);

        let m = exp_family_of(&DistributionSpec::normal(0.0, 1.0).unwrap()).unwrap();
        assert_eq!(m.eta(1.0), 1.0);
        assert_eq!(m.big_a(1.0), 0.5);

        let m = exp_family_of(&DistributionSpec::gamma(2.0, 3.0).unwrap()).unwrap();
        assert!((m.t_moment(3.0, 2).unwrap() - 4.5).abs() < 1e-14);
    }

    #[test]
    fn unsupported_families_are_rejected() {
        for spec in [
            DistributionSpec::hypergeometric(10, 5, 4).unwrap(),
            DistributionSpec::waiting_time(10, 5, 2).unwrap(),
            DistributionSpec::student_t(3).unwrap(),
            DistributionSpec::f_dist(2, 3).unwrap(),
        ] {
            assert!(matches!(exp_family_of(&spec), Err(Error::UnsupportedFamily(_))));
        }
    }

    #[derive(Debug)]
    struct Broken;
    impl ExponentialFamily for Broken {
        fn name(&self) -> &str {
            "broken"
        }
        fn eta(&self, theta: f64) -> f64 {
            theta.ln()
        }
        fn log_partition(&self, theta: f64) -> f64 {
            theta * theta
        }
        fn sufficient_stat(&self, x: f64) -> f64 {
            x
        }
        fn domain(&self) -> ParamDomain {
            ParamDomain::new(0.0, f64::INFINITY)
        }
    }

    #[derive(Debug)]
    struct Decreasing;
    impl ExponentialFamily for Decreasing {
        fn name(&self) -> &str {
            "decreasing"
        }
        fn eta(&self, theta: f64) -> f64 {
            -theta
        }
        fn log_partition(&self, theta: f64) -> f64 {
            -0.5 * theta * theta
        }
        fn sufficient_stat(&self, x: f64) -> f64 {
            x
        }
        fn domain(&self) -> ParamDomain {
            ParamDomain::new(f64::NEG_INFINITY, f64::INFINITY)
        }
    }

    #[test]
    fn custom_model_checks() {
        assert!(ExpFamilyModel::new(Broken, false).is_ok());
        assert!(ExpFamilyModel::new(Broken, true).is_err());
        assert!(ExpFamilyModel::new(Decreasing, false).is_err());
    }

    #[test]
    fn negative_binomial_has_no_moments() {
        let m = exp_family_of(&DistributionSpec::neg_binomial(2.0, 0.4).unwrap()).unwrap();
        assert!(m.t_moment(2.5, 2).is_none());
    }

    #[test]
    fn third_moments_match_direct_sums() {
        let m = exp_family_of(&DistributionSpec::poisson(2.5).unwrap()).unwrap();
        let direct: f64 = (0..200)
            .map(|x| {
                let x = x as f64;
                (x - 2.5f64).abs().powi(3) * (xlny(x, 2.5) - 2.5 - ln_gamma(x + 1.0)).exp()
            })
            .sum();
        assert!((m.t_moment(2.5, 3).unwrap() - direct).abs() < 1e-12);

        // exponential: E|X-1|^3 = 12/e - 2 for X ~ Exp(1)
        let m = exp_family_of(&DistributionSpec::gamma(1.0, 1.0).unwrap()).unwrap();
        let want = 12.0 / std::f64::consts::E - 2.0;
        assert!((m.t_moment(1.0, 3).unwrap() - want).abs() < 1e-12);
    }
}
