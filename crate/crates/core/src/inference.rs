//! Test risks, likelihood-ratio statistic tails, likelihood-ratio
//! confidence regions and bisection confidence intervals.

use serde::{Deserialize, Serialize};

use crate::distributions::{exp_family_of, DistributionSpec, ExpFamilyModel, Family};
use crate::error::{Error, Result};
use crate::lr_bounds::{ln_m_closed, m_factor_expfam, tail_bound, Side, TailQuery};
use crate::quadrature::{integrate_upper_pieces, Tolerance};
use crate::special::normal_sf;

/// Largest number of bisection steps per endpoint.
pub const MAX_BISECTIONS: usize = 200;

/// Relative width at which bisection stops, scaled by `max(1, range)`.
pub const BISECTION_WIDTH: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskBounds {
    /// Bound on `Pr{reject H0 | theta0}`.
    pub risk0: f64,
    /// Bound on `Pr{accept H0 | theta1}`.
    pub risk1: f64,
}

/// Bounds on the two error probabilities of the test that rejects
/// `theta = theta0` in favour of `theta = theta1` when the estimate exceeds
/// `gamma`: `M(gamma, theta0)` and `M(gamma, theta1)` for `n` samples.
pub fn hypothesis_risk_bounds(
    model: &ExpFamilyModel,
    gamma: f64,
    theta0: f64,
    theta1: f64,
    n: u64,
) -> Result<RiskBounds> {
    if !(theta0 <= gamma && gamma <= theta1) {
        return Err(Error::Precondition(format!(
            "risk bounds need theta0 <= gamma <= theta1, got {theta0}, {gamma}, {theta1}"
        )));
    }
    Ok(RiskBounds {
        risk0: m_factor_expfam(model, gamma, theta0, n)?.min(1.0),
        risk1: m_factor_expfam(model, gamma, theta1, n)?.min(1.0),
    })
}

/// Bound on `Pr{LR <= alpha/2 | theta}` for the likelihood ratio
/// `f(X; theta) / f(X; theta_hat)`. The bound is `alpha` itself.
pub fn lr_stat_tail_bound(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(alpha)
}

/// The same statement for `-2 ln LR >= chi2`: at most `2 exp(-chi2 / 2)`.
/// Values at or above 1 carry no information.
pub fn lr_chi_square_bound(chi2: f64) -> Result<f64> {
    if !(chi2 >= 0.0) {
        return Err(Error::Domain(format!("chi-square level must be non-negative, got {chi2}")));
    }
    Ok(2.0 * (-0.5 * chi2).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareCheck {
    pub z: f64,
    /// `Pr{chi2_1 >= z}` by quadrature of the density.
    pub lhs: f64,
    /// The same probability as `2 Phi(-sqrt z)`.
    pub lhs_closed: f64,
    pub lhs_error: f64,
    /// `2 exp(-z / 2)`.
    pub rhs: f64,
    pub holds: bool,
}

/// Compares the one-degree chi-square tail at `z` with `2 exp(-z / 2)`.
pub fn chi_square_tail_check(z: f64) -> Result<ChiSquareCheck> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::Domain(format!("z must be positive and finite, got {z}")));
    }
    let c = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let density = |u: f64| c * u.powf(-0.5) * (-0.5 * u).exp();
    // geometric breaks resolve the u^(-1/2) spike when z is tiny
    let mut breaks = vec![z];
    let mut b = z;
    while b < 1.0 {
        b *= 4.0;
        breaks.push(b.min(1.0));
    }
    breaks.extend([2.0, 4.0, 8.0, 16.0, 32.0, 64.0].into_iter().filter(|&x| x > z));
    let q = integrate_upper_pieces(density, &breaks, Tolerance { abs: 0.0, rel: 1e-11 });
    let lhs = q.value;
    let rhs = 2.0 * (-0.5 * z).exp();
    Ok(ChiSquareCheck {
        z,
        lhs,
        lhs_closed: 2.0 * normal_sf(z.sqrt()),
        lhs_error: q.error,
        rhs,
        holds: lhs < rhs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub delta: f64,
    pub observed: f64,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Likelihood-ratio region `{theta : M(theta_hat, theta) > alpha / 2}`.
/// It is the open interval `(lower, upper)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceRegion {
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
    pub observed: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

struct Endpoint {
    value: f64,
    iterations: usize,
    note: Option<String>,
}

/// Walks from `start` toward `limit` and returns the first parameter at
/// which `ln_m` drops to `cut` or below. `ln_m` is `0` at `start` and
/// decreases toward `limit`.
fn invert_side(ln_m: impl Fn(f64) -> Result<f64>, start: f64, limit: f64, cut: f64) -> Result<Endpoint> {
    let dir = if limit > start { 1.0 } else { -1.0 };
    let saturated = |iterations| Endpoint {
        value: limit,
        iterations,
        note: Some(format!(
            "no parameter between {start} and {limit} meets the bound; endpoint set to the domain edge"
        )),
    };
    if start == limit {
        return Ok(saturated(0));
    }

    // bracket [inside, outside] with ln_m(inside) > cut >= ln_m(outside)
    let inside = start;
    let mut outside;
    let mut iterations = 0;
    if limit.is_finite() {
        let range = (limit - start).abs();
        let probe = limit - dir * 1e-12 * range.max(1.0);
        if (probe - start) * dir <= 0.0 || ln_m(probe)? > cut {
            return Ok(saturated(0));
        }
        outside = probe;
    } else {
        let mut step = start.abs().max(1.0);
        loop {
            let candidate = start + dir * step;
            iterations += 1;
            if ln_m(candidate)? <= cut {
                outside = candidate;
                break;
            }
            if iterations >= MAX_BISECTIONS {
                return Ok(saturated(iterations));
            }
            step *= 2.0;
        }
    }

    let mut lo = inside;
    let width = BISECTION_WIDTH * (outside - inside).abs().max(1.0);
    let mut steps = 0;
    while (outside - lo).abs() > width && steps < MAX_BISECTIONS {
        let mid = 0.5 * (lo + outside);
        if mid == lo || mid == outside {
            break;
        }
        if ln_m(mid)? <= cut {
            outside = mid;
        } else {
            lo = mid;
        }
        steps += 1;
    }
    Ok(Endpoint {
        value: outside,
        iterations: iterations + steps,
        note: None,
    })
}

fn check_level(level: f64, what: &str) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} must lie in (0, 1), got {level}")))
    }
}

/// Both roots of `ln M(observed, theta) = cut` for an exponential family.
fn expfam_limits(spec: &DistributionSpec, n: u64, observed: f64, cut: f64) -> Result<(Endpoint, Endpoint)> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample count must be positive".into()));
    }
    let domain = exp_family_of(spec)?.theta_domain();
    // validates the observed statistic against the family's range
    ln_m_closed(spec, observed, n)?;
    let ln_m = |theta: f64| ln_m_closed(&spec.with_parameter(theta)?, observed, n);
    let start = observed.clamp(domain.lo, domain.hi);
    let lower = invert_side(ln_m, start, domain.lo, cut)?;
    let upper = invert_side(ln_m, start, domain.hi, cut)?;
    Ok((lower, upper))
}

/// Likelihood-ratio confidence region for the parameter of an exponential
/// family given the estimate `observed` (on the scale of [`TailQuery`]).
pub fn confidence_region_lr(spec: &DistributionSpec, n: u64, observed: f64, alpha: f64) -> Result<ConfidenceRegion> {
    check_level(alpha, "alpha")?;
    let (lower, upper) = expfam_limits(spec, n, observed, (0.5 * alpha).ln())?;
    Ok(ConfidenceRegion {
        lower: lower.value,
        upper: upper.value,
        alpha,
        observed,
        notes: [lower.note, upper.note].into_iter().flatten().collect(),
    })
}

/// Confidence interval `[L, U]` at level `1 - delta`: `U` is the smallest
/// parameter above `observed` whose bound `M(observed, U)` is at most
/// `delta / 2`, and `L` the mirror image below.
///
/// For the hypergeometric family `observed` is the count `k` of marked
/// units among the draws, `n` must be 1, and the limits are integers.
pub fn confidence_interval(spec: &DistributionSpec, n: u64, observed: f64, delta: f64) -> Result<ConfidenceInterval> {
    check_level(delta, "delta")?;
    let cut = (0.5 * delta).ln();
    if let Family::Hypergeometric {
        population, draws, ..
    } = *spec.family()
    {
        if n != 1 {
            return Err(Error::InvalidParameter(format!(
                "hypergeometric intervals are for a single sample; n must be 1, got {n}"
            )));
        }
        return hypergeometric_interval(population, draws, observed, delta, cut);
    }
    let (lower, upper) = expfam_limits(spec, n, observed, cut)?;
    Ok(ConfidenceInterval {
        lower: lower.value,
        upper: upper.value,
        delta,
        observed,
        iterations: lower.iterations + upper.iterations,
        notes: [lower.note, upper.note].into_iter().flatten().collect(),
    })
}

fn hypergeometric_interval(population: u64, draws: u64, observed: f64, delta: f64, cut: f64) -> Result<ConfidenceInterval> {
    if !(observed >= 0.0 && observed.fract() == 0.0 && observed <= draws as f64) {
        return Err(Error::Domain(format!(
            "observed count {observed} must be an integer in 0..={draws}"
        )));
    }
    let k = observed as u64;
    let lo = k;
    let hi = population - (draws - k);
    let m_hat = crate::lr_bounds::mle_population(population, draws, k);
    let ln_bound = |m: u64, side: Side| -> Result<f64> {
        let spec = DistributionSpec::hypergeometric(population, m, draws)?;
        Ok(tail_bound(&TailQuery::new(spec, 1, observed, side))?.ln_bound())
    };
    let mut notes = Vec::new();
    let mut iterations = 0;

    // smallest m >= m_hat with the lower-tail bound at most delta / 2
    let upper = if ln_bound(hi, Side::Lower)? > cut {
        notes.push(format!("no population up to {hi} meets the bound; upper limit set to {hi}"));
        hi
    } else {
        let (mut a, mut b) = (m_hat, hi);
        while b - a > 1 {
            let mid = a + (b - a) / 2;
            iterations += 1;
            if ln_bound(mid, Side::Lower)? <= cut {
                b = mid;
            } else {
                a = mid;
            }
        }
        if ln_bound(a, Side::Lower)? <= cut {
            a
        } else {
            b
        }
    };
    // largest m <= m_hat with the upper-tail bound at most delta / 2
    let lower = if ln_bound(lo, Side::Upper)? > cut {
        notes.push(format!("no population down to {lo} meets the bound; lower limit set to {lo}"));
        lo
    } else {
        let (mut a, mut b) = (lo, m_hat);
        while b - a > 1 {
            let mid = a + (b - a) / 2;
            iterations += 1;
            if ln_bound(mid, Side::Upper)? <= cut {
                a = mid;
            } else {
                b = mid;
            }
        }
        if ln_bound(b, Side::Upper)? <= cut {
            b
        } else {
            a
        }
    };
    Ok(ConfidenceInterval {
        lower: lower as f64,
        upper: upper as f64,
        delta,
        observed,
        iterations,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn risk_examples() {
        let spec = DistributionSpec::bernoulli(0.5).unwrap();
        let model = exp_family_of(&spec).unwrap();
        let r = hypothesis_risk_bounds(&model, 0.5, 0.3, 0.7, 20).unwrap();
        assert_relative_eq!(r.risk0, 0.84f64.powi(10), max_relative = 1e-12);
        assert_relative_eq!(r.risk1, r.risk0, max_relative = 1e-12);
        let r = hypothesis_risk_bounds(&model, 0.3, 0.3, 0.7, 20).unwrap();
        assert_eq!(r.risk0, 1.0);

        let model = exp_family_of(&DistributionSpec::poisson(1.0).unwrap()).unwrap();
        let r = hypothesis_risk_bounds(&model, 2.0, 1.0, 4.0, 5).unwrap();
        let e = std::f64::consts::E;
        assert_relative_eq!(r.risk0, (e / 4.0).powi(5), max_relative = 1e-12);

        assert!(matches!(
            hypothesis_risk_bounds(&model, 5.0, 1.0, 4.0, 5),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn statistic_tail_forms() {
        assert_eq!(lr_stat_tail_bound(0.05).unwrap(), 0.05);
        assert_eq!(lr_chi_square_bound(0.0).unwrap(), 2.0);
        assert_relative_eq!(lr_chi_square_bound(4.0).unwrap(), 0.270_670_566_473_225_4, max_relative = 1e-14);
    }

    #[test]
    fn chi_square_examples() {
        let c = chi_square_tail_check(4.0).unwrap();
        assert_relative_eq!(c.lhs, 0.045_500_263_896_358_42, max_relative = 1e-9);
        assert!(c.holds);
        let c = chi_square_tail_check(50.0).unwrap();
        assert!(c.holds && c.lhs > 0.0);
        assert_relative_eq!(c.lhs, c.lhs_closed, max_relative = 1e-8);
        let c = chi_square_tail_check(1e-6).unwrap();
        assert_relative_eq!(c.lhs, c.lhs_closed, max_relative = 1e-9);
    }

    #[test]
    fn bernoulli_zero_successes() {
        let spec = DistributionSpec::bernoulli(0.5).unwrap();
        let exact = 1.0 - 0.025f64.powf(0.1);
        let ci = confidence_interval(&spec, 10, 0.0, 0.05).unwrap();
        assert_eq!(ci.lower, 0.0);
        assert!((ci.upper - exact).abs() < 1e-9, "{}", ci.upper);
        assert!(!ci.notes.is_empty());
        let r = confidence_region_lr(&spec, 10, 0.0, 0.05).unwrap();
        assert!((r.upper - exact).abs() < 1e-9);
    }

    #[test]
    fn interval_brackets_observed_and_nests() {
        let spec = DistributionSpec::poisson(1.0).unwrap();
        let wide = confidence_interval(&spec, 12, 2.5, 0.01).unwrap();
        let narrow = confidence_interval(&spec, 12, 2.5, 0.2).unwrap();
        assert!(wide.lower <= narrow.lower && narrow.upper <= wide.upper);
        assert!(narrow.lower < 2.5 && 2.5 < narrow.upper);
    }

    #[test]
    fn hypergeometric_interval_is_integral() {
        let spec = DistributionSpec::hypergeometric(50, 10, 20).unwrap();
        let ci = confidence_interval(&spec, 1, 7.0, 0.1).unwrap();
        assert!(ci.lower >= 7.0 && ci.upper <= 37.0);
        assert_eq!(ci.lower.fract(), 0.0);
        assert_eq!(ci.upper.fract(), 0.0);
        assert!(ci.lower <= 17.0 && 17.0 <= ci.upper);
    }
}
