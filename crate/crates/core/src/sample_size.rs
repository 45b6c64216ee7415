//! Sample sizes for estimating a proportion with an absolute margin, a
//! proportion by inverse sampling with a relative margin, and a gamma scale
//! with a relative margin. Also the exact minimal sizes and the study of
//! how tight the Chernoff-exponent size is.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{exp_family_of, DistributionSpec};
use crate::error::{Error, Result};
use crate::lr_bounds::{ln_chernoff_numeric, BoundConfig, Side, TailQuery};
use crate::oracle::{binomial_margin_tails, exact_tail, OracleMethod, OracleResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanMode {
    BinomialAbsolute,
    InverseBinomialRelative,
    GammaRelative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanMethod {
    ChernoffHoeffding,
    ChenRefined,
    BasicLr,
    ExactOracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSizePlan {
    pub eps: f64,
    pub delta: f64,
    pub mode: PlanMode,
    pub method: PlanMethod,
    /// Refinement term in `ln((1 + zeta) / delta)`; 0 for unrefined methods.
    pub zeta: f64,
    /// Intermediate quantities of the formula.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub aux: BTreeMap<String, f64>,
    /// Right-hand side that `n` must exceed.
    pub threshold: f64,
    /// Least integer strictly greater than `threshold`.
    pub n: u64,
    pub region_ok: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

fn least_above(threshold: f64) -> Result<u64> {
    if !threshold.is_finite() || threshold > 9.0e15 {
        return Err(Error::Domain(format!("sample-size threshold {threshold} is not representable")));
    }
    Ok(if threshold < 0.0 { 1 } else { threshold.floor() as u64 + 1 }.max(1))
}

fn check_unit(value: f64, what: &str) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} must lie in (0, 1), got {value}")))
    }
}

fn plan(eps: f64, delta: f64, mode: PlanMode, method: PlanMethod, zeta: f64, threshold: f64) -> Result<SampleSizePlan> {
    Ok(SampleSizePlan {
        eps,
        delta,
        mode,
        method,
        zeta,
        aux: BTreeMap::new(),
        threshold,
        n: least_above(threshold)?,
        region_ok: true,
        notes: Vec::new(),
    })
}

/// `n > ln(2 / delta) / (2 eps^2)`, the Chernoff-Hoeffding size for
/// `Pr{|p_hat - p| < eps} > 1 - delta`.
pub fn chernoff_hoeffding_n(eps: f64, delta: f64) -> Result<SampleSizePlan> {
    check_unit(eps, "eps")?;
    check_unit(delta, "delta")?;
    let threshold = (2.0 / delta).ln() / (2.0 * eps * eps);
    plan(eps, delta, PlanMode::BinomialAbsolute, PlanMethod::ChernoffHoeffding, 0.0, threshold)
}

/// Upper end of the admissible `delta` for the refined binomial size at
/// margin `eps`: `2 exp(-9 ln 2 / (3 - 4 eps)^2)`.
pub fn chen_delta_limit(eps: f64) -> f64 {
    if !(eps > 0.0 && eps < 0.75) {
        return 0.0;
    }
    let d = 3.0 - 4.0 * eps;
    2.0 * (-9.0 * std::f64::consts::LN_2 / (d * d)).exp()
}

/// Refined binomial size `n > ln((1 + zeta) / delta) / (2 eps^2)` with the
/// default Berry-Esseen constant.
pub fn chen_binomial_n(eps: f64, delta: f64) -> Result<SampleSizePlan> {
    chen_binomial_n_with(eps, delta, &BoundConfig::default())
}

pub fn chen_binomial_n_with(eps: f64, delta: f64, config: &BoundConfig) -> Result<SampleSizePlan> {
    check_unit(eps, "eps")?;
    check_unit(delta, "delta")?;
    let ln2 = std::f64::consts::LN_2;
    let inner = 4.0 * eps / 3.0 + (ln2 / (2.0 / delta).ln()).sqrt();
    let bracket = 1.0 - inner * inner;
    let limit = chen_delta_limit(eps);
    let region_ok = eps < 0.75 && delta < limit;

    if bracket <= 0.0 {
        // zeta = 1 reproduces ln(2 / delta), the unrefined size
        let mut p = plan(
            eps,
            delta,
            PlanMode::BinomialAbsolute,
            PlanMethod::ChenRefined,
            1.0,
            (2.0 / delta).ln() / (2.0 * eps * eps),
        )?;
        p.region_ok = false;
        p.aux.insert("bracket".into(), bracket);
        p.notes.push(format!(
            "1 - (4 eps/3 + sqrt(ln 2 / ln(2/delta)))^2 = {bracket} is not positive; zeta is undefined and n falls back to the Chernoff-Hoeffding size"
        ));
        return Ok(p);
    }
    let zeta = 4.0 * config.c_be / (bracket * (1.0 / delta).ln() / (2.0 * eps * eps)).sqrt();
    let threshold = ((1.0 + zeta) / delta).ln() / (2.0 * eps * eps);
    let mut p = plan(eps, delta, PlanMode::BinomialAbsolute, PlanMethod::ChenRefined, zeta, threshold)?;
    p.region_ok = region_ok;
    p.aux.insert("bracket".into(), bracket);
    p.aux.insert("delta_limit".into(), limit);
    if !region_ok {
        p.notes.push(format!(
            "(eps, delta) = ({eps}, {delta}) is outside the validity region (eps < 3/4, delta < {limit}); n is advisory only"
        ));
    }
    Ok(p)
}

/// Relative improvement `(n_chernoff - n_chen) / n_chernoff`.
pub fn improvement(chernoff: &SampleSizePlan, chen: &SampleSizePlan) -> f64 {
    (chernoff.n as f64 - chen.n as f64) / chernoff.n as f64
}

/// Upper end of the admissible `delta` for the refined inverse-sampling
/// size at relative margin `eps` in (0, 1).
pub fn inverse_delta_limit(eps: f64) -> f64 {
    if !(eps > 0.0 && eps < 1.0) {
        return 0.0;
    }
    let ln2 = std::f64::consts::LN_2;
    let d = 4.0 * (9.0 - 6.0 * eps - 2.0 * eps * eps);
    let a = (3.0 * eps.powi(3) * (4.0 + eps) + 4.0 * eps * (3.0 + eps) * ln2) / d;
    let b = (3.0 * eps * eps * (4.0 + eps) + 4.0 * (3.0 + eps) * ln2) / d;
    let c = 3.0 * (1.0 + eps) * (3.0 + eps) * ln2 / (0.5 * d);
    (-a - eps * (b * b + c).sqrt()).exp()
}

/// Number of successes `gamma` for inverse binomial sampling so that
/// `Pr{|p_hat - p| < eps p} > 1 - delta` for every `p`. With `refined`
/// the Berry-Esseen term replaces `ln 2`; outside its region the plan is
/// the basic one with `region_ok = false`.
pub fn inverse_binomial_gamma(eps: f64, delta: f64, refined: bool) -> Result<SampleSizePlan> {
    inverse_binomial_gamma_with(eps, delta, refined, &BoundConfig::default())
}

pub fn inverse_binomial_gamma_with(eps: f64, delta: f64, refined: bool, config: &BoundConfig) -> Result<SampleSizePlan> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    check_unit(delta, "delta")?;
    let coef = (1.0 + eps) / ((1.0 + eps) * eps.ln_1p() - eps);
    let basic = coef * (2.0 / delta).ln();
    let mode = PlanMode::InverseBinomialRelative;
    if !refined {
        return plan(eps, delta, mode, PlanMethod::BasicLr, 0.0, basic);
    }

    let ln_inv = (1.0 / delta).ln();
    let m = 2.0 / (eps * eps) * ln_inv;
    let z = 1.0 + 2.0 * eps / (3.0 + eps) - 9.0 / ((3.0 + eps) * (3.0 + eps)) * ln_inv / (2.0 / delta).ln();
    let denom = m - z - m * z;
    let limit = inverse_delta_limit(eps);
    let region_ok = eps < 1.0 && delta < limit && denom > 0.0;
    let mut aux = BTreeMap::new();
    aux.insert("m".to_string(), m);
    aux.insert("z".to_string(), z);
    aux.insert("delta_limit".to_string(), limit);
    aux.insert("basic_threshold".to_string(), basic);
    if !region_ok {
        let mut p = plan(eps, delta, mode, PlanMethod::ChenRefined, 0.0, basic)?;
        p.region_ok = false;
        p.aux = aux;
        p.notes.push(format!(
            "(eps, delta) = ({eps}, {delta}) is outside the refined region (eps < 1, delta < {limit}); the basic size is returned"
        ));
        return Ok(p);
    }
    let zeta = 2.0 * config.c_be * (1.0 / m + z / denom).sqrt();
    let threshold = coef * ((1.0 + zeta) / delta).ln();
    let mut p = plan(eps, delta, mode, PlanMethod::ChenRefined, zeta, threshold)?;
    p.aux = aux;
    Ok(p)
}

/// Exponent per unit shape of the gamma size bound. `literal` selects
/// `eps + ln(1 + eps)`; otherwise `eps - ln(1 + eps)`, the value the gamma
/// tail exponent `rho - 1 - ln rho` takes at `rho = 1 + eps`.
fn gamma_exponent(eps: f64, literal: bool) -> f64 {
    if literal {
        eps + eps.ln_1p()
    } else {
        eps - eps.ln_1p()
    }
}

fn gamma_threshold(shape: f64, eps: f64, delta: f64, literal: bool, c_be: f64) -> (f64, f64) {
    let c = shape * gamma_exponent(eps, literal);
    let zeta = 2.0 * c_be * (3.0 + 6.0 / shape).powf(0.75) * (c / (1.0 / delta).ln()).sqrt();
    (zeta, ((1.0 + zeta) / delta).ln() / c)
}

/// Samples needed so that the scale estimate `sum X / (k n)` of a gamma
/// population with shape `k` satisfies `Pr{|theta_hat - theta| < eps theta} > 1 - delta`.
/// `n` uses the exponent `eps - ln(1 + eps)`; the `eps + ln(1 + eps)` variant
/// is kept in `aux` as `literal_*` and in the notes.
pub fn gamma_relative_n(shape: f64, eps: f64, delta: f64) -> Result<SampleSizePlan> {
    gamma_relative_n_with(shape, eps, delta, &BoundConfig::default())
}

pub fn gamma_relative_n_with(shape: f64, eps: f64, delta: f64, config: &BoundConfig) -> Result<SampleSizePlan> {
    if !(shape > 0.0 && shape.is_finite()) {
        return Err(Error::Domain(format!("shape must be positive, got {shape}")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    check_unit(delta, "delta")?;
    let (zeta, threshold) = gamma_threshold(shape, eps, delta, false, config.c_be);
    let (lit_zeta, lit_threshold) = gamma_threshold(shape, eps, delta, true, config.c_be);
    let mut p = plan(eps, delta, PlanMode::GammaRelative, PlanMethod::ChenRefined, zeta, threshold)?;
    let lit_n = least_above(lit_threshold)?;
    p.aux.insert("shape".into(), shape);
    p.aux.insert("exponent".into(), gamma_exponent(eps, false));
    p.aux.insert("literal_exponent".into(), gamma_exponent(eps, true));
    p.aux.insert("literal_zeta".into(), lit_zeta);
    p.aux.insert("literal_threshold".into(), lit_threshold);
    p.aux.insert("literal_n".into(), lit_n as f64);
    p.notes.push(format!(
        "with the exponent eps + ln(1 + eps) the formula gives n = {lit_n}; n = {} uses eps - ln(1 + eps)",
        p.n
    ));
    Ok(p)
}

/// Exact `Pr{|theta_hat - theta| < eps theta}` for the gamma scale estimate
/// with `n` samples of shape `shape`, by quadrature of both tails.
pub fn gamma_relative_coverage(shape: f64, eps: f64, n: u64) -> Result<OracleResult> {
    let spec = DistributionSpec::gamma(shape, 1.0)?;
    let above = exact_tail(&TailQuery::new(spec.clone(), n, 1.0 + eps, Side::Upper))?;
    let below = if eps < 1.0 {
        exact_tail(&TailQuery::new(spec, n, 1.0 - eps, Side::Lower))?
    } else {
        OracleResult {
            value: 0.0,
            error_bound: 0.0,
            method: OracleMethod::Quadrature,
            seed: None,
        }
    };
    Ok(OracleResult {
        value: 1.0 - above.value - below.value,
        error_bound: above.error_bound + below.error_bound,
        method: OracleMethod::Quadrature,
        seed: None,
    })
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Domain("parameter grid is empty".into()));
    }
    match grid.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
        Some(p) => Err(Error::Domain(format!("grid value {p} is outside (0, 1)"))),
        None => Ok(()),
    }
}

/// Largest `Pr{|p_hat - p| >= eps}` over `grid` with `n` trials.
fn max_miss(n: u64, eps: f64, grid: &[f64]) -> Result<f64> {
    let misses: Vec<f64> = grid
        .par_iter()
        .map(|&p| binomial_margin_tails(n, p, eps).map(|(lo, hi)| lo + hi))
        .collect::<Result<_>>()?;
    Ok(misses.into_iter().fold(0.0, f64::max))
}

/// Smallest `n` with `min_p Pr{|p_hat - p| < eps} > 1 - delta` over `grid`,
/// by exact binomial sums. Coverage is not monotone in `n`, so the sizes are
/// scanned upward from 1; the Chernoff-Hoeffding size ends the scan because
/// it always qualifies.
pub fn exact_min_n(eps: f64, delta: f64, grid: &[f64]) -> Result<u64> {
    check_unit(eps, "eps")?;
    check_unit(delta, "delta")?;
    check_grid(grid)?;
    let cap = chernoff_hoeffding_n(eps, delta)?.n;
    for n in 1..cap {
        if max_miss(n, eps, grid)? < delta {
            return Ok(n);
        }
    }
    Ok(cap)
}

/// Smallest `n` at which both one-sided tails `Pr{p_hat >= p + eps}` and
/// `Pr{p_hat <= p - eps}` are at most `delta / 2`.
pub fn exact_min_n_per_side(eps: f64, delta: f64, p: f64) -> Result<u64> {
    check_unit(eps, "eps")?;
    check_unit(delta, "delta")?;
    check_grid(&[p])?;
    let cap = chernoff_hoeffding_n(eps, delta)?.n;
    for n in 1..cap {
        let (lo, hi) = binomial_margin_tails(n, p, eps)?;
        if lo <= 0.5 * delta && hi <= 0.5 * delta {
            return Ok(n);
        }
    }
    Ok(cap)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TightnessRow {
    pub delta: f64,
    /// Size from the two Chernoff exponents.
    pub n_c: u64,
    /// Exact minimal size.
    pub n_a: u64,
    /// Exact per-side size at `delta`.
    pub n_b: u64,
    /// Exact per-side size at `2 delta`.
    pub n_b_double: u64,
    pub ratio: f64,
    /// `n_b_double < n_a < n_b`.
    pub sandwich: bool,
}

/// Chernoff-exponent size `N_c` against the exact size `N_a` for Bernoulli
/// trials with known `p`, along decreasing `deltas`.
pub fn tightness_ratio_study(eps: f64, deltas: &[f64], p: f64) -> Result<Vec<TightnessRow>> {
    check_unit(eps, "eps")?;
    check_grid(&[p])?;
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Precondition("delta values must be strictly decreasing".into()));
    }
    if p - eps <= 0.0 || p + eps >= 1.0 {
        return Err(Error::Precondition(format!(
            "p +/- eps must stay inside (0, 1), got p = {p}, eps = {eps}"
        )));
    }
    let model = exp_family_of(&DistributionSpec::bernoulli(p)?)?;
    let ln_f = ln_chernoff_numeric(&model, p - eps, p, 1)?;
    let ln_g = ln_chernoff_numeric(&model, p + eps, p, 1)?;
    deltas
        .par_iter()
        .map(|&delta| {
            check_unit(delta, "delta")?;
            let ln_half = (0.5 * delta).ln();
            let n_c = least_above((ln_half / ln_f).max(ln_half / ln_g))?;
            let n_a = exact_min_n(eps, delta, &[p])?;
            let n_b = exact_min_n_per_side(eps, delta, p)?;
            let n_b_double = exact_min_n_per_side(eps, (2.0 * delta).min(0.999_999), p)?;
            Ok(TightnessRow {
                delta,
                n_c,
                n_a,
                n_b,
                n_b_double,
                ratio: n_c as f64 / n_a as f64,
                sandwich: n_b_double < n_a && n_a < n_b,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn chernoff_examples() {
        let p = chernoff_hoeffding_n(0.05, 0.05).unwrap();
        assert_eq!(p.n, 738);
        assert_relative_eq!(p.threshold, 737.775_890_822_787, max_relative = 1e-9);
        assert_eq!(chernoff_hoeffding_n(0.1, 0.01).unwrap().n, 265);
        assert_eq!(chernoff_hoeffding_n(0.5, 0.999).unwrap().n, 2);
        assert!(chernoff_hoeffding_n(0.0, 0.5).is_err());
        assert!(chernoff_hoeffding_n(0.1, 1.0).is_err());
    }

    #[test]
    fn chen_examples() {
        let p = chen_binomial_n(0.05, 0.05).unwrap();
        assert!((p.zeta - 0.0903).abs() < 5e-5, "{}", p.zeta);
        assert_eq!(p.n, 617);
        assert!(p.region_ok);
        let p = chen_binomial_n(0.05, 0.2).unwrap();
        assert_eq!(p.n, 348);
        let ch = chernoff_hoeffding_n(0.05, 0.2).unwrap();
        assert_eq!(ch.n, 461);
        assert!((improvement(&ch, &p) - 0.245).abs() < 0.001);
        let p = chen_binomial_n(0.5, 0.5).unwrap();
        assert!(!p.region_ok && !p.notes.is_empty());
        assert_relative_eq!(chen_delta_limit(0.5), 0.003_906_25, max_relative = 1e-12);
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(inverse_binomial_gamma(0.2, 0.05, false).unwrap().n, 236);
        assert_eq!(inverse_binomial_gamma(1.0, 0.05, false).unwrap().n, 20);
        let basic = inverse_binomial_gamma(0.2, 0.01, false).unwrap();
        let refined = inverse_binomial_gamma(0.2, 0.01, true).unwrap();
        assert!(refined.region_ok);
        assert!(refined.n < basic.n);
        assert!(refined.aux.contains_key("m") && refined.aux.contains_key("z"));
    }

    #[test]
    fn gamma_example() {
        let p = gamma_relative_n(1.0, 0.2, 0.05).unwrap();
        assert_relative_eq!(p.aux["exponent"], 0.017_678_443_206_045_39, max_relative = 1e-9);
        assert_relative_eq!(p.aux["literal_exponent"], 0.382_321_556_793_954_6, max_relative = 1e-9);
        assert_eq!(p.n, 188);
        assert_eq!(p.aux["literal_n"], 11.0);
    }

    #[test]
    fn exact_min_n_tiny_case() {
        assert_eq!(exact_min_n(0.5, 0.5, &[0.5]).unwrap(), 3);
        assert!(exact_min_n(0.5, 0.5, &[]).is_err());
    }
}
