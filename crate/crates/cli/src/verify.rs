use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use tailbound::inference::chi_square_tail_check;
use tailbound::lr_bounds::{ln_chernoff_numeric, ln_m_factor_expfam, tail_bound_with, BoundConfig, Side, TailQuery};
use tailbound::oracle::{coverage_exact, exact_tail, mc_lr_subset_tail, mc_lr_tail, CoverageTarget};
use tailbound::sample_size::{
    chen_binomial_n_with, chernoff_hoeffding_n, gamma_relative_coverage, gamma_relative_n_with,
    inverse_binomial_gamma_with,
};
use tailbound::{exp_family_of, DistributionSpec, Error};

use crate::args::{Suite, VerifyArgs};
use crate::error::CliError;
use crate::grid::parse_grid;
use crate::output::{OutputRecord, Report};

#[derive(Debug, Serialize)]
struct Check {
    check: String,
    pass: bool,
    detail: String,
    values: BTreeMap<String, f64>,
}

impl Check {
    fn new(check: impl Into<String>, pass: bool, detail: String) -> Self {
        Self {
            check: check.into(),
            pass,
            detail,
            values: BTreeMap::new(),
        }
    }

    fn value(mut self, key: &str, v: f64) -> Self {
        self.values.insert(key.into(), v);
        self
    }
}

pub fn verify(args: &VerifyArgs, config: &BoundConfig) -> Result<Report, CliError> {
    let (suite, checks) = match args.suite {
        Suite::Bounds => ("bounds", bounds_suite(args.seed, args.cells, config)?),
        Suite::Coverage => ("coverage", coverage_suite(config)?),
        Suite::Mc => {
            if args.replicates < 10_000 {
                return Err(CliError::Usage("--replicates must be at least 10000".into()));
            }
            ("mc", mc_suite(args.seed, args.replicates)?)
        }
    };
    let passed = checks.iter().filter(|c| c.pass).count();
    let total = checks.len();
    let summary = Check::new("summary", passed == total, format!("{passed} of {total} checks passed"));
    let query = match args.suite {
        Suite::Bounds => json!({ "suite": suite, "seed": args.seed, "cells": args.cells }),
        Suite::Coverage => json!({ "suite": suite }),
        Suite::Mc => json!({ "suite": suite, "seed": args.seed, "replicates": args.replicates }),
    };
    let mut report = Report::default();
    for check in checks.iter().chain(std::iter::once(&summary)) {
        report
            .records
            .push(OutputRecord::new("verify", &query, check)?);
        report.summary.push(format!(
            "{} {}: {}",
            if check.pass { "PASS" } else { "FAIL" },
            check.check,
            check.detail
        ));
    }
    report.validity_failed = !summary.pass;
    Ok(report)
}

type CellMaker = fn(&mut ChaCha20Rng) -> TailQuery;

fn pick_side(r: &mut ChaCha20Rng) -> Side {
    if r.random_bool(0.5) {
        Side::Upper
    } else {
        Side::Lower
    }
}

fn pick<T: Copy>(r: &mut ChaCha20Rng, values: &[T]) -> T {
    values[r.random_range(0..values.len())]
}

/// Random cell generators, one per family. Thresholds sit on the lattice of
/// attainable values for the discrete families.
fn cell_makers() -> Vec<(&'static str, CellMaker)> {
    vec![
        ("bernoulli", |r| {
            let spec = DistributionSpec::bernoulli(r.random_range(0.02..0.98)).unwrap();
            let n = pick(r, &[1u64, 2, 5, 10, 30, 100, 500]);
            let k = r.random_range(0..=n);
            TailQuery::new(spec, n, k as f64 / n as f64, pick_side(r))
        }),
        ("inverse_binomial", |r| {
            let p: f64 = r.random_range(0.05..0.95);
            let gamma = pick(r, &[1u64, 3, 10, 40]);
            let top = (3.0 * gamma as f64 / p).ceil() as u64 + 10;
            let trials = r.random_range(gamma..=top);
            let spec = DistributionSpec::bernoulli(p).unwrap();
            TailQuery::new(spec, gamma, gamma as f64 / trials as f64, pick_side(r)).inverse()
        }),
        ("neg_binomial", |r| {
            let (size_r, p): (f64, f64) = (r.random_range(0.3..5.0), r.random_range(0.05..0.95));
            let n = pick(r, &[1u64, 3, 10, 40]);
            let size = n as f64 * size_r;
            let top = (3.0 * size * (1.0 - p) / p).ceil() as u64 + 10;
            let j = r.random_range(0..=top);
            let spec = DistributionSpec::neg_binomial(size_r, p).unwrap();
            TailQuery::new(spec, n, 1.0 + j as f64 / size, pick_side(r))
        }),
        ("poisson", |r| {
            let lambda: f64 = r.random_range(0.05..20.0);
            let n = pick(r, &[1u64, 5, 20, 100]);
            let top = (3.0 * n as f64 * lambda).ceil() as u64 + 10;
            let j = r.random_range(0..=top);
            TailQuery::new(DistributionSpec::poisson(lambda).unwrap(), n, j as f64 / n as f64, pick_side(r))
        }),
        ("hypergeometric", |r| {
            let population = r.random_range(2..=200u64);
            let marked = r.random_range(0..=population);
            let draws = r.random_range(1..=population);
            let lo = draws.saturating_sub(population - marked);
            let k = r.random_range(lo..=draws.min(marked));
            let spec = DistributionSpec::hypergeometric(population, marked, draws).unwrap();
            TailQuery::new(spec, 1, k as f64, pick_side(r))
        }),
        ("waiting_time", |r| {
            let population = r.random_range(2..=100u64);
            let marked = r.random_range(1..=population);
            let required = r.random_range(1..=marked);
            let t = r.random_range(required..=population - marked + required);
            let spec = DistributionSpec::waiting_time(population, marked, required).unwrap();
            TailQuery::new(spec, 1, t as f64, pick_side(r))
        }),
        ("normal", |r| {
            let (mu, sigma): (f64, f64) = (r.random_range(-5.0..5.0), r.random_range(0.1..5.0));
            let n = pick(r, &[1u64, 4, 25, 100]);
            let z = mu + sigma / (n as f64).sqrt() * r.random_range(-6.0..6.0);
            TailQuery::new(DistributionSpec::normal(mu, sigma).unwrap(), n, z, pick_side(r))
        }),
        ("gamma", |r| {
            let (shape, scale): (f64, f64) = (r.random_range(0.2..10.0), r.random_range(0.1..5.0));
            let n = pick(r, &[1u64, 3, 10, 50]);
            let spread = 2.5 / (shape * n as f64).sqrt();
            let z = scale * (spread * r.random_range(-1.0..1.0)).exp();
            TailQuery::new(DistributionSpec::gamma(shape, scale).unwrap(), n, z, pick_side(r))
        }),
        ("student_t", |r| {
            let dof = r.random_range(1..=30u64);
            let z = r.random_range(-3.0f64..3.0).exp();
            TailQuery::new(DistributionSpec::student_t(dof).unwrap(), 1, z, pick_side(r))
        }),
        ("f_dist", |r| {
            let (m, n) = (r.random_range(1..=30u64), r.random_range(1..=30u64));
            let z = r.random_range(-3.0f64..3.0).exp();
            TailQuery::new(DistributionSpec::f_dist(m, n).unwrap(), 1, z, pick_side(r))
        }),
    ]
}

enum Cell {
    Checked { ok: bool, ratio: f64 },
    Skipped,
    Failed(String),
}

/// Checks the cell, switching to the other tail when the threshold lies on
/// the wrong side of the parameter for the one drawn.
fn check_cell(query: &TailQuery, config: &BoundConfig) -> Cell {
    let mut query = query.clone();
    let bound = match tail_bound_with(&query, config) {
        Err(Error::Precondition(_)) => {
            query.side = match query.side {
                Side::Upper => Side::Lower,
                Side::Lower => Side::Upper,
            };
            tail_bound_with(&query, config)
        }
        other => other,
    };
    let bound = match bound {
        Ok(b) => b,
        Err(Error::Precondition(_)) | Err(Error::Singularity(_)) => return Cell::Skipped,
        Err(e) => return Cell::Failed(e.to_string()),
    };
    match exact_tail(&query) {
        Ok(exact) => Cell::Checked {
            ok: exact.value <= bound.bound + exact.error_bound,
            ratio: if bound.bound > 0.0 { exact.value / bound.bound } else { 0.0 },
        },
        Err(e) => Cell::Failed(e.to_string()),
    }
}

fn bounds_suite(seed: u64, cells: usize, config: &BoundConfig) -> Result<Vec<Check>, CliError> {
    if cells == 0 {
        return Err(CliError::Usage("--cells must be positive".into()));
    }
    let mut checks = Vec::new();
    for (stream, (name, make)) in cell_makers().into_iter().enumerate() {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream as u64);
        let queries: Vec<TailQuery> = (0..cells).map(|_| make(&mut rng)).collect();
        let results: Vec<Cell> = queries.par_iter().map(|q| check_cell(q, config)).collect();
        let (mut checked, mut skipped, mut worst) = (0usize, 0usize, 0.0f64);
        let mut failures = Vec::new();
        for (q, r) in queries.iter().zip(&results) {
            match r {
                Cell::Checked { ok, ratio } => {
                    checked += 1;
                    worst = worst.max(*ratio);
                    if !ok {
                        failures.push(format!("z={} n={} {:?} {:?}", q.z, q.n, q.side, q.spec));
                    }
                }
                Cell::Skipped => skipped += 1,
                Cell::Failed(msg) => failures.push(msg.clone()),
            }
        }
        let mut detail = format!(
            "{checked} cells checked, {skipped} skipped, largest exact/bound {worst:.6}, {} violations",
            failures.len()
        );
        if let Some(first) = failures.first() {
            detail.push_str(&format!("; first: {first}"));
        }
        checks.push(
            Check::new(format!("dominance_{name}"), failures.is_empty(), detail)
                .value("checked", checked as f64)
                .value("skipped", skipped as f64)
                .value("violations", failures.len() as f64)
                .value("worst_ratio", worst),
        );
    }

    type Draw = fn(&mut ChaCha20Rng) -> f64;
    let families: [(&str, DistributionSpec, Draw); 5] = [
        ("bernoulli", DistributionSpec::bernoulli(0.5)?, |r| r.random_range(0.01..0.99)),
        ("neg_binomial", DistributionSpec::neg_binomial(2.0, 0.5)?, |r| r.random_range(1.05..10.0)),
        ("poisson", DistributionSpec::poisson(1.0)?, |r| r.random_range(0.1..20.0)),
        ("normal", DistributionSpec::normal(0.0, 1.5)?, |r| r.random_range(-5.0..5.0)),
        ("gamma", DistributionSpec::gamma(2.0, 1.0)?, |r| r.random_range(0.1..10.0)),
    ];
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(100);
    for (name, spec, draw) in &families {
        let model = exp_family_of(spec)?;
        let mut worst = 0.0f64;
        for _ in 0..cells {
            let z = draw(&mut rng);
            let theta = draw(&mut rng);
            let n = rng.random_range(1..=200u64);
            let ln_m = ln_m_factor_expfam(&model, z, theta, n)?;
            let ln_c = ln_chernoff_numeric(&model, z, theta, n)?;
            worst = worst.max((ln_c - ln_m).exp_m1().abs());
        }
        checks.push(
            Check::new(
                format!("chernoff_equality_{name}"),
                worst <= 1e-9,
                format!("{cells} random triples, largest relative gap {worst:.3e}"),
            )
            .value("max_relative_gap", worst),
        );
    }

    let mut holds = true;
    let mut smallest = f64::INFINITY;
    let (lo, hi) = (1e-6f64.ln(), 50f64.ln());
    for i in 0..500 {
        let z = (lo + (hi - lo) * i as f64 / 499.0).exp();
        let c = chi_square_tail_check(z)?;
        holds &= c.holds;
        smallest = smallest.min(c.rhs / c.lhs);
    }
    checks.push(
        Check::new(
            "chi_square_inequality",
            holds,
            format!("500 points on [1e-6, 50], smallest rhs/lhs {smallest:.6}"),
        )
        .value("min_rhs_over_lhs", smallest),
    );
    Ok(checks)
}


fn coverage_suite(config: &BoundConfig) -> Result<Vec<Check>, CliError> {
    let mut checks = Vec::new();
    let grid = parse_grid("0.005:0.995:0.005")?;
    let bernoulli = DistributionSpec::bernoulli(0.5)?;
    let (eps, delta) = (0.05, 0.05);
    let chen = chen_binomial_n_with(eps, delta, config)?;
    let ch = chernoff_hoeffding_n(eps, delta)?;
    for (name, n) in [("binomial_abs_chen", chen.n), ("binomial_abs_chernoff", ch.n)] {
        let c = coverage_exact(&bernoulli, n, CoverageTarget::AbsoluteMargin { eps }, &grid)?;
        checks.push(
            Check::new(
                name,
                c.min_coverage > 1.0 - delta,
                format!("n={n}, eps={eps}: min coverage {:.6} at p={}", c.min_coverage, c.argmin),
            )
            .value("n", n as f64)
            .value("min_coverage", c.min_coverage)
            .value("argmin", c.argmin),
        );
    }

    let (eps, delta) = (0.2, 0.05);
    let inverse = inverse_binomial_gamma_with(eps, delta, true, config)?;
    let c = coverage_exact(&bernoulli, inverse.n, CoverageTarget::RelativeMargin { eps }, &parse_grid("0.05:0.95:0.05")?)?;
    checks.push(
        Check::new(
            "inverse_binomial_refined",
            c.min_coverage > 1.0 - delta,
            format!(
                "gamma={}, eps={eps}: min coverage {:.6} at p={}",
                inverse.n, c.min_coverage, c.argmin
            ),
        )
        .value("gamma", inverse.n as f64)
        .value("min_coverage", c.min_coverage),
    );

    for n in [10u64, 50] {
        for delta in [0.05, 0.1] {
            let c = coverage_exact(&bernoulli, n, CoverageTarget::Interval { delta }, &grid)?;
            checks.push(
                Check::new(
                    format!("ci_bernoulli_n{n}_delta{delta}"),
                    c.min_coverage >= 1.0 - delta,
                    format!("min coverage {:.6} at p={}", c.min_coverage, c.argmin),
                )
                .value("min_coverage", c.min_coverage),
            );
        }
    }
    let hyper = DistributionSpec::hypergeometric(50, 25, 20)?;
    let all_m: Vec<f64> = (0..=50).map(f64::from).collect();
    let c = coverage_exact(&hyper, 1, CoverageTarget::Interval { delta: 0.1 }, &all_m)?;
    checks.push(
        Check::new(
            "ci_hypergeometric_N50_n20",
            c.min_coverage >= 0.9,
            format!("delta=0.1: min coverage {:.6} at M={}", c.min_coverage, c.argmin),
        )
        .value("min_coverage", c.min_coverage),
    );

    // both denominators of the gamma size at k = 1, eps = 0.2, delta = 0.05
    let (shape, eps, delta) = (1.0, 0.2, 0.05);
    let plan = gamma_relative_n_with(shape, eps, delta, config)?;
    let literal_n = plan.aux["literal_n"] as u64;
    let corrected = gamma_relative_coverage(shape, eps, plan.n)?;
    let literal = gamma_relative_coverage(shape, eps, literal_n)?;
    checks.push(
        Check::new(
            "gamma_rel_corrected",
            corrected.value - corrected.error_bound > 1.0 - delta,
            format!("exponent eps - ln(1+eps): n={} coverage {:.6}", plan.n, corrected.value),
        )
        .value("n", plan.n as f64)
        .value("coverage", corrected.value),
    );
    checks.push(
        Check::new(
            "gamma_rel_literal_undersizes",
            literal.value + literal.error_bound < 1.0 - delta,
            format!(
                "exponent eps + ln(1+eps): n={literal_n} coverage {:.6}, short of {}",
                literal.value,
                1.0 - delta
            ),
        )
        .value("n", literal_n as f64)
        .value("coverage", literal.value),
    );
    Ok(checks)
}

struct McConfig {
    label: &'static str,
    spec: DistributionSpec,
    subset: Vec<f64>,
    theta: f64,
    n: u64,
    alpha: f64,
}

fn mc_configs() -> Result<Vec<McConfig>, Error> {
    let single = |label, spec: DistributionSpec, n, alpha| {
        let theta = spec.parameter().expect("exponential families carry a parameter");
        McConfig {
            label,
            spec,
            subset: vec![theta],
            theta,
            n,
            alpha,
        }
    };
    let pair = |label, spec: DistributionSpec, subset: [f64; 2], n, alpha| {
        let theta = spec.parameter().expect("exponential families carry a parameter");
        McConfig {
            label,
            spec,
            subset: subset.to_vec(),
            theta,
            n,
            alpha,
        }
    };
    Ok(vec![
        single("bernoulli_p0.5_n30", DistributionSpec::bernoulli(0.5)?, 30, 0.1),
        single("poisson_2_n10", DistributionSpec::poisson(2.0)?, 10, 0.05),
        single("bernoulli_p0.2_n50", DistributionSpec::bernoulli(0.2)?, 50, 0.05),
        single("neg_binomial_r2_p0.4_n10", DistributionSpec::neg_binomial(2.0, 0.4)?, 10, 0.1),
        single("normal_n5", DistributionSpec::normal(0.0, 1.0)?, 5, 0.05),
        single("gamma_k2_n8", DistributionSpec::gamma(2.0, 1.0)?, 8, 0.1),
        single("poisson_0.5_n20", DistributionSpec::poisson(0.5)?, 20, 0.2),
        single("bernoulli_p0.05_n40", DistributionSpec::bernoulli(0.05)?, 40, 0.1),
        pair("bernoulli_set_0.3_0.4_at_0.3_n40", DistributionSpec::bernoulli(0.3)?, [0.3, 0.4], 40, 0.1),
        pair("bernoulli_set_0.3_0.4_at_0.4_n40", DistributionSpec::bernoulli(0.4)?, [0.3, 0.4], 40, 0.1),
        pair("poisson_set_1_1.5_at_1_n10", DistributionSpec::poisson(1.0)?, [1.0, 1.5], 10, 0.05),
        pair("normal_set_0_0.5_at_0.5_n4", DistributionSpec::normal(0.5, 1.0)?, [0.0, 0.5], 4, 0.1),
    ])
}

fn mc_suite(seed: u64, replicates: u64) -> Result<Vec<Check>, CliError> {
    let configs = mc_configs()?;
    let within = |estimate: f64, bound: f64| estimate <= bound + 3.0 * (bound / replicates as f64).sqrt();
    let results = configs
        .par_iter()
        .map(|c| {
            if c.subset.len() == 1 {
                mc_lr_tail(&c.spec, c.theta, c.n, c.alpha, replicates, seed)
            } else {
                mc_lr_subset_tail(&c.spec, &c.subset, c.theta, c.n, c.alpha, replicates, seed)
            }
        })
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(configs
        .iter()
        .zip(&results)
        .map(|(c, r)| {
            let half = 0.5 * c.alpha;
            let pass = within(r.overall.value, c.alpha) && within(r.below.value, half) && within(r.above.value, half);
            Check::new(
                format!("lr_tail_{}", c.label),
                pass,
                format!(
                    "alpha={}: overall {:.5}, below {:.5}, above {:.5} over {replicates} replicates",
                    c.alpha, r.overall.value, r.below.value, r.above.value
                ),
            )
            .value("alpha", c.alpha)
            .value("overall", r.overall.value)
            .value("below", r.below.value)
            .value("above", r.above.value)
        })
        .collect())
}
