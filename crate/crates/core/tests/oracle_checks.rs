use std::f64::consts::PI;

use tailbound::lr_bounds::{Side, TailQuery};
use tailbound::oracle::{exact_tail, mc_lr_tail, mc_tail, OracleMethod, DEFAULT_SEED};
use tailbound::special::normal_sf;
use tailbound::DistributionSpec;

fn tail(spec: DistributionSpec, n: u64, z: f64, side: Side) -> f64 {
    exact_tail(&TailQuery::new(spec, n, z, side)).unwrap().value
}

#[test]
fn quadrature_matches_closed_forms() {
    // Cauchy is Student t with one degree of freedom: Pr{|X| >= x} = 1 - 2 atan(x) / pi
    let cauchy = DistributionSpec::student_t(1).unwrap();
    for x in [0.1, 1.0, 3.0, 50.0] {
        let want = 1.0 - 2.0 * f64::atan(x) / PI;
        assert!((tail(cauchy.clone(), 1, x, Side::Upper) - want).abs() < 1e-9, "x={x}");
        assert!((tail(cauchy.clone(), 1, x, Side::Lower) - (1.0 - want)).abs() < 1e-9, "x={x}");
    }
    // exponential with mean 2
    let expo = DistributionSpec::gamma(1.0, 2.0).unwrap();
    for x in [0.1f64, 1.0, 2.0, 10.0, 30.0] {
        let want = (-x / 2.0).exp();
        assert!((tail(expo.clone(), 1, x, Side::Upper) - want).abs() < 1e-9, "x={x}");
        assert!((tail(expo.clone(), 1, x, Side::Lower) - (1.0 - want)).abs() < 1e-9, "x={x}");
    }
    // one-degree chi-square: shape 1/2, scale 2, so the estimate X / (1/2) is 2 chi2
    let chi2 = DistributionSpec::gamma(0.5, 2.0).unwrap();
    for c in [0.01f64, 0.5, 1.0, 4.0, 20.0] {
        let want = 2.0 * normal_sf(c.sqrt());
        assert!((tail(chi2.clone(), 1, 2.0 * c, Side::Upper) - want).abs() < 1e-9, "c={c}");
        assert!((tail(chi2.clone(), 1, 2.0 * c, Side::Lower) - (1.0 - want)).abs() < 1e-9, "c={c}");
    }
    // normal mean of 16 draws
    let normal = DistributionSpec::normal(1.0, 2.0).unwrap();
    for z in [-1.0, 0.5, 1.0, 2.3, 4.0] {
        let u = (z - 1.0) * 4.0 / 2.0;
        assert!((tail(normal.clone(), 16, z, Side::Upper) - normal_sf(u)).abs() < 1e-9, "z={z}");
        assert!((tail(normal.clone(), 16, z, Side::Lower) - normal_sf(-u)).abs() < 1e-9, "z={z}");
    }
    // F(2, 2) has Pr{F >= x} = 1 / (1 + x)
    let f22 = DistributionSpec::f_dist(2, 2).unwrap();
    for x in [0.2, 1.0, 5.0] {
        assert!((tail(f22.clone(), 1, x, Side::Upper) - 1.0 / (1.0 + x)).abs() < 1e-9, "x={x}");
        assert!((tail(f22.clone(), 1, x, Side::Lower) - x / (1.0 + x)).abs() < 1e-9, "x={x}");
    }
}

#[test]
fn exact_sums_report_small_error() {
    let cases = [
        TailQuery::new(DistributionSpec::bernoulli(0.3).unwrap(), 200, 0.4, Side::Upper),
        TailQuery::new(DistributionSpec::poisson(3.0).unwrap(), 10, 4.0, Side::Upper),
        TailQuery::new(DistributionSpec::neg_binomial(0.5, 0.3).unwrap(), 3, 4.0, Side::Upper),
        TailQuery::new(DistributionSpec::neg_binomial(2.0, 0.6).unwrap(), 5, 1.2, Side::Lower),
        TailQuery::new(DistributionSpec::hypergeometric(60, 20, 25).unwrap(), 1, 12.0, Side::Upper),
        TailQuery::new(DistributionSpec::waiting_time(40, 10, 3).unwrap(), 1, 9.0, Side::Lower),
    ];
    for q in &cases {
        let r = exact_tail(q).unwrap();
        assert_eq!(r.method, OracleMethod::ExactSum);
        assert!(r.error_bound <= 1e-12, "{q:?}: {}", r.error_bound);
        assert!(r.seed.is_none());
    }
}

#[test]
fn negative_binomial_tails_add_to_one() {
    for (r, p, n) in [(0.5, 0.3, 3u64), (2.0, 0.6, 5), (1.0, 0.05, 2)] {
        let spec = DistributionSpec::neg_binomial(r, p).unwrap();
        let size = n as f64 * r;
        for j in [0.0, 1.0, 4.0, 17.0] {
            let z = 1.0 + j / size;
            let lower = tail(spec.clone(), n, z, Side::Lower);
            let upper = tail(spec.clone(), n, 1.0 + (j + 1.0) / size, Side::Upper);
            assert!((lower + upper - 1.0).abs() < 1e-12, "r={r} p={p} j={j}");
        }
    }
}

#[test]
fn monte_carlo_agrees_with_exact_tails() {
    let configs: Vec<TailQuery> = vec![
        TailQuery::new(DistributionSpec::bernoulli(0.5).unwrap(), 20, 0.65, Side::Upper),
        TailQuery::new(DistributionSpec::bernoulli(0.5).unwrap(), 20, 0.35, Side::Lower),
        TailQuery::new(DistributionSpec::bernoulli(0.1).unwrap(), 50, 0.16, Side::Upper),
        TailQuery::new(DistributionSpec::bernoulli(0.9).unwrap(), 10, 0.8, Side::Lower),
        TailQuery::new(DistributionSpec::bernoulli(0.3).unwrap(), 100, 0.36, Side::Upper),
        TailQuery::new(DistributionSpec::poisson(1.0).unwrap(), 5, 1.6, Side::Upper),
        TailQuery::new(DistributionSpec::poisson(1.0).unwrap(), 5, 0.4, Side::Lower),
        TailQuery::new(DistributionSpec::poisson(4.0).unwrap(), 3, 5.0, Side::Upper),
        TailQuery::new(DistributionSpec::poisson(0.2).unwrap(), 10, 0.5, Side::Upper),
        TailQuery::new(DistributionSpec::neg_binomial(2.0, 0.5).unwrap(), 4, 2.5, Side::Upper),
        TailQuery::new(DistributionSpec::neg_binomial(1.0, 0.3).unwrap(), 3, 2.0, Side::Lower),
        TailQuery::new(DistributionSpec::neg_binomial(0.5, 0.7).unwrap(), 6, 1.2, Side::Upper),
        TailQuery::new(DistributionSpec::normal(0.0, 1.0).unwrap(), 1, 1.0, Side::Upper),
        TailQuery::new(DistributionSpec::normal(0.0, 1.0).unwrap(), 9, -0.5, Side::Lower),
        TailQuery::new(DistributionSpec::normal(3.0, 0.5).unwrap(), 4, 3.4, Side::Upper),
        TailQuery::new(DistributionSpec::gamma(1.0, 1.0).unwrap(), 1, 2.0, Side::Upper),
        TailQuery::new(DistributionSpec::gamma(2.0, 3.0).unwrap(), 5, 2.0, Side::Lower),
        TailQuery::new(DistributionSpec::gamma(0.5, 1.0).unwrap(), 4, 1.5, Side::Upper),
        TailQuery::new(DistributionSpec::gamma(0.7, 2.0).unwrap(), 1, 0.3, Side::Lower),
        TailQuery::new(DistributionSpec::gamma(5.0, 1.0).unwrap(), 10, 1.1, Side::Upper),
    ];
    for (i, q) in configs.iter().enumerate() {
        let exact = exact_tail(q).unwrap().value;
        let mc = mc_tail(q, 40_000, DEFAULT_SEED + i as u64).unwrap();
        let sigma = (exact * (1.0 - exact) / 40_000.0).sqrt();
        assert!(
            (mc.value - exact).abs() <= 4.0 * sigma,
            "{q:?}: mc {} exact {exact}",
            mc.value
        );
        assert_eq!(mc.method, OracleMethod::MonteCarlo);
    }
}

#[test]
fn monte_carlo_examples() {
    let spec = DistributionSpec::bernoulli(0.5).unwrap();
    let r = mc_lr_tail(&spec, 0.5, 30, 0.1, 100_000, DEFAULT_SEED).unwrap();
    assert!(r.overall.value <= 0.1 + r.overall.error_bound);
    // at alpha near 1 realisations with the estimate at the truth keep LR = 1
    let r = mc_lr_tail(&spec, 0.5, 30, 0.999, 10_000, DEFAULT_SEED).unwrap();
    assert!(r.overall.value < 1.0);
    let spec = DistributionSpec::poisson(2.0).unwrap();
    let r = mc_lr_tail(&spec, 2.0, 10, 0.05, 100_000, DEFAULT_SEED).unwrap();
    assert!(r.below.value <= 0.025 + r.below.error_bound);
    assert!(r.above.value <= 0.025 + r.above.error_bound);
}
