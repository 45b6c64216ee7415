use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use tailbound::inference::{confidence_interval, confidence_region_lr};
use tailbound::lr_bounds::{chernoff_numeric, tail_bound_with, BoundConfig, BoundReport, Sampling, Side, TailQuery};
use tailbound::oracle::{exact_tail, OracleResult};
use tailbound::sample_size::{
    chen_binomial_n_with, chen_delta_limit, chernoff_hoeffding_n, exact_min_n, gamma_relative_n_with, improvement,
    inverse_binomial_gamma_with, inverse_delta_limit, PlanMethod, PlanMode, SampleSizePlan,
};
use tailbound::{exp_family_of, DistributionSpec};

use crate::args::{
    AbsMethod, BinomialAbsArgs, BoundArgs, CiArgs, CompareArgs, FigureArgs, FigureId, GammaRelArgs, InverseArgs,
    InverseMethod, RegionArgs,
};
use crate::dist::{build_spec, resolve_query, sampling};
use crate::error::CliError;
use crate::grid::parse_grid;
use crate::output::{Cell, OutputRecord, Report, Table};

fn side_name(side: Side) -> &'static str {
    match side {
        Side::Upper => "upper",
        Side::Lower => "lower",
    }
}

fn short(v: f64) -> String {
    format!("{v:.6e}")
}

pub fn bound(args: &BoundArgs, config: &BoundConfig) -> Result<Report, CliError> {
    let spec = build_spec(&args.dist, false)?;
    let query = resolve_query(&spec, args.n, args.z, args.side, sampling(&args.dist)?, args.m_hat, config);
    let report = tail_bound_with(&query, config)?;
    let summary = format!(
        "{} {} tail at z={}: bound {} (factor {}{})",
        spec.name(),
        side_name(query.side),
        query.z,
        short(report.bound),
        short(report.m_factor),
        report.delta.map_or(String::new(), |d| format!(", delta {}", short(d)))
    );
    Ok(Report {
        records: vec![OutputRecord::new("bound", &query, &report)?],
        summary: vec![summary],
        ..Report::default()
    })
}

#[derive(Debug, Serialize)]
struct ComparePoint {
    z: f64,
    side: Side,
    bound: Option<BoundReport>,
    exact: Option<OracleResult>,
    /// Numerical Chernoff bound; absent outside the exponential families.
    chernoff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn compare_point(query: &TailQuery, config: &BoundConfig) -> ComparePoint {
    let mut point = ComparePoint {
        z: query.z,
        side: query.side,
        bound: None,
        exact: None,
        chernoff: None,
        error: None,
    };
    let outcome = tail_bound_with(query, config).and_then(|b| Ok((b, exact_tail(query)?)));
    match outcome {
        Ok((b, e)) => {
            point.bound = Some(b);
            point.exact = Some(e);
        }
        Err(e) => point.error = Some(e.to_string()),
    }
    if query.sampling == Sampling::Fixed {
        if let (Ok(model), Some(theta)) = (exp_family_of(&query.spec), query.spec.parameter()) {
            point.chernoff = chernoff_numeric(&model, query.z, theta, query.n).ok();
        }
    }
    point
}

pub fn compare(args: &CompareArgs, config: &BoundConfig) -> Result<Report, CliError> {
    let spec = build_spec(&args.dist, false)?;
    let mode = sampling(&args.dist)?;
    let grid = parse_grid(&args.z_grid)?;
    let points: Vec<ComparePoint> = grid
        .par_iter()
        .map(|&z| compare_point(&resolve_query(&spec, args.n, z, args.side, mode, None, config), config))
        .collect();
    let mut report = Report::default();
    let mut table = Table {
        header: vec!["z", "side", "bound", "m_factor", "delta", "exact", "exact_error", "chernoff"],
        rows: Vec::new(),
    };
    let mut worst = 0.0f64;
    let mut errors = 0;
    for point in &points {
        let query = json!({
            "spec": &spec,
            "n": args.n,
            "z": point.z,
            "side": point.side,
            "sampling": mode,
        });
        report.records.push(OutputRecord::new("compare", query, point)?);
        let b = point.bound.as_ref();
        let e = point.exact.as_ref();
        if let (Some(b), Some(e)) = (b, e) {
            if b.bound > 0.0 {
                worst = worst.max(e.value / b.bound);
            }
        } else {
            errors += 1;
        }
        table.rows.push(vec![
            point.z.into(),
            Cell::Text(side_name(point.side).into()),
            b.map(|b| b.bound).into(),
            b.map(|b| b.m_factor).into(),
            b.and_then(|b| b.delta).into(),
            e.map(|e| e.value).into(),
            e.map(|e| e.error_bound).into(),
            point.chernoff.into(),
        ]);
    }
    report.table = Some(table);
    report.summary.push(format!(
        "{} points, largest exact/bound {:.6}, {errors} points without a bound",
        points.len(),
        worst
    ));
    Ok(report)
}

fn plan_report(plan: SampleSizePlan, query: serde_json::Value) -> Result<Report, CliError> {
    let mut summary = vec![format!(
        "{:?} / {:?}: n = {} (threshold {:.6}, zeta {:.6})",
        plan.mode, plan.method, plan.n, plan.threshold, plan.zeta
    )];
    summary.extend(plan.notes.iter().cloned());
    Ok(Report {
        validity_failed: !plan.region_ok,
        records: vec![OutputRecord::new("sample-size", query, &plan)?],
        summary,
        ..Report::default()
    })
}

pub fn sample_size_binomial(args: &BinomialAbsArgs, config: &BoundConfig) -> Result<Report, CliError> {
    let plan = match args.method {
        AbsMethod::Chernoff => chernoff_hoeffding_n(args.eps, args.delta)?,
        AbsMethod::Chen => chen_binomial_n_with(args.eps, args.delta, config)?,
        AbsMethod::Exact => {
            let grid = parse_grid(&args.p_grid)?;
            let n = exact_min_n(args.eps, args.delta, &grid)?;
            let mut aux = BTreeMap::new();
            aux.insert("grid_points".into(), grid.len() as f64);
            SampleSizePlan {
                eps: args.eps,
                delta: args.delta,
                mode: PlanMode::BinomialAbsolute,
                method: PlanMethod::ExactOracle,
                zeta: 0.0,
                aux,
                threshold: n as f64 - 1.0,
                n,
                region_ok: true,
                notes: vec![format!("smallest n whose exact coverage exceeds 1 - delta on the p grid {}", args.p_grid)],
            }
        }
    };
    let method = match args.method {
        AbsMethod::Chernoff => "chernoff",
        AbsMethod::Chen => "chen",
        AbsMethod::Exact => "exact",
    };
    let mut query = json!({
        "mode": "binomial-abs",
        "eps": args.eps,
        "delta": args.delta,
        "method": method,
    });
    if args.method == AbsMethod::Exact {
        query["p_grid"] = json!(args.p_grid);
    }
    plan_report(plan, query)
}

pub fn sample_size_inverse(args: &InverseArgs, config: &BoundConfig) -> Result<Report, CliError> {
    let refined = args.method == InverseMethod::Refined;
    let plan = inverse_binomial_gamma_with(args.eps, args.delta, refined, config)?;
    let query = json!({
        "mode": "inverse-binomial",
        "eps": args.eps,
        "delta": args.delta,
        "method": if refined { "refined" } else { "basic" },
    });
    plan_report(plan, query)
}

pub fn sample_size_gamma(args: &GammaRelArgs, config: &BoundConfig) -> Result<Report, CliError> {
    let plan = gamma_relative_n_with(args.shape, args.eps, args.delta, config)?;
    let query = json!({
        "mode": "gamma-rel",
        "shape": args.shape,
        "eps": args.eps,
        "delta": args.delta,
    });
    plan_report(plan, query)
}

fn estimation_query(spec: &DistributionSpec, n: u64, observed: f64, level_name: &str, level: f64) -> serde_json::Value {
    let mut q = json!({ "spec": spec, "n": n, "observed": observed });
    q[level_name] = json!(level);
    q
}

pub fn ci(args: &CiArgs) -> Result<Report, CliError> {
    let spec = build_spec(&args.dist, true)?;
    sampling(&args.dist)?;
    let interval = confidence_interval(&spec, args.n, args.observed, args.delta)?;
    let mut summary = vec![format!(
        "{:.0}% interval for the {} parameter: [{}, {}]",
        100.0 * (1.0 - args.delta),
        spec.name(),
        interval.lower,
        interval.upper
    )];
    summary.extend(interval.notes.iter().cloned());
    Ok(Report {
        records: vec![OutputRecord::new(
            "ci",
            estimation_query(&spec, args.n, args.observed, "delta", args.delta),
            &interval,
        )?],
        summary,
        ..Report::default()
    })
}

pub fn region(args: &RegionArgs) -> Result<Report, CliError> {
    let spec = build_spec(&args.dist, true)?;
    sampling(&args.dist)?;
    let region = confidence_region_lr(&spec, args.n, args.observed, args.alpha)?;
    let mut summary = vec![format!(
        "likelihood-ratio region at alpha={} for the {} parameter: ({}, {})",
        args.alpha,
        spec.name(),
        region.lower,
        region.upper
    )];
    summary.extend(region.notes.iter().cloned());
    Ok(Report {
        records: vec![OutputRecord::new(
            "region",
            estimation_query(&spec, args.n, args.observed, "alpha", args.alpha),
            &region,
        )?],
        summary,
        ..Report::default()
    })
}

#[derive(Debug, Serialize)]
struct RegionRow {
    eps: f64,
    delta_limit: f64,
}

#[derive(Debug, Serialize)]
struct ComparisonRow {
    eps: f64,
    n_chernoff: u64,
    n_chen: u64,
    improvement: f64,
    region_ok: bool,
}

pub fn figure(args: &FigureArgs, config: &BoundConfig) -> Result<Report, CliError> {
    let (name, default_grid) = match args.id {
        FigureId::RegionAbs => ("region-abs", "0.005:0.745:0.005"),
        FigureId::RegionRel => ("region-rel", "0.01:0.99:0.01"),
        FigureId::Comparison => ("comparison", "0.01:0.1:0.01"),
    };
    let grid_text = args.eps_grid.as_deref().unwrap_or(default_grid);
    let grid = parse_grid(grid_text)?;
    let mut report = Report::default();
    match args.id {
        FigureId::RegionAbs | FigureId::RegionRel => {
            let limit = if args.id == FigureId::RegionAbs {
                chen_delta_limit
            } else {
                inverse_delta_limit
            };
            let mut table = Table {
                header: vec!["eps", "delta_limit"],
                rows: Vec::new(),
            };
            for &eps in &grid {
                let row = RegionRow {
                    eps,
                    delta_limit: limit(eps),
                };
                table.rows.push(vec![row.eps.into(), row.delta_limit.into()]);
                report
                    .records
                    .push(OutputRecord::new("figure", json!({ "id": name, "eps": eps }), &row)?);
            }
            report.table = Some(table);
            report.summary.push(format!(
                "{name}: {} margins; the refined formula applies for delta below delta_limit",
                grid.len()
            ));
        }
        FigureId::Comparison => {
            let rows: Vec<ComparisonRow> = grid
                .par_iter()
                .map(|&eps| {
                    let ch = chernoff_hoeffding_n(eps, args.delta)?;
                    let chen = chen_binomial_n_with(eps, args.delta, config)?;
                    Ok(ComparisonRow {
                        eps,
                        n_chernoff: ch.n,
                        n_chen: chen.n,
                        improvement: improvement(&ch, &chen),
                        region_ok: chen.region_ok,
                    })
                })
                .collect::<Result<_, tailbound::Error>>()?;
            let mut table = Table {
                header: vec!["eps", "n_chernoff", "n_chen", "improvement"],
                rows: Vec::new(),
            };
            for row in &rows {
                table.rows.push(vec![
                    row.eps.into(),
                    row.n_chernoff.into(),
                    row.n_chen.into(),
                    row.improvement.into(),
                ]);
                report.records.push(OutputRecord::new(
                    "figure",
                    json!({ "id": name, "eps": row.eps, "delta": args.delta }),
                    row,
                )?);
            }
            report.table = Some(table);
            let (lo, hi) = rows
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.improvement), hi.max(r.improvement)));
            report.summary.push(format!(
                "comparison at delta={}: improvement {:.2}% to {:.2}% over {} margins",
                args.delta,
                100.0 * lo,
                100.0 * hi,
                rows.len()
            ));
        }
    }
    Ok(report)
}
