use std::process::{Command, Output};

use serde_json::Value;
use tailbound::inference::{ConfidenceInterval, ConfidenceRegion};
use tailbound::lr_bounds::BoundReport;
use tailbound::sample_size::SampleSizePlan;

fn tailbound(args: &[&str]) -> Output {
    tailbound_env(args, &[])
}

fn tailbound_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tailbound"));
    cmd.args(args).env_remove("TAILBOUND_CBE");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn records(out: &Output) -> Vec<Value> {
    stdout(out)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap_or_else(|e| panic!("{e}: {l}")))
        .collect()
}

fn single(out: &Output) -> Value {
    let mut r = records(out);
    assert_eq!(r.len(), 1, "{}", stdout(out));
    r.remove(0)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs()
}

#[test]
fn bound_example() {
    let out = tailbound(&[
        "bound", "--dist", "binomial", "--p", "0.3", "--n", "100", "--z", "0.5", "--side", "upper", "--format", "json",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rec = single(&out);
    assert_eq!(rec["schema_version"], "1");
    assert_eq!(rec["command"], "bound");
    let r = &rec["results"];
    // exp(n M(z, p)) with M(z, p) = z ln(p/z) + (1 - z) ln((1 - p)/(1 - z))
    let m = (50.0 * (0.3f64 / 0.5).ln() + 50.0 * (0.7f64 / 0.5).ln()).exp();
    assert!(close(r["m_factor"].as_f64().unwrap(), m, 1e-13));
    assert!(close(r["delta"].as_f64().unwrap(), 0.04785, 1e-12));
    assert_eq!(r["refined"], true);
    let bound = r["bound"].as_f64().unwrap();
    assert!(close(bound, (0.5 + r["delta"].as_f64().unwrap()) * r["m_factor"].as_f64().unwrap(), 1e-15));
    assert!(stderr(&out).contains("bernoulli upper tail"));
}

#[test]
fn sample_size_examples() {
    let out = tailbound(&["sample-size", "binomial-abs", "--eps", "0.05", "--delta", "0.05", "--method", "chernoff"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(single(&out)["results"]["n"], 738);
    let out = tailbound(&["sample-size", "binomial-abs", "--eps", "0.05", "--delta", "0.05"]);
    let rec = single(&out);
    assert_eq!(rec["results"]["n"], 617);
    assert_eq!(rec["results"]["region_ok"], true);
    let out = tailbound(&["sample-size", "gamma-rel", "--shape", "1", "--eps", "0.2", "--delta", "0.05"]);
    let rec = single(&out);
    assert_eq!(rec["results"]["n"], 188);
    assert_eq!(rec["results"]["aux"]["literal_n"].as_f64(), Some(11.0));
    let out = tailbound(&["sample-size", "inverse-binomial", "--eps", "0.2", "--delta", "0.05", "--method", "basic"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(single(&out)["results"]["method"], "basic_lr");
    let out = tailbound(&["sample-size", "binomial-abs", "--eps", "0.5", "--delta", "0.5", "--method", "exact", "--p-grid", "0.5"]);
    assert_eq!(single(&out)["results"]["n"], 3);
}

#[test]
fn figure_comparison_csv() {
    let out = tailbound(&["figure", "--id", "comparison", "--eps-grid", "0.01:0.1:0.01", "--delta", "0.05", "--out", "csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("eps,n_chernoff,n_chen,improvement"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 10);
    for row in &rows {
        assert_eq!(row.len(), 4);
        let (ch, chen): (u64, u64) = (row[1].parse().unwrap(), row[2].parse().unwrap());
        let imp: f64 = row[3].parse().unwrap();
        assert!(chen < ch);
        assert!(close(imp, (ch - chen) as f64 / ch as f64, 1e-15));
    }
    let eps: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(eps[0], 0.01);
    assert_eq!(eps[9], 0.1);
    assert_eq!((rows[4][1], rows[4][2]), ("738", "617"));
    // figures default to CSV
    let out = tailbound(&["figure", "--id", "region-abs", "--eps-grid", "0.25"]);
    let text = stdout(&out);
    assert!(text.starts_with("eps,delta_limit\n"));
    let limit: f64 = text.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!(close(limit, 2.0 * (-9.0 * 2f64.ln() / 4.0).exp(), 1e-15));
}

fn schema_validator() -> jsonschema::Validator {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/schema/output.schema.json")).unwrap();
    let schema: Value = serde_json::from_str(&text).unwrap();
    jsonschema::validator_for(&schema).expect("schema compiles")
}

fn sample_runs() -> Vec<Vec<&'static str>> {
    vec![
        vec!["bound", "--dist", "binomial", "--p", "0.3", "--n", "100", "--z", "0.5"],
        vec!["bound", "--dist", "binomial", "--p", "0.3", "--n", "10", "--z", "0.5", "--sampling", "inverse"],
        vec!["bound", "--dist", "neg-binomial", "--r", "2", "--p", "0.4", "--n", "3", "--z", "1.5"],
        vec!["bound", "--dist", "poisson", "--lambda", "2", "--n", "5", "--z", "0.4"],
        vec!["bound", "--dist", "hypergeometric", "--population", "50", "--successes", "20", "--draws", "10", "--z", "7"],
        vec!["bound", "--dist", "hypergeometric", "--population", "50", "--successes", "20", "--draws", "10", "--z", "7", "--m-hat", "30"],
        vec!["bound", "--dist", "waiting-time", "--population", "40", "--successes", "10", "--required", "3", "--z", "5"],
        vec!["bound", "--dist", "normal", "--mu", "-1", "--sigma", "2", "--n", "4", "--z", "-3"],
        vec!["bound", "--dist", "gamma", "--shape", "2", "--scale", "3", "--n", "4", "--z", "5"],
        vec!["bound", "--dist", "student-t", "--dof", "3", "--z", "2.5"],
        vec!["bound", "--dist", "f", "--df1", "3", "--df2", "7", "--z", "0.2"],
        vec!["compare", "--dist", "poisson", "--lambda", "2", "--n", "5", "--z-grid", "0:4:0.2"],
        vec!["compare", "--dist", "student-t", "--dof", "4", "--z-grid", "0.5:3:0.5"],
        vec!["sample-size", "binomial-abs", "--eps", "0.05", "--delta", "0.05"],
        vec!["sample-size", "binomial-abs", "--eps", "0.3", "--delta", "0.6"],
        vec!["sample-size", "inverse-binomial", "--eps", "0.1", "--delta", "0.05"],
        vec!["sample-size", "gamma-rel", "--shape", "1", "--eps", "0.2", "--delta", "0.05"],
        vec!["ci", "--dist", "binomial", "--n", "50", "--observed", "0.3", "--delta", "0.05"],
        vec!["ci", "--dist", "binomial", "--n", "20", "--observed", "0", "--delta", "0.05"],
        vec!["ci", "--dist", "hypergeometric", "--population", "50", "--draws", "20", "--observed", "7", "--delta", "0.1"],
        vec!["region", "--dist", "normal", "--sigma", "1", "--n", "10", "--observed", "-0.2", "--alpha", "0.05"],
        vec!["region", "--dist", "gamma", "--shape", "2", "--n", "6", "--observed", "1.5", "--alpha", "0.1"],
        vec!["figure", "--id", "comparison", "--format", "json"],
        vec!["figure", "--id", "region-abs", "--eps-grid", "0.1:0.8:0.1", "--format", "ndjson"],
        vec!["figure", "--id", "region-rel", "--eps-grid", "0.1:0.9:0.2", "--format", "json"],
        vec!["verify", "--suite", "bounds", "--cells", "20", "--seed", "3"],
        vec!["verify", "--suite", "mc", "--replicates", "10000"],
    ]
}

#[test]
fn json_outputs_validate_against_schema() {
    let validator = schema_validator();
    let mut lines = 0;
    for args in sample_runs() {
        let out = tailbound(&args);
        assert!(matches!(out.status.code(), Some(0) | Some(3)), "{args:?}: {}", stderr(&out));
        for rec in records(&out) {
            let errors: Vec<String> = validator.iter_errors(&rec).map(|e| e.to_string()).collect();
            assert!(errors.is_empty(), "{args:?}: {errors:?}\n{rec}");
            lines += 1;
        }
    }
    assert!(lines > 80);
    // the schema is not vacuous
    let bad = serde_json::json!({"schema_version": "1", "command": "bound", "query": {}, "results": {"bound": 2.0}});
    assert!(!validator.is_valid(&bad));
}

/// Maximal runs of number characters outside JSON strings.
fn number_tokens(line: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let (mut in_string, mut escaped) = (false, false);
    let mut current = String::new();
    for c in line.chars() {
        if in_string {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            continue;
        }
        let starts = c.is_ascii_digit() || c == '-';
        if starts || (!current.is_empty() && matches!(c, '.' | 'e' | 'E' | '+')) {
            current.push(c);
        } else {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            in_string = c == '"';
        }
    }
    tokens
}

#[test]
fn floats_carry_seventeen_digits_and_round_trip() {
    let mut floats = 0;
    for args in sample_runs() {
        let out = tailbound(&args);
        for line in stdout(&out).lines() {
            for token in number_tokens(line) {
                if token.contains(['.', 'e']) {
                    let mantissa = token.split('e').next().unwrap();
                    let digits = mantissa.chars().filter(char::is_ascii_digit).count();
                    assert_eq!(digits, 17, "{token} in {line}");
                    floats += 1;
                }
            }
        }
    }
    assert!(floats > 500);

    // deserializing into the library types and back loses nothing
    fn check<T: serde::de::DeserializeOwned + serde::Serialize>(args: &[&str]) {
        let out = tailbound(args);
        for rec in records(&out) {
            let typed: T = serde_json::from_value(rec["results"].clone()).unwrap();
            assert_eq!(serde_json::to_value(&typed).unwrap(), rec["results"], "{args:?}");
        }
    }
    check::<BoundReport>(&["bound", "--dist", "gamma", "--shape", "0.7", "--scale", "3", "--n", "4", "--z", "1.1"]);
    check::<BoundReport>(&["bound", "--dist", "binomial", "--p", "0.123456789", "--n", "77", "--z", "0.3"]);
    check::<SampleSizePlan>(&["sample-size", "inverse-binomial", "--eps", "0.1", "--delta", "0.05"]);
    check::<SampleSizePlan>(&["sample-size", "gamma-rel", "--shape", "2.5", "--eps", "0.1", "--delta", "0.01"]);
    check::<ConfidenceInterval>(&["ci", "--dist", "poisson", "--n", "7", "--observed", "1.2857142857142858", "--delta", "0.05"]);
    check::<ConfidenceRegion>(&["region", "--dist", "binomial", "--n", "30", "--observed", "0.1", "--alpha", "0.05"]);
}

#[test]
fn identical_argv_gives_identical_bytes() {
    for args in [
        vec!["verify", "--suite", "mc", "--replicates", "10000", "--seed", "7"],
        vec!["verify", "--suite", "bounds", "--cells", "15", "--seed", "9"],
        vec!["compare", "--dist", "gamma", "--shape", "1.5", "--scale", "1", "--n", "3", "--z-grid", "0.2:3:0.1"],
    ] {
        let a = tailbound(&args);
        let b = tailbound(&args);
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        assert_eq!(a.status.code(), b.status.code());
    }
    let a = tailbound(&["verify", "--suite", "mc", "--replicates", "10000", "--seed", "7"]);
    let b = tailbound(&["verify", "--suite", "mc", "--replicates", "10000", "--seed", "8"]);
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn compare_keeps_grid_order_and_dominance() {
    let out = tailbound(&["compare", "--dist", "binomial", "--p", "0.4", "--n", "25", "--z-grid", "0:1:0.04"]);
    assert_eq!(out.status.code(), Some(0));
    let recs = records(&out);
    assert_eq!(recs.len(), 26);
    for (i, rec) in recs.iter().enumerate() {
        let r = &rec["results"];
        assert!(close(r["z"].as_f64().unwrap(), i as f64 * 0.04, 1e-12));
        let side = if i as f64 * 0.04 >= 0.4 - 1e-12 { "upper" } else { "lower" };
        assert_eq!(r["side"], side, "z index {i}");
        let exact = &r["exact"];
        let bound = r["bound"]["bound"].as_f64().unwrap();
        assert!(exact["value"].as_f64().unwrap() <= bound + exact["error_bound"].as_f64().unwrap());
    }
    let out = tailbound(&["compare", "--dist", "normal", "--mu", "0", "--sigma", "1", "--z-grid", "-2:2:1", "--format", "csv"]);
    let text = stdout(&out);
    assert_eq!(text.lines().next(), Some("z,side,bound,m_factor,delta,exact,exact_error,chernoff"));
    assert_eq!(text.lines().count(), 6);
    assert!(text.lines().all(|l| l.split(',').count() == 8));
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| tailbound(args).status.code();
    assert_eq!(code(&["bound", "--dist", "binomial", "--p", "0.3", "--z", "0.5", "--bogus"]), Some(64));
    assert_eq!(code(&["bound", "--dist", "binomial", "--p", "0.3"]), Some(64));
    assert_eq!(code(&["bound", "--dist", "binomial", "--z", "0.5"]), Some(64));
    assert_eq!(code(&["frobnicate"]), Some(64));
    assert_eq!(code(&["compare", "--dist", "poisson", "--lambda", "1", "--z-grid", "1:0:0.1"]), Some(64));
    assert_eq!(code(&["bound", "--dist", "binomial", "--p", "0.3", "--z", "0.5", "--format", "csv"]), Some(64));
    assert_eq!(code(&["bound", "--dist", "poisson", "--lambda", "1", "--z", "0.5", "--sampling", "inverse"]), Some(64));
    assert_eq!(code(&["verify", "--suite", "mc", "--replicates", "100"]), Some(64));
    assert_eq!(code(&["bound", "--dist", "binomial", "--p", "1.3", "--z", "0.5"]), Some(2));
    assert_eq!(code(&["bound", "--dist", "binomial", "--p", "0.3", "--z", "0.5", "--side", "lower"]), Some(2));
    assert_eq!(code(&["sample-size", "binomial-abs", "--eps", "1.5", "--delta", "0.05"]), Some(2));
    assert_eq!(code(&["ci", "--dist", "student-t", "--dof", "3", "--observed", "1", "--delta", "0.1"]), Some(2));
    assert_eq!(code(&["--help"]), Some(0));
    assert_eq!(code(&["--version"]), Some(0));

    // region failure still emits the plan
    let out = tailbound(&["sample-size", "binomial-abs", "--eps", "0.3", "--delta", "0.6"]);
    assert_eq!(out.status.code(), Some(3));
    let rec = single(&out);
    assert_eq!(rec["results"]["region_ok"], false);
    assert!(!stderr(&out).is_empty());
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plan.toml");
    std::fs::write(&path, "eps = 0.05\ndelta = 0.05\nmethod = \"chernoff\"\n").unwrap();
    let p = path.to_str().unwrap();
    let out = tailbound(&["sample-size", "binomial-abs", "--config", p]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(single(&out)["results"]["n"], 738);
    let out = tailbound(&["sample-size", "binomial-abs", "--config", p, "--method", "chen"]);
    assert_eq!(single(&out)["results"]["n"], 617);

    let path = dir.path().join("bound.toml");
    std::fs::write(&path, "dist = \"poisson\"\nlambda = 2.0\nn = 5\nz-grid = \"0:1:0.5\"\n").unwrap();
    let out = tailbound(&["compare", "--config", path.to_str().unwrap(), "--n", "10"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let recs = records(&out);
    assert_eq!(recs.len(), 3);
    assert_eq!(recs[0]["query"]["n"], 10);

    std::fs::write(&path, "unknown_key = 1\n").unwrap();
    assert_eq!(tailbound(&["figure", "--id", "comparison", "--config", path.to_str().unwrap()]).status.code(), Some(64));
    std::fs::write(&path, "eps = [").unwrap();
    assert_eq!(tailbound(&["figure", "--id", "comparison", "--config", path.to_str().unwrap()]).status.code(), Some(64));
}

#[test]
fn berry_esseen_constant_override() {
    let args = ["bound", "--dist", "binomial", "--p", "0.3", "--n", "100", "--z", "0.5"];
    let out = tailbound_env(&args, &[("TAILBOUND_CBE", "0.7056")]);
    assert_eq!(out.status.code(), Some(0));
    assert!(!stderr(&out).contains("warning"));
    let r = &single(&out)["results"];
    assert_eq!(r["c_be"].as_f64(), Some(0.7056));
    assert!(close(r["delta"].as_f64().unwrap(), 0.07056, 1e-12));

    let out = tailbound_env(&args, &[("TAILBOUND_CBE", "0.9")]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stderr(&out).contains("warning"));
    assert_eq!(single(&out)["results"]["c_be"].as_f64(), Some(0.9));

    for bad in ["abc", "-1", "0"] {
        assert_eq!(tailbound_env(&args, &[("TAILBOUND_CBE", bad)]).status.code(), Some(2), "{bad}");
    }
    // the refined sample size moves with the constant
    let plan = |c: &str| {
        let out = tailbound_env(&["sample-size", "binomial-abs", "--eps", "0.05", "--delta", "0.05"], &[("TAILBOUND_CBE", c)]);
        single(&out)["results"]["n"].as_u64().unwrap()
    };
    assert!(plan("0.7056") > plan("0.4785"));
}

#[test]
fn intervals_and_regions() {
    let out = tailbound(&["ci", "--dist", "binomial", "--n", "50", "--observed", "0.3", "--delta", "0.05"]);
    let r = &single(&out)["results"];
    let (lo, hi) = (r["lower"].as_f64().unwrap(), r["upper"].as_f64().unwrap());
    assert!(lo < 0.3 && 0.3 < hi);
    let out = tailbound(&["ci", "--dist", "hypergeometric", "--population", "50", "--draws", "20", "--observed", "7", "--delta", "0.1"]);
    let r = &single(&out)["results"];
    assert!(r["lower"].as_f64().unwrap() >= 7.0 && r["upper"].as_f64().unwrap() <= 37.0);
    let out = tailbound(&["region", "--dist", "normal", "--sigma", "1", "--n", "10", "--observed", "-0.2", "--alpha", "0.05"]);
    let r = &single(&out)["results"];
    // M = exp(-n (theta - x)^2 / 2) crosses alpha/2 at x +/- sqrt(2 ln(2/alpha) / n)
    let half = (2.0 * (2.0f64 / 0.05).ln() / 10.0).sqrt();
    assert!(close(r["lower"].as_f64().unwrap(), -0.2 - half, 1e-9));
    assert!(close(r["upper"].as_f64().unwrap(), -0.2 + half, 1e-9));
}

#[test]
fn verify_coverage_records_both_gamma_outcomes() {
    let out = tailbound(&["verify", "--suite", "coverage"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let recs = records(&out);
    let find = |name: &str| {
        recs.iter()
            .map(|r| &r["results"])
            .find(|r| r["check"] == name)
            .unwrap_or_else(|| panic!("{name} missing"))
            .clone()
    };
    let corrected = find("gamma_rel_corrected");
    assert_eq!(corrected["pass"], true);
    assert!(corrected["values"]["coverage"].as_f64().unwrap() > 0.95);
    let literal = find("gamma_rel_literal_undersizes");
    assert_eq!(literal["pass"], true);
    assert!(literal["values"]["coverage"].as_f64().unwrap() < 0.95);
    assert_eq!(find("binomial_abs_chen")["values"]["n"].as_f64(), Some(617.0));
    assert_eq!(find("summary")["pass"], true);
    assert!(stderr(&out).lines().all(|l| l.starts_with("PASS")));
}
