use crate::error::CliError;

/// Distance within which `stop` still counts as reached.
const STOP_SLACK: f64 = 1e-12;

fn decimals(text: &str) -> usize {
    let mantissa = text.split(['e', 'E']).next().unwrap_or("");
    mantissa.split('.').nth(1).map_or(0, str::len)
}

fn number(text: &str, what: &str, spec: &str) -> Result<f64, CliError> {
    let v: f64 = text
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("grid {spec:?}: {what} {text:?} is not a number")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("grid {spec:?}: {what} must be finite")))
    }
}

/// Parses `start:stop:step` into `start, start + step, ...` up to `stop`.
/// `stop` is included when a grid point lands within 1e-12 of it. A single
/// number is a one-point grid.
///
/// Points are rounded to the decimals written in `start` and `step` so that
/// `0.01:0.1:0.01` yields `0.03` rather than `0.030000000000000002`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [single] => Ok(vec![number(single, "value", spec)?]),
        [start_s, stop_s, step_s] => {
            let start = number(start_s, "start", spec)?;
            let stop = number(stop_s, "stop", spec)?;
            let step = number(step_s, "step", spec)?;
            if step <= 0.0 {
                return Err(CliError::Usage(format!("grid {spec:?}: step must be positive")));
            }
            if stop < start - STOP_SLACK {
                return Err(CliError::Usage(format!("grid {spec:?}: stop lies below start")));
            }
            let count = ((stop - start + STOP_SLACK) / step).floor() as usize + 1;
            if count > 10_000_000 {
                return Err(CliError::Usage(format!("grid {spec:?} has more than 1e7 points")));
            }
            let places = decimals(start_s.trim()).max(decimals(step_s.trim()));
            let scale = 10f64.powi(places as i32);
            let points = (0..count)
                .map(|i| {
                    let x = start + i as f64 * step;
                    if places <= 15 {
                        let r = (x * scale).round() / scale;
                        if (r - x).abs() <= STOP_SLACK * x.abs().max(1.0) {
                            return r;
                        }
                    }
                    x
                })
                .collect();
            Ok(points)
        }
        _ => Err(CliError::Usage(format!(
            "grid {spec:?} must be start:stop:step or a single number"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inclusive_stop() {
        let g = parse_grid("0.01:0.1:0.01").unwrap();
        assert_eq!(g.len(), 10);
        assert_eq!(g[2], 0.03);
        assert_eq!(*g.last().unwrap(), 0.1);
        assert_eq!(parse_grid("0:1:0.3").unwrap(), vec![0.0, 0.3, 0.6, 0.9]);
        assert_eq!(parse_grid("1:3:1").unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(parse_grid("-1:1:1").unwrap(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(parse_grid("0.25").unwrap(), vec![0.25]);
    }

    #[test]
    fn stop_within_slack() {
        let g = parse_grid("0:1.0000000000001:0.5").unwrap();
        assert_eq!(g, vec![0.0, 0.5, 1.0]);
        let g = parse_grid("0:0.9999999999:0.5").unwrap();
        assert_eq!(g, vec![0.0, 0.5]);
    }

    #[test]
    fn rejects_bad_grids() {
        for bad in ["", "1:2", "1:2:0", "1:2:-1", "2:1:0.1", "a:1:0.1", "0:1:0.1:4", "0:inf:1"] {
            assert!(parse_grid(bad).is_err(), "{bad}");
        }
    }
}
