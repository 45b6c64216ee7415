use tailbound::lr_bounds::{tail_bound_with, BoundConfig, Sampling, Side, TailQuery};
use tailbound::{DistributionSpec, Error};

use crate::args::{DistArgs, DistName, SamplingArg, SideArg};
use crate::error::CliError;

fn need<T>(value: Option<T>, flag: &str, dist: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("--dist {dist} needs --{flag}")))
}

/// Builds the distribution. With `estimating`, the parameter being
/// estimated may be omitted; a placeholder inside its domain stands in,
/// since only the family and its other parameters matter then.
pub fn build_spec(args: &DistArgs, estimating: bool) -> Result<DistributionSpec, CliError> {
    let or_placeholder = |v: Option<f64>, placeholder: f64, flag: &str, dist: &str| {
        if estimating {
            Ok(v.unwrap_or(placeholder))
        } else {
            need(v, flag, dist)
        }
    };
    let spec = match args.dist {
        DistName::Binomial => DistributionSpec::bernoulli(or_placeholder(args.p, 0.5, "p", "binomial")?),
        DistName::NegBinomial => DistributionSpec::neg_binomial(
            need(args.r, "r", "neg-binomial")?,
            or_placeholder(args.p, 0.5, "p", "neg-binomial")?,
        ),
        DistName::Poisson => DistributionSpec::poisson(or_placeholder(args.lambda, 1.0, "lambda", "poisson")?),
        DistName::Hypergeometric => {
            let successes = match (args.successes, estimating) {
                (Some(m), _) => m,
                (None, true) => 0,
                (None, false) => return Err(CliError::Usage("--dist hypergeometric needs --successes".into())),
            };
            DistributionSpec::hypergeometric(
                need(args.population, "population", "hypergeometric")?,
                successes,
                need(args.draws, "draws", "hypergeometric")?,
            )
        }
        DistName::WaitingTime => DistributionSpec::waiting_time(
            need(args.population, "population", "waiting-time")?,
            need(args.successes, "successes", "waiting-time")?,
            need(args.required, "required", "waiting-time")?,
        ),
        DistName::Normal => DistributionSpec::normal(
            or_placeholder(args.mu, 0.0, "mu", "normal")?,
            need(args.sigma, "sigma", "normal")?,
        ),
        DistName::Gamma => DistributionSpec::gamma(
            need(args.shape, "shape", "gamma")?,
            or_placeholder(args.scale, 1.0, "scale", "gamma")?,
        ),
        DistName::StudentT => DistributionSpec::student_t(need(args.dof, "dof", "student-t")?),
        DistName::F => DistributionSpec::f_dist(need(args.df1, "df1", "f")?, need(args.df2, "df2", "f")?),
    };
    Ok(spec?)
}

pub fn sampling(args: &DistArgs) -> Result<Sampling, CliError> {
    match (args.sampling, args.dist) {
        (SamplingArg::Fixed, _) => Ok(Sampling::Fixed),
        (SamplingArg::Inverse, DistName::Binomial) => Ok(Sampling::Inverse),
        (SamplingArg::Inverse, _) => Err(CliError::Usage("--sampling inverse applies to --dist binomial only".into())),
    }
}

/// The query for `side`; `auto` picks the upper tail unless the bound
/// rejects it as lying below the parameter.
pub fn resolve_query(
    spec: &DistributionSpec,
    n: u64,
    z: f64,
    side: SideArg,
    sampling: Sampling,
    m_hat: Option<u64>,
    config: &BoundConfig,
) -> TailQuery {
    let make = |side| {
        let mut q = TailQuery::new(spec.clone(), n, z, side);
        q.sampling = sampling;
        q.m_hat = m_hat;
        q
    };
    match side {
        SideArg::Upper => make(Side::Upper),
        SideArg::Lower => make(Side::Lower),
        SideArg::Auto => {
            let upper = make(Side::Upper);
            match tail_bound_with(&upper, config) {
                Err(Error::Precondition(_)) => make(Side::Lower),
                _ => upper,
            }
        }
    }
}
