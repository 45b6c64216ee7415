use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "tailbound",
    version,
    about = "Likelihood-ratio tail bounds, sample sizes and confidence intervals"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bound one tail probability.
    Bound(BoundArgs),
    /// Bound, exact tail and numerical Chernoff bound along a z grid.
    Compare(CompareArgs),
    /// Sample sizes with guaranteed coverage.
    #[command(subcommand)]
    SampleSize(SampleSizeCommand),
    /// Bisection confidence interval.
    Ci(CiArgs),
    /// Likelihood-ratio confidence region.
    Region(RegionArgs),
    /// Check bounds and formulas against the exact oracles.
    Verify(VerifyArgs),
    /// Data series behind the validity-region and comparison plots.
    Figure(FigureArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Ndjson,
    Csv,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML file with defaults for any flag of this subcommand.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output format (`--out` is an alias).
    #[arg(long, alias = "out", value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistName {
    #[value(alias = "bernoulli")]
    Binomial,
    #[value(alias = "negative-binomial")]
    NegBinomial,
    Poisson,
    Hypergeometric,
    WaitingTime,
    #[value(alias = "gaussian")]
    Normal,
    Gamma,
    #[value(alias = "t")]
    StudentT,
    #[value(alias = "f-dist")]
    F,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplingArg {
    Fixed,
    Inverse,
}

/// Family and parameters. Only the flags the family uses are read.
#[derive(Debug, Args)]
pub struct DistArgs {
    #[arg(long, value_enum)]
    pub dist: DistName,
    /// Success probability (binomial, negative binomial).
    #[arg(long)]
    pub p: Option<f64>,
    /// Negative binomial size parameter.
    #[arg(long)]
    pub r: Option<f64>,
    /// Poisson mean.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Population size N (hypergeometric, waiting time).
    #[arg(long)]
    pub population: Option<u64>,
    /// Marked units M in the population.
    #[arg(long)]
    pub successes: Option<u64>,
    /// Number of draws (hypergeometric).
    #[arg(long)]
    pub draws: Option<u64>,
    /// Marked units to wait for (waiting time).
    #[arg(long)]
    pub required: Option<u64>,
    #[arg(long, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Gamma shape k.
    #[arg(long)]
    pub shape: Option<f64>,
    /// Gamma scale.
    #[arg(long)]
    pub scale: Option<f64>,
    /// Student t degrees of freedom.
    #[arg(long)]
    pub dof: Option<u64>,
    /// F numerator degrees of freedom.
    #[arg(long)]
    pub df1: Option<u64>,
    /// F denominator degrees of freedom.
    #[arg(long)]
    pub df2: Option<u64>,
    /// Binomial sampling scheme; with `inverse`, `--n` is the number of successes.
    #[arg(long, value_enum, default_value = "fixed")]
    pub sampling: SamplingArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    Upper,
    Lower,
    /// Upper tail when the threshold lies above the parameter, else lower.
    Auto,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[command(flatten)]
    pub dist: DistArgs,
    /// Sample count (1 for the single-draw families).
    #[arg(long, default_value_t = 1)]
    pub n: u64,
    #[arg(long, allow_negative_numbers = true)]
    pub z: f64,
    #[arg(long, value_enum, default_value = "auto")]
    pub side: SideArg,
    /// Estimate of M for the finite-population families.
    #[arg(long)]
    pub m_hat: Option<u64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub dist: DistArgs,
    #[arg(long, default_value_t = 1)]
    pub n: u64,
    /// Thresholds as start:stop:step.
    #[arg(long, allow_hyphen_values = true)]
    pub z_grid: String,
    #[arg(long, value_enum, default_value = "auto")]
    pub side: SideArg,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Subcommand)]
pub enum SampleSizeCommand {
    /// Proportion with an absolute margin.
    BinomialAbs(BinomialAbsArgs),
    /// Successes needed under inverse sampling for a relative margin.
    InverseBinomial(InverseArgs),
    /// Gamma scale with a relative margin.
    GammaRel(GammaRelArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AbsMethod {
    Chernoff,
    Chen,
    Exact,
}

#[derive(Debug, Args)]
pub struct BinomialAbsArgs {
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, value_enum, default_value = "chen")]
    pub method: AbsMethod,
    /// Grid of p for `--method exact`, as start:stop:step.
    #[arg(long, default_value = "0.01:0.99:0.01")]
    pub p_grid: String,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InverseMethod {
    Basic,
    Refined,
}

#[derive(Debug, Args)]
pub struct InverseArgs {
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, value_enum, default_value = "refined")]
    pub method: InverseMethod,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct GammaRelArgs {
    #[arg(long)]
    pub shape: f64,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub delta: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct CiArgs {
    #[command(flatten)]
    pub dist: DistArgs,
    #[arg(long, default_value_t = 1)]
    pub n: u64,
    /// Observed statistic on the scale used by `bound`.
    #[arg(long, allow_negative_numbers = true)]
    pub observed: f64,
    #[arg(long)]
    pub delta: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct RegionArgs {
    #[command(flatten)]
    pub dist: DistArgs,
    #[arg(long, default_value_t = 1)]
    pub n: u64,
    #[arg(long, allow_negative_numbers = true)]
    pub observed: f64,
    #[arg(long)]
    pub alpha: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Bounds,
    Coverage,
    Mc,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    #[arg(long, default_value_t = tailbound::oracle::DEFAULT_SEED)]
    pub seed: u64,
    /// Random cells per family for the bounds suite.
    #[arg(long, default_value_t = 1000)]
    pub cells: usize,
    /// Replicates per configuration for the mc suite.
    #[arg(long, default_value_t = 100_000)]
    pub replicates: u64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FigureId {
    RegionAbs,
    RegionRel,
    Comparison,
}

#[derive(Debug, Args)]
pub struct FigureArgs {
    #[arg(long, value_enum)]
    pub id: FigureId,
    /// Margins as start:stop:step; each figure has its own default.
    #[arg(long)]
    pub eps_grid: Option<String>,
    /// Confidence parameter for the comparison figure.
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[command(flatten)]
    pub common: Common,
}
