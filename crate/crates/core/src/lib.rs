//! Likelihood-ratio tail bounds for sample means and related statistics,
//! with explicit sample-size formulas, bisection confidence intervals and
//! exact oracles that certify each bound.

pub mod distributions;
pub mod error;
pub mod inference;
pub mod lr_bounds;
pub mod oracle;
pub mod quadrature;
pub mod sample_size;
pub mod special;

pub use distributions::{exp_family_of, log_density, DistributionSpec, ExpFamilyModel, ExponentialFamily, Family};
pub use error::{Error, Result};
