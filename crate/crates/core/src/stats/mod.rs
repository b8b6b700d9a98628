//! Cylindrical distributions and their batch and incremental estimators.

pub mod bessel;
mod cylindrical;
mod gaussian;
mod vonmises;

use thiserror::Error;

pub use bessel::{a2, solve_kappa, KAPPA_MAX};
pub use cylindrical::{finalize, mle_cylindrical, CylAccumulator, CylindricalDistribution, DistributionRecord};
pub use gaussian::{mle_gaussian, Gaussian2D, GaussianAccumulator, COVARIANCE_REGULARIZATION};
pub use vonmises::{mle_vonmises, resultant, vonmises_from_resultant, VonMises, VonMisesAccumulator};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("direction vectors cancel out; mean direction undefined")]
    DegenerateDirections,
    #[error("accumulator is empty")]
    EmptyAccumulator,
    #[error("accumulator counts differ (gaussian {gaussian}, von mises {vonmises})")]
    AccumulatorMismatch { gaussian: u64, vonmises: u64 },
    #[error("covariance is not symmetric positive definite")]
    InvalidCovariance,
    #[error("concentration {0} outside [0, KAPPA_MAX]")]
    InvalidConcentration(f64),
}
