use nalgebra::{Matrix2, Vector2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::StatsError;

/// Added to every estimated covariance so that models built from a single
/// (augmented) demonstration stay invertible.
pub const COVARIANCE_REGULARIZATION: f64 = 1e-12;

const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Bivariate normal over normalized `(r, h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian2D {
    mean: Vector2<f64>,
    covariance: Matrix2<f64>,
    cholesky: Matrix2<f64>,
    inverse: Matrix2<f64>,
    ln_norm: f64,
}

impl Gaussian2D {
    pub fn new(mean: Vector2<f64>, covariance: Matrix2<f64>) -> Result<Self, StatsError> {
        if !mean.iter().chain(covariance.iter()).all(|v| v.is_finite())
            || (covariance[(0, 1)] - covariance[(1, 0)]).abs() > SYMMETRY_TOLERANCE
        {
            return Err(StatsError::InvalidCovariance);
        }
        let covariance = covariance.symmetric_part();
        let chol = covariance.cholesky().ok_or(StatsError::InvalidCovariance)?;
        let l = chol.l();
        let det = l[(0, 0)] * l[(0, 0)] * l[(1, 1)] * l[(1, 1)];
        if !(det > 0.0) {
            return Err(StatsError::InvalidCovariance);
        }
        Ok(Self {
            mean,
            covariance,
            cholesky: l,
            inverse: chol.inverse(),
            ln_norm: -(2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln(),
        })
    }

    pub fn mean(&self) -> &Vector2<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &Matrix2<f64> {
        &self.covariance
    }

    pub fn ln_pdf(&self, x: &Vector2<f64>) -> f64 {
        let d = x - self.mean;
        self.ln_norm - 0.5 * (d.transpose() * self.inverse * d)[(0, 0)]
    }

    pub fn pdf(&self, x: &Vector2<f64>) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector2<f64> {
        let z = Vector2::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal));
        self.mean + self.cholesky * z
    }
}

/// Maximum likelihood fit with `1/n` normalization.
pub fn mle_gaussian(samples: &[Vector2<f64>]) -> Result<Gaussian2D, StatsError> {
    let n = samples.len();
    if n < 2 {
        return Err(StatsError::InsufficientSamples { needed: 2, got: n });
    }
    let mean = samples.iter().sum::<Vector2<f64>>() / n as f64;
    let scatter = samples
        .iter()
        .map(|x| {
            let d = x - mean;
            d * d.transpose()
        })
        .sum::<Matrix2<f64>>();
    Gaussian2D::new(mean, scatter / n as f64 + Matrix2::identity() * COVARIANCE_REGULARIZATION)
}

/// Running mean and scatter matrix, updated one sample at a time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianAccumulator {
    pub n: u64,
    pub mean: Vector2<f64>,
    pub m2: Matrix2<f64>,
}

impl Default for GaussianAccumulator {
    fn default() -> Self {
        Self { n: 0, mean: Vector2::zeros(), m2: Matrix2::zeros() }
    }
}

impl GaussianAccumulator {
    pub fn push(&mut self, x: Vector2<f64>) {
        self.n += 1;
        let n = self.n as f64;
        let delta = x - self.mean;
        // μ_n = μ_{n-1} + (x - μ_{n-1})/n
        // M_n = M_{n-1} + ((n-1)/n) (x - μ_{n-1})(x - μ_{n-1})ᵀ
        self.mean += delta / n;
        self.m2 += delta * delta.transpose() * ((n - 1.0) / n);
    }

    pub fn covariance(&self) -> Option<Matrix2<f64>> {
        (self.n > 0).then(|| self.m2 / self.n as f64)
    }

    pub fn finalize(&self) -> Result<Gaussian2D, StatsError> {
        let cov = self.covariance().ok_or(StatsError::EmptyAccumulator)?;
        Gaussian2D::new(self.mean, cov + Matrix2::identity() * COVARIANCE_REGULARIZATION)
    }
}
