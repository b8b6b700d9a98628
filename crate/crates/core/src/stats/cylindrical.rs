use nalgebra::{Matrix2, Vector2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gaussian::{mle_gaussian, Gaussian2D, GaussianAccumulator};
use super::vonmises::{mle_vonmises, VonMises, VonMisesAccumulator};
use super::StatsError;
use crate::geometry::CylCoords;

/// Joint Gaussian over `(r, h)` times a von Mises over `phi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionRecord", into = "DistributionRecord")]
pub struct CylindricalDistribution {
    pub rh: Gaussian2D,
    pub phi: VonMises,
}

impl CylindricalDistribution {
    pub fn new(rh: Gaussian2D, phi: VonMises) -> Self {
        Self { rh, phi }
    }

    pub fn ln_pdf(&self, c: &CylCoords) -> f64 {
        self.rh.ln_pdf(&Vector2::new(c.r, c.h)) + self.phi.ln_pdf(c.phi)
    }

    pub fn pdf(&self, c: &CylCoords) -> f64 {
        self.ln_pdf(c).exp()
    }

    pub fn mean(&self) -> CylCoords {
        let m = self.rh.mean();
        CylCoords::new(m.x, self.phi.mean_angle(), m.y)
    }

    /// Draws one point; negative radii are clamped to zero.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CylCoords {
        let rh = self.rh.sample(rng);
        let phi = self.phi.sample(rng);
        CylCoords::new(rh.x.max(0.0), phi, rh.y)
    }
}

/// Batch maximum likelihood fit of both factors.
pub fn mle_cylindrical(samples: &[CylCoords]) -> Result<CylindricalDistribution, StatsError> {
    let rh: Vec<_> = samples.iter().map(|c| Vector2::new(c.r, c.h)).collect();
    let phi: Vec<_> = samples.iter().map(|c| c.phi).collect();
    Ok(CylindricalDistribution::new(mle_gaussian(&rh)?, mle_vonmises(&phi)?))
}

/// Sufficient statistics for incremental estimation of a
/// [`CylindricalDistribution`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CylAccumulator {
    pub gaussian: GaussianAccumulator,
    pub vonmises: VonMisesAccumulator,
}

impl CylAccumulator {
    pub fn push(&mut self, c: &CylCoords) {
        self.gaussian.push(Vector2::new(c.r, c.h));
        self.vonmises.push(c.phi);
    }

    pub fn n(&self) -> u64 {
        self.gaussian.n
    }

    pub fn finalize(&self) -> Result<CylindricalDistribution, StatsError> {
        finalize(&self.gaussian, &self.vonmises)
    }
}

pub fn finalize(g: &GaussianAccumulator, v: &VonMisesAccumulator) -> Result<CylindricalDistribution, StatsError> {
    if g.n != v.n {
        return Err(StatsError::AccumulatorMismatch { gaussian: g.n, vonmises: v.n });
    }
    Ok(CylindricalDistribution::new(g.finalize()?, v.finalize()?))
}

/// Persistence record of a distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistributionRecord {
    pub mu_rh: [f64; 2],
    pub sigma_rh: [[f64; 2]; 2],
    pub mu_phi: f64,
    pub kappa_phi: f64,
}

impl From<CylindricalDistribution> for DistributionRecord {
    fn from(d: CylindricalDistribution) -> Self {
        let m = d.rh.mean();
        let s = d.rh.covariance();
        Self {
            mu_rh: [m.x, m.y],
            sigma_rh: [[s[(0, 0)], s[(0, 1)]], [s[(1, 0)], s[(1, 1)]]],
            mu_phi: d.phi.mean_angle(),
            kappa_phi: d.phi.concentration(),
        }
    }
}

impl TryFrom<DistributionRecord> for CylindricalDistribution {
    type Error = StatsError;

    fn try_from(r: DistributionRecord) -> Result<Self, Self::Error> {
        let s = r.sigma_rh;
        let rh =
            Gaussian2D::new(Vector2::new(r.mu_rh[0], r.mu_rh[1]), Matrix2::new(s[0][0], s[0][1], s[1][0], s[1][1]))?;
        Ok(Self::new(rh, VonMises::new(r.mu_phi, r.kappa_phi)?))
    }
}
