use std::f64::consts::PI;

use nalgebra::Vector2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::bessel::{a2, i0e, solve_kappa, KAPPA_MAX};
use super::StatsError;
use crate::geometry::wrap_angle;

/// Resultant vectors at or below this length have no defined mean direction.
pub const DEGENERATE_RESULTANT: f64 = 1e-9;

/// Below this concentration the sampler draws uniform angles.
const UNIFORM_KAPPA: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VonMises {
    mean_angle: f64,
    concentration: f64,
}

impl VonMises {
    pub fn new(mean_angle: f64, concentration: f64) -> Result<Self, StatsError> {
        if !mean_angle.is_finite() || !(0.0..=KAPPA_MAX).contains(&concentration) {
            return Err(StatsError::InvalidConcentration(concentration));
        }
        Ok(Self { mean_angle: wrap_angle(mean_angle), concentration })
    }

    pub fn mean_angle(&self) -> f64 {
        self.mean_angle
    }

    pub fn concentration(&self) -> f64 {
        self.concentration
    }

    /// Mean resultant length implied by the concentration.
    pub fn mean_resultant_length(&self) -> f64 {
        a2(self.concentration)
    }

    pub fn ln_pdf(&self, phi: f64) -> f64 {
        // exp(κ cos(φ-μ)) / (2π I₀(κ)) written with the scaled Bessel function
        let k = self.concentration;
        k * ((phi - self.mean_angle).cos() - 1.0) - (2.0 * PI).ln() - i0e(k).ln()
    }

    pub fn pdf(&self, phi: f64) -> f64 {
        self.ln_pdf(phi).exp()
    }

    /// Best & Fisher (1979) wrapped-Cauchy envelope rejection sampler.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let k = self.concentration;
        if k < UNIFORM_KAPPA {
            return rng.random_range(-PI..PI);
        }
        let tau = 1.0 + (1.0 + 4.0 * k * k).sqrt();
        let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * k);
        let s = (1.0 + rho * rho) / (2.0 * rho);
        loop {
            let u1: f64 = rng.random();
            let u2: f64 = rng.random();
            let u3: f64 = rng.random();
            let z = (PI * u1).cos();
            let f = (1.0 + s * z) / (s + z);
            let c = k * (s - f);
            if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
                let theta = f.clamp(-1.0, 1.0).acos();
                let signed = if u3 > 0.5 { theta } else { -theta };
                return wrap_angle(self.mean_angle + signed);
            }
        }
    }
}

/// Estimate from the sum of unit direction vectors of `n` angles.
pub fn vonmises_from_resultant(sum: &Vector2<f64>, n: u64) -> Result<VonMises, StatsError> {
    if n == 0 {
        return Err(StatsError::EmptyAccumulator);
    }
    let len = sum.norm();
    if len <= DEGENERATE_RESULTANT {
        return Err(StatsError::DegenerateDirections);
    }
    let rbar = (len / n as f64).min(1.0);
    VonMises::new(sum.y.atan2(sum.x), solve_kappa(rbar))
}

pub fn resultant(angles: &[f64]) -> Vector2<f64> {
    let mut acc = VonMisesAccumulator::default();
    angles.iter().for_each(|&a| acc.push(a));
    acc.direction_sum
}

/// Batch maximum likelihood estimate.
pub fn mle_vonmises(angles: &[f64]) -> Result<VonMises, StatsError> {
    if angles.len() < 2 {
        return Err(StatsError::InsufficientSamples { needed: 2, got: angles.len() });
    }
    let mut sum = Vector2::zeros();
    for &phi in angles {
        let (s, c) = phi.sin_cos();
        sum += Vector2::new(c, s);
    }
    vonmises_from_resultant(&sum, angles.len() as u64)
}

/// Running sum of unit direction vectors.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VonMisesAccumulator {
    pub n: u64,
    pub direction_sum: Vector2<f64>,
}

impl VonMisesAccumulator {
    pub fn push(&mut self, phi: f64) {
        let (s, c) = phi.sin_cos();
        self.n += 1;
        self.direction_sum += Vector2::new(c, s);
    }

    pub fn mean_resultant_length(&self) -> Option<f64> {
        (self.n > 0).then(|| self.direction_sum.norm() / self.n as f64)
    }

    pub fn finalize(&self) -> Result<VonMises, StatsError> {
        vonmises_from_resultant(&self.direction_sum, self.n)
    }
}
