//! Speed laws for the uniform-motion displacement model.
//!
//! A closed union of four families, each with analytic cdf, mean, and mean
//! inverse speed, so estimator experiments have exact ground truth.

use crate::error::{Error, Result};
use crate::quad::integrate_piecewise;
use crate::rng::CounterRng;
use crate::specfun::{erf, erf_inv};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedLaw {
    /// All particles share the speed v0 >= 0.
    Degenerate { v0: f64 },
    /// Rayleigh with scale s: density (x/s^2) exp(-x^2 / 2 s^2).
    Rayleigh { scale: f64 },
    /// Half-normal with scale s: density sqrt(2/pi)/s exp(-x^2 / 2 s^2).
    HalfNormal { scale: f64 },
    /// Uniform on [a, b], 0 <= a < b.
    UniformInterval { a: f64, b: f64 },
}

impl SpeedLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SpeedLaw::Degenerate { v0 } => {
                if v0 < 0.0 || !v0.is_finite() {
                    return Err(Error::Config(format!("degenerate speed must be >= 0, got {v0}")));
                }
            }
            SpeedLaw::Rayleigh { scale } | SpeedLaw::HalfNormal { scale } => {
                if !(scale > 0.0) || !scale.is_finite() {
                    return Err(Error::Config(format!("scale must be > 0, got {scale}")));
                }
            }
            SpeedLaw::UniformInterval { a, b } => {
                if !(0.0 <= a && a < b) || !b.is_finite() {
                    return Err(Error::Config(format!(
                        "uniform interval needs 0 <= a < b, got [{a}, {b}]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// F(x) = P(speed <= x).
    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match *self {
            SpeedLaw::Degenerate { v0 } => {
                if x >= v0 {
                    1.0
                } else {
                    0.0
                }
            }
            SpeedLaw::Rayleigh { scale } => -(-x * x / (2.0 * scale * scale)).exp_m1(),
            SpeedLaw::HalfNormal { scale } => erf(x / (scale * std::f64::consts::SQRT_2)),
            SpeedLaw::UniformInterval { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
        }
    }

    /// Density where it exists; `None` for the degenerate (atomic) law.
    pub fn density(&self, x: f64) -> Option<f64> {
        if x < 0.0 {
            return match self {
                SpeedLaw::Degenerate { .. } => None,
                _ => Some(0.0),
            };
        }
        match *self {
            SpeedLaw::Degenerate { .. } => None,
            SpeedLaw::Rayleigh { scale } => {
                Some(x / (scale * scale) * (-x * x / (2.0 * scale * scale)).exp())
            }
            SpeedLaw::HalfNormal { scale } => {
                Some((2.0 / PI).sqrt() / scale * (-x * x / (2.0 * scale * scale)).exp())
            }
            SpeedLaw::UniformInterval { a, b } => {
                if x >= a && x <= b {
                    Some(1.0 / (b - a))
                } else {
                    Some(0.0)
                }
            }
        }
    }

    /// E[speed].
    pub fn mean(&self) -> f64 {
        match *self {
            SpeedLaw::Degenerate { v0 } => v0,
            SpeedLaw::Rayleigh { scale } => scale * FRAC_PI_2.sqrt(),
            SpeedLaw::HalfNormal { scale } => scale * (2.0 / PI).sqrt(),
            SpeedLaw::UniformInterval { a, b } => 0.5 * (a + b),
        }
    }

    /// E[1/speed]; +inf in the long-memory regimes (density positive at 0,
    /// or a zero degenerate speed).
    pub fn mean_inverse(&self) -> f64 {
        match *self {
            SpeedLaw::Degenerate { v0 } => {
                if v0 > 0.0 {
                    1.0 / v0
                } else {
                    f64::INFINITY
                }
            }
            SpeedLaw::Rayleigh { scale } => (PI / 2.0).sqrt() / scale,
            SpeedLaw::HalfNormal { .. } => f64::INFINITY,
            SpeedLaw::UniformInterval { a, b } => {
                if a == 0.0 {
                    f64::INFINITY
                } else {
                    (b / a).ln() / (b - a)
                }
            }
        }
    }

    /// Quantile at p in [0, 1).
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Domain(format!("quantile: p = {p} outside [0, 1)")));
        }
        Ok(match *self {
            SpeedLaw::Degenerate { v0 } => v0,
            SpeedLaw::Rayleigh { scale } => scale * (-2.0 * (-p).ln_1p()).sqrt(),
            SpeedLaw::HalfNormal { scale } => scale * std::f64::consts::SQRT_2 * erf_inv(p)?,
            SpeedLaw::UniformInterval { a, b } => a + (b - a) * p,
        })
    }

    /// Sample one speed.
    pub fn sample(&self, rng: &mut CounterRng) -> f64 {
        match *self {
            SpeedLaw::Degenerate { v0 } => v0,
            SpeedLaw::Rayleigh { scale } => scale * (-2.0 * rng.uniform_open0().ln()).sqrt(),
            SpeedLaw::HalfNormal { scale } => {
                use rand_distr::{Distribution, StandardNormal};
                let z: f64 = StandardNormal.sample(rng);
                scale * z.abs()
            }
            SpeedLaw::UniformInterval { a, b } => a + (b - a) * rng.uniform(),
        }
    }

    /// Points where the cdf is not smooth (kernel-quadrature split points).
    pub fn kinks(&self) -> Vec<f64> {
        match *self {
            SpeedLaw::Degenerate { v0 } => vec![v0],
            SpeedLaw::Rayleigh { .. } | SpeedLaw::HalfNormal { .. } => vec![],
            SpeedLaw::UniformInterval { a, b } => vec![a, b],
        }
    }

    /// E[speed | speed <= q] computed by quadrature of x f(x) (tol 1e-8);
    /// exact for the degenerate law.
    pub fn truncated_mean(&self, q: f64) -> Result<f64> {
        if let SpeedLaw::Degenerate { v0 } = *self {
            return Ok(if v0 <= q { v0 } else { 0.0 });
        }
        let mass = self.cdf(q);
        if mass <= 0.0 {
            return Ok(0.0);
        }
        let partial = integrate_piecewise(
            |x| x * self.density(x).unwrap_or(0.0),
            0.0,
            q,
            &self.kinks(),
            1e-10,
            64,
        )?;
        Ok(partial / mass)
    }
}
