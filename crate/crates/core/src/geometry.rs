//! Geometry of the ball observation region: volumes, the covariogram, and
//! the capsule (reach set) used by the uniform-motion sampler.

use crate::error::{Error, Result};
use crate::specfun::reg_inc_beta;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicU64, Ordering};

/// Unit-ball volumes V_k for k = 0..=10 (V_0 := 1).
pub const UNIT_BALL_VOLUME: [f64; 11] = {
    use std::f64::consts::PI;
    [
        1.0,
        2.0,
        PI,
        4.0 * PI / 3.0,
        PI * PI / 2.0,
        8.0 * PI * PI / 15.0,
        PI * PI * PI / 6.0,
        16.0 * PI * PI * PI / 105.0,
        PI * PI * PI * PI / 24.0,
        32.0 * PI * PI * PI * PI / 945.0,
        PI * PI * PI * PI * PI / 120.0,
    ]
};

pub const MAX_DIM: usize = 10;

/// The closed Euclidean ball of radius r centered at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationBall {
    pub dim: usize,
    pub radius: f64,
}

impl ObservationBall {
    pub fn new(dim: usize, radius: f64) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Config(format!(
                "ball dimension must be in 1..={MAX_DIM}, got {dim}"
            )));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Config(format!("ball radius must be > 0, got {radius}")));
        }
        Ok(ObservationBall { dim, radius })
    }

    /// vol(B) = V_d r^d.
    pub fn volume(&self) -> f64 {
        UNIT_BALL_VOLUME[self.dim] * self.radius.powi(self.dim as i32)
    }

    /// Covariogram g_B at displacement norm s: the volume of the
    /// intersection of B with its translate by a vector of norm s,
    ///
    ///   g_B(s) = vol(B) I((d+1)/2, 1/2; 1 - s^2/(4 r^2)),  s <= 2r,
    ///
    /// and 0 beyond 2r.  Takes the norm rather than a vector: g_B is a ridge
    /// function of the displacement norm.
    pub fn covariogram(&self, displacement_norm: f64) -> f64 {
        debug_assert!(displacement_norm >= 0.0);
        let s = displacement_norm;
        let r = self.radius;
        if s >= 2.0 * r {
            return 0.0;
        }
        let x = 1.0 - s * s / (4.0 * r * r);
        let i = reg_inc_beta((self.dim as f64 + 1.0) / 2.0, 0.5, x.clamp(0.0, 1.0))
            .expect("covariogram: parameters in range");
        self.volume() * i * distortion()
    }

    /// Volume of the Minkowski sum of B with a segment of length L:
    /// V_d r^d + V_{d-1} r^{d-1} L.  This is exactly the reach set
    /// of a particle moving at constant velocity of speed L/T over [0, T].
    pub fn capsule_volume(&self, segment_length: f64) -> f64 {
        debug_assert!(segment_length >= 0.0);
        let r = self.radius;
        let d = self.dim;
        self.volume() + UNIT_BALL_VOLUME[d - 1] * r.powi(d as i32 - 1) * segment_length
    }
}

// Fault-injection point for verification-suite sensitivity tests: a global
// multiplier applied to the covariogram, default 1.  Not part of the public
// contract.
static DISTORTION_BITS: AtomicU64 = AtomicU64::new(0x3FF0_0000_0000_0000); // f64 bits of 1.0

fn distortion() -> f64 {
    f64::from_bits(DISTORTION_BITS.load(Ordering::Relaxed))
}

#[doc(hidden)]
pub fn _set_covariogram_distortion(multiplier: f64) {
    DISTORTION_BITS.store(multiplier.to_bits(), Ordering::Relaxed);
}
