//! Simulation and nonparametric inference for Smoluchowski count processes.
//!
//! The crate simulates the particle-count process N(t) of independently
//! moving particles seen through a ball-shaped window, for straight-line
//! motion with random speed and for Brownian motion, and implements
//! estimators of the covariance function, the mean particle speed, the speed
//! distribution function (by Mellin-transform inversion), and the diffusion
//! coefficient, each validated against the closed-form layer in [`model`].

pub mod error;
pub mod estimators;
pub mod geometry;
pub mod harness;
pub mod model;
pub mod quad;
pub mod record;
pub mod rng;
pub mod simulate;
pub mod specfun;
pub mod speed;

pub use error::{Error, Result};
pub use estimators::corr::CorrelationCurve;
pub use geometry::ObservationBall;
pub use harness::report::EstimateReport;
pub use model::DisplacementSpec;
pub use record::{CountData, CountRecord, SimConfig};
pub use rng::CounterRng;
pub use simulate::simulate;
pub use speed::SpeedLaw;
