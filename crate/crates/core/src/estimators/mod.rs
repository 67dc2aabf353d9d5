//! Estimators of the covariance function, the mean speed, the speed
//! distribution, and the diffusion coefficient.

pub mod cdf;
pub mod corr;
pub mod diffusion;
pub mod speed;
