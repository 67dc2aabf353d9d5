//! Closed-form quantities of the count process: correlation functions for
//! both displacement models, the kernel w and its Mellin transform, memory
//! integrals, the scale functionals used by the diffusion estimator, and
//! transition pmfs.  Every estimator in the crate is tested against this
//! layer.

use crate::error::{Error, Result};
use crate::geometry::ObservationBall;
use crate::quad::{integrate_doubling, integrate_piecewise};
use crate::rng::CounterRng;
use crate::specfun::{beta_fn, beta_fn_c, ln_gamma, lower_inc_gamma};
use crate::speed::SpeedLaw;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Particle displacement model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisplacementSpec {
    /// Straight-line motion at a random speed with uniform direction.
    UniformMotion { law: SpeedLaw },
    /// Brownian motion with diffusion coefficient sigma > 0.
    Brownian { sigma: f64 },
}

impl DisplacementSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DisplacementSpec::UniformMotion { law } => law.validate(),
            DisplacementSpec::Brownian { sigma } => {
                if !(*sigma > 0.0) || !sigma.is_finite() {
                    return Err(Error::Config(format!("sigma must be > 0, got {sigma}")));
                }
                Ok(())
            }
        }
    }
}

fn half_beta(d: usize) -> f64 {
    beta_fn((d as f64 + 1.0) / 2.0, 0.5).expect("d >= 1")
}

/// Correlation function H(t) of the uniform-motion process,
///
///   H(t) = (1 / B((d+1)/2, 1/2)) int_0^1 F(2 r sqrt(y) / t)
///          (1-y)^{(d-1)/2} y^{-1/2} dy,  H(0) = 1.
///
/// Evaluated after the substitution y = sin^2(theta), which removes the
/// endpoint singularity; the integrand is then smooth between cdf kinks.
pub fn corr_uniform(ball: &ObservationBall, law: &SpeedLaw, t: f64) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::Domain(format!("corr_uniform: t = {t} < 0")));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    let r = ball.radius;
    let d = ball.dim;
    if let SpeedLaw::Degenerate { v0 } = *law {
        // H(t) = g_B(v0 t) / vol(B)
        return Ok(ball.covariogram(v0 * t) / ball.volume());
    }
    let scale = 2.0 * r / t;
    let breaks: Vec<f64> = law
        .kinks()
        .iter()
        .filter(|&&x| x > 0.0 && x < scale)
        .map(|&x| (x / scale).asin())
        .collect();
    let val = integrate_piecewise(
        |th| 2.0 * th.cos().powi(d as i32) * law.cdf(scale * th.sin()),
        0.0,
        std::f64::consts::FRAC_PI_2,
        &breaks,
        1e-9,
        128,
    )
    .map_err(|_| Error::Quadrature(format!("corr_uniform at t = {t}")))?;
    Ok((val / half_beta(d)).clamp(0.0, 1.0))
}

/// The fixed scale function J(u) with H(t) = J(sigma^2 t):
///
///   J(u) = (1 / (B((d+1)/2, 1/2) Gamma(d/2)))
///          int_0^1 gamma(d/2; 2 r^2 y / u) (1-y)^{(d-1)/2} y^{-1/2} dy.
pub fn brownian_scale_correlation(ball: &ObservationBall, u: f64) -> Result<f64> {
    if u < 0.0 {
        return Err(Error::Domain(format!("scale correlation: u = {u} < 0")));
    }
    if u == 0.0 {
        return Ok(1.0);
    }
    let d = ball.dim;
    let r = ball.radius;
    let a = 2.0 * r * r / u;
    let s = d as f64 / 2.0;
    let gam = ln_gamma(s).exp();
    // Split where the incomplete-gamma argument crosses fixed magnitudes so
    // each panel is smooth even when the transition layer is narrow.
    let mut breaks = Vec::new();
    for c in [0.25, 2.0, 12.0, 60.0, 350.0, 700.0] {
        if c < a {
            breaks.push((c / a).sqrt().asin());
        }
    }
    let val = integrate_piecewise(
        |th: f64| {
            let arg = a * th.sin().powi(2);
            let g = if arg > 700.0 {
                gam
            } else {
                lower_inc_gamma(s, arg).expect("in-domain")
            };
            2.0 * th.cos().powi(d as i32) * g
        },
        0.0,
        std::f64::consts::FRAC_PI_2,
        &breaks,
        1e-9,
        128,
    )
    .map_err(|_| Error::Quadrature(format!("brownian correlation at u = {u}")))?;
    Ok((val / (half_beta(d) * gam)).clamp(0.0, 1.0))
}

/// Correlation function of the Brownian-displacement process.
pub fn corr_brownian(ball: &ObservationBall, sigma: f64, t: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("corr_brownian: sigma = {sigma}")));
    }
    brownian_scale_correlation(ball, sigma * sigma * t)
}

/// w(t) = I((d+1)/2, 1/2; 1 - t^2/(4 r^2)) for t <= 2r, else 0: the
/// covariogram of the ball normalized to w(0) = 1.
pub fn w_eval(ball: &ObservationBall, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    ball.covariogram(t) / ball.volume()
}

/// Mellin transform of w on Re(z) > 0:
///
///   w~(z) = (2r)^z / z * B((d+1)/2, (z+1)/2) / B((d+1)/2, 1/2).
pub fn mellin_w(ball: &ObservationBall, z: Complex64) -> Result<Complex64> {
    if z.re <= 0.0 {
        return Err(Error::Domain(format!("mellin_w: Re(z) = {} <= 0", z.re)));
    }
    let a = (ball.dim as f64 + 1.0) / 2.0;
    let num = beta_fn_c(a, (z + 1.0) / 2.0)?;
    let scale = (z * (2.0 * ball.radius).ln()).exp();
    Ok(scale / z * num / half_beta(ball.dim))
}

/// Memory integral int_0^inf H(t) dt of the uniform-motion process:
/// (2 r B((d+1)/2, 1) / B((d+1)/2, 1/2)) E[1/speed]; +inf in the
/// long-memory regime.
pub fn memory_integral_uniform(ball: &ObservationBall, law: &SpeedLaw) -> f64 {
    let inv = law.mean_inverse();
    if !inv.is_finite() {
        return f64::INFINITY;
    }
    let d = ball.dim as f64;
    let b1 = 2.0 / (d + 1.0); // B((d+1)/2, 1)
    2.0 * ball.radius * b1 / half_beta(ball.dim) * inv
}

/// J_alpha = (2 r^2)^a Gamma(d/2 - a) B(1/2 + a, (d+1)/2)
///           / (a Gamma(d/2) B((d+1)/2, 1/2)),  0 < a < min(1/2, d/2).
pub fn j_alpha(alpha: f64, ball: &ObservationBall) -> Result<f64> {
    let d = ball.dim as f64;
    if !(alpha > 0.0 && alpha < 0.5 && alpha < d / 2.0) {
        return Err(Error::Domain(format!(
            "j_alpha: need 0 < alpha < min(1/2, d/2), got {alpha} at d = {d}"
        )));
    }
    let r = ball.radius;
    let num = (2.0 * r * r).powf(alpha)
        * (ln_gamma(d / 2.0 - alpha) - ln_gamma(d / 2.0)).exp()
        * beta_fn(0.5 + alpha, (d + 1.0) / 2.0)?;
    Ok(num / (alpha * half_beta(ball.dim)))
}

/// Psi_alpha = sigma^{-2 alpha} J_alpha, the scale functional of the true
/// Brownian correlation.
pub fn psi_alpha_true(alpha: f64, ball: &ObservationBall, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("psi_alpha_true: sigma = {sigma}")));
    }
    Ok(sigma.powf(-2.0 * alpha) * j_alpha(alpha, ball)?)
}

/// Transition probability P{N(s+t) = n | N(s) = m} for a stationary process
/// with correlation value `corr` at lag t and marginal mean `rho`:
/// the count decomposes into a Binomial(m, corr) number of survivors plus
/// an independent Poisson(rho (1 - corr)) number of entrants.
pub fn transition_pmf(m: u64, n: u64, corr: f64, rho: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&corr) && rho > 0.0);
    if corr >= 1.0 {
        return if n == m { 1.0 } else { 0.0 };
    }
    let q = 1.0 - corr;
    let mu = rho * q;
    if corr <= 0.0 {
        return poisson_ln_pmf(n, rho).exp();
    }
    let jmax = m.min(n);
    let mut total = 0.0;
    for j in 0..=jmax {
        let ln_binom = ln_choose(m, j) + j as f64 * corr.ln() + (m - j) as f64 * q.ln();
        total += (ln_binom + poisson_ln_pmf(n - j, mu)).exp();
    }
    total
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

fn poisson_ln_pmf(k: u64, mu: f64) -> f64 {
    if mu == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k as f64 * mu.ln() - mu - ln_gamma(k as f64 + 1.0)
}

/// Poisson pmf at k with mean mu (tail terms below ~1e-300 underflow to 0).
pub fn poisson_pmf(k: u64, mu: f64) -> f64 {
    poisson_ln_pmf(k, mu).exp()
}

/// Uniform direction on the (d-1)-sphere.
pub(crate) fn sample_direction(d: usize, rng: &mut CounterRng) -> Vec<f64> {
    if d == 1 {
        return vec![if rng.uniform() < 0.5 { -1.0 } else { 1.0 }];
    }
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Uniform point in the ball of radius r.
pub(crate) fn sample_in_ball(d: usize, r: f64, rng: &mut CounterRng) -> Vec<f64> {
    let dir = sample_direction(d, rng);
    let radius = r * rng.uniform().powf(1.0 / d as f64);
    dir.into_iter().map(|x| x * radius).collect()
}

/// Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub samples: u64,
}

/// Monte-Carlo estimate of lambda E vol{ inter_j B(Y_{t_j}) }, the Poisson
/// mean of the number of particles present at all the given times.
///
/// Each sample draws one displacement path, then one uniform point in the
/// first translated ball; the indicator of membership in all the others is
/// an unbiased estimate of the intersection volume over vol(B).
pub fn mc_joint_persistence(
    ball: &ObservationBall,
    disp: &DisplacementSpec,
    times: &[f64],
    lambda: f64,
    rng: &mut CounterRng,
    samples: u64,
) -> Result<McEstimate> {
    if times.is_empty() {
        return Err(Error::Domain("mc_joint_persistence: empty times".into()));
    }
    if times.windows(2).any(|w| w[0] > w[1]) || times[0] < 0.0 {
        return Err(Error::Domain("mc_joint_persistence: times must be sorted, >= 0".into()));
    }
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("mc_joint_persistence: lambda = {lambda}")));
    }
    disp.validate()?;
    let d = ball.dim;
    let r = ball.radius;
    let k = times.len();
    let mut hits = 0u64;
    let mut path = vec![vec![0.0f64; d]; k];
    for _ in 0..samples {
        match disp {
            DisplacementSpec::UniformMotion { law } => {
                let speed = law.sample(rng);
                let dir = sample_direction(d, rng);
                for (j, row) in path.iter_mut().enumerate() {
                    for (c, dirc) in row.iter_mut().zip(&dir) {
                        *c = speed * dirc * times[j];
                    }
                }
            }
            DisplacementSpec::Brownian { sigma } => {
                let mut prev_t = 0.0;
                let mut pos = vec![0.0f64; d];
                for (j, row) in path.iter_mut().enumerate() {
                    let dt = times[j] - prev_t;
                    if j == 0 {
                        let dt0 = times[0];
                        for p in pos.iter_mut() {
                            let z: f64 = StandardNormal.sample(rng);
                            *p = sigma * dt0.sqrt() * z;
                        }
                    } else if dt > 0.0 {
                        for p in pos.iter_mut() {
                            let z: f64 = StandardNormal.sample(rng);
                            *p += sigma * dt.sqrt() * z;
                        }
                    }
                    row.copy_from_slice(&pos);
                    prev_t = times[j];
                }
            }
        }
        // point uniform in B(Y_{t_1}), i.e. the ball centered at -Y_{t_1}
        let u = sample_in_ball(d, r, rng);
        let inside_all = path.iter().skip(1).all(|y| {
            let mut s = 0.0;
            for c in 0..d {
                let delta = u[c] - path[0][c] + y[c];
                s += delta * delta;
            }
            s <= r * r
        });
        if inside_all {
            hits += 1;
        }
    }
    let p = hits as f64 / samples as f64;
    let rho_scale = lambda * ball.volume();
    Ok(McEstimate {
        mean: rho_scale * p,
        std_err: rho_scale * (p * (1.0 - p) / samples as f64).sqrt(),
        samples,
    })
}

/// int_0^b H(t) dt for a provided correlation function, by refinement.
pub fn integrate_correlation<F>(corr: F, b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    // geometric panels resolve both the fast initial decay and the tail
    let mut total = 0.0;
    let mut lo = 0.0f64;
    let mut hi = (b / 1024.0).min(1e-3 * b.max(1.0));
    loop {
        let up = hi.min(b);
        total += integrate_doubling(
            |t| corr(t).unwrap_or(f64::NAN),
            lo,
            up,
            tol,
            32,
        )?;
        if up >= b {
            return Ok(total);
        }
        lo = up;
        hi *= 2.0;
    }
}
