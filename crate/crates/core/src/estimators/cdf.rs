//! Pointwise estimation of the speed distribution function F(x0) by
//! Mellin-transform inversion of the correlation equation
//! H(t) = int w(t x) dF(x).
//!
//! The chain is: a smooth flat kernel K with vanishing moments builds the
//! indicator surrogate phi_{x0,h}; its Mellin transform combines with the
//! closed form of w~ into psi_{x0,h} through the inversion integral along a
//! vertical line Re(z) = s < 1; plugging the estimated correlation into
//! int psi(t) H^(t) dt yields F^_h(x0).
//!
//! psi is evaluated on a shared geometric lag grid: the kernel transforms
//! are sampled once on the frequency grid (spectrally accurate trapezoid
//! sums; the integrands vanish with all derivatives at the endpoints) and
//! the inversion integral becomes a discrete Fourier sum in ln t.

use crate::error::{Error, Result};
use crate::estimators::corr::covariance_at;
use crate::geometry::ObservationBall;
use crate::harness::report::EstimateReport;
use crate::quad::{integrate_doubling, integrate_oscillatory};
#[allow(unused_imports)]
use crate::quad::integrate_piecewise;
use crate::record::CountRecord;
use crate::specfun::ln_gamma;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Log-domain truncation for the kernel's Mellin sampling: K(e^u) is below
/// 1e-300 for u < -7.
const LOG_SUPPORT: f64 = 7.0;

/// Logistic-variable cut: bump(logistic(v)) underflows beyond |v| = 7.
const LOGISTIC_CUT: f64 = 7.0;

#[inline]
fn logistic(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Integral over [0, 1] of a bump-weighted integrand, in the logistic
/// variable y = 1/(1 + e^-v): the essential endpoint singularities of the
/// bump become doubly-exponential decay and Gauss-Legendre converges
/// geometrically again.
fn integrate_bump_weighted<F: FnMut(f64) -> f64>(mut g: F, tol: f64) -> Result<f64> {
    integrate_doubling(
        |v| {
            let y = logistic(v);
            g(y) * y * (1.0 - y)
        },
        -LOGISTIC_CUT,
        LOGISTIC_CUT,
        tol,
        64,
    )
}

/// Smooth kernel K(y) = q(y) exp(-1/(y(1-y))) on (0,1) with unit mass and m
/// vanishing moments; q has degree m+1 and is stored in the shifted-Legendre
/// basis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlatKernel {
    pub m: usize,
    coeffs: Vec<f64>,
    /// int |K|.
    pub l1_norm: f64,
    /// int t^2 K dt (first surviving power moment for m >= 2).
    mu2: f64,
    /// int K ln t dt and int K ln^2 t dt, for the z -> 0 expansion of the
    /// phi transform.
    nu1: f64,
    nu2: f64,
}

fn bump(y: f64) -> f64 {
    if y <= 0.0 || y >= 1.0 {
        0.0
    } else {
        (-1.0 / (y * (1.0 - y))).exp()
    }
}

/// Shifted Legendre polynomials evaluated at y in [0, 1].
fn legendre_shifted(k_max: usize, y: f64, out: &mut [f64]) {
    let x = 2.0 * y - 1.0;
    out[0] = 1.0;
    if k_max >= 1 {
        out[1] = x;
    }
    for k in 2..=k_max {
        let kf = k as f64;
        out[k] = ((2.0 * kf - 1.0) * x * out[k - 1] - (kf - 1.0) * out[k - 2]) / kf;
    }
}

/// Build the order-m flat kernel: solve the square moment system
/// int y^j K(y) dy = delta_{j0}, j = 0..m+1, for q's m+2 coefficients.
pub fn make_flat_kernel(m: usize) -> Result<FlatKernel> {
    if !(1..=12).contains(&m) {
        return Err(Error::Domain(format!("flat kernel order must be in 1..=12, got {m}")));
    }
    let n = m + 2;
    // moment matrix A[j][k] = int y^j P~_k(y) bump(y) dy
    let mut a = vec![vec![0.0f64; n]; n];
    for j in 0..n {
        for k in 0..n {
            a[j][k] = integrate_bump_weighted(
                |y| {
                    let mut basis = [0.0f64; 16];
                    legendre_shifted(n - 1, y, &mut basis);
                    y.powi(j as i32) * basis[k] * bump(y)
                },
                1e-13,
            )?;
        }
    }
    let mut rhs = vec![0.0f64; n];
    rhs[0] = 1.0;
    let (coeffs, cond) = solve_with_condition(&a, &rhs)?;
    if cond > 1e12 {
        return Err(Error::IllConditioned(cond));
    }
    let mut kern = FlatKernel { m, coeffs, l1_norm: 0.0, mu2: 0.0, nu1: 0.0, nu2: 0.0 };
    // |K| has kinks at the sign changes of q: locate them by scanning and
    // split the quadrature there
    let mut sign_changes = Vec::new();
    let scan = 4000;
    let mut prev = kern.eval(0.5 / scan as f64);
    for i in 1..scan {
        let y = (i as f64 + 0.5) / scan as f64;
        let cur = kern.eval(y);
        if prev != 0.0 && cur != 0.0 && prev.signum() != cur.signum() {
            // bisect to the crossing
            let mut lo = (i as f64 - 0.5) / scan as f64;
            let mut hi = y;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if kern.eval(mid).signum() == prev.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            sign_changes.push((0.5 * (lo + hi) / (1.0 - 0.5 * (lo + hi))).ln());
        }
        prev = cur;
    }
    kern.l1_norm = crate::quad::integrate_piecewise(
        |v| {
            let y = logistic(v);
            kern.eval(y).abs() * y * (1.0 - y)
        },
        -LOGISTIC_CUT,
        LOGISTIC_CUT,
        &sign_changes,
        1e-11,
        64,
    )?;
    kern.mu2 = integrate_bump_weighted(|y| y * y * kern.eval(y), 1e-12)?;
    kern.nu1 = integrate_bump_weighted(|y| y.ln() * kern.eval(y), 1e-12)?;
    kern.nu2 = integrate_bump_weighted(|y| y.ln().powi(2) * kern.eval(y), 1e-12)?;
    // post-construction invariants
    let mass = integrate_bump_weighted(|y| kern.eval(y), 1e-13)?;
    if (mass - 1.0).abs() > 1e-10 {
        return Err(Error::Quadrature(format!("flat kernel mass check failed: {mass}")));
    }
    for j in 1..=m {
        let mom = integrate_bump_weighted(|y| y.powi(j as i32) * kern.eval(y), 1e-13)?;
        if mom.abs() > 1e-10 {
            return Err(Error::Quadrature(format!("flat kernel moment {j} check failed: {mom}")));
        }
    }
    Ok(kern)
}

/// Gaussian elimination with partial pivoting; returns the solution and the
/// 1-norm condition estimate ||A||_1 ||A^-1||_1.
fn solve_with_condition(a: &[Vec<f64>], rhs: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = a.len();
    let norm_a = (0..n)
        .map(|k| (0..n).map(|j| a[j][k].abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let solve = |b: &[f64]| -> Result<Vec<f64>> {
        let mut m: Vec<Vec<f64>> = a.to_vec();
        let mut x = b.to_vec();
        for col in 0..n {
            let (piv, _) = m
                .iter()
                .enumerate()
                .skip(col)
                .map(|(i, row)| (i, row[col].abs()))
                .max_by(|p, q| p.1.partial_cmp(&q.1).unwrap())
                .unwrap();
            if m[piv][col].abs() < 1e-300 {
                return Err(Error::IllConditioned(f64::INFINITY));
            }
            m.swap(col, piv);
            x.swap(col, piv);
            for i in col + 1..n {
                let f = m[i][col] / m[col][col];
                for k in col..n {
                    m[i][k] -= f * m[col][k];
                }
                x[i] -= f * x[col];
            }
        }
        for col in (0..n).rev() {
            x[col] /= m[col][col];
            for i in 0..col {
                x[i] -= m[i][col] * x[col];
            }
        }
        Ok(x)
    };
    let solution = solve(rhs)?;
    let mut norm_inv = 0.0f64;
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        let col = solve(&e)?;
        norm_inv = norm_inv.max(col.iter().map(|v| v.abs()).sum());
    }
    Ok((solution, norm_a * norm_inv))
}

impl FlatKernel {
    pub fn eval(&self, y: f64) -> f64 {
        let b = bump(y);
        if b == 0.0 {
            return 0.0;
        }
        let mut basis = [0.0f64; 16];
        legendre_shifted(self.coeffs.len() - 1, y, &mut basis);
        let q: f64 = self
            .coeffs
            .iter()
            .zip(basis.iter())
            .map(|(c, p)| c * p)
            .sum();
        q * b
    }

    /// int_0^s K.
    pub fn integral_prefix(&self, s: f64) -> Result<f64> {
        if s <= 0.0 {
            return Ok(0.0);
        }
        let upper = if s >= 1.0 {
            LOGISTIC_CUT
        } else {
            (s / (1.0 - s)).ln().min(LOGISTIC_CUT)
        };
        if upper <= -LOGISTIC_CUT {
            return Ok(0.0);
        }
        integrate_doubling(
            |v| {
                let y = logistic(v);
                self.eval(y) * y * (1.0 - y)
            },
            -LOGISTIC_CUT,
            upper,
            1e-11,
            64,
        )
    }

    /// Bilateral Laplace transform K^(z) = int_0^1 e^{-z t} K(t) dt;
    /// oscillation-split panels for large |Im z|, logistic variable for the
    /// flat endpoints.
    pub fn laplace(&self, z: Complex64) -> Result<Complex64> {
        integrate_oscillatory(
            |v| {
                let y = logistic(v);
                (-z * y).exp() * self.eval(y) * y * (1.0 - y)
            },
            -LOGISTIC_CUT,
            LOGISTIC_CUT,
            z.im.abs() / 4.0,
            1e-12,
        )
    }

    /// Mellin transform K~(z) = int_0^1 t^{z-1} K(t) dt for Re(z) > 0.
    pub fn mellin(&self, z: Complex64) -> Result<Complex64> {
        if z.re <= 0.0 {
            return Err(Error::Domain(format!("kernel mellin: Re(z) = {} <= 0", z.re)));
        }
        self.mellin_any(z)
    }

    /// The same integral in the logistic variable; entire in z because K
    /// vanishes with all derivatives at 0.
    fn mellin_any(&self, z: Complex64) -> Result<Complex64> {
        integrate_oscillatory(
            |v| {
                let y = logistic(v);
                ((z - 1.0) * y.ln()).exp() * self.eval(y) * y * (1.0 - y)
            },
            -LOGISTIC_CUT,
            LOGISTIC_CUT,
            z.im.abs(),
            1e-12,
        )
    }
}

/// phi_{x0,h}(x): the smooth surrogate of the indicator of [0, x0];
/// equals 1 on [h, x0] and 0 beyond x0 e^h.
pub fn phi(x0: f64, h: f64, x: f64, kern: &FlatKernel) -> Result<f64> {
    check_phi_params(x0, h)?;
    if x <= 0.0 {
        return Ok(0.0);
    }
    let rise = kern.integral_prefix((x / h).min(1.0))?;
    let ratio = (x / x0).ln() / h;
    let fall = if ratio <= 0.0 {
        0.0
    } else {
        kern.integral_prefix(ratio.min(1.0))?
    };
    Ok(rise - fall)
}

fn check_phi_params(x0: f64, h: f64) -> Result<()> {
    if !(h > 0.0 && h < 0.5) {
        return Err(Error::Bandwidth(format!("phi: h = {h} outside (0, 1/2)")));
    }
    if !(x0 > 2.0 * h) {
        return Err(Error::Domain(format!("phi: need x0 > 2h, got x0 = {x0}, h = {h}")));
    }
    Ok(())
}

/// Mellin transform of phi: (1/z)[x0^z K^(-z h) - h^z K~(z + 1)], entire;
/// the removable singularity at z = 0 is filled by the series expansion.
pub fn mellin_phi(x0: f64, h: f64, z: Complex64, kern: &FlatKernel) -> Result<Complex64> {
    check_phi_params(x0, h)?;
    if z.norm() < 1e-4 {
        let l0 = x0.ln();
        let lh = h.ln();
        let c0 = l0 - lh - kern.nu1;
        let c1 = 0.5 * (l0 * l0 + h * h * kern.mu2 - lh * lh - 2.0 * lh * kern.nu1 - kern.nu2);
        return Ok(Complex64::new(c0, 0.0) + z * c1);
    }
    let num = (z * x0.ln()).exp() * kern.laplace(-z * h)? - (z * h.ln()).exp() * kern.mellin_any(z + 1.0)?;
    Ok(num / z)
}

/// Vertical inversion line and frequency grid: Re(z) = s < 1, trapezoid in
/// omega with step `omega_step`, truncated at `omega_max` (the ratio is kept
/// a power of two).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MellinLine {
    pub s: f64,
    pub omega_step: f64,
    pub omega_max: f64,
}

/// Hard cap on the number of frequency steps during auto-doubling.
const MAX_OMEGA_STEPS: f64 = (1 << 20) as f64;

impl MellinLine {
    pub fn new(s: f64, omega_step: f64, omega_max: f64) -> Result<Self> {
        if !(s < 1.0) {
            return Err(Error::Domain(format!("mellin line: s = {s} must be < 1")));
        }
        if !(omega_step > 0.0 && omega_max > omega_step) {
            return Err(Error::Domain("mellin line: bad omega grid".into()));
        }
        let ratio = omega_max / omega_step;
        if (ratio.log2().round() - ratio.log2()).abs() > 1e-9 {
            return Err(Error::Domain(format!(
                "mellin line: omega_max/omega_step = {ratio} is not a power of two"
            )));
        }
        Ok(MellinLine { s, omega_step, omega_max })
    }

    /// Line offset epsilon = 1/ln T (so s = 1 - 1/ln T) with the default
    /// frequency grid.
    pub fn for_horizon(horizon: f64) -> Result<Self> {
        if horizon <= 3.0 {
            return Err(Error::Horizon(format!("mellin line: horizon {horizon} too small")));
        }
        MellinLine::new(1.0 - 1.0 / horizon.ln(), 1.0 / 16.0, 1024.0)
    }
}

/// Geometric lag grid, uniform in ln t.
pub fn geometric_grid(t_min: f64, t_max: f64, points_per_ln: f64) -> Result<Vec<f64>> {
    if !(t_min > 0.0 && t_max > t_min) {
        return Err(Error::Domain(format!("geometric grid: bad range [{t_min}, {t_max}]")));
    }
    let span = (t_max / t_min).ln();
    let n = (span * points_per_ln).ceil() as usize + 1;
    let step = span / (n - 1) as f64;
    Ok((0..n).map(|k| t_min * (k as f64 * step).exp()).collect())
}

/// psi_{x0,h} evaluated on a shared geometric grid, with build diagnostics.
#[derive(Debug, Clone)]
pub struct PsiGrid {
    pub t: Vec<f64>,
    pub psi: Vec<f64>,
    pub line: MellinLine,
    pub x0: f64,
    pub h: f64,
    /// omega_max actually used after auto-doubling.
    pub omega_max_used: f64,
    /// integrand magnitude at truncation relative to its peak.
    pub tail_ratio: f64,
}

/// Prepared inversion integrand: the frequency grid after auto-doubling,
/// reusable for synthesis on any lag grid.
pub struct PsiBuilder {
    g: Vec<Complex64>,
    line: MellinLine,
    x0: f64,
    h: f64,
    omega_max_used: f64,
    tail_ratio: f64,
}

impl PsiBuilder {
    /// Sample the inversion integrand, doubling `omega_max` until its
    /// magnitude at the truncation point is below 1e-10 of its peak
    /// (failure signals h too small for the frequency grid).
    pub fn new(
        x0: f64,
        h: f64,
        ball: &ObservationBall,
        kern: &FlatKernel,
        line: &MellinLine,
    ) -> Result<PsiBuilder> {
        check_phi_params(x0, h)?;
        let eps = 1.0 - line.s;
        let mut omega_max = line.omega_max;
        loop {
            let n_omega = (omega_max / line.omega_step).round() as usize;
            let g = inversion_integrand_grid(x0, h, ball, kern, eps, line.omega_step, n_omega)?;
            let peak = g.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
            let tail_start = n_omega - (n_omega / 50).max(1);
            let tail = g[tail_start..]
                .iter()
                .map(|c| c.norm())
                .fold(0.0f64, f64::max);
            if tail <= 1e-10 * peak {
                // trim past the decay crossing: the synthesis cost and the
                // Nyquist lag density both scale with the kept cutoff
                let mut keep = g.len();
                while keep > 2 && g[keep - 1].norm() <= 1e-10 * peak {
                    keep -= 1;
                }
                let keep = (keep + keep / 50 + 1).min(g.len());
                let mut g = g;
                g.truncate(keep);
                let trimmed_max = (keep - 1) as f64 * line.omega_step;
                return Ok(PsiBuilder {
                    g,
                    line: MellinLine { omega_max, ..*line },
                    x0,
                    h,
                    omega_max_used: trimmed_max,
                    tail_ratio: tail / peak,
                });
            }
            if 2.0 * omega_max / line.omega_step > MAX_OMEGA_STEPS {
                return Err(Error::Truncation(format!(
                    "inversion integrand still at {:.2e} of peak at omega = {omega_max}; \
                     h = {h} is too small for the frequency grid",
                    tail / peak
                )));
            }
            omega_max *= 2.0;
        }
    }

    /// psi carries spectral content in ln t up to the truncation frequency;
    /// a lag grid used as quadrature nodes against psi must sample above
    /// Nyquist for that cutoff.
    pub fn required_points_per_ln(&self) -> f64 {
        (0.45 * self.omega_max_used).max(32.0)
    }

    pub fn omega_max_used(&self) -> f64 {
        self.omega_max_used
    }

    pub fn tail_ratio(&self) -> f64 {
        self.tail_ratio
    }

    /// Evaluate psi on the given geometric lag grid (exact discrete Fourier
    /// sum per point; no aliasing regardless of grid density).
    pub fn synthesize(&self, t_grid: &[f64]) -> Result<PsiGrid> {
        if t_grid.len() < 2 || t_grid.windows(2).any(|w| w[0] >= w[1]) || t_grid[0] <= 0.0 {
            return Err(Error::Domain("psi grid: need a sorted positive lag grid".into()));
        }
        let ln_step = (t_grid[1] / t_grid[0]).ln();
        for w in t_grid.windows(2) {
            if ((w[1] / w[0]).ln() - ln_step).abs() > 1e-6 * ln_step.max(1e-12) {
                return Err(Error::Domain("psi grid: lag grid is not geometric".into()));
            }
        }
        let psi = synthesize_psi(&self.g, self.line.s, self.line.omega_step, t_grid);
        Ok(PsiGrid {
            t: t_grid.to_vec(),
            psi,
            line: self.line,
            x0: self.x0,
            h: self.h,
            omega_max_used: self.omega_max_used,
            tail_ratio: self.tail_ratio,
        })
    }
}

/// Build psi on a lag grid (one-shot wrapper around [`PsiBuilder`]).
pub fn psi_on_grid(
    x0: f64,
    h: f64,
    ball: &ObservationBall,
    kern: &FlatKernel,
    line: &MellinLine,
    t_grid: &[f64],
) -> Result<PsiGrid> {
    PsiBuilder::new(x0, h, ball, kern, line)?.synthesize(t_grid)
}

/// g(w_j) = phi~(eps - i w_j) / w~(eps - i w_j) on w_j = j step, j = 0..n.
///
/// The kernel transforms are sampled by spectrally accurate trapezoid sums
/// (all integrand derivatives vanish at the endpoints), swept across the
/// frequency grid by phase recurrences.
#[doc(hidden)]
pub fn inversion_integrand_grid(
    x0: f64,
    h: f64,
    ball: &ObservationBall,
    kern: &FlatKernel,
    eps: f64,
    step: f64,
    n_omega: usize,
) -> Result<Vec<Complex64>> {
    let max_freq_laplace = (n_omega as f64) * step * h;
    let max_freq_mellin = (n_omega as f64) * step * LOG_SUPPORT;

    // K^(-(eps - i w) h) = int_0^1 K(t) e^{eps h t} e^{-i w h t} dt
    let n1 = ((max_freq_laplace + 500.0) / std::f64::consts::TAU)
        .ceil()
        .max(2048.0) as usize;
    let n1 = n1.next_power_of_two();
    let mut laplace_vals = vec![Complex64::new(0.0, 0.0); n_omega + 1];
    {
        let mut cur: Vec<Complex64> = Vec::with_capacity(n1 - 1);
        let mut phase: Vec<Complex64> = Vec::with_capacity(n1 - 1);
        for k in 1..n1 {
            let t = k as f64 / n1 as f64;
            cur.push(Complex64::new(kern.eval(t) * (eps * h * t).exp() / n1 as f64, 0.0));
            phase.push(Complex64::from_polar(1.0, -step * h * t));
        }
        for val in laplace_vals.iter_mut() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (c, p) in cur.iter_mut().zip(&phase) {
                acc += *c;
                *c *= *p;
            }
            *val = acc;
        }
    }

    // K~(1 + eps - i w) = int_{-U}^0 K(e^u) e^{(1+eps) u} e^{-i w u} du
    let n2 = ((max_freq_mellin + 500.0 * LOG_SUPPORT) / std::f64::consts::TAU)
        .ceil()
        .max(2048.0) as usize;
    let n2 = n2.next_power_of_two();
    let mut mellin_vals = vec![Complex64::new(0.0, 0.0); n_omega + 1];
    {
        let du = LOG_SUPPORT / n2 as f64;
        let mut cur: Vec<Complex64> = Vec::with_capacity(n2 - 1);
        let mut phase: Vec<Complex64> = Vec::with_capacity(n2 - 1);
        for k in 1..n2 {
            let u = -LOG_SUPPORT + k as f64 * du;
            cur.push(Complex64::new(
                kern.eval(u.exp()) * ((1.0 + eps) * u).exp() * du,
                0.0,
            ));
            phase.push(Complex64::from_polar(1.0, -step * u));
        }
        for val in mellin_vals.iter_mut() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (c, p) in cur.iter_mut().zip(&phase) {
                acc += *c;
                *c *= *p;
            }
            *val = acc;
        }
    }

    // assemble phi~ / w~ pointwise
    let d = ball.dim as f64;
    let a_half = (d + 1.0) / 2.0;
    let ln_2r = (2.0 * ball.radius).ln();
    let ln_gamma_a = ln_gamma(a_half);
    let ln_half_beta = ln_gamma(a_half) + ln_gamma(0.5) - ln_gamma(a_half + 0.5);
    let mut g = vec![Complex64::new(0.0, 0.0); n_omega + 1];
    for (j, gj) in g.iter_mut().enumerate() {
        let z = Complex64::new(eps, -(j as f64) * step);
        let phi_t = if z.norm() < 1e-4 {
            mellin_phi(x0, h, z, kern)?
        } else {
            ((z * x0.ln()).exp() * laplace_vals[j] - (z * h.ln()).exp() * mellin_vals[j]) / z
        };
        // w~(z) = (2r)^z / z * B(a, (z+1)/2) / B(a, 1/2) via complex lgamma
        let half = (z + 1.0) / 2.0;
        let ln_b = Complex64::new(ln_gamma_a, 0.0)
            + crate::specfun::ln_gamma_complex(half)?
            - crate::specfun::ln_gamma_complex(half + a_half)?;
        let w_t = (z * ln_2r + ln_b).exp() / z / ln_half_beta.exp();
        *gj = phi_t / w_t;
    }
    Ok(g)
}

/// Trapezoid synthesis of the inversion integral at each grid lag.
fn synthesize_psi(g: &[Complex64], s: f64, step: f64, t_grid: &[f64]) -> Vec<f64> {
    use rayon::prelude::*;
    let n = g.len() - 1;
    let one_lag = |&t: &f64| {
        let lnt = t.ln();
        let rot = Complex64::from_polar(1.0, -step * lnt);
        let mut phase = rot;
        let mut acc = 0.5 * g[0].re;
        for (j, gj) in g.iter().enumerate().skip(1) {
            let w = if j == n { 0.5 } else { 1.0 };
            acc += w * (gj * phase).re;
            phase *= rot;
        }
        2.0 * acc * step / std::f64::consts::TAU * t.powf(-s)
    };
    if t_grid.len() > 256 {
        t_grid.par_iter().map(one_lag).collect()
    } else {
        t_grid.iter().map(one_lag).collect()
    }
}

/// Direct evaluation of psi at the given lags, independent of the grid
/// path: the kernel transforms come from composite Simpson sums in the
/// logistic variable (production sweeps sample tau and ln t with trapezoid
/// recurrences), the frequency step can differ, the line integral is summed
/// with Simpson weights, and phases are recomputed per term.  Spot checks
/// only.
pub fn psi_direct_values(
    x0: f64,
    h: f64,
    ball: &ObservationBall,
    kern: &FlatKernel,
    s: f64,
    omega_step: f64,
    omega_max: f64,
    lags: &[f64],
) -> Result<Vec<f64>> {
    check_phi_params(x0, h)?;
    let eps = 1.0 - s;
    let mut n = (omega_max / omega_step).round() as usize;
    if n % 2 == 1 {
        n += 1;
    }
    // Simpson samples of the kernel in the logistic variable, dense enough
    // for the largest frequency: the laplace phase moves at |omega| h / 4
    // per unit v, the mellin phase at |omega| (1 - y) <= |omega|.
    let n_samp = (((omega_max * 2.0 * LOGISTIC_CUT / std::f64::consts::TAU) * 8.0) as usize)
        .next_power_of_two()
        .max(8192);
    let dv = 2.0 * LOGISTIC_CUT / n_samp as f64;
    let samples: Vec<(f64, f64, f64)> = (0..=n_samp)
        .map(|k| {
            let v = -LOGISTIC_CUT + k as f64 * dv;
            let y = logistic(v);
            let simpson_w = if k == 0 || k == n_samp {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            } / 3.0;
            (y, kern.eval(y) * y * (1.0 - y), simpson_w * dv)
        })
        .collect();
    let laplace_at = |z: Complex64| -> Complex64 {
        samples
            .iter()
            .map(|&(y, f, w)| (-z * y).exp() * f * w)
            .sum()
    };
    let mellin_at = |z: Complex64| -> Complex64 {
        samples
            .iter()
            .map(|&(y, f, w)| ((z - 1.0) * y.ln()).exp() * f * w)
            .sum()
    };
    let mut g = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let z = Complex64::new(eps, -(j as f64) * omega_step);
        let phi_t = if z.norm() < 1e-4 {
            mellin_phi(x0, h, z, kern)?
        } else {
            ((z * x0.ln()).exp() * laplace_at(-z * h) - (z * h.ln()).exp() * mellin_at(z + 1.0))
                / z
        };
        let w_t = crate::model::mellin_w(ball, z)?;
        g.push(phi_t / w_t);
    }
    Ok(lags
        .iter()
        .map(|&t| {
            let lnt = t.ln();
            let mut acc = 0.0;
            for (j, gj) in g.iter().enumerate() {
                let simpson_w = if j == 0 || j == n {
                    1.0
                } else if j % 2 == 1 {
                    4.0
                } else {
                    2.0
                } / 3.0;
                let phase = Complex64::from_polar(1.0, -(j as f64) * omega_step * lnt);
                acc += simpson_w * (gj * phase).re;
            }
            2.0 * acc * omega_step / std::f64::consts::TAU * t.powf(-s)
        })
        .collect())
}

impl PsiGrid {
    /// Trapezoid integral int psi(t) f(t) dt over the grid.
    pub fn integrate_against<F: FnMut(f64) -> Result<f64>>(&self, mut f: F) -> Result<f64> {
        let n = self.t.len();
        let mut vals = Vec::with_capacity(n);
        for i in 0..n {
            vals.push(self.psi[i] * f(self.t[i])?);
        }
        let mut acc = 0.0;
        for i in 0..n - 1 {
            acc += 0.5 * (vals[i] + vals[i + 1]) * (self.t[i + 1] - self.t[i]);
        }
        Ok(acc)
    }
}

/// Options for [`estimate_cdf_at`].
#[derive(Debug, Clone, Copy)]
pub struct CdfOptions {
    /// Smallest lag in the grid; default 1e-4 * 2r / x0 (the natural time
    /// scale at which a speed-x0 particle crosses the window).
    pub t_min: Option<f64>,
    /// Lag-grid resolution: points per unit of ln t.
    pub points_per_ln: f64,
    /// Clamp the estimate to [0, 1] (off by default: the raw functional may
    /// leave the unit interval and that is part of the estimator's law).
    pub clamp: bool,
}

impl Default for CdfOptions {
    fn default() -> Self {
        CdfOptions { t_min: None, points_per_ln: 32.0, clamp: false }
    }
}

/// F^_h(x0) = int_0^{T/2} psi(t) H^(t) dt over the geometric grid, with the
/// raw (unclipped) correlation estimate.
pub fn estimate_cdf_at(
    record: &CountRecord,
    rho: f64,
    ball: &ObservationBall,
    x0: f64,
    h: f64,
    kern: &FlatKernel,
    line: &MellinLine,
    opts: &CdfOptions,
) -> Result<EstimateReport> {
    let horizon = record.horizon();
    let t_min = opts.t_min.unwrap_or(1e-4 * 2.0 * ball.radius / x0);
    let t_max = horizon / 2.0;
    if t_min >= t_max {
        return Err(Error::Horizon(format!(
            "cdf estimate: lag window [{t_min}, {t_max}] is empty"
        )));
    }
    let builder = PsiBuilder::new(x0, h, ball, kern, line)?;
    let density = builder.required_points_per_ln().max(opts.points_per_ln);
    let grid = geometric_grid(t_min, t_max, density)?;
    let psi = builder.synthesize(&grid)?;
    let raw = psi.integrate_against(|t| Ok(covariance_at(record, rho, t)? / rho))?;
    let estimate = if opts.clamp { raw.clamp(0.0, 1.0) } else { raw };
    Ok(EstimateReport::new("cdf_at", estimate, "probability")
        .with_tuning(serde_json::json!({
            "x0": x0,
            "h": h,
            "kernel_order": kern.m,
            "line_s": line.s,
            "omega_step": line.omega_step,
            "omega_max_used": psi.omega_max_used,
            "t_min": t_min,
            "t_max": t_max,
            "rho": rho,
            "clamped": opts.clamp,
        }))
        .with_seed(record.meta.config.seed)
        .with_diagnostics(serde_json::json!({
            "tail_ratio": psi.tail_ratio,
            "raw_estimate": raw,
            "note": "raw functional may fall outside [0, 1]",
        })))
}

/// Noise-free functional: int psi(t) H(t) dt with a supplied correlation
/// function (the estimator with the true H plugged in).
pub fn cdf_functional_noise_free<F>(
    corr: F,
    ball: &ObservationBall,
    x0: f64,
    h: f64,
    kern: &FlatKernel,
    line: &MellinLine,
    t_min: f64,
    t_max: f64,
    points_per_ln: f64,
) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let builder = PsiBuilder::new(x0, h, ball, kern, line)?;
    let density = builder.required_points_per_ln().max(points_per_ln);
    let grid = geometric_grid(t_min, t_max, density)?;
    let psi = builder.synthesize(&grid)?;
    psi.integrate_against(|t| corr(t))
}

/// Rate-driven bandwidth for the cdf estimator:
///
///   h* = [A^-2 (x0^beta + 1)^-2 (1 + 1/rho) (r + M r^{1 v (1+alpha)})
///         eta_T ln T / T]^{1/(2 beta + d + 2)},
///
/// where eta_T is T^-alpha for -1 < alpha < 0, ln T at alpha = 0, and 1 for
/// alpha > 0.
#[allow(clippy::too_many_arguments)]
pub fn default_bandwidth_cdf(
    horizon: f64,
    x0: f64,
    beta: f64,
    a_const: f64,
    m_const: f64,
    alpha_mem: f64,
    rho: f64,
    ball: &ObservationBall,
) -> Result<f64> {
    if !(beta > 0.0) || !(a_const > 0.0) {
        return Err(Error::Domain(format!(
            "cdf bandwidth: need beta > 0 and A > 0, got ({beta}, {a_const})"
        )));
    }
    if !(alpha_mem > -1.0) {
        return Err(Error::Domain(format!("cdf bandwidth: alpha = {alpha_mem} <= -1")));
    }
    if !(horizon > 1.0) || !(rho > 0.0) {
        return Err(Error::Domain("cdf bandwidth: need T > 1, rho > 0".into()));
    }
    let eta = if alpha_mem < 0.0 {
        horizon.powf(-alpha_mem)
    } else if alpha_mem == 0.0 {
        horizon.ln()
    } else {
        1.0
    };
    let r = ball.radius;
    let d = ball.dim as f64;
    let tilde = (r + m_const * r.powf(1.0f64.max(1.0 + alpha_mem))) * eta;
    let inner = a_const.powi(-2)
        * (x0.powf(beta) + 1.0).powi(-2)
        * (1.0 + 1.0 / rho)
        * tilde
        * horizon.ln()
        / horizon;
    Ok(inner.powf(1.0 / (2.0 * beta + d + 2.0)))
}

/// Default vanishing-moment order for smoothness beta: ceil(beta) + 2
/// (strictly more than beta + 1).
pub fn default_kernel_order(beta: f64) -> usize {
    (beta.ceil() as usize + 2).clamp(1, 12)
}
