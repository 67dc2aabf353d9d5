//! Gauss–Legendre quadrature with node-doubling refinement.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

/// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1].
///
/// Computed by Newton iteration on P_n with Chebyshev starting points and
/// cached per n.
pub fn gauss_legendre(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static CACHE: OnceLock<Mutex<HashMap<usize, &'static (Vec<f64>, Vec<f64>)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    if let Some(rule) = guard.get(&n) {
        return rule;
    }
    let rule: &'static (Vec<f64>, Vec<f64>) = Box::leak(Box::new(compute_gl(n)));
    guard.insert(n, rule);
    rule
}

fn compute_gl(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev guess for the i-th root of P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_and_deriv(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_and_deriv(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_and_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Fixed n-point Gauss–Legendre integral of f over [a, b].
pub fn integrate_gl<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, n: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(n);
    let c = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut sum = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        sum += w * f(mid + c * x);
    }
    c * sum
}

/// Integral of f over [a, b], doubling the node count from `start_n` until
/// two successive rules agree to `tol` (absolute against max(1,|I|) scaled
/// relative).
pub fn integrate_doubling<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
    start_n: usize,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut n = start_n.max(8);
    let mut prev = integrate_gl(&mut f, a, b, n);
    loop {
        n *= 2;
        let cur = integrate_gl(&mut f, a, b, n);
        if (cur - prev).abs() <= tol * cur.abs().max(1.0) {
            return Ok(cur);
        }
        if n >= 16384 {
            return Err(Error::Quadrature(format!(
                "no convergence on [{a}, {b}] at n={n}: |delta|={:.3e}, cur={cur:.6e}",
                (cur - prev).abs()
            )));
        }
        prev = cur;
    }
}

/// Same as [`integrate_doubling`] but the integrand is split at the interior
/// points in `breaks` before refinement; each smooth piece converges fast.
pub fn integrate_piecewise<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: f64,
    start_n: usize,
) -> Result<f64> {
    let mut pts: Vec<f64> = vec![a];
    for &x in breaks {
        if x > a && x < b {
            pts.push(x);
        }
    }
    pts.push(b);
    pts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    pts.dedup();
    let mut total = 0.0;
    for w in pts.windows(2) {
        total += integrate_doubling(&mut f, w[0], w[1], tol, start_n)?;
    }
    Ok(total)
}

/// Complex-valued integral of f over [a, b] with panels sized to resolve an
/// oscillation of frequency `freq` (integrand ~ e^{i freq t}); each panel is
/// refined by node doubling.
pub fn integrate_oscillatory<F: FnMut(f64) -> Complex64>(
    mut f: F,
    a: f64,
    b: f64,
    freq: f64,
    tol: f64,
) -> Result<Complex64> {
    if a == b {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let len = b - a;
    let period = if freq.abs() > 10.0 {
        2.0 * std::f64::consts::PI / freq.abs()
    } else {
        len
    };
    let n_panels = ((len / period * 6.0).ceil() as usize).clamp(1, 200_000);
    let step = len / n_panels as f64;
    let mut total = Complex64::new(0.0, 0.0);
    for k in 0..n_panels {
        let lo = a + step * k as f64;
        let hi = if k + 1 == n_panels { b } else { lo + step };
        total += integrate_doubling_c(&mut f, lo, hi, tol)?;
    }
    Ok(total)
}

fn integrate_doubling_c<F: FnMut(f64) -> Complex64>(
    f: &mut F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<Complex64> {
    let mut n = 16;
    let mut prev = integrate_gl_c(f, a, b, n);
    loop {
        n *= 2;
        let cur = integrate_gl_c(f, a, b, n);
        if (cur - prev).norm() <= tol * cur.norm().max(1.0) {
            return Ok(cur);
        }
        if n >= 4096 {
            return Err(Error::Quadrature(format!(
                "complex panel [{a}, {b}] did not converge"
            )));
        }
        prev = cur;
    }
}

fn integrate_gl_c<F: FnMut(f64) -> Complex64>(f: &mut F, a: f64, b: f64, n: usize) -> Complex64 {
    let (nodes, weights) = gauss_legendre(n);
    let c = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut sum = Complex64::new(0.0, 0.0);
    for (x, w) in nodes.iter().zip(weights) {
        sum += f(mid + c * x) * *w;
    }
    sum * c
}
