//! Inversion-layer integration tests: the psi grid against an independent
//! direct evaluation, the envelope bound, and the noise-free estimator
//! identities.

use smolu::estimators::cdf::{
    cdf_functional_noise_free, geometric_grid, make_flat_kernel, phi, psi_direct_values,
    MellinLine, PsiBuilder,
};
use smolu::model::{corr_uniform, mellin_w, w_eval};
use smolu::{ObservationBall, SpeedLaw};

#[test]
fn psi_grid_agrees_with_direct_quadrature_spot_checks() {
    // direct path: per-point adaptive transforms, different frequency step,
    // Simpson weights; grid path: sampled-sum sweeps plus trapezoid.
    let ball = ObservationBall::new(1, 1.0).unwrap();
    let kern = make_flat_kernel(2).unwrap();
    let x0 = 1.0;
    let h = 0.45; // moderate cutoff keeps the slow direct path feasible
    let line = MellinLine::new(1.0 - 1.0 / 3200f64.ln(), 1.0 / 16.0, 1024.0).unwrap();
    let builder = PsiBuilder::new(x0, h, &ball, &kern, &line).unwrap();
    let probes = [0.31, 0.52, 0.97, 1.43, 2.10];
    let grid = geometric_grid(0.3, 2.2, builder.required_points_per_ln()).unwrap();
    let psi = builder.synthesize(&grid).unwrap();
    let direct = psi_direct_values(
        x0,
        h,
        &ball,
        &kern,
        line.s,
        1.0 / 4.0,
        psi.omega_max_used,
        &probes,
    )
    .unwrap();
    let scale = psi.psi.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    for (k, &t) in probes.iter().enumerate() {
        // synthesize exactly at the probe (per-point sum has no grid error)
        let single = builder.synthesize(&[t * 0.9999999, t]).unwrap();
        let got = single.psi[1];
        let want = direct[k];
        assert!(
            (got - want).abs() <= 1e-6 * scale.max(1.0),
            "t={t}: grid {got} vs direct {want} (scale {scale})"
        );
    }
}

#[test]
fn psi_envelope_bound_with_fitted_constant() {
    // |psi(t)| <= c (2r)^{s-1} t^{-s} (h^{1-s} + x0^{1-s} e^{|s-1|h} h^{-(d+3)/2})
    // across a parameter grid, with one fitted constant (c absorbs the
    // kernel-derivative norms, which are large for bump kernels).
    let ball = ObservationBall::new(1, 1.0).unwrap();
    let kern = make_flat_kernel(2).unwrap();
    let line = MellinLine::for_horizon(3200.0).unwrap();
    let s = line.s;
    let mut worst = 0.0f64;
    for (x0, h) in [(1.0, 0.3), (0.85, 0.35), (1.6, 0.45)] {
        let builder = PsiBuilder::new(x0, h, &ball, &kern, &line).unwrap();
        let grid = geometric_grid(1e-3, 20.0, builder.required_points_per_ln()).unwrap();
        let psi = builder.synthesize(&grid).unwrap();
        let envelope_scale = (2.0f64).powf(s - 1.0)
            * (h.powf(1.0 - s)
                + x0.powf(1.0 - s) * ((1.0f64 - s).abs() * h).exp()
                    * h.powf(-(1.0 + 3.0) / 2.0));
        let m: Vec<f64> = psi
            .t
            .iter()
            .zip(&psi.psi)
            .map(|(t, v)| v.abs() * t.powf(s))
            .collect();
        let sup = m.iter().fold(0.0f64, |a, &b| a.max(b));
        worst = worst.max(sup / envelope_scale);
        // the t^{-s} envelope is the right shape: |psi| t^s decays toward
        // both ends of the lag range, so the supremum is interior
        let edge = m[..m.len() / 50]
            .iter()
            .chain(&m[m.len() - m.len() / 50..])
            .fold(0.0f64, |a, &b| a.max(b));
        assert!(edge <= 0.05 * sup, "no interior envelope: edge {edge} vs sup {sup}");
    }
    // frozen from the observed fit (c ~ 6.8e2) with factor-2 headroom
    assert!(worst <= 1.4e3, "envelope constant blew up: {worst}");
    assert!(worst > 1.0, "envelope test vacuous: {worst}");
}

#[test]
fn absolute_convergence_of_inversion_integrand() {
    // int |phi~ / w~| d omega finite: the sampled integrand has a decayed
    // tail and a finite discrete integral
    let ball = ObservationBall::new(2, 1.0).unwrap();
    let kern = make_flat_kernel(3).unwrap();
    let line = MellinLine::for_horizon(1000.0).unwrap();
    let builder = PsiBuilder::new(1.0, 0.25, &ball, &kern, &line).unwrap();
    assert!(builder.tail_ratio() <= 1e-10);
}

#[test]
fn noise_free_functional_reproduces_phi_integral() {
    // with the true H plugged in, the estimator returns int phi dF:
    // uniform motion, Rayleigh(1), d = 1, x0 = 1, h = 0.1
    let ball = ObservationBall::new(1, 1.0).unwrap();
    let law = SpeedLaw::Rayleigh { scale: 1.0 };
    let kern = make_flat_kernel(2).unwrap();
    let line = MellinLine::for_horizon(3200.0).unwrap();
    let x0 = 1.0;
    let h = 0.1;
    let got = cdf_functional_noise_free(
        |t| corr_uniform(&ball, &law, t),
        &ball,
        x0,
        h,
        &kern,
        &line,
        1e-6,
        1600.0,
        32.0,
    )
    .unwrap();
    // oracle: int phi dF by quadrature over the support pieces
    let f1 = 1.0 - (-0.5f64).exp();
    let phi_df = quad_phi_df(&law, x0, h, &kern);
    assert!(
        (got - phi_df).abs() <= 1e-4,
        "noise-free {got} vs int phi dF {phi_df}"
    );
    // and the target F(1) = 1 - e^{-1/2} is within the smoothing bias
    assert!((got - f1).abs() <= 0.05, "{got} vs F(1) = {f1}");
}

fn quad_phi_df(law: &SpeedLaw, x0: f64, h: f64, kern: &smolu::estimators::cdf::FlatKernel) -> f64 {
    // adaptive Simpson over [0, x0 e^h], independent of the library rules
    fn simpson<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let coarse = (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b));
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let fine = (b - a) / 12.0 * (f(a) + 4.0 * f(lm) + 2.0 * f(m) + 4.0 * f(rm) + f(b));
        if depth > 30 || (fine - coarse).abs() < tol {
            fine
        } else {
            simpson(f, a, m, tol / 2.0, depth + 1) + simpson(f, m, b, tol / 2.0, depth + 1)
        }
    }
    let integrand =
        |x: f64| phi(x0, h, x, kern).unwrap() * law.density(x).unwrap_or(0.0);
    simpson(integrand, 0.0, h, 1e-9, 0)
        + (law.cdf(x0) - law.cdf(h))
        + simpson(integrand, x0, x0 * h.exp(), 1e-9, 0)
}

#[test]
fn noise_free_functional_far_above_support_is_one() {
    // x0 far above the speed support: phi ~ 1 on the support, so the
    // functional lands near 1
    let ball = ObservationBall::new(1, 1.0).unwrap();
    let law = SpeedLaw::UniformInterval { a: 0.5, b: 1.0 };
    let kern = make_flat_kernel(2).unwrap();
    let line = MellinLine::for_horizon(3200.0).unwrap();
    let got = cdf_functional_noise_free(
        |t| corr_uniform(&ball, &law, t),
        &ball,
        5.0,
        0.1,
        &kern,
        &line,
        1e-6,
        1600.0,
        32.0,
    )
    .unwrap();
    assert!((0.95..=1.05).contains(&got), "{got}");
}

#[test]
fn mellin_w_closed_form_vs_quadrature_complex_points() {
    // 20 complex points, tolerance 1e-8 (absolute on the normalized scale)
    use num_complex::Complex64;
    for d in [1usize, 2, 3] {
        let ball = ObservationBall::new(d, 0.8).unwrap();
        for k in 0..7 {
            let z = Complex64::new(0.4 + 0.5 * k as f64, -3.0 + 1.1 * (k * k) as f64);
            let closed = mellin_w(&ball, z).unwrap();
            let oracle = mellin_quad_oracle(&ball, z);
            assert!(
                (closed - oracle).norm() <= 1e-8 * (1.0 + closed.norm()),
                "d={d} z={z}: {closed} vs {oracle}"
            );
        }
    }
}

fn mellin_quad_oracle(ball: &ObservationBall, z: num_complex::Complex64) -> num_complex::Complex64 {
    // composite Simpson in ln t on [ln(t0), ln(2r)] plus the analytic
    // below-t0 tail int_0^{t0} t^{z-1} w dt = t0^z / z (1 + O(t0));
    // independent of the library quadrature
    use num_complex::Complex64;
    let t0 = 1e-9f64;
    let lo = t0.ln();
    let hi = (2.0 * ball.radius).ln();
    let n = 200_000;
    let step = (hi - lo) / n as f64;
    let f = |u: f64| -> Complex64 {
        let t = u.exp();
        (z * u).exp() * w_eval(ball, t)
    };
    let mut acc = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += f(lo + i as f64 * step) * w;
    }
    acc * step / 3.0 + (z * lo).exp() / z
}
