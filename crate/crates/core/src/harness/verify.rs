//! The verification suite: simulators against the closed-form layer.
//!
//! Six checks: (a) Poisson marginals for both models, (b) covariance
//! estimates against the correlation oracles, (c) empirical transition
//! frequencies against the binomial-Poisson convolution pmf, (d) the
//! Gaussian approximation of standardized counts at large rho, (e) the
//! Mellin reproducing identity, and (f) the scale-functional identity.
//! Failures are report entries, never panics.

use crate::error::Result;
use crate::estimators::cdf::{geometric_grid, make_flat_kernel, phi, MellinLine};
use crate::estimators::corr::covariance_at;
use crate::estimators::diffusion::psi_functional_from_corr;
use crate::geometry::ObservationBall;
use crate::harness::mc::{replicate_seed, run_replicates};
use crate::harness::stats::{
    joint_tv_distance, lattice_normal_gof_pvalue, mean_and_se, poisson_gof_pvalue,
};
use crate::model::{
    corr_brownian, corr_uniform, j_alpha, poisson_pmf, transition_pmf, w_eval,
};
use crate::record::{SimConfig, DEFAULT_BROWNIAN_MARGIN_C, DEFAULT_PARTICLE_CAP, DEFAULT_SPEED_TAIL_EPS};
use crate::simulate::simulate;
use crate::speed::SpeedLaw;
use crate::DisplacementSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyLevel {
    Quick,
    Full,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyCheck {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub level: VerifyLevel,
    pub seed: u64,
    pub checks: Vec<VerifyCheck>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "[{}] {} - {}\n",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            ));
        }
        out.push_str(&format!(
            "verify: {}/{} checks passed\n",
            self.checks.iter().filter(|c| c.pass).count(),
            self.checks.len()
        ));
        out
    }
}

fn uniform_config(law: SpeedLaw, lambda: f64, horizon: f64, seed: u64) -> SimConfig {
    SimConfig {
        ball: ObservationBall { dim: 1, radius: 1.0 },
        disp: DisplacementSpec::UniformMotion { law },
        lambda,
        horizon,
        grid_dt: None,
        seed,
        brownian_margin_c: DEFAULT_BROWNIAN_MARGIN_C,
        speed_tail_eps: DEFAULT_SPEED_TAIL_EPS,
        particle_cap: DEFAULT_PARTICLE_CAP,
    }
}

/// Run the suite at the given level and master seed.
pub fn verify_suite(level: VerifyLevel, seed: u64) -> Result<VerifyReport> {
    let (gof_reps, cov_reps, tv_pairs, gauss_reps) = match level {
        VerifyLevel::Quick => (1200u64, 250u64, 100_000u64, 10_000u64),
        VerifyLevel::Full => (3000, 600, 200_000, 20_000),
    };
    let jobs = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let mut checks = Vec::new();

    checks.push(check_poisson_marginals(seed, gof_reps, jobs)?);
    checks.push(check_covariance_oracle_uniform(seed, cov_reps, jobs)?);
    if level == VerifyLevel::Full {
        checks.push(check_covariance_oracle_brownian(seed, 120, jobs)?);
    }
    checks.push(check_transition_pmf(seed, tv_pairs, jobs)?);
    checks.push(check_gaussian_approximation(seed, gauss_reps, jobs)?);
    checks.push(check_mellin_reproducing_identity()?);
    checks.push(check_psi_j_identity()?);

    Ok(VerifyReport { level, seed, checks })
}

/// (a) pooled chi-square GOF of N(t) against Poisson(rho) at three fixed
/// times, both displacement models, d = 1, rho = 5.
fn check_poisson_marginals(seed: u64, reps: u64, jobs: usize) -> Result<VerifyCheck> {
    let probes = [1.0, 2.0, 3.5];
    let mut detail = String::new();
    let mut pass = true;

    let counts: Vec<[u64; 3]> = run_replicates(reps, jobs, |rep| {
        let mut cfg = uniform_config(SpeedLaw::Rayleigh { scale: 1.0 }, 2.5, 4.0, 0);
        cfg.seed = replicate_seed(seed ^ 0xA1, rep);
        let rec = simulate(&cfg)?;
        Ok([
            rec.value_at(probes[0]),
            rec.value_at(probes[1]),
            rec.value_at(probes[2]),
        ])
    })?;
    let pooled: Vec<u64> = counts.iter().flat_map(|c| c.iter().copied()).collect();
    let p_uniform = poisson_gof_pvalue(&pooled, 5.0)?;
    pass &= p_uniform > 0.001;
    detail.push_str(&format!("uniform-motion GOF p = {p_uniform:.4}; "));

    let counts: Vec<[u64; 3]> = run_replicates(reps, jobs, |rep| {
        let mut cfg = uniform_config(SpeedLaw::Degenerate { v0: 1.0 }, 2.5, 4.0, 0);
        cfg.disp = DisplacementSpec::Brownian { sigma: 1.0 };
        cfg.grid_dt = Some(0.01);
        cfg.seed = replicate_seed(seed ^ 0xA2, rep);
        let rec = simulate(&cfg)?;
        Ok([
            rec.value_at(probes[0]),
            rec.value_at(probes[1]),
            rec.value_at(probes[2]),
        ])
    })?;
    let pooled: Vec<u64> = counts.iter().flat_map(|c| c.iter().copied()).collect();
    let p_brownian = poisson_gof_pvalue(&pooled, 5.0)?;
    pass &= p_brownian > 0.001;
    detail.push_str(&format!("Brownian GOF p = {p_brownian:.4}"));

    Ok(VerifyCheck { name: "poisson_marginals".into(), pass, detail })
}

/// (b) replicate-mean covariance estimates against rho H(t), uniform
/// motion with a degenerate law (the oracle is the covariogram itself).
fn check_covariance_oracle_uniform(seed: u64, reps: u64, jobs: usize) -> Result<VerifyCheck> {
    let ball = ObservationBall::new(1, 1.0)?;
    let law = SpeedLaw::Degenerate { v0: 1.0 };
    let lambda = 1.25;
    let rho = lambda * ball.volume();
    let horizon = 60.0;
    let lags = [0.2, 0.7, 1.2, 1.7, 3.0];
    let estimates: Vec<[f64; 5]> = run_replicates(reps, jobs, |rep| {
        let mut cfg = uniform_config(law, lambda, horizon, 0);
        cfg.seed = replicate_seed(seed ^ 0xB1, rep);
        let rec = simulate(&cfg)?;
        let mut out = [0.0; 5];
        for (i, &t) in lags.iter().enumerate() {
            out[i] = covariance_at(&rec, rho, t)?;
        }
        Ok(out)
    })?;
    let mut pass = true;
    let mut detail = String::new();
    for (i, &t) in lags.iter().enumerate() {
        let vals: Vec<f64> = estimates.iter().map(|e| e[i]).collect();
        let (mean, se) = mean_and_se(&vals);
        let want = rho * corr_uniform(&ball, &law, t)?;
        let ok = (mean - want).abs() <= 3.0 * se;
        pass &= ok;
        detail.push_str(&format!(
            "t={t}: {mean:.4} vs {want:.4} (se {se:.4}){} ",
            if ok { "" } else { " <-" }
        ));
    }
    Ok(VerifyCheck { name: "covariance_oracle_uniform".into(), pass, detail })
}

/// (b') same for the Brownian model in d = 2 (full level).
fn check_covariance_oracle_brownian(seed: u64, reps: u64, jobs: usize) -> Result<VerifyCheck> {
    let ball = ObservationBall::new(2, 1.0)?;
    let sigma = 1.0;
    let lambda = 4.0 / ball.volume();
    let rho = 4.0;
    let horizon = 16.0;
    let lags = [0.1, 0.5, 1.0];
    let estimates: Vec<[f64; 3]> = run_replicates(reps, jobs, |rep| {
        let mut cfg = uniform_config(SpeedLaw::Degenerate { v0: 1.0 }, lambda, horizon, 0);
        cfg.ball = ball;
        cfg.disp = DisplacementSpec::Brownian { sigma };
        cfg.seed = replicate_seed(seed ^ 0xB2, rep);
        let rec = simulate(&cfg)?;
        let mut out = [0.0; 3];
        for (i, &t) in lags.iter().enumerate() {
            out[i] = covariance_at(&rec, rho, t)?;
        }
        Ok(out)
    })?;
    let mut pass = true;
    let mut detail = String::new();
    for (i, &t) in lags.iter().enumerate() {
        let vals: Vec<f64> = estimates.iter().map(|e| e[i]).collect();
        let (mean, se) = mean_and_se(&vals);
        let want = rho * corr_brownian(&ball, sigma, t)?;
        let ok = (mean - want).abs() <= 3.0 * se;
        pass &= ok;
        detail.push_str(&format!(
            "t={t}: {mean:.4} vs {want:.4} (se {se:.4}){} ",
            if ok { "" } else { " <-" }
        ));
    }
    Ok(VerifyCheck { name: "covariance_oracle_brownian".into(), pass, detail })
}

/// (c) empirical joint pmf of (N(s), N(s+t)) against the binomial-Poisson
/// convolution formulas; Degenerate uniform motion, d = 1, rho = 4.
fn check_transition_pmf(seed: u64, pairs_n: u64, jobs: usize) -> Result<VerifyCheck> {
    let ball = ObservationBall::new(1, 1.0)?;
    let law = SpeedLaw::Degenerate { v0: 1.0 };
    let rho = 4.0;
    let lambda = rho / ball.volume();
    let s = 0.3;
    let lag = 1.0; // H = 1 - v t / 2r = 0.5
    let horizon = 1.6;
    let pairs: Vec<(u64, u64)> = run_replicates(pairs_n, jobs, |rep| {
        let mut cfg = uniform_config(law, lambda, horizon, 0);
        cfg.seed = replicate_seed(seed ^ 0xC1, rep);
        let rec = simulate(&cfg)?;
        Ok((rec.value_at(s), rec.value_at(s + lag)))
    })?;
    let h = corr_uniform(&ball, &law, lag)?;
    let tv = joint_tv_distance(&pairs, |m, n| {
        poisson_pmf(m, rho) * transition_pmf(m, n, h, rho)
    });
    Ok(VerifyCheck {
        name: "transition_pmf_tv".into(),
        pass: tv <= 0.02,
        detail: format!("TV distance {tv:.5} (threshold 0.02, H = {h})"),
    })
}

/// (d) standardized marginals (N(t) - rho)/sqrt(rho) at rho = 100 pass a
/// lattice-aware normal GOF at level 0.001.
fn check_gaussian_approximation(seed: u64, reps: u64, jobs: usize) -> Result<VerifyCheck> {
    let rho = 100.0;
    let lambda = rho / 2.0;
    let counts: Vec<u64> = run_replicates(reps, jobs, |rep| {
        let mut cfg = uniform_config(SpeedLaw::Rayleigh { scale: 1.0 }, lambda, 0.4, 0);
        cfg.seed = replicate_seed(seed ^ 0xD1, rep);
        let rec = simulate(&cfg)?;
        Ok(rec.value_at(0.2))
    })?;
    let p = lattice_normal_gof_pvalue(&counts, rho, rho.sqrt(), 8)?;
    Ok(VerifyCheck {
        name: "gaussian_approximation".into(),
        pass: p > 0.001,
        detail: format!("normal GOF p = {p:.4} at rho = {rho}"),
    })
}

/// (e) reproducing identity int psi(t) w(t x) dt = phi(x).
fn check_mellin_reproducing_identity() -> Result<VerifyCheck> {
    use crate::estimators::cdf::PsiBuilder;
    let ball = ObservationBall::new(1, 1.0)?;
    let kern = make_flat_kernel(2)?;
    let x0 = 1.0;
    let h = 0.2;
    let line = MellinLine::for_horizon(3200.0)?;
    let builder = PsiBuilder::new(x0, h, &ball, &kern, &line)?;
    let grid = geometric_grid(1e-6, 6.0, builder.required_points_per_ln())?;
    let psi = builder.synthesize(&grid)?;
    let mut pass = true;
    let mut detail = String::new();
    for x in [0.5 * x0, x0, 1.2 * x0] {
        let lhs = psi.integrate_against(|t| Ok(w_eval(&ball, t * x)))?;
        let rhs = phi(x0, h, x, &kern)?;
        let ok = (lhs - rhs).abs() <= 1e-4;
        pass &= ok;
        detail.push_str(&format!("x={x}: {lhs:.6} vs {rhs:.6}{} ", if ok { "" } else { " <-" }));
    }
    Ok(VerifyCheck { name: "mellin_reproducing_identity".into(), pass, detail })
}

/// (f) scale-functional identity: quadrature of the true Brownian
/// correlation against the closed form J_alpha (sigma = 1).
fn check_psi_j_identity() -> Result<VerifyCheck> {
    let mut pass = true;
    let mut detail = String::new();
    for d in [1usize, 2, 3] {
        let ball = ObservationBall::new(d, 1.0)?;
        let alpha = 0.1;
        let b = 2e4;
        let quad = psi_functional_from_corr(
            |t| corr_brownian(&ball, 1.0, t).unwrap_or(f64::NAN),
            alpha,
            b,
        )?;
        let exact = j_alpha(alpha, &ball)?;
        let dd = d as f64;
        let c = (crate::specfun::ln_gamma((dd + 1.0) / 2.0)
            - crate::specfun::ln_gamma(dd + 1.0)
            - crate::specfun::ln_gamma(0.5))
        .exp()
            * 2.0f64.powf(dd / 2.0);
        let tail = c * b.powf(alpha - dd / 2.0) / (dd / 2.0 - alpha);
        let ok = (quad - exact).abs() <= 2.0 * tail + 1e-6 * exact;
        pass &= ok;
        detail.push_str(&format!(
            "d={d}: quad {quad:.6} vs J {exact:.6} (tail {tail:.2e}){} ",
            if ok { "" } else { " <-" }
        ));
    }
    Ok(VerifyCheck { name: "psi_j_identity".into(), pass, detail })
}
