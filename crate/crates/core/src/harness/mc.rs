//! Seeded Monte-Carlo replication.
//!
//! Replicate i always runs on RNG stream (seed, i); parallel and serial runs
//! produce identical ordered results because results are collected by index.

use crate::error::{Error, Result};
use crate::estimators::cdf::{CdfOptions, MellinLine};
use crate::harness::report::EstimateReport;
use crate::record::SimConfig;
use crate::simulate::simulate;
use serde::{Deserialize, Serialize};

/// Parallelism degree: requested jobs capped by the SMOLU_THREADS
/// environment variable when set.
pub fn effective_jobs(requested: usize) -> usize {
    let cap = std::env::var("SMOLU_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1);
    match cap {
        Some(c) => requested.clamp(1, c),
        None => requested.max(1),
    }
}

/// Run `replicates` independent jobs, replicate i seeded from (seed, i),
/// in index order regardless of scheduling.
pub fn run_replicates<T, F>(replicates: u64, jobs: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    if replicates == 0 {
        return Err(Error::Config("replicate count must be >= 1".into()));
    }
    let jobs = effective_jobs(jobs);
    if jobs == 1 {
        (0..replicates).map(&f).collect()
    } else {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| (0..replicates).into_par_iter().map(&f).collect())
    }
}

/// Which estimator a Monte-Carlo study runs on each replicate record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorSpec {
    MeanSpeed { h: Option<f64> },
    CdfAt { x0: f64, h: Option<f64>, kernel_order: Option<usize> },
    Sigma2,
    SigmaD1 { sigma_bar: f64 },
}

/// A replicated study: base configuration, estimator, replication plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McStudySpec {
    pub config: SimConfig,
    pub estimator: EstimatorSpec,
    pub replicates: u64,
    pub jobs: usize,
}

impl McStudySpec {
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be >= 1".into()));
        }
        Ok(())
    }
}

/// Run the study; reports come back sorted by replicate index.
pub fn run_mc(spec: &McStudySpec) -> Result<Vec<EstimateReport>> {
    spec.validate()?;
    let ball = crate::ObservationBall::new(spec.config.ball.dim, spec.config.ball.radius)?;
    let rho = spec.config.rho();
    run_replicates(spec.replicates, spec.jobs, |rep| {
        let mut config = spec.config.clone();
        config.seed = replicate_seed(spec.config.seed, rep);
        let record = simulate(&config)?;
        let report = match &spec.estimator {
            EstimatorSpec::MeanSpeed { h } => {
                let h = match h {
                    Some(h) => *h,
                    None => crate::estimators::speed::default_bandwidth_mean_speed(
                        config.horizon,
                    )?,
                };
                let kernel = crate::estimators::speed::make_deriv_kernel();
                crate::estimators::speed::estimate_mean_speed(&record, rho, &ball, h, &kernel)?
            }
            EstimatorSpec::CdfAt { x0, h, kernel_order } => {
                let h = match h {
                    Some(h) => *h,
                    None => crate::estimators::cdf::default_bandwidth_cdf(
                        config.horizon,
                        *x0,
                        1.0,
                        1.0,
                        1.0,
                        1.0,
                        rho,
                        &ball,
                    )?,
                };
                let m = kernel_order.unwrap_or_else(|| crate::estimators::cdf::default_kernel_order(1.0));
                let kern = crate::estimators::cdf::make_flat_kernel(m)?;
                let line = MellinLine::for_horizon(config.horizon)?;
                crate::estimators::cdf::estimate_cdf_at(
                    &record,
                    rho,
                    &ball,
                    *x0,
                    h,
                    &kern,
                    &line,
                    &CdfOptions::default(),
                )?
            }
            EstimatorSpec::Sigma2 => {
                crate::estimators::diffusion::estimate_sigma2(&record, rho, &ball)?
            }
            EstimatorSpec::SigmaD1 { sigma_bar } => {
                crate::estimators::diffusion::estimate_sigma_d1(&record, rho, &ball, *sigma_bar)?
            }
        };
        Ok(report.with_replicate(rep))
    })
}

/// Stream seed for replicate i of a study seed; simulate() itself derives
/// its internal stream from this value.
pub fn replicate_seed(seed: u64, replicate: u64) -> u64 {
    // splitmix-style mixing keeps replicate streams unrelated
    let mut z = seed ^ replicate.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Aggregate CSV for a set of reports, sorted by replicate index.
pub fn reports_to_csv<W: std::io::Write>(reports: &[EstimateReport], mut w: W) -> Result<()> {
    writeln!(w, "replicate,estimator,estimate,units,seed")?;
    let mut ordered: Vec<&EstimateReport> = reports.iter().collect();
    ordered.sort_by_key(|r| r.replicate.unwrap_or(0));
    for r in ordered {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.replicate.unwrap_or(0),
            r.estimator,
            crate::record::fmt_f64(r.estimate),
            r.units,
            r.seed
        )?;
    }
    Ok(())
}
