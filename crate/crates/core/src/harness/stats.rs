//! Statistical test helpers for the verification suite and the acceptance
//! tests: chi-square goodness of fit against Poisson and normal references,
//! and sample summaries.

use crate::error::{Error, Result};
use crate::model::poisson_pmf;
use crate::specfun::{normal_cdf, reg_inc_gamma_pair};

/// Upper tail of the chi-square distribution with `df` degrees of freedom.
pub fn chi_square_sf(x: f64, df: f64) -> Result<f64> {
    if x < 0.0 || df <= 0.0 {
        return Err(Error::Domain(format!("chi_square_sf({x}, {df})")));
    }
    let (_, q) = reg_inc_gamma_pair(df / 2.0, x / 2.0)?;
    Ok(q)
}

/// Chi-square GOF p-value of integer samples against Poisson(mu), with
/// tail bins pooled so every expected cell count is >= 5.
pub fn poisson_gof_pvalue(samples: &[u64], mu: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Domain("poisson gof: no samples".into()));
    }
    let n = samples.len() as f64;
    let kmax = samples.iter().copied().max().unwrap() as usize;
    let mut expected: Vec<f64> = (0..=kmax as u64).map(|k| n * poisson_pmf(k, mu)).collect();
    // residual upper-tail mass goes to the last cell
    let tail = n - expected.iter().sum::<f64>();
    *expected.last_mut().unwrap() += tail.max(0.0);
    let mut observed = vec![0.0f64; kmax + 1];
    for &s in samples {
        observed[s as usize] += 1.0;
    }
    // pool cells left to right so each expected >= 5
    let mut obs_pooled = Vec::new();
    let mut exp_pooled = Vec::new();
    let mut acc_o = 0.0;
    let mut acc_e = 0.0;
    for i in 0..=kmax {
        acc_o += observed[i];
        acc_e += expected[i];
        if acc_e >= 5.0 {
            obs_pooled.push(acc_o);
            exp_pooled.push(acc_e);
            acc_o = 0.0;
            acc_e = 0.0;
        }
    }
    if acc_e > 0.0 {
        if let (Some(o), Some(e)) = (obs_pooled.last_mut(), exp_pooled.last_mut()) {
            *o += acc_o;
            *e += acc_e;
        }
    }
    if obs_pooled.len() < 2 {
        return Err(Error::Domain("poisson gof: too few cells".into()));
    }
    let stat: f64 = obs_pooled
        .iter()
        .zip(&exp_pooled)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    chi_square_sf(stat, (obs_pooled.len() - 1) as f64)
}

/// Chi-square GOF of standardized lattice counts against the standard
/// normal: bin edges are placed halfway between lattice atoms so the
/// discreteness itself does not register, leaving only the distributional
/// mismatch.
pub fn lattice_normal_gof_pvalue(counts: &[u64], mean: f64, sd: f64, bins: usize) -> Result<f64> {
    if counts.len() < 100 || bins < 3 {
        return Err(Error::Domain("normal gof: need >= 100 samples and >= 3 bins".into()));
    }
    let n = counts.len() as f64;
    // target equal-probability edges, snapped to half-integers in count space
    let mut edges = Vec::with_capacity(bins - 1);
    for k in 1..bins {
        let p = k as f64 / bins as f64;
        let z = crate::specfun::normal_quantile(p)?;
        let edge_count = (mean + z * sd - 0.5).round() + 0.5;
        edges.push(edge_count);
    }
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    let mut observed = vec![0.0f64; edges.len() + 1];
    for &c in counts {
        let idx = edges.partition_point(|&e| e < c as f64);
        observed[idx] += 1.0;
    }
    let mut stat = 0.0;
    let mut prev_cdf = 0.0;
    for (i, obs) in observed.iter().enumerate() {
        let cdf = if i < edges.len() {
            normal_cdf((edges[i] - mean) / sd)
        } else {
            1.0
        };
        let p = cdf - prev_cdf;
        prev_cdf = cdf;
        let e = n * p;
        if e <= 0.0 {
            continue;
        }
        stat += (obs - e) * (obs - e) / e;
    }
    chi_square_sf(stat, (observed.len() - 1) as f64)
}

/// Total-variation distance between an empirical joint pmf over pairs and a
/// model pmf callback, summed over the support box observed plus the model
/// remainder.
pub fn joint_tv_distance<F>(pairs: &[(u64, u64)], model_pmf: F) -> f64
where
    F: Fn(u64, u64) -> f64,
{
    use std::collections::HashMap;
    let n = pairs.len() as f64;
    let mut freq: HashMap<(u64, u64), f64> = HashMap::new();
    for &p in pairs {
        *freq.entry(p).or_insert(0.0) += 1.0 / n;
    }
    let max_m = pairs.iter().map(|p| p.0).max().unwrap_or(0) + 15;
    let max_n = pairs.iter().map(|p| p.1).max().unwrap_or(0) + 15;
    let mut tv = 0.0;
    let mut model_mass = 0.0;
    for m in 0..=max_m {
        for k in 0..=max_n {
            let p = model_pmf(m, k);
            model_mass += p;
            let q = freq.get(&(m, k)).copied().unwrap_or(0.0);
            tv += (p - q).abs();
        }
    }
    // any model mass outside the scanned box counts fully
    0.5 * (tv + (1.0 - model_mass).max(0.0))
}

/// Mean and standard error of a sample.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Root mean squared error against a known target.
pub fn rmse(xs: &[f64], target: f64) -> f64 {
    (xs.iter().map(|x| (x - target) * (x - target)).sum::<f64>() / xs.len() as f64).sqrt()
}

pub fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}
