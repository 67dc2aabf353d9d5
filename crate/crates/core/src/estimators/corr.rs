//! Covariance/correlation estimation from a single continuous-time record,
//!
//!   R^(t) = (1 / (T - t)) int_0^{T-t} (N(s) - rho)(N(s+t) - rho) ds,
//!
//! with H^ = R^ / rho.  Event-form records are integrated exactly: the
//! integrand is piecewise constant on the overlay of the jump partition with
//! its t-shift, swept with two pointers.  Grid records use the rectangle
//! rule with the lag snapped to the nearest grid multiple.

use crate::error::{Error, Result};
use crate::record::{CountData, CountRecord};
use serde::{Deserialize, Serialize};

/// Provenance carried by a correlation curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveMeta {
    pub horizon: f64,
    pub rho: f64,
    pub source_form: String,
    /// Grid records: per-lag snap displacement (requested - snapped).
    #[serde(default)]
    pub lag_snaps: Vec<f64>,
}

/// Estimated covariance/correlation values on a lag grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCurve {
    pub lags: Vec<f64>,
    pub r_hat: Vec<f64>,
    pub h_hat: Vec<f64>,
    pub clipped: bool,
    pub meta: CurveMeta,
}

impl CorrelationCurve {
    pub fn to_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        let meta = serde_json::to_string(&self.meta).map_err(|e| Error::Parse(e.to_string()))?;
        writeln!(w, "# smolu correlation-curve schema=1 clipped={}", self.clipped)?;
        writeln!(w, "# meta={meta}")?;
        writeln!(w, "lag,r_hat,h_hat")?;
        for i in 0..self.lags.len() {
            writeln!(
                w,
                "{},{},{}",
                crate::record::fmt_f64(self.lags[i]),
                crate::record::fmt_f64(self.r_hat[i]),
                crate::record::fmt_f64(self.h_hat[i])
            )?;
        }
        Ok(())
    }
}

/// R^ at the given lags; every lag must satisfy 0 <= t < T.
pub fn estimate_covariance(
    record: &CountRecord,
    rho: f64,
    lags: &[f64],
) -> Result<CorrelationCurve> {
    if !(rho > 0.0) {
        return Err(Error::Domain(format!("estimate_covariance: rho = {rho}")));
    }
    let horizon = match &record.data {
        CountData::Events { .. } => record.horizon(),
        CountData::Grid { dt, counts } => dt * (counts.len() - 1) as f64,
    };
    let mut r_hat = Vec::with_capacity(lags.len());
    let mut lag_snaps = Vec::new();
    for &t in lags {
        if !(0.0..horizon).contains(&t) {
            return Err(Error::LagOutOfRange(format!("lag {t} outside [0, {horizon})")));
        }
        match &record.data {
            CountData::Events { jump_times, values } => {
                r_hat.push(event_covariance(jump_times, values, record.horizon(), rho, t));
            }
            CountData::Grid { dt, counts } => {
                let k = (t / dt).round() as usize;
                lag_snaps.push(t - k as f64 * dt);
                r_hat.push(grid_covariance(counts, rho, k));
            }
        }
    }
    let h_hat = r_hat.iter().map(|&r| r / rho).collect();
    Ok(CorrelationCurve {
        lags: lags.to_vec(),
        r_hat,
        h_hat,
        clipped: false,
        meta: CurveMeta {
            horizon,
            rho,
            source_form: record.form_name().to_string(),
            lag_snaps,
        },
    })
}

/// Single-lag convenience wrapper.
pub fn covariance_at(record: &CountRecord, rho: f64, t: f64) -> Result<f64> {
    Ok(estimate_covariance(record, rho, &[t])?.r_hat[0])
}

/// Exact two-pointer sweep over the overlay of the jump partition with its
/// t-shift; no discretization error.
fn event_covariance(jump_times: &[f64], values: &[u64], horizon: f64, rho: f64, t: f64) -> f64 {
    let upper = horizon - t;
    let mut acc = 0.0;
    let mut s = 0.0; // current position in [0, upper]
    let mut ia = 0usize; // next jump index for N(s)
    let mut ib = 0usize; // next jump index for N(s + t)
    // advance ib past jumps at or below t (N(s+t) at s=0)
    while ib < jump_times.len() && jump_times[ib] <= t {
        ib += 1;
    }
    while s < upper {
        let next_a = if ia < jump_times.len() { jump_times[ia] } else { f64::INFINITY };
        let next_b = if ib < jump_times.len() { jump_times[ib] - t } else { f64::INFINITY };
        let stop = next_a.min(next_b).min(upper);
        if stop > s {
            let va = values[ia] as f64 - rho;
            let vb = values[ib] as f64 - rho;
            acc += va * vb * (stop - s);
            s = stop;
        }
        if next_a <= stop + f64::EPSILON && ia < jump_times.len() && next_a <= upper {
            ia += 1;
        }
        if next_b <= stop + f64::EPSILON && ib < jump_times.len() && next_b <= upper {
            ib += 1;
        }
        if stop >= upper {
            break;
        }
    }
    acc / upper
}

fn grid_covariance(counts: &[u64], rho: f64, k: usize) -> f64 {
    let n = counts.len();
    debug_assert!(k < n);
    let mut acc = 0.0;
    for i in 0..n - k {
        acc += (counts[i] as f64 - rho) * (counts[i + k] as f64 - rho);
    }
    acc / (n - k) as f64
}

/// Rectangle-rule covariance of an arbitrary real-valued series sampled at
/// spacing dt; the entry point for synthetic (non-integer) trajectories.
pub fn estimate_covariance_series(values: &[f64], dt: f64, rho: f64, lags: &[f64]) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 2 {
        return Err(Error::Domain("series too short".into()));
    }
    let horizon = dt * (n - 1) as f64;
    let mut out = Vec::with_capacity(lags.len());
    for &t in lags {
        if !(0.0..horizon).contains(&t) {
            return Err(Error::LagOutOfRange(format!("lag {t} outside [0, {horizon})")));
        }
        let k = (t / dt).round() as usize;
        let mut acc = 0.0;
        for i in 0..n - k {
            acc += (values[i] - rho) * (values[i + k] - rho);
        }
        out.push(acc / (n - k) as f64);
    }
    Ok(out)
}

/// Positive-part curve: h_hat replaced by max(h_hat, 0), flag set.
pub fn clip_positive(curve: &CorrelationCurve) -> CorrelationCurve {
    CorrelationCurve {
        lags: curve.lags.clone(),
        r_hat: curve.r_hat.clone(),
        h_hat: curve.h_hat.iter().map(|&h| h.max(0.0)).collect(),
        clipped: true,
        meta: curve.meta.clone(),
    }
}

/// Structural part of the mean-squared-error bound for R^(t):
/// (rho^2 + rho) / (T - t) * int_0^T H; the unspecified absolute constant is
/// reported separately by callers.
pub fn variance_bound_diagnostic(horizon: f64, t: f64, rho: f64, memory_integral: f64) -> f64 {
    debug_assert!((0.0..horizon).contains(&t));
    (rho * rho + rho) / (horizon - t) * memory_integral
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::{RecordMeta, SimConfig};
    use crate::{DisplacementSpec, ObservationBall, SpeedLaw};

    fn dummy_config(horizon: f64) -> SimConfig {
        SimConfig {
            ball: ObservationBall { dim: 1, radius: 1.0 },
            disp: DisplacementSpec::UniformMotion { law: SpeedLaw::Degenerate { v0: 1.0 } },
            lambda: 1.0,
            horizon,
            grid_dt: None,
            seed: 0,
            brownian_margin_c: 6.0,
            speed_tail_eps: 1e-9,
            particle_cap: 1e8,
        }
    }

    fn event_record(jump_times: Vec<f64>, values: Vec<u64>, horizon: f64) -> CountRecord {
        CountRecord {
            data: CountData::Events { jump_times, values },
            meta: RecordMeta {
                config: dummy_config(horizon),
                particle_count: 0,
                speed_truncated_at: None,
                advisories: vec![],
            },
        }
    }

    #[test]
    fn constant_record_gives_zero() {
        let rec = event_record(vec![], vec![3], 10.0);
        let curve = estimate_covariance(&rec, 3.0, &[0.0, 1.0, 5.0]).unwrap();
        for &r in &curve.r_hat {
            assert!(r.abs() < 1e-14);
        }
    }

    #[test]
    fn three_jump_record_matches_symbolic_value() {
        // pieces: [0,1)=2, [1,2.5)=3, [2.5,4)=2, [4,6]=3; t=1.5, rho=2.5.
        // Hand overlay: segments of (N(s)-rho)(N(s+t)-rho) ds give
        // -0.25 - 0.375 - 0.375 + 0.125 = -0.875 over T-t = 4.5.
        let rec = event_record(vec![1.0, 2.5, 4.0], vec![2, 3, 2, 3], 6.0);
        let got = covariance_at(&rec, 2.5, 1.5).unwrap();
        assert!((got - (-7.0 / 36.0)).abs() < 1e-14, "{got}");
    }

    #[test]
    fn event_exactness_against_riemann_oracle() {
        let rec = event_record(vec![0.7, 1.1, 2.9, 3.4, 5.2], vec![1, 2, 1, 0, 1, 2], 7.0);
        let rho = 1.3;
        for t in [0.0, 0.9, 2.3, 4.4] {
            let exact = covariance_at(&rec, rho, t).unwrap();
            // independent fine Riemann sum
            let n = 2_000_000;
            let upper = 7.0 - t;
            let mut acc = 0.0;
            for i in 0..n {
                let s = upper * (i as f64 + 0.5) / n as f64;
                acc += (rec.value_at(s) as f64 - rho) * (rec.value_at(s + t) as f64 - rho);
            }
            let oracle = acc / n as f64;
            assert!((exact - oracle).abs() < 1e-4, "t={t}: {exact} vs {oracle}");
        }
    }

    #[test]
    fn time_reversal_invariance() {
        let rec = event_record(vec![0.7, 1.1, 2.9, 3.4, 5.2], vec![1, 2, 1, 0, 1, 2], 7.0);
        let rev = rec.time_reversed();
        for t in [0.0, 0.4, 1.9, 3.3, 6.0] {
            let a = covariance_at(&rec, 1.7, t).unwrap();
            let b = covariance_at(&rev, 1.7, t).unwrap();
            assert!((a - b).abs() < 1e-12, "t={t}: {a} vs {b}");
        }
    }

    #[test]
    fn synthetic_cosine_series() {
        // N(s) = rho + cos(s): R^(t) -> cos(t)/2 for large T; at T=1000,
        // t=0 the error is under 0.01.
        let dt = 0.01;
        let n = 100_001; // covers [0, 1000]
        let rho = 4.0;
        let values: Vec<f64> = (0..n).map(|i| rho + (i as f64 * dt).cos()).collect();
        let r = estimate_covariance_series(&values, dt, rho, &[0.0, 1.0]).unwrap();
        assert!((r[0] - 0.5).abs() <= 0.01, "{}", r[0]);
        assert!((r[1] - 0.5 * 1.0f64.cos()).abs() <= 0.01, "{}", r[1]);
    }

    #[test]
    fn lag_out_of_range_errors() {
        let rec = event_record(vec![1.0], vec![0, 1], 5.0);
        assert!(estimate_covariance(&rec, 1.0, &[5.0]).is_err());
        assert!(estimate_covariance(&rec, 1.0, &[-0.1]).is_err());
    }

    #[test]
    fn grid_covariance_and_snapping() {
        let rec = CountRecord {
            data: CountData::Grid { dt: 0.5, counts: vec![1, 2, 1, 2, 1, 2, 1, 2] },
            meta: RecordMeta {
                config: dummy_config(3.5),
                particle_count: 0,
                speed_truncated_at: None,
                advisories: vec![],
            },
        };
        let curve = estimate_covariance(&rec, 1.5, &[0.49, 1.0]).unwrap();
        // lag 0.49 snaps to grid index 1
        assert!((curve.meta.lag_snaps[0] - (0.49 - 0.5)).abs() < 1e-12);
        // alternating series: R(1 step) = -0.25, R(2 steps) = 0.25
        assert!((curve.r_hat[0] + 0.25).abs() < 1e-12);
        assert!((curve.r_hat[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn clip_positive_behavior() {
        let rec = event_record(vec![1.0], vec![0, 1], 5.0);
        let mut curve = estimate_covariance(&rec, 1.0, &[0.5]).unwrap();
        curve.h_hat = vec![-0.2, 0.3];
        curve.lags = vec![0.5, 1.0];
        curve.r_hat = vec![-0.2, 0.3];
        let clipped = clip_positive(&curve);
        assert_eq!(clipped.h_hat, vec![0.0, 0.3]);
        assert!(clipped.clipped);
        let twice = clip_positive(&clipped);
        assert_eq!(twice.h_hat, clipped.h_hat);
    }

    #[test]
    fn variance_bound_shape() {
        assert_eq!(variance_bound_diagnostic(10.0, 1.0, 2.0, 0.0), 0.0);
        let b1 = variance_bound_diagnostic(11.0, 1.0, 2.0, 3.0);
        let b2 = variance_bound_diagnostic(21.0, 1.0, 2.0, 3.0);
        assert!((b1 / b2 - 2.0).abs() < 1e-12);
    }
}
