//! Count-trajectory records and their CSV form.
//!
//! A record is either an exact event-time trajectory (piecewise constant,
//! one row per jump) or a uniform-grid trajectory.  CSV round-trips are
//! bit-exact: times carry 17 significant digits, counts are integers, and
//! the configuration rides along in `#` header lines as JSON.

use crate::error::{Error, Result};
use crate::geometry::ObservationBall;
use crate::model::DisplacementSpec;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

pub const DEFAULT_BROWNIAN_MARGIN_C: f64 = 6.0;
pub const DEFAULT_SPEED_TAIL_EPS: f64 = 1e-9;
pub const DEFAULT_PARTICLE_CAP: f64 = 1e8;

fn default_margin() -> f64 {
    DEFAULT_BROWNIAN_MARGIN_C
}
fn default_tail_eps() -> f64 {
    DEFAULT_SPEED_TAIL_EPS
}
fn default_cap() -> f64 {
    DEFAULT_PARTICLE_CAP
}

/// Full description of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub ball: ObservationBall,
    pub disp: DisplacementSpec,
    /// Particles per unit volume.
    pub lambda: f64,
    /// Observation horizon T.
    pub horizon: f64,
    /// Grid step for the Brownian model; `None` selects
    /// min(T/4096, (r/(10 sigma))^2).
    #[serde(default)]
    pub grid_dt: Option<f64>,
    pub seed: u64,
    #[serde(default = "default_margin")]
    pub brownian_margin_c: f64,
    #[serde(default = "default_tail_eps")]
    pub speed_tail_eps: f64,
    #[serde(default = "default_cap")]
    pub particle_cap: f64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.disp.validate()?;
        ObservationBall::new(self.ball.dim, self.ball.radius)?;
        if !(self.lambda > 0.0) {
            return Err(Error::Config(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::Config(format!("horizon must be > 0, got {}", self.horizon)));
        }
        if let Some(dt) = self.grid_dt {
            if !(dt > 0.0 && dt < self.horizon) {
                return Err(Error::Config(format!(
                    "grid_dt must satisfy 0 < dt < T, got {dt}"
                )));
            }
        }
        if self.brownian_margin_c < 3.0 {
            return Err(Error::Config(format!(
                "brownian_margin_c must be >= 3, got {}",
                self.brownian_margin_c
            )));
        }
        if !(self.speed_tail_eps > 0.0 && self.speed_tail_eps < 1e-2) {
            return Err(Error::Config(format!(
                "speed_tail_eps must be in (0, 1e-2), got {}",
                self.speed_tail_eps
            )));
        }
        Ok(())
    }

    /// rho = lambda vol(B), the stationary mean count.
    pub fn rho(&self) -> f64 {
        self.lambda * self.ball.volume()
    }

    /// Effective Brownian grid step.
    pub fn effective_grid_dt(&self) -> Result<f64> {
        let sigma = match self.disp {
            DisplacementSpec::Brownian { sigma } => sigma,
            _ => return Err(Error::Config("grid step applies to the Brownian model".into())),
        };
        let r = self.ball.radius;
        let dt = self
            .grid_dt
            .unwrap_or_else(|| (self.horizon / 4096.0).min((r / (10.0 * sigma)).powi(2)));
        // snap so the grid covers [0, T] exactly
        let n = (self.horizon / dt).ceil().max(1.0);
        Ok(self.horizon / n)
    }
}

/// Simulation provenance attached to every record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub config: SimConfig,
    /// Number of particle trajectories realized.
    pub particle_count: u64,
    /// Speed-law truncation point, when the sampler truncated the law.
    #[serde(default)]
    pub speed_truncated_at: Option<f64>,
    /// Human-readable notes on quantified omissions (never affects values).
    #[serde(default)]
    pub advisories: Vec<String>,
}

/// Trajectory data.
#[derive(Debug, Clone, PartialEq)]
pub enum CountData {
    /// Piecewise-constant exact form: `values[0]` holds on [0, jump_times[0]),
    /// `values[k]` on [jump_times[k-1], jump_times[k]), and the last value up
    /// to the horizon.  Jump times are sorted, in (0, T].
    Events { jump_times: Vec<f64>, values: Vec<u64> },
    /// Counts at times 0, dt, 2dt, ...
    Grid { dt: f64, counts: Vec<u64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountRecord {
    pub data: CountData,
    pub meta: RecordMeta,
}

impl CountRecord {
    pub fn horizon(&self) -> f64 {
        self.meta.config.horizon
    }

    /// N(t), right-continuous in the event form.
    pub fn value_at(&self, t: f64) -> u64 {
        match &self.data {
            CountData::Events { jump_times, values } => {
                // index of the piece containing t
                let idx = jump_times.partition_point(|&jt| jt <= t);
                values[idx]
            }
            CountData::Grid { dt, counts } => {
                let k = ((t / dt).round() as usize).min(counts.len() - 1);
                counts[k]
            }
        }
    }

    /// int_0^T N(t) dt; exact for the event form, rectangle rule on the grid.
    pub fn occupancy_integral(&self) -> f64 {
        let horizon = self.horizon();
        match &self.data {
            CountData::Events { jump_times, values } => {
                let mut total = 0.0;
                let mut prev = 0.0;
                for (i, &jt) in jump_times.iter().enumerate() {
                    total += values[i] as f64 * (jt - prev);
                    prev = jt;
                }
                total += values[jump_times.len()] as f64 * (horizon - prev);
                total
            }
            CountData::Grid { dt, counts } => counts.iter().map(|&c| c as f64).sum::<f64>() * dt,
        }
    }

    /// Empirical rho estimate (1/T) int N dt, a diagnostic only: the
    /// estimators take rho as a known input.
    pub fn rho_hat(&self) -> f64 {
        self.occupancy_integral() / self.horizon()
    }

    pub fn form_name(&self) -> &'static str {
        match self.data {
            CountData::Events { .. } => "event",
            CountData::Grid { .. } => "grid",
        }
    }

    /// Time-reversed copy (event form only); used by symmetry tests.
    pub fn time_reversed(&self) -> CountRecord {
        match &self.data {
            CountData::Events { jump_times, values } => {
                let horizon = self.horizon();
                let mut rev_times: Vec<f64> = jump_times.iter().rev().map(|&t| horizon - t).collect();
                let mut rev_values: Vec<u64> = values.iter().rev().copied().collect();
                // drop a reflected jump landing exactly at 0
                while rev_times.first().is_some_and(|&t| t <= 0.0) {
                    rev_times.remove(0);
                    rev_values.remove(0);
                }
                CountRecord {
                    data: CountData::Events { jump_times: rev_times, values: rev_values },
                    meta: self.meta.clone(),
                }
            }
            CountData::Grid { dt, counts } => {
                let mut rev = counts.clone();
                rev.reverse();
                CountRecord {
                    data: CountData::Grid { dt: *dt, counts: rev },
                    meta: self.meta.clone(),
                }
            }
        }
    }

    pub fn to_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let config =
            serde_json::to_string(&self.meta.config).map_err(|e| Error::Parse(e.to_string()))?;
        let meta_rest = serde_json::json!({
            "particle_count": self.meta.particle_count,
            "speed_truncated_at": self.meta.speed_truncated_at,
            "advisories": self.meta.advisories,
        });
        writeln!(w, "# smolu count-record schema=1 form={}", self.form_name())?;
        writeln!(w, "# config={config}")?;
        writeln!(w, "# meta={meta_rest}")?;
        writeln!(w, "time,count")?;
        match &self.data {
            CountData::Events { jump_times, values } => {
                writeln!(w, "{},{}", fmt_f64(0.0), values[0])?;
                for (i, &t) in jump_times.iter().enumerate() {
                    writeln!(w, "{},{}", fmt_f64(t), values[i + 1])?;
                }
            }
            CountData::Grid { dt, counts } => {
                for (k, &c) in counts.iter().enumerate() {
                    writeln!(w, "{},{}", fmt_f64(k as f64 * dt), c)?;
                }
            }
        }
        Ok(())
    }

    pub fn from_csv<R: BufRead>(r: R) -> Result<CountRecord> {
        let mut form = None;
        let mut config: Option<SimConfig> = None;
        let mut particle_count = 0u64;
        let mut speed_truncated_at = None;
        let mut advisories = Vec::new();
        let mut times = Vec::new();
        let mut counts = Vec::new();
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line == "time,count" {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if rest.starts_with("smolu count-record") {
                    form = rest.split("form=").nth(1).map(|s| s.trim().to_string());
                } else if let Some(js) = rest.strip_prefix("config=") {
                    config =
                        Some(serde_json::from_str(js).map_err(|e| Error::Parse(e.to_string()))?);
                } else if let Some(js) = rest.strip_prefix("meta=") {
                    let v: serde_json::Value =
                        serde_json::from_str(js).map_err(|e| Error::Parse(e.to_string()))?;
                    particle_count = v["particle_count"].as_u64().unwrap_or(0);
                    speed_truncated_at = v["speed_truncated_at"].as_f64();
                    if let Some(arr) = v["advisories"].as_array() {
                        advisories = arr
                            .iter()
                            .filter_map(|a| a.as_str().map(String::from))
                            .collect();
                    }
                }
                continue;
            }
            let (ts, cs) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("bad row: {line}")))?;
            times.push(
                ts.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad time {ts}: {e}")))?,
            );
            counts.push(
                cs.parse::<u64>()
                    .map_err(|e| Error::Parse(format!("bad count {cs}: {e}")))?,
            );
        }
        let config = config.ok_or_else(|| Error::Parse("missing config header".into()))?;
        if times.is_empty() {
            return Err(Error::Parse("empty record".into()));
        }
        let data = match form.as_deref() {
            Some("event") => CountData::Events {
                jump_times: times[1..].to_vec(),
                values: counts,
            },
            Some("grid") => {
                let dt = if times.len() > 1 { times[1] - times[0] } else { config.horizon };
                CountData::Grid { dt, counts }
            }
            other => return Err(Error::Parse(format!("unknown form {other:?}"))),
        };
        Ok(CountRecord {
            data,
            meta: RecordMeta { config, particle_count, speed_truncated_at, advisories },
        })
    }
}

/// 17 significant digits: enough for f64 round-trips.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}
