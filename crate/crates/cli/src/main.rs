//! Command-line interface: simulation, estimation, Monte-Carlo studies, and
//! the verification suite.
//!
//! Exit codes: 0 success, 2 usage error (argument parsing), 3 numerical
//! failure surfaced from the library.

use clap::{Args, Parser, Subcommand};
use smolu::estimators::cdf::{
    default_bandwidth_cdf, default_kernel_order, estimate_cdf_at, make_flat_kernel, CdfOptions,
    MellinLine,
};
use smolu::estimators::corr::{clip_positive, estimate_covariance, variance_bound_diagnostic};
use smolu::estimators::diffusion::{estimate_sigma2, estimate_sigma_d1};
use smolu::estimators::speed::{
    default_bandwidth_mean_speed, estimate_mean_speed, make_deriv_kernel,
};
use smolu::harness::mc::{reports_to_csv, run_mc, EstimatorSpec, McStudySpec};
use smolu::harness::verify::{verify_suite, VerifyLevel};
use smolu::model::memory_integral_uniform;
use smolu::record::{
    CountRecord, SimConfig, DEFAULT_BROWNIAN_MARGIN_C, DEFAULT_PARTICLE_CAP,
    DEFAULT_SPEED_TAIL_EPS,
};
use smolu::{DisplacementSpec, ObservationBall, SpeedLaw};
use std::io::Write;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "smolu", version, about = "Smoluchowski count-process toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one count trajectory and write it as CSV.
    Simulate(SimulateArgs),
    /// Covariance/correlation curve from a record.
    Corr(CorrArgs),
    /// Mean-speed estimate from a record.
    MeanSpeed(MeanSpeedArgs),
    /// Speed-distribution value estimate from a record.
    Cdf(CdfArgs),
    /// Diffusion-coefficient estimates from a Brownian record.
    Diffusion(DiffusionArgs),
    /// Replicated Monte-Carlo study.
    Mc(McArgs),
    /// Verification suite.
    Verify(VerifyArgs),
}

#[derive(Args, Clone)]
struct SimArgsCommon {
    /// Displacement model.
    #[arg(long, value_parser = ["uniform", "brownian"])]
    model: String,
    /// Ball dimension d.
    #[arg(long)]
    dim: usize,
    /// Ball radius r.
    #[arg(long)]
    radius: f64,
    /// Spatial intensity (particles per unit volume).
    #[arg(long)]
    lambda: f64,
    /// Observation horizon.
    #[arg(long = "T")]
    horizon: f64,
    /// Speed law, e.g. degenerate:1, rayleigh:1, halfnormal:0.5, uniform:1,2.
    #[arg(long = "speed-law")]
    speed_law: Option<String>,
    /// Diffusion coefficient (Brownian model).
    #[arg(long)]
    sigma: Option<f64>,
    /// Grid step (Brownian model); defaults to min(T/4096, (r/10 sigma)^2).
    #[arg(long = "dt")]
    dt: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SimArgsCommon {
    fn to_config(&self) -> Result<SimConfig, String> {
        let disp = match self.model.as_str() {
            "uniform" => {
                let law = self
                    .speed_law
                    .as_deref()
                    .ok_or("--speed-law is required for the uniform model")?;
                DisplacementSpec::UniformMotion { law: parse_speed_law(law)? }
            }
            "brownian" => {
                let sigma = self.sigma.ok_or("--sigma is required for the brownian model")?;
                DisplacementSpec::Brownian { sigma }
            }
            other => return Err(format!("unknown model {other}")),
        };
        Ok(SimConfig {
            ball: ObservationBall { dim: self.dim, radius: self.radius },
            disp,
            lambda: self.lambda,
            horizon: self.horizon,
            grid_dt: self.dt,
            seed: self.seed,
            brownian_margin_c: DEFAULT_BROWNIAN_MARGIN_C,
            speed_tail_eps: DEFAULT_SPEED_TAIL_EPS,
            particle_cap: DEFAULT_PARTICLE_CAP,
        })
    }
}

fn parse_speed_law(s: &str) -> Result<SpeedLaw, String> {
    let (name, params) = s.split_once(':').ok_or("speed law format is name:params")?;
    let law = match name {
        "degenerate" => SpeedLaw::Degenerate {
            v0: params.parse().map_err(|e| format!("bad speed: {e}"))?,
        },
        "rayleigh" => SpeedLaw::Rayleigh {
            scale: params.parse().map_err(|e| format!("bad scale: {e}"))?,
        },
        "halfnormal" => SpeedLaw::HalfNormal {
            scale: params.parse().map_err(|e| format!("bad scale: {e}"))?,
        },
        "uniform" => {
            let (a, b) = params.split_once(',').ok_or("uniform law needs a,b")?;
            SpeedLaw::UniformInterval {
                a: a.parse().map_err(|e| format!("bad a: {e}"))?,
                b: b.parse().map_err(|e| format!("bad b: {e}"))?,
            }
        }
        other => return Err(format!("unknown speed law {other}")),
    };
    law.validate().map_err(|e| e.to_string())?;
    Ok(law)
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    sim: SimArgsCommon,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CorrArgs {
    /// Input record CSV.
    #[arg(long)]
    input: PathBuf,
    /// Stationary mean rho = lambda vol(B); the record header value is used
    /// on mismatch unless --force-rho.
    #[arg(long)]
    rho: Option<f64>,
    /// Use the --rho flag even when it disagrees with the record header.
    #[arg(long = "force-rho", default_value_t = false)]
    force_rho: bool,
    /// Comma-separated lags.
    #[arg(long)]
    lags: String,
    /// Apply the positive-part clip to the correlation values.
    #[arg(long, default_value_t = false)]
    clip: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MeanSpeedArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long = "force-rho", default_value_t = false)]
    force_rho: bool,
    /// Bandwidth; defaults to the admissible-window rule.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CdfArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long = "force-rho", default_value_t = false)]
    force_rho: bool,
    /// Evaluation point x0 > 0.
    #[arg(long)]
    x0: f64,
    /// Bandwidth; when omitted it is derived from (beta, A, M, alpha-mem).
    #[arg(long)]
    h: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long = "A", default_value_t = 1.0)]
    a_const: f64,
    #[arg(long = "M", default_value_t = 1.0)]
    m_const: f64,
    #[arg(long = "alpha-mem", default_value_t = 1.0)]
    alpha_mem: f64,
    /// Vanishing-moment order; defaults to ceil(beta) + 2.
    #[arg(long)]
    m: Option<usize>,
    /// Clamp the estimate to [0, 1].
    #[arg(long, default_value_t = false)]
    clamp: bool,
    /// Also dump the psi and phi grids to CSV files with this prefix.
    #[arg(long = "dump-functions")]
    dump_functions: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiffusionArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long = "force-rho", default_value_t = false)]
    force_rho: bool,
    /// Override alpha for the scale-functional estimator (default 1/ln T).
    #[arg(long)]
    alpha: Option<f64>,
    /// Override b (default the dimension rule).
    #[arg(long)]
    b: Option<f64>,
    /// Prior upper bound on sigma: enables the d=1 short-time estimator.
    #[arg(long = "sigma-bar")]
    sigma_bar: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct McArgs {
    #[command(flatten)]
    sim: SimArgsCommon,
    /// Estimator: mean-speed | cdf | sigma2 | sigma-d1.
    #[arg(long)]
    estimator: String,
    #[arg(long)]
    x0: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long = "sigma-bar")]
    sigma_bar: Option<f64>,
    #[arg(long, default_value_t = 8)]
    replicates: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_parser = ["quick", "full"], default_value = "quick")]
    level: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(()) => 0,
        Err(AppError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(AppError::Numerical(e)) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}

enum AppError {
    Usage(String),
    Numerical(smolu::Error),
}

impl From<smolu::Error> for AppError {
    fn from(e: smolu::Error) -> Self {
        AppError::Numerical(e)
    }
}

impl From<String> for AppError {
    fn from(s: String) -> Self {
        AppError::Usage(s)
    }
}

impl From<&str> for AppError {
    fn from(s: &str) -> Self {
        AppError::Usage(s.to_string())
    }
}

fn write_out(path: &Option<PathBuf>, bytes: &[u8]) -> Result<(), AppError> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| AppError::Numerical(e.into())),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| AppError::Numerical(e.into())),
    }
}

fn load_record(path: &PathBuf) -> Result<CountRecord, AppError> {
    let file = std::fs::File::open(path).map_err(|e| AppError::Numerical(e.into()))?;
    Ok(CountRecord::from_csv(std::io::BufReader::new(file))?)
}

/// The estimators assume rho known; the record header carries
/// lambda vol(B).  A disagreeing --rho flag warns and is ignored unless
/// --force-rho.
fn resolve_rho(record: &CountRecord, flag: Option<f64>, force: bool) -> f64 {
    let header = record.meta.config.rho();
    match flag {
        None => header,
        Some(r) if (r - header).abs() <= 1e-9 * header.max(1.0) => r,
        Some(r) if force => {
            eprintln!(
                "warning: --rho {r} disagrees with the record header ({header}); \
                 using the flag value (--force-rho)"
            );
            r
        }
        Some(r) => {
            eprintln!(
                "warning: --rho {r} disagrees with the record header ({header}); \
                 using the header value (pass --force-rho to override)"
            );
            header
        }
    }
}

fn run(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Simulate(args) => {
            let config = args.sim.to_config()?;
            let record = smolu::simulate(&config)?;
            let mut buf = Vec::new();
            record.to_csv(&mut buf)?;
            write_out(&args.out, &buf)
        }
        Command::Corr(args) => {
            let record = load_record(&args.input)?;
            let rho = resolve_rho(&record, args.rho, args.force_rho);
            let lags: Vec<f64> = args
                .lags
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|e| format!("bad lag {s}: {e}")))
                .collect::<Result<_, String>>()?;
            let mut curve = estimate_covariance(&record, rho, &lags)?;
            if args.clip {
                curve = clip_positive(&curve);
            }
            let mut buf = Vec::new();
            curve.to_csv(&mut buf)?;
            write_out(&args.out, &buf)
        }
        Command::MeanSpeed(args) => {
            let record = load_record(&args.input)?;
            let rho = resolve_rho(&record, args.rho, args.force_rho);
            let ball = ObservationBall::new(
                record.meta.config.ball.dim,
                record.meta.config.ball.radius,
            )?;
            let h = match args.h {
                Some(h) => h,
                None => default_bandwidth_mean_speed(record.horizon())?,
            };
            let kernel = make_deriv_kernel();
            let mut report = estimate_mean_speed(&record, rho, &ball, h, &kernel)?;
            if let DisplacementSpec::UniformMotion { law } = &record.meta.config.disp {
                let memory = memory_integral_uniform(&ball, law);
                if memory.is_finite() {
                    report = report.with_diagnostics(serde_json::json!({
                        "variance_bound_structural":
                            variance_bound_diagnostic(record.horizon(), h, rho, memory),
                        "memory_integral": memory,
                    }));
                }
            }
            write_out(&args.out, format!("{}\n", report.to_json()?).as_bytes())
        }
        Command::Cdf(args) => {
            let record = load_record(&args.input)?;
            let rho = resolve_rho(&record, args.rho, args.force_rho);
            let ball = ObservationBall::new(
                record.meta.config.ball.dim,
                record.meta.config.ball.radius,
            )?;
            let h = match args.h {
                Some(h) => h,
                None => default_bandwidth_cdf(
                    record.horizon(),
                    args.x0,
                    args.beta,
                    args.a_const,
                    args.m_const,
                    args.alpha_mem,
                    rho,
                    &ball,
                )?,
            };
            let m = args.m.unwrap_or_else(|| default_kernel_order(args.beta));
            let kern = make_flat_kernel(m)?;
            let line = MellinLine::for_horizon(record.horizon())?;
            let opts = CdfOptions { clamp: args.clamp, ..CdfOptions::default() };
            let report =
                estimate_cdf_at(&record, rho, &ball, args.x0, h, &kern, &line, &opts)?;
            if let Some(prefix) = &args.dump_functions {
                dump_functions(prefix, &record, &ball, args.x0, h, &kern, &line)?;
            }
            write_out(&args.out, format!("{}\n", report.to_json()?).as_bytes())
        }
        Command::Diffusion(args) => {
            let record = load_record(&args.input)?;
            let rho = resolve_rho(&record, args.rho, args.force_rho);
            let ball = ObservationBall::new(
                record.meta.config.ball.dim,
                record.meta.config.ball.radius,
            )?;
            let mut reports = Vec::new();
            match (args.alpha, args.b) {
                (Some(alpha), Some(b)) => {
                    let psi = smolu::estimators::diffusion::estimate_psi_functional(
                        &record, rho, alpha, b,
                    )?;
                    if psi <= 0.0 {
                        return Err(AppError::Numerical(smolu::Error::EstimationFailure(
                            "no positive correlation mass on (0, b]".into(),
                        )));
                    }
                    let j = smolu::model::j_alpha(alpha, &ball)?;
                    let est = (j / psi).powf(1.0 / alpha);
                    reports.push(
                        smolu::EstimateReport::new("sigma2_scale_functional", est, "sigma^2")
                            .with_tuning(serde_json::json!({"alpha": alpha, "b": b, "rho": rho}))
                            .with_seed(record.meta.config.seed),
                    );
                }
                (None, None) => reports.push(estimate_sigma2(&record, rho, &ball)?),
                _ => {
                    return Err(AppError::Usage(
                        "--alpha and --b must be given together".into(),
                    ))
                }
            }
            if let Some(sigma_bar) = args.sigma_bar {
                reports.push(estimate_sigma_d1(&record, rho, &ball, sigma_bar)?);
            }
            let body = reports
                .iter()
                .map(|r| r.to_json())
                .collect::<smolu::Result<Vec<_>>>()?
                .join("\n");
            write_out(&args.out, format!("{body}\n").as_bytes())
        }
        Command::Mc(args) => {
            let config = args.sim.to_config()?;
            let estimator = match args.estimator.as_str() {
                "mean-speed" => EstimatorSpec::MeanSpeed { h: args.h },
                "cdf" => EstimatorSpec::CdfAt {
                    x0: args.x0.ok_or("--x0 is required for the cdf estimator")?,
                    h: args.h,
                    kernel_order: None,
                },
                "sigma2" => EstimatorSpec::Sigma2,
                "sigma-d1" => EstimatorSpec::SigmaD1 {
                    sigma_bar: args
                        .sigma_bar
                        .ok_or("--sigma-bar is required for sigma-d1")?,
                },
                other => return Err(AppError::Usage(format!("unknown estimator {other}"))),
            };
            let spec = McStudySpec {
                config,
                estimator,
                replicates: args.replicates,
                jobs: args.jobs,
            };
            let reports = run_mc(&spec)?;
            let mut buf = Vec::new();
            reports_to_csv(&reports, &mut buf)?;
            write_out(&args.out, &buf)
        }
        Command::Verify(args) => {
            let level = if args.level == "full" { VerifyLevel::Full } else { VerifyLevel::Quick };
            let report = verify_suite(level, args.seed)?;
            print!("{}", report.render());
            if report.all_pass() {
                Ok(())
            } else {
                Err(AppError::Numerical(smolu::Error::EstimationFailure(
                    "verification suite reported failures".into(),
                )))
            }
        }
    }
}

/// psi/phi CSV dumps for inspection.
fn dump_functions(
    prefix: &PathBuf,
    record: &CountRecord,
    ball: &ObservationBall,
    x0: f64,
    h: f64,
    kern: &smolu::estimators::cdf::FlatKernel,
    line: &MellinLine,
) -> Result<(), AppError> {
    use smolu::estimators::cdf::{geometric_grid, phi, psi_on_grid};
    let t_min = 1e-4 * 2.0 * ball.radius / x0;
    let grid = geometric_grid(t_min, record.horizon() / 2.0, 32.0)?;
    let psi = psi_on_grid(x0, h, ball, kern, line, &grid)?;
    let mut buf = String::from("t,psi\n");
    for (t, p) in psi.t.iter().zip(&psi.psi) {
        buf.push_str(&format!(
            "{},{}\n",
            smolu::record::fmt_f64(*t),
            smolu::record::fmt_f64(*p)
        ));
    }
    std::fs::write(prefix.with_extension("psi.csv"), buf)
        .map_err(|e| AppError::Numerical(e.into()))?;
    let mut buf = String::from("x,phi\n");
    for i in 0..=400 {
        let x = 1.5 * x0 * i as f64 / 400.0;
        buf.push_str(&format!(
            "{},{}\n",
            smolu::record::fmt_f64(x),
            smolu::record::fmt_f64(phi(x0, h, x, kern)?)
        ));
    }
    std::fs::write(prefix.with_extension("phi.csv"), buf)
        .map_err(|e| AppError::Numerical(e.into()))?;
    Ok(())
}
