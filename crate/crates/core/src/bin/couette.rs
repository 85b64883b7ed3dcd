//! Command-line front end.
//!
//! Exit status: 0 success, 1 invalid input, 2 integration failure,
//! 3 a verification check did not meet its tolerance.

// NaN must fail the checks, hence the negated comparisons.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use couette::cli::config::{from_json, THREADS_ENV};
use couette::cli::io;
use couette::cli::run::{self as runner, RunError};
use couette::cli::verify;
use couette::cli::{parse_config, RunConfig, Threads};
use couette::integrator::StepControl;
use couette::symbols::{audit_symbols, AuditGrid};

#[derive(Parser)]
#[command(
    name = "couette",
    version,
    about = "Linearised compressible Couette flow, mode by mode"
)]
#[command(after_help = format!(
    "Configuration keys and defaults (JSON):\n  \
     gamma, nu, M, t_end       required\n  \
     s = 1.5                   Sobolev index of the weighted diagnostics\n  \
     grid = {{\"K\": 8, \"eta_max\": 32, \"delta_eta\": 0.25}}\n  \
     data = {{\"seed\": 42, \"k_band\": [1, K], \"eta_band\": eta_max, \"spectrum_decay\": 3,\n          \
     \"target_norm\": 1, \"norm_index\": 1.5}}\n  \
     constraint = false        impose rho + gamma omega + theta = 0 on the data\n  \
     dt_max = 0.05, safety = 0.1\n  \
     output_times = null       explicit list; otherwise every output_interval = 0.5\n  \
     emit_snapshots = false    write all four fields at every output\n  \
     threads = \"auto\"          or a positive integer; {THREADS_ENV} overrides\n  \
     system = \"reduced\"        or \"full\"\n  \
     allow_hypothesis_violation = false\n\n\
     Exit status: 0 ok, 1 invalid input, 2 integration failure, 3 check failed."
))]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate initial data and write rho/alpha/omega/theta CSVs plus a manifest.
    GenData {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Integrate one configuration and write trajectory.csv and manifest.json.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Directory with rho.csv, alpha.csv, omega.csv, theta.csv to use as data.
        #[arg(long)]
        initial: Option<PathBuf>,
        /// Worker threads (overrides the config).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run a JSON array of configurations and write a summary table.
    Sweep {
        #[arg(long)]
        configs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit power laws and decay rates to a trajectory CSV; prints JSON.
    FitRates {
        #[arg(long)]
        trajectory: PathBuf,
        /// Viscosity setting the start nu^(-1/3) of the decay-rate window.
        #[arg(long)]
        nu: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the energy balance on random (mode, time) samples.
    VerifyEnergy {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1e-4)]
        fd_dt: f64,
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
    },
    /// Evaluate the pointwise symbol inequalities over a grid; prints JSON.
    AuditSymbols {
        /// JSON AuditGrid; defaults to t in [0, 1000], k in [1, 8], |eta| <= 32.
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare full-system and reduced-system integrations mode by mode.
    OracleCheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the k = 0 integration with the damped-wave closed form.
    ZeroModeCheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,3")]
        etas: Vec<f64>,
        #[arg(long, default_value_t = 20.0)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Run(RunError),
    Check(String),
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        Failure::Run(e)
    }
}

impl From<couette::cli::ConfigError> for Failure {
    fn from(e: couette::cli::ConfigError) -> Self {
        Failure::Run(e.into())
    }
}

impl From<io::IoError> for Failure {
    fn from(e: io::IoError) -> Self {
        Failure::Run(e.into())
    }
}

fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    Ok(parse_config(&io::read_file(path)?)?)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => io::write_file(p, text.as_bytes())?,
        None => println!("{text}"),
    }
    Ok(())
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serialisable")
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::GenData { config, out } => {
            let cfg = load_config(&config)?;
            let field = runner::initial_field(&cfg)?;
            runner::write_field_set(&field, &out)?;
            let manifest = serde_json::json!({
                "grid": cfg.grid,
                "data": cfg.data,
                "constraint": cfg.constraint,
                "gamma": cfg.gamma,
                "code_version": env!("CARGO_PKG_VERSION"),
            });
            io::write_file(&out.join("manifest.json"), json(&manifest).as_bytes())?;
        }
        Command::Simulate {
            config,
            out,
            initial,
            threads,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(n) = threads {
                cfg.threads = Threads::Count(n);
            }
            let init = match initial {
                Some(dir) => Some(runner::read_field_set(&dir, &cfg.grid)?),
                None => None,
            };
            let result = runner::run(&cfg, init)?;
            runner::write_run(&result, &out)?;
            log::info!("done in {:.2}s", result.manifest.wall_time_s);
        }
        Command::Sweep { configs, out } => {
            let list = runner::parse_sweep(&io::read_file(&configs)?)?;
            let rows = runner::sweep(list, Some(&out))?;
            let failed = rows.iter().filter(|r| r.status != "ok").count();
            if failed > 0 {
                log::warn!("{failed} of {} runs failed; see summary.csv", rows.len());
            }
        }
        Command::FitRates {
            trajectory,
            nu,
            out,
        } => {
            let records = io::read_trajectory(&trajectory)?;
            emit(out.as_deref(), &json(&runner::fit_rates(&records, nu)))?;
        }
        Command::VerifyEnergy {
            config,
            out,
            samples,
            seed,
            fd_dt,
            tol,
        } => {
            let cfg = load_config(&config)?;
            let field = runner::initial_field(&cfg)?;
            let rows = verify::verify_energy(&cfg, &field, samples, seed, fd_dt)?;
            io::write_file(&out, verify::energy_csv(&rows).as_bytes())?;
            let worst = rows.iter().map(|r| r.balance_residual).fold(0.0, f64::max);
            println!(
                "max balance residual {worst:.3e} over {} samples",
                rows.len()
            );
            if !(worst <= tol) {
                return Err(Failure::Check(format!(
                    "balance residual {worst:.3e} > {tol:.1e}"
                )));
            }
        }
        Command::AuditSymbols { grid, out } => {
            let grid: AuditGrid = match grid {
                Some(p) => from_json(&io::read_file(&p)?)?,
                None => AuditGrid::default(),
            };
            let rows = audit_symbols(&grid);
            emit(out.as_deref(), &json(&rows))?;
            let bad: Vec<&str> = rows
                .iter()
                .filter(|r| {
                    let floor = if r.inequality == "bracket_lower_bound" {
                        0.2
                    } else if r.inequality.starts_with("crucial_property") {
                        0.5
                    } else {
                        0.0
                    };
                    !(r.min_margin >= floor)
                })
                .map(|r| r.inequality.as_str())
                .collect();
            if !bad.is_empty() {
                return Err(Failure::Check(format!(
                    "inequalities below threshold: {bad:?}"
                )));
            }
        }
        Command::OracleCheck { config, tol, out } => {
            let cfg = load_config(&config)?;
            let field = runner::initial_field(&cfg)?;
            let report = verify::oracle_check(&cfg, &field)?;
            emit(out.as_deref(), &json(&report))?;
            if !(report.max_rel_diff <= tol) {
                return Err(Failure::Check(format!(
                    "relative difference {:.3e} > {tol:.1e}",
                    report.max_rel_diff
                )));
            }
        }
        Command::ZeroModeCheck {
            config,
            etas,
            t_end,
            tol,
            out,
        } => {
            let cfg = load_config(&config)?;
            let control = StepControl::new(cfg.dt_max.min(0.01), 0.01, t_end, vec![])
                .map_err(|e| RunError::Validation(e.to_string()))?;
            let rows = verify::zero_mode_check(&cfg.params(), &etas, t_end, 0.1, &control)?;
            emit(out.as_deref(), &json(&rows))?;
            let worst = rows.iter().map(|r| r.max_rel_err).fold(0.0, f64::max);
            if !(worst <= tol) {
                return Err(Failure::Check(format!(
                    "zero-mode error {worst:.3e} > {tol:.1e}"
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    // Usage errors are input errors (status 1), not integration failures.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(3)
        }
    }
}
