//! Single runs, sweeps and rate fits.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use super::config::{from_json, ConfigError, RunConfig};
use super::io::{self, fmt_f64, IoError};
use crate::diagnostics::DiagnosticsRecord;
use crate::grid::{Component, SpectralField};
use crate::initial_data::{self, DataError};
use crate::integrator::{self, EvolveOptions, IntegrationError, Trajectory};
use crate::rate_fit::{self, FitResult};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("integration failed: {0}")]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("thread pool: {0}")]
    Pool(String),
    #[error("{0}")]
    Validation(String),
}

impl RunError {
    /// Process exit status: 1 for bad input, 2 for integration failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Integration(_) => 2,
            _ => 1,
        }
    }
}

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, RunError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;
    Ok(pool.install(f))
}

/// Initial data described by `config`, constrained if requested.
pub fn initial_field(config: &RunConfig) -> Result<SpectralField, RunError> {
    let field = initial_data::random_field(&config.data, &config.grid)?;
    Ok(if config.constraint {
        initial_data::apply_constraint(&field, config.gamma)
    } else {
        field
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub config: RunConfig,
    pub seed: u64,
    pub code_version: &'static str,
    pub wall_time_s: f64,
    pub threads: usize,
    pub lattice_points: usize,
    pub initial_h0_norm: f64,
    pub initial_hs_norm: f64,
    pub initial_constraint_defect: f64,
    /// Largest `k = 0` amplitude over all outputs.
    pub zero_mode_max: f64,
}

pub struct RunOutput {
    pub trajectory: Trajectory,
    pub manifest: Manifest,
}

/// Integrates `config`, optionally from explicit initial data.
pub fn run(config: &RunConfig, initial: Option<SpectralField>) -> Result<RunOutput, RunError> {
    config.validate()?;
    let control = config.step_control()?;
    let field = match initial {
        Some(f) => {
            if f.grid() != &config.grid {
                return Err(RunError::Validation(
                    "initial data grid differs from config grid".into(),
                ));
            }
            f
        }
        None => initial_field(config)?,
    };
    let threads = config.threads.resolve();
    let options = EvolveOptions {
        system: config.system,
        exact_constraint: config.constraint,
        emit_snapshots: config.emit_snapshots,
    };
    let params = config.params();
    log::info!(
        "run: {} on {threads} thread(s), t_end = {}, {} outputs",
        config.grid,
        config.t_end,
        control.output_times.len()
    );
    let started = Instant::now();
    let trajectory = with_pool(threads, || {
        integrator::evolve(&field, &control, &params, &options)
    })??;
    let wall = started.elapsed().as_secs_f64();
    let manifest = Manifest {
        config: config.clone(),
        seed: config.data.seed,
        code_version: env!("CARGO_PKG_VERSION"),
        wall_time_s: wall,
        threads,
        lattice_points: config.grid.len(),
        initial_h0_norm: trajectory.initial_l2,
        initial_hs_norm: field.max_sobolev_norm(config.s),
        initial_constraint_defect: initial_data::constraint_defect(&field, config.gamma),
        zero_mode_max: trajectory.zero_mode_max.iter().copied().fold(0.0, f64::max),
    };
    Ok(RunOutput {
        trajectory,
        manifest,
    })
}

/// Writes `trajectory.csv`, `manifest.json` and, if present, snapshots.
pub fn write_run(out: &RunOutput, dir: &Path) -> Result<(), RunError> {
    io::write_file(
        &dir.join("trajectory.csv"),
        io::trajectory_csv(&out.trajectory.records).as_bytes(),
    )?;
    let manifest = serde_json::to_string_pretty(&out.manifest).expect("manifest serialises");
    io::write_file(&dir.join("manifest.json"), manifest.as_bytes())?;
    if let Some(snaps) = &out.trajectory.snapshots {
        for (n, (snap, t)) in snaps.iter().zip(&out.trajectory.times).enumerate() {
            let sub = dir.join("snapshots").join(format!("{n:05}"));
            write_field_set(snap, &sub)?;
            io::write_file(&sub.join("t.txt"), format!("{}\n", fmt_f64(*t)).as_bytes())?;
        }
    }
    Ok(())
}

/// Writes `rho.csv`, `alpha.csv`, `omega.csv`, `theta.csv` into `dir`.
pub fn write_field_set(field: &SpectralField, dir: &Path) -> Result<(), RunError> {
    for c in Component::ALL {
        io::write_file(
            &dir.join(format!("{}.csv", c.name())),
            io::field_csv(field.component(c)).as_bytes(),
        )?;
    }
    Ok(())
}

/// Reads the four files written by [`write_field_set`].
pub fn read_field_set(dir: &Path, grid: &crate::grid::GridSpec) -> Result<SpectralField, RunError> {
    let mut field = SpectralField::zeros(*grid);
    for c in Component::ALL {
        *field.component_mut(c) = io::read_field(&dir.join(format!("{}.csv", c.name())), grid)?;
    }
    Ok(field)
}

/// Fits for one diagnostic column.
#[derive(Clone, Debug, Default, Serialize)]
pub struct ColumnFits {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_law: Option<FitResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_law_error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exp_rate: Option<FitResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exp_rate_error: Option<String>,
}

/// Diagnostic columns that receive fits.
pub const FITTED_COLUMNS: [&str; 7] = [
    "norm_Pvx",
    "norm_Pvy",
    "norm_Qv",
    "norm_rho",
    "norm_theta",
    "norm_rho_plus_theta",
    "lemma_Q",
];

/// `(t, value)` pairs of one trajectory column.
pub fn column(records: &[DiagnosticsRecord], name: &str) -> Option<Vec<(f64, f64)>> {
    let i = DiagnosticsRecord::COLUMNS.iter().position(|c| *c == name)?;
    Some(records.iter().map(|r| (r.t, r.values()[i])).collect())
}

/// Power-law slopes over `[10, t_end]` and rates (detrended by `<t>^(1/2)`)
/// over `[nu^(-1/3), t_end]` for every fitted column.
pub fn fit_rates(records: &[DiagnosticsRecord], nu: f64) -> BTreeMap<String, ColumnFits> {
    let t_end = records.last().map_or(0.0, |r| r.t);
    let mut out = BTreeMap::new();
    for name in FITTED_COLUMNS {
        let series = column(records, name).expect("known column");
        let mut fits = ColumnFits::default();
        match rate_fit::power_law_slope(&series, [10.0, t_end]) {
            Ok(f) => fits.power_law = Some(f),
            Err(e) => fits.power_law_error = Some(e.to_string()),
        }
        match rate_fit::exp_rate(&series, [nu.powf(-1.0 / 3.0), t_end], 0.5) {
            Ok(f) => fits.exp_rate = Some(f),
            Err(e) => fits.exp_rate_error = Some(e.to_string()),
        }
        out.insert(name.to_string(), fits);
    }
    out
}

/// One row of the sweep summary.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub run: usize,
    pub config: Option<RunConfig>,
    pub status: String,
    pub fits: BTreeMap<String, ColumnFits>,
}

/// Parses a JSON array of configurations. Entries that fail to parse are
/// kept as errors so the sweep can report them.
pub fn parse_sweep(text: &str) -> Result<Vec<Result<RunConfig, ConfigError>>, ConfigError> {
    let values: Vec<serde_json::Value> = from_json(text)?;
    if values.is_empty() {
        return Err(ConfigError::Invalid {
            key: "[]".into(),
            message: "sweep needs at least one configuration".into(),
        });
    }
    Ok(values
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            super::config::parse_config(&v.to_string()).map_err(|e| match e {
                ConfigError::Hypothesis { key, message } => ConfigError::Hypothesis {
                    key: format!("[{i}].{key}"),
                    message,
                },
                ConfigError::Invalid { key, message } => ConfigError::Invalid {
                    key: format!("[{i}].{key}"),
                    message,
                },
                ConfigError::UnknownKey { path, message } => ConfigError::UnknownKey {
                    path: format!("[{i}].{path}"),
                    message,
                },
                ConfigError::Schema { path, message } => ConfigError::Schema {
                    path: format!("[{i}].{path}"),
                    message,
                },
                other => other,
            })
        })
        .collect())
}

/// Runs every configuration in order; failures are recorded and skipped.
/// With `out_dir`, each run writes into `run_NNN/` and a `summary.csv` is produced.
pub fn sweep(
    configs: Vec<Result<RunConfig, ConfigError>>,
    out_dir: Option<&Path>,
) -> Result<Vec<SweepRow>, RunError> {
    if configs.is_empty() {
        return Err(RunError::Validation(
            "sweep needs at least one configuration".into(),
        ));
    }
    let mut rows = Vec::new();
    for (i, cfg) in configs.into_iter().enumerate() {
        let row = match cfg {
            Err(e) => SweepRow {
                run: i,
                config: None,
                status: format!("error: {e}"),
                fits: BTreeMap::new(),
            },
            Ok(cfg) => match run(&cfg, None) {
                Ok(out) => {
                    if let Some(dir) = out_dir {
                        write_run(&out, &dir.join(format!("run_{i:03}")))?;
                    }
                    SweepRow {
                        run: i,
                        fits: fit_rates(&out.trajectory.records, cfg.nu),
                        config: Some(cfg),
                        status: "ok".into(),
                    }
                }
                Err(e) => {
                    log::error!("sweep run {i}: {e}");
                    SweepRow {
                        run: i,
                        config: Some(cfg),
                        status: format!("error: {e}"),
                        fits: BTreeMap::new(),
                    }
                }
            },
        };
        rows.push(row);
    }
    if let Some(dir) = out_dir {
        io::write_file(&dir.join("summary.csv"), summary_csv(&rows).as_bytes())?;
    }
    Ok(rows)
}

pub fn summary_header() -> String {
    let mut cols: Vec<String> = [
        "run",
        "gamma",
        "nu",
        "M",
        "s",
        "constraint",
        "t_end",
        "status",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    cols.extend(FITTED_COLUMNS.iter().map(|c| format!("slope_{c}")));
    cols.extend(FITTED_COLUMNS.iter().map(|c| format!("rate_{c}")));
    cols.join(",")
}

pub fn summary_csv(rows: &[SweepRow]) -> String {
    let mut s = summary_header();
    s.push('\n');
    for r in rows {
        let mut cells = vec![r.run.to_string()];
        match &r.config {
            Some(c) => {
                cells.extend([c.gamma, c.nu, c.mach, c.s].map(fmt_f64));
                cells.push(c.constraint.to_string());
                cells.push(fmt_f64(c.t_end));
            }
            None => cells.extend(std::iter::repeat_n(String::new(), 6)),
        }
        cells.push(format!("\"{}\"", r.status.replace('"', "'")));
        let get = |c: &str, pick: fn(&ColumnFits) -> Option<&FitResult>| {
            r.fits
                .get(c)
                .and_then(pick)
                .map_or_else(|| "nan".to_string(), |f| fmt_f64(f.exponent_or_rate))
        };
        cells.extend(
            FITTED_COLUMNS
                .iter()
                .map(|c| get(c, |f| f.power_law.as_ref())),
        );
        cells.extend(
            FITTED_COLUMNS
                .iter()
                .map(|c| get(c, |f| f.exp_rate.as_ref())),
        );
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}
