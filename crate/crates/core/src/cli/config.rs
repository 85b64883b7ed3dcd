//! Run configuration: JSON schema, defaults and validation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::FlowParams;
use crate::grid::GridSpec;
use crate::initial_data::DataSpec;
use crate::integrator::{StepControl, SystemKind};

/// Environment variable overriding the configured thread count.
pub const THREADS_ENV: &str = "COUETTE_THREADS";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown key at `{path}`: {message}")]
    UnknownKey { path: String, message: String },
    #[error("invalid value at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("`{key}` violates the stability hypotheses: {message} (set allow_hypothesis_violation to proceed)")]
    Hypothesis { key: String, message: String },
    #[error("invalid `{key}`: {message}")]
    Invalid { key: String, message: String },
}

impl ConfigError {
    /// Key path the error refers to.
    pub fn key(&self) -> &str {
        match self {
            ConfigError::Syntax { .. } => "",
            ConfigError::UnknownKey { path, .. } | ConfigError::Schema { path, .. } => path,
            ConfigError::Hypothesis { key, .. } | ConfigError::Invalid { key, .. } => key,
        }
    }
}

/// Worker thread count: a positive integer or `"auto"`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawThreads", into = "RawThreads")]
pub enum Threads {
    Count(usize),
    #[default]
    Auto,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawThreads {
    Count(usize),
    Name(String),
}

impl TryFrom<RawThreads> for Threads {
    type Error = String;

    fn try_from(raw: RawThreads) -> Result<Self, String> {
        match raw {
            RawThreads::Count(n) => Ok(Threads::Count(n)),
            RawThreads::Name(s) if s == "auto" => Ok(Threads::Auto),
            RawThreads::Name(s) => Err(format!(
                "expected \"auto\" or a positive integer, got {s:?}"
            )),
        }
    }
}

impl From<Threads> for RawThreads {
    fn from(t: Threads) -> Self {
        match t {
            Threads::Count(n) => RawThreads::Count(n),
            Threads::Auto => RawThreads::Name("auto".into()),
        }
    }
}

impl Threads {
    /// Thread count after applying the `COUETTE_THREADS` override.
    pub fn resolve(self) -> usize {
        if let Some(n) = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
        {
            return n;
        }
        match self {
            Threads::Count(n) => n.max(1),
            Threads::Auto => std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

fn default_s() -> f64 {
    1.5
}
fn default_grid() -> GridSpec {
    GridSpec::new(8, 32.0, 0.25).expect("valid default grid")
}
fn default_dt_max() -> f64 {
    0.05
}
fn default_safety() -> f64 {
    0.1
}
fn default_interval() -> f64 {
    0.5
}

/// Everything needed to reproduce one run.
///
/// Defaults: `s = 1.5`, grid `{K: 8, eta_max: 32, delta_eta: 0.25}`,
/// `data` per [`DataSpec::default`], `constraint = false`, `dt_max = 0.05`,
/// `safety = 0.1`, outputs every `output_interval = 0.5` unless
/// `output_times` is given, `threads = "auto"`, `system = "reduced"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub gamma: f64,
    pub nu: f64,
    #[serde(rename = "M")]
    pub mach: f64,
    #[serde(default = "default_s")]
    pub s: f64,
    #[serde(default = "default_grid")]
    pub grid: GridSpec,
    #[serde(default)]
    pub data: DataSpec,
    /// Impose `rho_in + gamma omega_in + theta_in = 0` on the data and drive
    /// the reduced system with zero forcing.
    #[serde(default)]
    pub constraint: bool,
    pub t_end: f64,
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
    #[serde(default = "default_safety")]
    pub safety: f64,
    #[serde(default)]
    pub output_times: Option<Vec<f64>>,
    #[serde(default = "default_interval")]
    pub output_interval: f64,
    #[serde(default)]
    pub emit_snapshots: bool,
    #[serde(default)]
    pub threads: Threads,
    #[serde(default)]
    pub system: SystemKind,
    /// Run even if `gamma > 1`, `0 < nu < 1`, `0 < M <= 1/nu` fail.
    #[serde(default)]
    pub allow_hypothesis_violation: bool,
}

impl RunConfig {
    /// A configuration with every optional key at its default.
    pub fn minimal(gamma: f64, nu: f64, mach: f64, t_end: f64) -> Self {
        Self {
            gamma,
            nu,
            mach,
            s: default_s(),
            grid: default_grid(),
            data: DataSpec::default(),
            constraint: false,
            t_end,
            dt_max: default_dt_max(),
            safety: default_safety(),
            output_times: None,
            output_interval: default_interval(),
            emit_snapshots: false,
            threads: Threads::Auto,
            system: SystemKind::Reduced,
            allow_hypothesis_violation: false,
        }
    }

    pub fn params(&self) -> FlowParams {
        FlowParams::new_unchecked(self.gamma, self.nu, self.mach, self.s)
    }

    pub fn step_control(&self) -> Result<StepControl, ConfigError> {
        let invalid = |key: &str, e: crate::integrator::IntegrationError| ConfigError::Invalid {
            key: key.into(),
            message: e.to_string(),
        };
        match &self.output_times {
            Some(times) => StepControl::new(self.dt_max, self.safety, self.t_end, times.clone())
                .map_err(|e| invalid("output_times", e)),
            None => StepControl::with_interval(
                self.dt_max,
                self.safety,
                self.t_end,
                self.output_interval,
            )
            .map_err(|e| invalid("output_interval", e)),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Err(e) = self.params().validate() {
            // Outside the hypotheses the formulas still need these.
            let usable = self.gamma > 1.0 && self.nu >= 0.0 && self.mach > 0.0 && self.s >= 0.0;
            if !self.allow_hypothesis_violation || !usable || e.key() == "s" {
                return Err(ConfigError::Hypothesis {
                    key: e.key().into(),
                    message: e.to_string(),
                });
            }
            log::warn!("running outside the stability hypotheses: {e}");
        }
        self.data
            .validate(&self.grid)
            .map_err(|e| ConfigError::Invalid {
                key: e.key().into(),
                message: e.to_string(),
            })?;
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(ConfigError::Invalid {
                key: "t_end".into(),
                message: format!("must be finite and nonnegative (got {})", self.t_end),
            });
        }
        if let Threads::Count(0) = self.threads {
            return Err(ConfigError::Invalid {
                key: "threads".into(),
                message: "must be positive".into(),
            });
        }
        self.step_control()?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}

/// Parses and validates a JSON configuration, reporting the key path of any error.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let config: RunConfig = from_json(text)?;
    config.validate()?;
    Ok(config)
}

/// Deserialises any config-like JSON document with key-path errors.
pub fn from_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let message = inner.to_string();
        if inner.is_syntax() || inner.is_eof() {
            ConfigError::Syntax {
                line: inner.line(),
                column: inner.column(),
                message,
            }
        } else if message.starts_with("unknown field") {
            ConfigError::UnknownKey { path, message }
        } else {
            ConfigError::Schema { path, message }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(r#"{"gamma": 1.4, "nu": 0.01, "M": 1.0, "t_end": 100}"#).unwrap();
        assert_eq!(c, RunConfig::minimal(1.4, 0.01, 1.0, 100.0));
        assert_eq!(c.grid.n_eta(), 257);
        assert_eq!(c.step_control().unwrap().output_times.len(), 201);
    }

    #[test]
    fn hypothesis_violation_names_key() {
        let e = parse_config(r#"{"gamma": 1.4, "nu": 1.5, "M": 0.5, "t_end": 1}"#).unwrap_err();
        assert!(matches!(e, ConfigError::Hypothesis { .. }));
        assert_eq!(e.key(), "nu");
        let e = parse_config(r#"{"gamma": 1.4, "nu": 0.1, "M": 20, "t_end": 1}"#).unwrap_err();
        assert_eq!(e.key(), "M");
        let ok = parse_config(
            r#"{"gamma": 1.4, "nu": 0.1, "M": 20, "t_end": 1, "allow_hypothesis_violation": true}"#,
        );
        assert!(ok.is_ok());
    }

    #[test]
    fn errors_are_distinct_and_carry_paths() {
        let e = parse_config(r#"{"gamma": 1.4, "nu": 0.01, "M": 1.0, "t_end": 1"#).unwrap_err();
        assert!(matches!(e, ConfigError::Syntax { .. }));
        let e = parse_config(r#"{"gamma": 1.4, "nu": 0.01, "M": 1.0, "t_end": 1, "grid": {"K": 4, "eta_max": 8, "delta_eta": 1, "x": 2}}"#)
            .unwrap_err();
        assert!(matches!(e, ConfigError::UnknownKey { .. }), "{e}");
        assert!(e.key().starts_with("grid"), "{e}");
        let e = parse_config(
            r#"{"gamma": 1.4, "nu": 0.01, "M": 1.0, "t_end": 1, "data": {"seed": "x"}}"#,
        )
        .unwrap_err();
        assert!(matches!(e, ConfigError::Schema { .. }));
        assert_eq!(e.key(), "data.seed");
        let e =
            parse_config(r#"{"gamma": 1.4, "nu": 0.01, "M": 1.0, "t_end": 1, "threads": "many"}"#)
                .unwrap_err();
        assert_eq!(e.key(), "threads");
        let e = parse_config(
            r#"{"gamma": 1.4, "nu": 0.01, "M": 1.0, "t_end": 1, "data": {"k_band": [1, 20]}}"#,
        )
        .unwrap_err();
        assert!(matches!(e, ConfigError::Invalid { .. }));
    }

    #[test]
    fn round_trip() {
        let text = r#"{"gamma": 1.4, "nu": 0.001, "M": 2.0, "s": 1.0, "t_end": 40,
            "constraint": true, "threads": 3, "output_times": [0, 10, 40],
            "grid": {"K": 4, "eta_max": 16, "delta_eta": 0.5},
            "data": {"seed": 9, "k_band": [1, 3], "eta_band": 8}}"#;
        let c = parse_config(text).unwrap();
        assert_eq!(parse_config(&c.to_json()).unwrap(), c);
        let auto = RunConfig::minimal(1.4, 0.01, 1.0, 1.0);
        assert_eq!(parse_config(&auto.to_json()).unwrap(), auto);
    }
}
