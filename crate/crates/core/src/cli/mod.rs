//! Configuration, orchestration and file formats behind the `couette` binary.

pub mod config;
pub mod io;
pub mod run;
pub mod verify;

pub use config::{parse_config, ConfigError, RunConfig, Threads};
pub use run::{fit_rates, run, sweep, RunError, RunOutput};
