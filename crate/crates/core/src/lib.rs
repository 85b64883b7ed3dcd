//! Mode-by-mode simulation of the linearised compressible Navier-Stokes
//! equations around plane Couette flow on `T x R`, together with the checks
//! used to verify inviscid damping, enhanced dissipation and the energy
//! estimates behind them.
//!
//! In the sheared frame every Fourier mode `(k, eta)` evolves independently,
//! so a solution is a collection of small linear ODE systems. The crate
//! integrates them ([`integrator`]), measures norms ([`diagnostics`]), fits
//! rates ([`rate_fit`]) and exposes all of it through the `couette` binary.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diagnostics;
pub mod dynamics;
pub mod energy;
pub mod grid;
pub mod initial_data;
pub mod integrator;
pub mod rate_fit;
pub mod symbols;
pub mod zero_mode;

pub use dynamics::{FlowParams, ModeState, ReducedModeState};
pub use grid::{GridSpec, ScalarField, SpectralField};
pub use integrator::{evolve, EvolveOptions, StepControl, SystemKind, Trajectory};
pub use symbols::Mode;
