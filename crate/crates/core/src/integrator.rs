//! Time advancement of individual modes and of whole spectral fields.
//!
//! Every mode obeys a linear ODE in which only the divergence amplitude `A`
//! carries the stiff coefficient `-nu p + (d/dt p)/p`. Over a step starting
//! at `t0` the substitution `A = g(t) * A~` with
//! `g(t) = p(t)/p(t0) * exp(-nu * integral_{t0}^{t} p)` removes that
//! coefficient exactly, and the remaining system is advanced with classical
//! fourth-order Runge-Kutta (a Lawson scheme). The `k = 0` modes use the same
//! scheme with `g(t) = exp(-nu eta^2 (t - t0))`.
//!
//! Modes are advanced independently in parallel between output instants;
//! everything that depends on more than one mode is folded sequentially in
//! lattice order, so results do not depend on the thread count.

use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{DiagnosticsInputs, DiagnosticsRecord};
use crate::dynamics::{self, FlowParams, ModeState, ReducedModeState};
use crate::grid::{GridSpec, ScalarField, SpectralField};
use crate::symbols::{DomainError, Mode};
use crate::zero_mode::ZeroModeState;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrationError {
    #[error("non-finite state in mode k={k}, eta={eta} at t={t}")]
    NonFinite { k: i64, eta: f64, t: f64 },
    #[error("invalid step control: {0}")]
    Control(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Step-size law and output schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub dt_max: f64,
    pub safety: f64,
    pub t_end: f64,
    pub output_times: Vec<f64>,
    /// A mode with zero forcing whose every amplitude has fallen below this
    /// fraction of its initial size is set to exactly zero and no longer
    /// stepped. Zero disables the cut.
    #[serde(default = "default_extinction")]
    pub extinction: f64,
}

fn default_extinction() -> f64 {
    1e-200
}

impl StepControl {
    /// Validates and normalises the schedule: times are sorted, deduplicated
    /// and start at 0.
    pub fn new(
        dt_max: f64,
        safety: f64,
        t_end: f64,
        output_times: Vec<f64>,
    ) -> Result<Self, IntegrationError> {
        if !(dt_max > 0.0 && dt_max.is_finite()) {
            return Err(IntegrationError::Control(format!("dt_max = {dt_max}")));
        }
        if !(safety > 0.0 && safety <= 1.0) {
            return Err(IntegrationError::Control(format!("safety = {safety}")));
        }
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(IntegrationError::Control(format!("t_end = {t_end}")));
        }
        let mut times = output_times;
        if times.iter().any(|t| !(0.0..=t_end).contains(t)) {
            return Err(IntegrationError::Control(
                "output times must lie in [0, t_end]".into(),
            ));
        }
        times.push(0.0);
        times.sort_by(f64::total_cmp);
        times.dedup();
        Ok(Self {
            dt_max,
            safety,
            t_end,
            output_times: times,
            extinction: default_extinction(),
        })
    }

    /// Evenly spaced outputs every `interval`, always ending at `t_end`.
    pub fn with_interval(
        dt_max: f64,
        safety: f64,
        t_end: f64,
        interval: f64,
    ) -> Result<Self, IntegrationError> {
        if !(interval > 0.0) {
            return Err(IntegrationError::Control(format!("interval = {interval}")));
        }
        let n = (t_end / interval * (1.0 + 1e-12)).floor() as usize;
        let mut times: Vec<f64> = (0..=n)
            .map(|i| i as f64 * interval)
            .filter(|&t| t <= t_end)
            .collect();
        times.push(t_end);
        Self::new(dt_max, safety, t_end, times)
    }

    /// Step size for a `k != 0` mode starting at `t`.
    ///
    /// The acoustic part resolves the frequency `sqrt(p)/M` using the bound
    /// `sqrt(p) <= |k| (1 + t) + |eta|`; the viscous part keeps
    /// `nu p dt <= 1` so the integrating factor stays well inside the range
    /// where the quadrature of the forcing is accurate.
    #[inline]
    pub fn step_size(&self, mode: &Mode, t: f64, params: &FlowParams) -> f64 {
        let k = mode.k().abs() as f64;
        let acoustic = self.safety * params.mach / (k * (1.0 + t) + mode.eta().abs());
        let mut dt = self.dt_max.min(acoustic);
        let p_max = mode.p(t).max(mode.p(t + dt));
        if params.nu * p_max * dt > 1.0 {
            dt = 1.0 / (params.nu * p_max);
        }
        dt
    }

    #[inline]
    pub fn zero_mode_step_size(&self, eta: f64, params: &FlowParams) -> f64 {
        let acoustic = self.safety * params.mach / (1.0 + eta.abs());
        let mut dt = self.dt_max.min(acoustic);
        if params.nu * eta * eta * dt > 1.0 {
            dt = 1.0 / (params.nu * eta * eta);
        }
        dt
    }
}

/// `nu * integral_{t0}^{t1} p(tau) dtau`, in closed form.
pub fn viscous_phase(t0: f64, t1: f64, k: i64, eta: f64, nu: f64) -> Result<f64, DomainError> {
    let mode = Mode::new(k, eta)?;
    if t1 < t0 {
        return Err(DomainError::OutOfRange {
            name: "t1",
            value: t1,
        });
    }
    Ok(phase(&mode, t0, t1, nu))
}

/// Uses `(d0^3 - d1^3) / (3k) = (t1 - t0)(d0^2 + d0 d1 + d1^2) / 3`, which
/// avoids cancellation on short steps.
#[inline]
fn phase(mode: &Mode, t0: f64, t1: f64, nu: f64) -> f64 {
    let k = mode.k() as f64;
    let d0 = mode.shear(t0);
    let d1 = mode.shear(t1);
    nu * (t1 - t0) * (k * k + (d0 * d0 + d0 * d1 + d1 * d1) / 3.0)
}

/// One Lawson-RK4 step for a linear system whose slot 1 carries the stiff
/// self-coupling. `g_half`/`g_end` are the integrating factors at
/// `t0 + h/2` and `t0 + h` (the factor is 1 at `t0`), and `coupled`
/// returns the derivative with that self-coupling removed.
#[inline]
fn lawson_rk4<const N: usize>(
    t0: f64,
    h: f64,
    y0: &[Complex64; N],
    g_half: f64,
    g_end: f64,
    coupled: impl Fn(f64, &[Complex64; N]) -> [Complex64; N],
) -> [Complex64; N] {
    let eval = |t: f64, w: &[Complex64; N], g: f64| {
        let mut y = *w;
        y[1] *= g;
        let mut f = coupled(t, &y);
        f[1] /= g;
        f
    };
    let axpy = |w: &[Complex64; N], f: &[Complex64; N], s: f64| {
        let mut out = *w;
        for i in 0..N {
            out[i] += f[i] * s;
        }
        out
    };
    let th = t0 + 0.5 * h;
    let k1 = eval(t0, y0, 1.0);
    let k2 = eval(th, &axpy(y0, &k1, 0.5 * h), g_half);
    let k3 = eval(th, &axpy(y0, &k2, 0.5 * h), g_half);
    let k4 = eval(t0 + h, &axpy(y0, &k3, h), g_end);
    let mut out = *y0;
    let h6 = h / 6.0;
    for i in 0..N {
        out[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * h6;
    }
    out[1] *= g_end;
    out
}

/// Advances a reduced `(Phi, A)` state by one step of size `dt`.
pub fn step_reduced(
    state: &ReducedModeState,
    t: f64,
    dt: f64,
    params: &FlowParams,
    forcing: Complex64,
) -> Result<ReducedModeState, IntegrationError> {
    if !(dt > 0.0) {
        return Err(IntegrationError::Control(format!("dt = {dt}")));
    }
    let next = step_reduced_unchecked(state, t, dt, params, forcing);
    check_finite(&[next.phi, next.a], &state.mode, t + dt)?;
    Ok(next)
}

#[inline]
fn step_reduced_unchecked(
    state: &ReducedModeState,
    t: f64,
    dt: f64,
    params: &FlowParams,
    forcing: Complex64,
) -> ReducedModeState {
    let kernel = ReducedKernel::new(&state.mode, params, forcing);
    let (phi, a) = kernel.step(t, dt, state.phi, state.a);
    ReducedModeState {
        mode: state.mode,
        phi,
        a,
    }
}

/// The Lawson step of [`lawson_rk4`] written out for the `(Phi, A)` system,
/// with each coefficient evaluated once per stage time.
struct ReducedKernel {
    k: f64,
    k2: f64,
    eta: f64,
    inv_m2: f64,
    nu: f64,
    forcing: Complex64,
}

impl ReducedKernel {
    fn new(mode: &Mode, params: &FlowParams, forcing: Complex64) -> Self {
        let k = mode.k() as f64;
        Self {
            k,
            k2: k * k,
            eta: mode.eta(),
            inv_m2: 1.0 / (params.mach * params.mach),
            nu: params.nu,
            forcing,
        }
    }

    #[inline(always)]
    fn step(&self, t: f64, h: f64, phi: Complex64, a: Complex64) -> (Complex64, Complex64) {
        let d0 = self.eta - self.k * t;
        let dh = self.eta - self.k * (t + 0.5 * h);
        let d1 = self.eta - self.k * (t + h);
        let p0 = self.k2 + d0 * d0;
        let ph = self.k2 + dh * dh;
        let p1 = self.k2 + d1 * d1;
        let vh = self.nu * 0.5 * h * (self.k2 + (d0 * d0 + d0 * dh + dh * dh) / 3.0);
        let v1 = self.nu * h * (self.k2 + (d0 * d0 + d0 * d1 + d1 * d1) / 3.0);
        let gh = ph / p0 * (-vh).exp();
        let g1 = p1 / p0 * (-v1).exp();
        let (ghi, g1i) = (1.0 / gh, 1.0 / g1);
        let coef = |p: f64| {
            let shear = 2.0 * self.k2 / p;
            (p * self.inv_m2 + shear, self.forcing * shear)
        };
        let (c0, f0) = coef(p0);
        let (ch, fh) = coef(ph);
        let (c1, f1) = coef(p1);
        let hh = 0.5 * h;

        let k1p = -a;
        let k1a = phi * c0 - f0;

        let y2p = phi + k1p * hh;
        let y2a = (a + k1a * hh) * gh;
        let k2p = -y2a;
        let k2a = (y2p * ch - fh) * ghi;

        let y3p = phi + k2p * hh;
        let y3a = (a + k2a * hh) * gh;
        let k3p = -y3a;
        let k3a = (y3p * ch - fh) * ghi;

        let y4p = phi + k3p * h;
        let y4a = (a + k3a * h) * g1;
        let k4p = -y4a;
        let k4a = (y4p * c1 - f1) * g1i;

        let h6 = h / 6.0;
        let phi1 = phi + (k1p + (k2p + k3p) * 2.0 + k4p) * h6;
        let a1 = (a + (k1a + (k2a + k3a) * 2.0 + k4a) * h6) * g1;
        (phi1, a1)
    }
}

/// Advances a full `(R, A, Omega, Theta)` state by one step of size `dt`.
pub fn step_full(
    state: &ModeState,
    t: f64,
    dt: f64,
    params: &FlowParams,
) -> Result<ModeState, IntegrationError> {
    if !(dt > 0.0) {
        return Err(IntegrationError::Control(format!("dt = {dt}")));
    }
    let next = step_full_unchecked(state, t, dt, params);
    check_finite(&next.to_array(), &state.mode, t + dt)?;
    Ok(next)
}

#[inline]
fn step_full_unchecked(state: &ModeState, t: f64, dt: f64, params: &FlowParams) -> ModeState {
    state.with_array(FullKernel::new(&state.mode, params).step(t, dt, state.to_array()))
}

/// [`lawson_rk4`] written out for `(R, A, Omega, Theta)`.
struct FullKernel {
    k: f64,
    k2: f64,
    eta: f64,
    inv_gm2: f64,
    gm1: f64,
    nu: f64,
}

impl FullKernel {
    fn new(mode: &Mode, params: &FlowParams) -> Self {
        let k = mode.k() as f64;
        Self {
            k,
            k2: k * k,
            eta: mode.eta(),
            inv_gm2: 1.0 / (params.gamma * params.mach * params.mach),
            gm1: params.gamma - 1.0,
            nu: params.nu,
        }
    }

    #[inline(always)]
    fn step(&self, t: f64, h: f64, y: [Complex64; 4]) -> [Complex64; 4] {
        let d0 = self.eta - self.k * t;
        let dh = self.eta - self.k * (t + 0.5 * h);
        let d1 = self.eta - self.k * (t + h);
        let p0 = self.k2 + d0 * d0;
        let ph = self.k2 + dh * dh;
        let p1 = self.k2 + d1 * d1;
        let vh = self.nu * 0.5 * h * (self.k2 + (d0 * d0 + d0 * dh + dh * dh) / 3.0);
        let v1 = self.nu * h * (self.k2 + (d0 * d0 + d0 * d1 + d1 * d1) / 3.0);
        let gh = ph / p0 * (-vh).exp();
        let g1 = p1 / p0 * (-v1).exp();
        let coef = |p: f64| (p * self.inv_gm2, 2.0 * self.k2 / p);
        let (pr0, sh0) = coef(p0);
        let (prh, shh) = coef(ph);
        let (pr1, sh1) = coef(p1);
        let gm1 = self.gm1;
        // `a` is the physical A at the stage; the returned A-slope is for A~.
        let eval = |w: [Complex64; 4], a: Complex64, pr: f64, sh: f64, gi: f64| {
            [-a, ((w[0] + w[3]) * pr - w[2] * sh) * gi, a, -a * gm1]
        };
        let axpy = |f: &[Complex64; 4], s: f64| {
            [
                y[0] + f[0] * s,
                y[1] + f[1] * s,
                y[2] + f[2] * s,
                y[3] + f[3] * s,
            ]
        };
        let hh = 0.5 * h;
        let k1 = eval(y, y[1], pr0, sh0, 1.0);
        let w = axpy(&k1, hh);
        let k2 = eval(w, w[1] * gh, prh, shh, 1.0 / gh);
        let w = axpy(&k2, hh);
        let k3 = eval(w, w[1] * gh, prh, shh, 1.0 / gh);
        let w = axpy(&k3, h);
        let k4 = eval(w, w[1] * g1, pr1, sh1, 1.0 / g1);
        let h6 = h / 6.0;
        let mut out = y;
        for i in 0..4 {
            out[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * h6;
        }
        out[1] *= g1;
        out
    }
}

/// Advances a `k = 0` state by one step, with the viscous factor
/// `exp(-nu eta^2 dt)` applied exactly.
pub fn step_zero_mode(
    state: &ZeroModeState,
    t: f64,
    dt: f64,
    params: &FlowParams,
) -> ZeroModeState {
    let eta2 = state.eta * state.eta;
    let g_half = (-params.nu * eta2 * 0.5 * dt).exp();
    let g_end = (-params.nu * eta2 * dt).exp();
    let pressure = eta2 / (params.gamma * params.mach * params.mach);
    let gm1 = params.gamma - 1.0;
    let y = lawson_rk4(t, dt, &state.to_array(), g_half, g_end, |_, y| {
        let a = y[1];
        [-a, (y[0] + y[3]) * pressure, a, -a * gm1]
    });
    state.with_array(y)
}

fn check_finite(y: &[Complex64], mode: &Mode, t: f64) -> Result<(), IntegrationError> {
    if y.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(IntegrationError::NonFinite {
            k: mode.k(),
            eta: mode.eta(),
            t,
        })
    }
}

fn max_abs(y: &[Complex64]) -> f64 {
    y.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Integrates a reduced state from `t0` to `t1` with the step law of
/// `control`, landing exactly on `t1`.
pub fn advance_reduced(
    state: &ReducedModeState,
    t0: f64,
    t1: f64,
    params: &FlowParams,
    forcing: Complex64,
    control: &StepControl,
) -> Result<ReducedModeState, IntegrationError> {
    let mut track = ModeTrack::Reduced {
        state: *state,
        forcing,
        entropy: ZERO,
        initial: state.expand(ZERO, forcing, params.gamma),
        scale: max_abs(&[state.phi, state.a]),
    };
    track.advance(t0, t1, params, control)?;
    match track {
        ModeTrack::Reduced { state, .. } => Ok(state),
        _ => unreachable!(),
    }
}

/// Integrates a full state from `t0` to `t1`.
pub fn advance_full(
    state: &ModeState,
    t0: f64,
    t1: f64,
    params: &FlowParams,
    control: &StepControl,
) -> Result<ModeState, IntegrationError> {
    let mut track = ModeTrack::Full {
        state: *state,
        initial: *state,
        scale: max_abs(&state.to_array()),
    };
    track.advance(t0, t1, params, control)?;
    match track {
        ModeTrack::Full { state, .. } => Ok(state),
        _ => unreachable!(),
    }
}

/// Integrates a `k = 0` state from `t0` to `t1`.
pub fn advance_zero_mode(
    state: &ZeroModeState,
    t0: f64,
    t1: f64,
    params: &FlowParams,
    control: &StepControl,
) -> Result<ZeroModeState, IntegrationError> {
    let mut track = ModeTrack::Zero { state: *state };
    track.advance(t0, t1, params, control)?;
    match track {
        ModeTrack::Zero { state } => Ok(state),
        _ => unreachable!(),
    }
}

/// Which per-mode system the field solver integrates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    /// `(Phi, A)` with `Omega`, `R`, `Theta` reconstructed from conserved combinations.
    #[default]
    Reduced,
    /// `(R, A, Omega, Theta)` evolved directly.
    Full,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolveOptions {
    pub system: SystemKind,
    /// Drive the reduced system with exactly zero forcing, i.e. assume
    /// `rho_in + gamma omega_in + theta_in = 0` holds exactly.
    pub exact_constraint: bool,
    pub emit_snapshots: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            system: SystemKind::Reduced,
            exact_constraint: false,
            emit_snapshots: false,
        }
    }
}

/// Per-mode integration state.
#[derive(Clone, Debug)]
enum ModeTrack {
    Reduced {
        state: ReducedModeState,
        forcing: Complex64,
        entropy: Complex64,
        initial: ModeState,
        scale: f64,
    },
    Full {
        state: ModeState,
        initial: ModeState,
        scale: f64,
    },
    Zero {
        state: ZeroModeState,
    },
}

impl ModeTrack {
    fn advance(
        &mut self,
        t0: f64,
        t1: f64,
        params: &FlowParams,
        control: &StepControl,
    ) -> Result<(), IntegrationError> {
        let mut t = t0;
        match self {
            ModeTrack::Reduced {
                state,
                forcing,
                scale,
                ..
            } => {
                let cut = if *forcing == ZERO {
                    control.extinction * *scale
                } else {
                    -1.0
                };
                let cut2 = cut * cut;
                let kernel = ReducedKernel::new(&state.mode, params, *forcing);
                let (mut phi, mut a) = (state.phi, state.a);
                while t < t1 {
                    if cut > 0.0 && phi.norm_sqr() <= cut2 && a.norm_sqr() <= cut2 {
                        phi = ZERO;
                        a = ZERO;
                        break;
                    }
                    let dt = control.step_size(&state.mode, t, params);
                    let (h, next_t) = if t + dt >= t1 {
                        (t1 - t, t1)
                    } else {
                        (dt, t + dt)
                    };
                    (phi, a) = kernel.step(t, h, phi, a);
                    t = next_t;
                }
                // Non-finite values propagate, so one check per interval suffices.
                check_finite(&[phi, a], &state.mode, t1)?;
                state.phi = phi;
                state.a = a;
            }
            ModeTrack::Full { state, scale, .. } => {
                let cut = control.extinction * *scale;
                let cut2 = cut * cut;
                let kernel = FullKernel::new(&state.mode, params);
                let mut y = state.to_array();
                while t < t1 {
                    if cut > 0.0 && y.iter().all(|z| z.norm_sqr() <= cut2) {
                        y = [ZERO; 4];
                        break;
                    }
                    let dt = control.step_size(&state.mode, t, params);
                    let (h, next_t) = if t + dt >= t1 {
                        (t1 - t, t1)
                    } else {
                        (dt, t + dt)
                    };
                    y = kernel.step(t, h, y);
                    t = next_t;
                }
                check_finite(&y, &state.mode, t1)?;
                *state = state.with_array(y);
            }
            ModeTrack::Zero { state } => {
                if state.max_abs() == 0.0 {
                    return Ok(());
                }
                while t < t1 {
                    let dt = control.zero_mode_step_size(state.eta, params);
                    let (h, next_t) = if t + dt >= t1 {
                        (t1 - t, t1)
                    } else {
                        (dt, t + dt)
                    };
                    *state = step_zero_mode(state, t, h, params);
                    if !state
                        .to_array()
                        .iter()
                        .all(|z| z.re.is_finite() && z.im.is_finite())
                    {
                        return Err(IntegrationError::NonFinite {
                            k: 0,
                            eta: state.eta,
                            t: next_t,
                        });
                    }
                    t = next_t;
                }
            }
        }
        Ok(())
    }

    /// Moving-frame `(R, A, Omega, Theta)` and the initial state (`k != 0`).
    fn full_state(&self, gamma: f64) -> Option<(ModeState, ModeState)> {
        match self {
            ModeTrack::Reduced {
                state,
                forcing,
                entropy,
                initial,
                ..
            } => Some((state.expand(*entropy, *forcing, gamma), *initial)),
            ModeTrack::Full { state, initial, .. } => Some((*state, *initial)),
            ModeTrack::Zero { .. } => None,
        }
    }
}

/// Diagnostics at every output instant, plus optional field snapshots.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub records: Vec<DiagnosticsRecord>,
    /// Largest `k = 0` amplitude at each output instant.
    pub zero_mode_max: Vec<f64>,
    /// Moving-frame `(R, A, Omega, Theta)` at each output instant.
    pub snapshots: Option<Vec<SpectralField>>,
    /// `max |(rho_in, alpha_in, omega_in, theta_in)|` in `H^0`.
    pub initial_l2: f64,
}

/// Integrates every mode of `initial` and reduces diagnostics at each output time.
///
/// Runs on the current rayon pool; wrap the call in
/// `ThreadPool::install` to choose the thread count.
pub fn evolve(
    initial: &SpectralField,
    control: &StepControl,
    params: &FlowParams,
    options: &EvolveOptions,
) -> Result<Trajectory, IntegrationError> {
    let grid = *initial.grid();
    let gamma = params.gamma;
    let mut indices = Vec::new();
    let mut tracks = Vec::new();
    for idx in 0..grid.len() {
        let (k, j) = grid.point(idx);
        if k < 0 || (k == 0 && j < 0) {
            continue;
        }
        let eta = grid.eta(j);
        let rho = initial.rho.coeffs()[idx];
        let alpha = initial.alpha.coeffs()[idx];
        let omega = initial.omega.coeffs()[idx];
        let theta = initial.theta.coeffs()[idx];
        let track = if k == 0 {
            ModeTrack::Zero {
                state: ZeroModeState {
                    eta,
                    rho0: rho,
                    alpha0: alpha,
                    omega0: omega,
                    theta0: theta,
                },
            }
        } else {
            let full = ModeState::new(k, eta, rho, alpha, omega, theta)?;
            let scale = max_abs(&full.to_array());
            match options.system {
                SystemKind::Reduced => ModeTrack::Reduced {
                    state: full.reduced(gamma),
                    forcing: if options.exact_constraint {
                        ZERO
                    } else {
                        full.forcing(gamma)
                    },
                    entropy: full.entropy_combination(gamma),
                    initial: full,
                    scale,
                },
                SystemKind::Full => ModeTrack::Full {
                    state: full,
                    initial: full,
                    scale,
                },
            }
        };
        indices.push(idx);
        tracks.push(track);
    }

    let initial_l2 = initial
        .components()
        .iter()
        .map(|f| crate::grid::sobolev_norm(f, 0.0))
        .fold(0.0, f64::max);

    let mut out = Trajectory {
        times: Vec::with_capacity(control.output_times.len()),
        records: Vec::with_capacity(control.output_times.len()),
        zero_mode_max: Vec::with_capacity(control.output_times.len()),
        snapshots: options.emit_snapshots.then(Vec::new),
        initial_l2,
    };
    let started = Instant::now();
    let mut t = 0.0;
    let n_out = control.output_times.len();
    for (n, &t_out) in control.output_times.iter().enumerate() {
        if t_out > t {
            let results: Vec<Result<(), IntegrationError>> = tracks
                .par_iter_mut()
                .map(|track| track.advance(t, t_out, params, control))
                .collect();
            if let Some(err) = results.into_iter().find_map(Result::err) {
                return Err(err);
            }
            t = t_out;
        }
        let (record, zmax, snapshot) =
            assemble(&grid, &indices, &tracks, t, params, options.emit_snapshots);
        out.times.push(t);
        out.records.push(record);
        out.zero_mode_max.push(zmax);
        if let (Some(snaps), Some(s)) = (out.snapshots.as_mut(), snapshot) {
            snaps.push(s);
        }
        if n_out > 10 && (n + 1) % (n_out / 10) == 0 {
            log::info!(
                "t = {t:.3} ({}/{n_out} outputs, {:.1}s elapsed)",
                n + 1,
                started.elapsed().as_secs_f64()
            );
        }
    }
    Ok(out)
}

fn put(field: &mut ScalarField, grid: &GridSpec, idx: usize, value: Complex64) {
    let m = grid.mirror(idx);
    let coeffs = field.coeffs_mut();
    coeffs[idx] = value;
    if m != idx {
        coeffs[m] = value.conj();
    }
}

fn assemble(
    grid: &GridSpec,
    indices: &[usize],
    tracks: &[ModeTrack],
    t: f64,
    params: &FlowParams,
    emit_snapshot: bool,
) -> (DiagnosticsRecord, f64, Option<SpectralField>) {
    let gamma = params.gamma;
    let mut phi = ScalarField::zeros(*grid);
    let mut a = ScalarField::zeros(*grid);
    let mut omega = ScalarField::zeros(*grid);
    let mut entropy = ScalarField::zeros(*grid);
    let mut snapshot = emit_snapshot.then(|| SpectralField::zeros(*grid));
    let mut r1_max: f64 = 0.0;
    let mut r2_max: f64 = 0.0;
    let mut zmax: f64 = 0.0;
    for (&idx, track) in indices.iter().zip(tracks) {
        match track.full_state(gamma) {
            Some((state, init)) => {
                let (r1, r2) = dynamics::conserved_residuals(&state, &init, gamma)
                    .expect("tracks keep their mode");
                r1_max = r1_max.max(r1);
                r2_max = r2_max.max(r2);
                put(
                    &mut phi,
                    grid,
                    idx,
                    dynamics::good_unknown(state.r, state.theta, gamma),
                );
                put(&mut a, grid, idx, state.a);
                put(&mut omega, grid, idx, state.omega);
                put(&mut entropy, grid, idx, state.entropy_combination(gamma));
                if let Some(s) = snapshot.as_mut() {
                    put(&mut s.rho, grid, idx, state.r);
                    put(&mut s.alpha, grid, idx, state.a);
                    put(&mut s.omega, grid, idx, state.omega);
                    put(&mut s.theta, grid, idx, state.theta);
                }
            }
            None => {
                if let ModeTrack::Zero { state } = track {
                    zmax = zmax.max(state.max_abs());
                    if let Some(s) = snapshot.as_mut() {
                        put(&mut s.rho, grid, idx, state.rho0);
                        put(&mut s.alpha, grid, idx, state.alpha0);
                        put(&mut s.omega, grid, idx, state.omega0);
                        put(&mut s.theta, grid, idx, state.theta0);
                    }
                }
            }
        }
    }
    let record = DiagnosticsRecord::compute(
        &DiagnosticsInputs {
            t,
            phi: &phi,
            a: &a,
            omega: &omega,
            entropy: &entropy,
        },
        params,
        r1_max,
        r2_max,
    )
    .expect("diagnostic fields carry no k = 0 content");
    (record, zmax, snapshot)
}
