//! Weighted unknowns, the Lyapunov functional and its balance law.
//!
//! With `w = <k, eta>^s`, ghost multiplier `m`, `q = d/dt p` and
//! `G = Phi_in + Omega_in`:
//!
//! ```text
//! Z1 = w m^-1 p^(-1/4) Phi / M,   Z2 = w m^-1 p^(-3/4) A,
//! E  = (1 + M^2 q^2/p^3)|Z1|^2/2 + |Z2|^2/2
//!      + (M/4)(q/p^(3/2)) Re(conj(Z1) Z2) - (M nu^(1/3)/4) p^(-1/2) Re(conj(Z1) Z2).
//! ```
//!
//! Differentiating `E` along the reduced dynamics gives
//!
//! ```text
//! dE/dt = -[a (1 + M^2 q^2/p^3) + (c/4)(1 + 2 M^2 k^2/p^2)] |Z1|^2 - [a + nu p] |Z2|^2
//!         + D1 + ... + D7 + X1 + X2
//! ```
//!
//! with `a = m'/m`, `c = nu^(1/3)`, the seven `D` terms of the classical
//! hypocoercive computation, and two further terms
//! `X1 = -(M/2) a q/p^(3/2) Re(conj(Z1) Z2)` and
//! `X2 = -2 w m^-1 k^2 p^(-7/4) Re(G conj(Z2))`. In the exact identity `D7`
//! pairs `G` with `Z1`. [`BalanceForm::AsPrinted`] drops `X1`, `X2` and pairs
//! `D7` with `Z2`; it is kept so the two can be compared numerically.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{FlowParams, ModeState, ReducedModeState};
use crate::integrator::{self, IntegrationError, StepControl};
use crate::symbols::{DomainError, Mode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("degenerate energy record (coercive form is {0})")]
    Degenerate(f64),
    #[error("need {needed} trajectory samples, got {got}")]
    Samples { needed: usize, got: usize },
    #[error(transparent)]
    Integration(#[from] IntegrationError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedPair {
    pub z1: Complex64,
    pub z2: Complex64,
}

/// `w m^-1` at `(t, k, eta)`.
#[inline]
fn amplitude_weight(mode: &Mode, t: f64, s: f64, nu: f64) -> f64 {
    mode.bracket_sq().powf(0.5 * s) * mode.ghost_exponent(t, nu).exp()
}

#[inline]
fn pair_at(mode: &Mode, phi: Complex64, a: Complex64, t: f64, params: &FlowParams) -> WeightedPair {
    let w = amplitude_weight(mode, t, params.s, params.nu);
    let p = mode.p(t);
    WeightedPair {
        z1: phi * (w * p.powf(-0.25) / params.mach),
        z2: a * (w * p.powf(-0.75)),
    }
}

pub fn weighted_pair(
    phi: Complex64,
    a: Complex64,
    t: f64,
    k: i64,
    eta: f64,
    params: &FlowParams,
) -> Result<WeightedPair, DomainError> {
    Ok(pair_at(&Mode::new(k, eta)?, phi, a, t, params))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyRecord {
    pub energy: f64,
    /// `((1 + M^2 q^2/p^3)|Z1|^2 + |Z2|^2) / 4`.
    pub coercive_form: f64,
    /// `(M/4)(q/p^(3/2)) Re(conj(Z1) Z2)`.
    pub transfer_cross: f64,
    /// `-(M nu^(1/3)/4) p^(-1/2) Re(conj(Z1) Z2)`.
    pub ghost_cross: f64,
}

#[inline]
fn record_at(pair: &WeightedPair, mode: &Mode, t: f64, mach: f64, nu: f64) -> EnergyRecord {
    let p = mode.p(t);
    let q = mode.dt_p(t);
    let diag1 = 1.0 + mach * mach * q * q / (p * p * p);
    let n1 = pair.z1.norm_sqr();
    let n2 = pair.z2.norm_sqr();
    let cross = (pair.z1.conj() * pair.z2).re;
    let transfer_cross = 0.25 * mach * q / p.powf(1.5) * cross;
    let ghost_cross = -0.25 * mach * nu.cbrt() / p.sqrt() * cross;
    EnergyRecord {
        energy: 0.5 * diag1 * n1 + 0.5 * n2 + transfer_cross + ghost_cross,
        coercive_form: 0.25 * (diag1 * n1 + n2),
        transfer_cross,
        ghost_cross,
    }
}

pub fn energy_functional(
    pair: &WeightedPair,
    t: f64,
    k: i64,
    eta: f64,
    mach: f64,
    nu: f64,
) -> Result<EnergyRecord, DomainError> {
    Ok(record_at(pair, &Mode::new(k, eta)?, t, mach, nu))
}

/// `E` of a single mode straight from its `(Phi, A)` amplitudes.
#[inline]
pub fn mode_energy(mode: &Mode, phi: Complex64, a: Complex64, t: f64, params: &FlowParams) -> f64 {
    record_at(
        &pair_at(mode, phi, a, t, params),
        mode,
        t,
        params.mach,
        params.nu,
    )
    .energy
}

pub fn coercivity_ratio(record: &EnergyRecord) -> Result<f64, EnergyError> {
    if !(record.coercive_form > 0.0) {
        return Err(EnergyError::Degenerate(record.coercive_form));
    }
    Ok(record.energy / record.coercive_form)
}

pub use crate::symbols::gronwall_factor;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceForm {
    /// The identity that `d/dt E` actually satisfies.
    #[default]
    Exact,
    /// The seven-term form without the two extra terms and with `D7`
    /// paired with `Z2`.
    AsPrinted,
}

/// Individual contributions to `dE/dt`; `damping_*` enter with a minus sign.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BalanceTerms {
    pub damping_z1: f64,
    pub damping_z2: f64,
    pub d: [f64; 7],
    pub x1: f64,
    pub x2: f64,
}

impl BalanceTerms {
    pub fn total(&self) -> f64 {
        -self.damping_z1 - self.damping_z2 + self.d.iter().sum::<f64>() + self.x1 + self.x2
    }

    pub fn magnitude(&self) -> f64 {
        self.damping_z1.abs()
            + self.damping_z2.abs()
            + self.d.iter().map(|x| x.abs()).sum::<f64>()
            + self.x1.abs()
            + self.x2.abs()
    }
}

/// Evaluates every term of the balance at `(t, k, eta)` for the weighted
/// pair `pair`, with forcing `G = Phi_in + Omega_in`.
pub fn balance_terms(
    pair: &WeightedPair,
    forcing: Complex64,
    t: f64,
    mode: &Mode,
    params: &FlowParams,
    form: BalanceForm,
) -> BalanceTerms {
    let (mach, nu) = (params.mach, params.nu);
    let k2 = (mode.k() as f64).powi(2);
    let p = mode.p(t);
    let q = mode.dt_p(t);
    let a = mode.ghost_log_derivative(t, nu);
    let c = nu.cbrt();
    let gw = forcing * amplitude_weight(mode, t, params.s, nu);
    let n1 = pair.z1.norm_sqr();
    let n2 = pair.z2.norm_sqr();
    let cross = (pair.z1.conj() * pair.z2).re;
    let g_z1 = (gw * pair.z1.conj()).re;
    let g_z2 = (gw * pair.z2.conj()).re;
    let p12 = p.sqrt();
    let p32 = p * p12;
    let p52 = p32 * p;

    let damping_z1 = (a * (1.0 + mach * mach * q * q / (p * p * p))
        + 0.25 * c * (1.0 + 2.0 * mach * mach * k2 / (p * p)))
        * n1;
    let damping_z2 = (a + nu * p) * n2;
    let d7_coef = -mach * k2 * q / (2.0 * p.powf(3.25));
    let d = [
        0.25 * c * n2,
        0.25 * mach * nu * c * p12 * cross,
        -0.25 * nu * mach * q / p12 * cross,
        mach * mach * (2.5 * k2 * q / (p * p * p) - 1.75 * q * q * q / (p * p * p * p)) * n1,
        mach * (c * q / (8.0 * p32) + 2.5 * k2 / p32 - 1.375 * q * q / p52 + 0.5 * c * a / p12)
            * cross,
        mach * c * k2 / (2.0 * p.powf(2.25)) * g_z1,
        match form {
            BalanceForm::Exact => d7_coef * g_z1,
            BalanceForm::AsPrinted => d7_coef * g_z2,
        },
    ];
    let (x1, x2) = match form {
        BalanceForm::Exact => (
            -0.5 * mach * a * q / p32 * cross,
            -2.0 * k2 * p.powf(-1.75) * g_z2,
        ),
        BalanceForm::AsPrinted => (0.0, 0.0),
    };
    BalanceTerms {
        damping_z1,
        damping_z2,
        d,
        x1,
        x2,
    }
}

/// Five equally spaced samples of a reduced trajectory centred at `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeSegment {
    pub mode: Mode,
    pub forcing: Complex64,
    pub t: f64,
    pub h: f64,
    pub phi: Vec<Complex64>,
    pub a: Vec<Complex64>,
}

/// Integrates `initial` with the reduced system up to `t - 2h`, then takes
/// four steps of exactly `h`.
pub fn sample_segment(
    initial: &ModeState,
    t: f64,
    h: f64,
    params: &FlowParams,
    control: &StepControl,
) -> Result<ModeSegment, EnergyError> {
    if !(h > 0.0) || t < 2.0 * h {
        return Err(DomainError::OutOfRange {
            name: "t",
            value: t,
        }
        .into());
    }
    let forcing = initial.forcing(params.gamma);
    let start = initial.reduced(params.gamma);
    let t0 = t - 2.0 * h;
    let mut state = integrator::advance_reduced(&start, 0.0, t0, params, forcing, control)?;
    let mut phi = vec![state.phi];
    let mut a = vec![state.a];
    for i in 0..4 {
        state = integrator::step_reduced(&state, t0 + i as f64 * h, h, params, forcing)?;
        phi.push(state.phi);
        a.push(state.a);
    }
    Ok(ModeSegment {
        mode: initial.mode,
        forcing,
        t,
        h,
        phi,
        a,
    })
}

/// `|dE/dt (finite difference) - balance RHS| / (1 + sum |terms|)` at the
/// centre of `segment`.
///
/// The identity is quadratic in the amplitudes, so the segment is first
/// rescaled to `|Z1|^2 + |Z2|^2 = 1` at the centre; this makes the
/// normalisation by `1 + sum |terms|` independent of the data size.
pub fn energy_balance_residual(
    segment: &ModeSegment,
    params: &FlowParams,
    form: BalanceForm,
) -> Result<f64, EnergyError> {
    let n = segment.phi.len().min(segment.a.len());
    if n < 5 {
        return Err(EnergyError::Samples { needed: 5, got: n });
    }
    let mode = segment.mode;
    let (t, h) = (segment.t, segment.h);
    let centre = pair_at(&mode, segment.phi[2], segment.a[2], t, params);
    let size = centre.z1.norm_sqr() + centre.z2.norm_sqr();
    if size == 0.0 && segment.forcing == Complex64::new(0.0, 0.0) {
        return Ok(0.0);
    }
    let scale = if size > 0.0 { 1.0 / size.sqrt() } else { 1.0 };
    let e = |i: usize| {
        let ti = t + (i as f64 - 2.0) * h;
        mode_energy(
            &mode,
            segment.phi[i] * scale,
            segment.a[i] * scale,
            ti,
            params,
        )
    };
    let fd = (e(0) - 8.0 * e(1) + 8.0 * e(3) - e(4)) / (12.0 * h);
    let pair = WeightedPair {
        z1: centre.z1 * scale,
        z2: centre.z2 * scale,
    };
    let terms = balance_terms(&pair, segment.forcing * scale, t, &mode, params, form);
    Ok((fd - terms.total()).abs() / (1.0 + terms.magnitude()))
}

/// `E / coercive_form` for a reduced state at time `t`.
pub fn state_coercivity(
    state: &ReducedModeState,
    t: f64,
    params: &FlowParams,
) -> Result<f64, EnergyError> {
    let pair = pair_at(&state.mode, state.phi, state.a, t, params);
    coercivity_ratio(&record_at(&pair, &state.mode, t, params.mach, params.nu))
}
