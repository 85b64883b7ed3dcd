//! Independent checks of a run: energy balance, reduced-versus-full
//! equivalence, the `k = 0` closed form and the ghost multiplier.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::config::RunConfig;
use super::run::{with_pool, RunError};
use crate::dynamics::{FlowParams, ModeState};
use crate::energy::{self, BalanceForm, EnergyError};
use crate::grid::SpectralField;
use crate::initial_data::SplitMix64;
use crate::integrator::{self, StepControl};
use crate::symbols::Mode;
use crate::zero_mode::{damped_wave_alpha, zero_mode_rhs, ZeroModeState};

/// Nonzero `k > 0` modes of `field` in lattice order.
pub fn active_modes(field: &SpectralField) -> Vec<ModeState> {
    let grid = field.grid();
    (0..grid.len())
        .filter_map(|idx| {
            let (k, j) = grid.point(idx);
            if k <= 0 {
                return None;
            }
            let s = ModeState::new(
                k,
                grid.eta(j),
                field.rho.coeffs()[idx],
                field.alpha.coeffs()[idx],
                field.omega.coeffs()[idx],
                field.theta.coeffs()[idx],
            )
            .expect("k > 0");
            (s.to_array().iter().any(|z| z.norm() > 0.0)).then_some(s)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergySample {
    pub t: f64,
    pub k: i64,
    pub eta: f64,
    #[serde(rename = "E")]
    pub energy: f64,
    pub coercive_form: f64,
    pub ratio: f64,
    pub balance_residual: f64,
    /// Residual of the seven-term form, for comparison.
    pub printed_residual: f64,
}

/// Draws `n` (mode, time) pairs with `t` uniform in `[t_min, t_max]` and
/// evaluates the energy functional and both balance forms there.
#[allow(clippy::too_many_arguments)]
pub fn energy_samples(
    field: &SpectralField,
    params: &FlowParams,
    control: &StepControl,
    n: usize,
    seed: u64,
    t_range: [f64; 2],
    fd_dt: f64,
) -> Result<Vec<EnergySample>, EnergyError> {
    let modes = active_modes(field);
    if modes.is_empty() {
        return Ok(Vec::new());
    }
    let mut rng = SplitMix64::new(seed);
    let picks: Vec<(ModeState, f64)> = (0..n)
        .map(|_| {
            let m = modes[(rng.next() % modes.len() as u64) as usize];
            let t = t_range[0] + (t_range[1] - t_range[0]) * rng.next_f64();
            (m, t.max(2.0 * fd_dt))
        })
        .collect();
    picks
        .par_iter()
        .map(|(init, t)| {
            let seg = energy::sample_segment(init, *t, fd_dt, params, control)?;
            let pair = energy::weighted_pair(
                seg.phi[2],
                seg.a[2],
                *t,
                init.mode.k(),
                init.mode.eta(),
                params,
            )?;
            let rec = energy::energy_functional(
                &pair,
                *t,
                init.mode.k(),
                init.mode.eta(),
                params.mach,
                params.nu,
            )?;
            Ok(EnergySample {
                t: *t,
                k: init.mode.k(),
                eta: init.mode.eta(),
                energy: rec.energy,
                coercive_form: rec.coercive_form,
                ratio: energy::coercivity_ratio(&rec).unwrap_or(f64::NAN),
                balance_residual: energy::energy_balance_residual(
                    &seg,
                    params,
                    BalanceForm::Exact,
                )?,
                printed_residual: energy::energy_balance_residual(
                    &seg,
                    params,
                    BalanceForm::AsPrinted,
                )?,
            })
        })
        .collect()
}

/// `verify-energy` on the data and time span of `config`.
pub fn verify_energy(
    config: &RunConfig,
    field: &SpectralField,
    n: usize,
    seed: u64,
    fd_dt: f64,
) -> Result<Vec<EnergySample>, RunError> {
    let control = config.step_control()?;
    let params = config.params();
    let t_max = config.t_end.max(4.0 * fd_dt);
    let out = with_pool(config.threads.resolve(), || {
        energy_samples(field, &params, &control, n, seed, [0.0, t_max], fd_dt)
    })?;
    out.map_err(|e| RunError::Validation(e.to_string()))
}

pub fn energy_csv(samples: &[EnergySample]) -> String {
    use super::io::fmt_f64;
    let mut s = String::from("t,k,eta,E,coercive_form,ratio,balance_residual\n");
    for r in samples {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_f64(r.t),
            r.k,
            fmt_f64(r.eta),
            fmt_f64(r.energy),
            fmt_f64(r.coercive_form),
            fmt_f64(r.ratio),
            fmt_f64(r.balance_residual)
        ));
    }
    s
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    /// `max over modes and components of max_t |full - reduced| / max_t |full|`.
    pub max_rel_diff: f64,
    pub argmax_k: i64,
    pub argmax_eta: f64,
    pub argmax_component: String,
    pub modes: usize,
    pub output_times: usize,
}

/// Integrates every active mode with both the full and the reduced system
/// and compares `Omega` and `A` at every output time.
pub fn oracle_check(config: &RunConfig, field: &SpectralField) -> Result<OracleReport, RunError> {
    let control = config.step_control()?;
    let params = config.params();
    let modes = active_modes(field);
    let times = control.output_times.clone();
    let per_mode = |init: &ModeState| -> Result<[f64; 2], RunError> {
        let gamma = params.gamma;
        let forcing = init.forcing(gamma);
        let entropy = init.entropy_combination(gamma);
        let mut full = *init;
        let mut red = init.reduced(gamma);
        let (mut diff, mut size) = ([0.0f64; 2], [0.0f64; 2]);
        let mut t = 0.0;
        for &t_out in &times {
            if t_out > t {
                full = integrator::advance_full(&full, t, t_out, &params, &control)?;
                red = integrator::advance_reduced(&red, t, t_out, &params, forcing, &control)?;
                t = t_out;
            }
            let rec = red.expand(entropy, forcing, gamma);
            for (i, (a, b)) in [(full.omega, rec.omega), (full.a, rec.a)]
                .into_iter()
                .enumerate()
            {
                diff[i] = diff[i].max((a - b).norm());
                size[i] = size[i].max(a.norm());
            }
        }
        Ok([
            diff[0] / size[0].max(f64::MIN_POSITIVE),
            diff[1] / size[1].max(f64::MIN_POSITIVE),
        ])
    };
    let results: Vec<Result<[f64; 2], RunError>> = with_pool(config.threads.resolve(), || {
        modes.par_iter().map(per_mode).collect()
    })?;
    let mut report = OracleReport {
        max_rel_diff: 0.0,
        argmax_k: 0,
        argmax_eta: 0.0,
        argmax_component: String::new(),
        modes: modes.len(),
        output_times: times.len(),
    };
    for (m, r) in modes.iter().zip(results) {
        for (i, v) in r?.into_iter().enumerate() {
            if v > report.max_rel_diff || report.argmax_component.is_empty() {
                report.max_rel_diff = v;
                report.argmax_k = m.mode.k();
                report.argmax_eta = m.mode.eta();
                report.argmax_component = ["omega", "alpha"][i].into();
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct ZeroModeRow {
    pub eta: f64,
    /// `max_t |alpha_numeric - alpha_closed_form| / max_t |alpha_closed_form|`.
    pub max_rel_err: f64,
    pub max_abs_err: f64,
}

/// Reference initial state for the `k = 0` check.
pub fn zero_mode_reference_state(eta: f64) -> ZeroModeState {
    ZeroModeState {
        eta,
        rho0: Complex64::new(0.3, 0.1),
        alpha0: Complex64::new(0.5, -0.2),
        omega0: Complex64::new(0.1, 0.0),
        theta0: Complex64::new(-0.2, 0.05),
    }
}

/// Time integration of the `k = 0` system against the damped-wave closed form.
pub fn zero_mode_check(
    params: &FlowParams,
    etas: &[f64],
    t_end: f64,
    sample_dt: f64,
    control: &StepControl,
) -> Result<Vec<ZeroModeRow>, RunError> {
    let mut rows = Vec::new();
    for &eta in etas {
        let init = zero_mode_reference_state(eta);
        let dalpha = zero_mode_rhs(&init, params)[1];
        let mut state = init;
        let (mut err, mut size) = (0.0f64, 0.0f64);
        let n = (t_end / sample_dt).round() as usize;
        let mut t = 0.0;
        for i in 0..=n {
            let t_out = (i as f64 * sample_dt).min(t_end);
            if t_out > t {
                state = integrator::advance_zero_mode(&state, t, t_out, params, control)?;
                t = t_out;
            }
            let exact = damped_wave_alpha(eta, params.nu, params.mach, init.alpha0, dalpha, t);
            err = err.max((state.alpha0 - exact).norm());
            size = size.max(exact.norm());
        }
        rows.push(ZeroModeRow {
            eta,
            max_rel_err: err / size.max(f64::MIN_POSITIVE),
            max_abs_err: err,
        });
    }
    Ok(rows)
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[derive(Clone, Debug, Serialize)]
pub struct GhostReport {
    pub samples: usize,
    /// Largest `|m_closed - m_quadrature| / m_closed`.
    pub max_rel_err: f64,
    pub min_m: f64,
    pub max_m: f64,
}

/// Compares the closed-form ghost multiplier with `exp` of the quadrature
/// of its logarithmic derivative on random `(t, k, eta, nu)`.
pub fn ghost_check(n: usize, seed: u64) -> GhostReport {
    let mut rng = SplitMix64::new(seed);
    let picks: Vec<(f64, i64, f64, f64)> = (0..n)
        .map(|_| {
            let k = 1 + (rng.next() % 8) as i64;
            let k = if rng.next().is_multiple_of(2) { k } else { -k };
            let eta = -32.0 + 64.0 * rng.next_f64();
            let t = 1000.0 * rng.next_f64();
            let nu = if rng.next().is_multiple_of(2) {
                1e-2
            } else {
                1e-3
            };
            (t, k, eta, nu)
        })
        .collect();
    let vals: Vec<(f64, f64)> = picks
        .par_iter()
        .map(|&(t, k, eta, nu)| {
            let mode = Mode::new(k, eta).expect("k != 0");
            let closed = mode.ghost(t, nu);
            let tc = mode.critical_time();
            let f = |s: f64| mode.ghost_log_derivative(s, nu);
            // Split at the critical time so the peak sits on a node.
            let log_m = if tc > 0.0 && tc < t {
                adaptive_simpson(&f, 0.0, tc, 1e-13) + adaptive_simpson(&f, tc, t, 1e-13)
            } else {
                adaptive_simpson(&f, 0.0, t, 1e-13)
            };
            (closed, ((log_m.exp() - closed) / closed).abs())
        })
        .collect();
    GhostReport {
        samples: n,
        max_rel_err: vals.iter().map(|v| v.1).fold(0.0, f64::max),
        min_m: vals.iter().map(|v| v.0).fold(f64::INFINITY, f64::min),
        max_m: vals.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max),
    }
}
