//! Closed-form Fourier symbols of the sheared frame: the Laplacian symbol
//! `p = k^2 + (eta - k t)^2`, its time derivative, the ghost multiplier and
//! the pointwise inequalities the stability argument leans on.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum DomainError {
    #[error("the zero streamwise mode k = 0 has no sheared symbol")]
    ZeroMode,
    #[error("{name} = {value} is outside its admissible range")]
    OutOfRange { name: &'static str, value: f64 },
}

/// A nonzero streamwise wavenumber paired with a cross-stream frequency.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    k: i64,
    eta: f64,
}

impl Mode {
    pub fn new(k: i64, eta: f64) -> Result<Self, DomainError> {
        if k == 0 {
            return Err(DomainError::ZeroMode);
        }
        Ok(Self { k, eta })
    }

    pub fn k(&self) -> i64 {
        self.k
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    fn kf(&self) -> f64 {
        self.k as f64
    }

    /// Sheared wavenumber `eta - k t`.
    #[inline]
    pub fn shear(&self, t: f64) -> f64 {
        self.eta - self.kf() * t
    }

    /// Critical time `eta / k`, where `p` attains its minimum `k^2`.
    pub fn critical_time(&self) -> f64 {
        self.eta / self.kf()
    }

    #[inline]
    pub fn p(&self, t: f64) -> f64 {
        let d = self.shear(t);
        let k = self.kf();
        k * k + d * d
    }

    #[inline]
    pub fn dt_p(&self, t: f64) -> f64 {
        -2.0 * self.kf() * self.shear(t)
    }

    /// `<k, eta>^2 = 1 + k^2 + eta^2`.
    pub fn bracket_sq(&self) -> f64 {
        let k = self.kf();
        1.0 + k * k + self.eta * self.eta
    }

    /// Exponent of the ghost multiplier: `-log m(t)`, which lies in `[0, pi)`.
    #[inline]
    pub fn ghost_exponent(&self, t: f64, nu: f64) -> f64 {
        let c = nu.cbrt();
        let tc = self.critical_time();
        (c * (t - tc)).atan() + (c * tc).atan()
    }

    /// `m(t) = exp(-[atan(nu^(1/3) (t - eta/k)) + atan(nu^(1/3) eta/k)])`.
    #[inline]
    pub fn ghost(&self, t: f64, nu: f64) -> f64 {
        (-self.ghost_exponent(t, nu)).exp()
    }

    /// `(d/dt m) / m = -nu^(1/3) / ((nu^(1/3) |t - eta/k|)^2 + 1)`.
    #[inline]
    pub fn ghost_log_derivative(&self, t: f64, nu: f64) -> f64 {
        let c = nu.cbrt();
        let x = c * (t - self.critical_time());
        -c / (x * x + 1.0)
    }

    /// `integral_0^t k^2 / p(tau) dtau = atan(eta/k) - atan(eta/k - t)`.
    pub fn gronwall_factor(&self, t: f64) -> f64 {
        let tc = self.critical_time();
        tc.atan() - (tc - t).atan()
    }
}

fn mode(k: i64, eta: f64) -> Result<Mode, DomainError> {
    Mode::new(k, eta)
}

fn check_nu(nu: f64) -> Result<(), DomainError> {
    if nu > 0.0 && nu < 1.0 {
        Ok(())
    } else {
        Err(DomainError::OutOfRange {
            name: "nu",
            value: nu,
        })
    }
}

pub fn p_symbol(t: f64, k: i64, eta: f64) -> Result<f64, DomainError> {
    Ok(mode(k, eta)?.p(t))
}

pub fn dt_p_symbol(t: f64, k: i64, eta: f64) -> Result<f64, DomainError> {
    Ok(mode(k, eta)?.dt_p(t))
}

pub fn ghost_multiplier(t: f64, k: i64, eta: f64, nu: f64) -> Result<f64, DomainError> {
    check_nu(nu)?;
    if t < 0.0 {
        return Err(DomainError::OutOfRange {
            name: "t",
            value: t,
        });
    }
    Ok(mode(k, eta)?.ghost(t, nu))
}

pub fn ghost_log_derivative(t: f64, k: i64, eta: f64, nu: f64) -> Result<f64, DomainError> {
    check_nu(nu)?;
    Ok(mode(k, eta)?.ghost_log_derivative(t, nu))
}

/// `nu^(-1/6) (sqrt(-m'/m) + nu^(1/2) sqrt(p))`, bounded below by a universal constant.
pub fn crucial_property_margin(t: f64, k: i64, eta: f64, nu: f64) -> Result<f64, DomainError> {
    check_nu(nu)?;
    let m = mode(k, eta)?;
    Ok(crucial_margin_unchecked(&m, t, nu))
}

#[inline]
fn crucial_margin_unchecked(m: &Mode, t: f64, nu: f64) -> f64 {
    let damping = (-m.ghost_log_derivative(t, nu)).sqrt();
    nu.powf(-1.0 / 6.0) * (damping + nu.sqrt() * m.p(t).sqrt())
}

/// `p (1 + k^2 + eta^2) / (1 + t^2)`, bounded below for `k != 0`.
pub fn bracket_inequality_margin(t: f64, k: i64, eta: f64) -> Result<f64, DomainError> {
    let m = mode(k, eta)?;
    Ok(m.p(t) * m.bracket_sq() / (1.0 + t * t))
}

pub fn gronwall_factor(t: f64, k: i64, eta: f64) -> Result<f64, DomainError> {
    Ok(mode(k, eta)?.gronwall_factor(t))
}

/// Lower end of the ghost multiplier range, `e^(-pi)`.
pub fn ghost_floor() -> f64 {
    (-PI).exp()
}

/// Sampling grid for the symbol audit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditGrid {
    pub t_max: f64,
    pub n_t: usize,
    pub k_max: i64,
    pub eta_max: f64,
    pub delta_eta: f64,
    pub nus: Vec<f64>,
}

impl Default for AuditGrid {
    fn default() -> Self {
        Self {
            t_max: 1000.0,
            n_t: 4001,
            k_max: 8,
            eta_max: 32.0,
            delta_eta: 0.25,
            nus: vec![1e-2, 1e-3],
        }
    }
}

/// Smallest observed margin of one inequality and where it occurred.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditRow {
    pub inequality: String,
    pub min_margin: f64,
    pub argmin_t: f64,
    pub argmin_k: i64,
    pub argmin_eta: f64,
}

impl AuditRow {
    fn new(name: impl Into<String>) -> Self {
        Self {
            inequality: name.into(),
            min_margin: f64::INFINITY,
            argmin_t: f64::NAN,
            argmin_k: 0,
            argmin_eta: f64::NAN,
        }
    }

    #[inline]
    fn observe(&mut self, margin: f64, t: f64, m: &Mode) {
        if margin < self.min_margin || margin.is_nan() {
            self.min_margin = margin;
            self.argmin_t = t;
            self.argmin_k = m.k();
            self.argmin_eta = m.eta();
        }
    }
}

/// Evaluates every pointwise symbol inequality over `grid`.
///
/// Margins are normalised so that the inequality holds iff the margin is
/// nonnegative, except `bracket_lower_bound`, `crucial_property[...]` and
/// `ghost_lower_bound`, which report the raw quantity whose positive lower
/// bound is the empirical constant. Critical times `eta/k` are always added to
/// the time samples.
pub fn audit_symbols(grid: &AuditGrid) -> Vec<AuditRow> {
    let mut dtp = AuditRow::new("dtp_le_2k_sqrtp");
    let mut kp32 = AuditRow::new("k_p_neg3half_le_1");
    let mut kp1 = AuditRow::new("k_over_p_le_1");
    let mut bracket = AuditRow::new("bracket_lower_bound");
    let mut ghost_lo = AuditRow::new("ghost_lower_bound");
    let mut ghost_hi = AuditRow::new("ghost_le_1");
    let mut crucial: Vec<AuditRow> = grid
        .nus
        .iter()
        .map(|nu| AuditRow::new(format!("crucial_property[nu={nu}]")))
        .collect();

    let n_eta = (grid.eta_max / grid.delta_eta * (1.0 + 4.0 * f64::EPSILON)).floor() as i64;
    let dt = if grid.n_t > 1 {
        grid.t_max / (grid.n_t - 1) as f64
    } else {
        0.0
    };
    let mut times = Vec::with_capacity(grid.n_t + 1);
    for k in 1..=grid.k_max {
        for j in -n_eta..=n_eta {
            let m = Mode {
                k,
                eta: j as f64 * grid.delta_eta,
            };
            times.clear();
            times.extend((0..grid.n_t).map(|i| i as f64 * dt));
            let tc = m.critical_time();
            if (0.0..=grid.t_max).contains(&tc) {
                times.push(tc);
            }
            let kf = k as f64;
            for &t in &times {
                let p = m.p(t);
                let sp = p.sqrt();
                dtp.observe(1.0 - m.dt_p(t).abs() / (2.0 * kf * sp), t, &m);
                kp32.observe(1.0 - kf / (p * sp), t, &m);
                kp1.observe(1.0 - kf / p, t, &m);
                bracket.observe(p * m.bracket_sq() / (1.0 + t * t), t, &m);
                for (row, &nu) in crucial.iter_mut().zip(&grid.nus) {
                    row.observe(crucial_margin_unchecked(&m, t, nu), t, &m);
                    let g = m.ghost(t, nu);
                    ghost_lo.observe(g, t, &m);
                    ghost_hi.observe(1.0 - g, t, &m);
                }
            }
        }
    }
    let mut rows = vec![dtp, kp32, kp1, bracket, ghost_lo, ghost_hi];
    rows.extend(crucial);
    rows
}
