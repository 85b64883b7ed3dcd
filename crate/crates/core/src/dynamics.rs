//! Per-mode right-hand sides in the sheared frame.
//!
//! The full system evolves `(R, A, Omega, Theta)`. Writing
//! `Phi = (R + Theta) / gamma` and using the conserved combination
//! `R + gamma Omega + Theta` closes a two-variable system in `(Phi, A)` driven
//! by the constant `Phi_in + Omega_in`; that reduced system is what the
//! simulator integrates by default.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::symbols::{DomainError, Mode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("gamma must exceed 1 (got {0})")]
    Gamma(f64),
    #[error("nu must lie in (0, 1) (got {0})")]
    Nu(f64),
    #[error("M must lie in (0, 1/nu] (got M = {mach}, nu = {nu})")]
    Mach { mach: f64, nu: f64 },
    #[error("s must be nonnegative (got {0})")]
    Sobolev(f64),
}

impl ParamError {
    /// Configuration key the violation refers to.
    pub fn key(&self) -> &'static str {
        match self {
            ParamError::Gamma(_) => "gamma",
            ParamError::Nu(_) => "nu",
            ParamError::Mach { .. } => "M",
            ParamError::Sobolev(_) => "s",
        }
    }
}

/// Physical parameters plus the Sobolev index used by weighted diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    pub gamma: f64,
    pub nu: f64,
    #[serde(rename = "M")]
    pub mach: f64,
    pub s: f64,
}

impl FlowParams {
    /// Builds parameters satisfying `gamma > 1`, `0 < nu < 1`, `0 < M <= 1/nu`.
    pub fn new(gamma: f64, nu: f64, mach: f64, s: f64) -> Result<Self, ParamError> {
        let p = Self::new_unchecked(gamma, nu, mach, s);
        p.validate()?;
        Ok(p)
    }

    /// Skips the stability hypotheses. Only finiteness and positivity
    /// needed by the formulas themselves are left to the caller.
    pub fn new_unchecked(gamma: f64, nu: f64, mach: f64, s: f64) -> Self {
        Self { gamma, nu, mach, s }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.gamma > 1.0 && self.gamma.is_finite()) {
            return Err(ParamError::Gamma(self.gamma));
        }
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(ParamError::Nu(self.nu));
        }
        if !(self.mach > 0.0 && self.mach * self.nu <= 1.0) {
            return Err(ParamError::Mach {
                mach: self.mach,
                nu: self.nu,
            });
        }
        if !(self.s >= 0.0 && self.s.is_finite()) {
            return Err(ParamError::Sobolev(self.s));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeState {
    pub mode: Mode,
    pub r: Complex64,
    pub a: Complex64,
    pub omega: Complex64,
    pub theta: Complex64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReducedModeState {
    pub mode: Mode,
    pub phi: Complex64,
    pub a: Complex64,
}

/// Time derivative of a [`ModeState`], in the same slot order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FullDerivative {
    pub r: Complex64,
    pub a: Complex64,
    pub omega: Complex64,
    pub theta: Complex64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReducedDerivative {
    pub phi: Complex64,
    pub a: Complex64,
}

impl ModeState {
    pub fn new(
        k: i64,
        eta: f64,
        r: Complex64,
        a: Complex64,
        omega: Complex64,
        theta: Complex64,
    ) -> Result<Self, DomainError> {
        Ok(Self {
            mode: Mode::new(k, eta)?,
            r,
            a,
            omega,
            theta,
        })
    }

    pub fn to_array(&self) -> [Complex64; 4] {
        [self.r, self.a, self.omega, self.theta]
    }

    pub fn with_array(&self, y: [Complex64; 4]) -> Self {
        Self {
            mode: self.mode,
            r: y[0],
            a: y[1],
            omega: y[2],
            theta: y[3],
        }
    }

    /// Projects onto `(Phi, A)`.
    pub fn reduced(&self, gamma: f64) -> ReducedModeState {
        ReducedModeState {
            mode: self.mode,
            phi: good_unknown(self.r, self.theta, gamma),
            a: self.a,
        }
    }

    /// `Phi_in + Omega_in`, the constant forcing of the reduced system.
    pub fn forcing(&self, gamma: f64) -> Complex64 {
        good_unknown(self.r, self.theta, gamma) + self.omega
    }

    /// `(gamma - 1) R - Theta`, conserved by the flow.
    pub fn entropy_combination(&self, gamma: f64) -> Complex64 {
        self.r * (gamma - 1.0) - self.theta
    }

    /// `R + gamma Omega + Theta`, conserved by the flow.
    pub fn vorticity_combination(&self, gamma: f64) -> Complex64 {
        self.r + self.omega * gamma + self.theta
    }
}

impl ReducedModeState {
    pub fn new(k: i64, eta: f64, phi: Complex64, a: Complex64) -> Result<Self, DomainError> {
        Ok(Self {
            mode: Mode::new(k, eta)?,
            phi,
            a,
        })
    }

    /// Recovers the full state from `Phi`, the conserved entropy combination
    /// `(gamma-1) R - Theta` and the forcing `Phi_in + Omega_in`.
    pub fn expand(&self, entropy: Complex64, forcing: Complex64, gamma: f64) -> ModeState {
        let (r, theta) = split_thermo(self.phi, entropy, gamma);
        ModeState {
            mode: self.mode,
            r,
            a: self.a,
            omega: reconstruct_omega(self.phi, forcing, Complex64::new(0.0, 0.0)),
            theta,
        }
    }
}

/// `Phi = (R + Theta) / gamma`.
#[inline]
pub fn good_unknown(r: Complex64, theta: Complex64, gamma: f64) -> Complex64 {
    (r + theta) / gamma
}

/// `Omega = Phi_in + Omega_in - Phi`.
#[inline]
pub fn reconstruct_omega(phi: Complex64, phi_in: Complex64, omega_in: Complex64) -> Complex64 {
    omega_in + (phi_in - phi)
}

/// Inverts `rho + theta = gamma Phi`, `(gamma-1) rho - theta = entropy`.
#[inline]
pub fn split_thermo(phi: Complex64, entropy: Complex64, gamma: f64) -> (Complex64, Complex64) {
    let rho = (entropy + phi * gamma) / gamma;
    let theta = (phi * ((gamma - 1.0) * gamma) - entropy) / gamma;
    (rho, theta)
}

/// Coefficients of the `A` equation that do not multiply `A` itself.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Coupling {
    /// `p / M^2 + 2 k^2 / p`, acting on `Phi` in the reduced system.
    pub phi: f64,
    /// `2 k^2 / p`.
    pub shear: f64,
    /// `p / (gamma M^2)`, acting on `R + Theta` in the full system.
    pub pressure: f64,
}

#[inline]
pub(crate) fn coupling(mode: &Mode, t: f64, params: &FlowParams) -> Coupling {
    let p = mode.p(t);
    let k = mode.k() as f64;
    let m2 = params.mach * params.mach;
    let shear = 2.0 * k * k / p;
    Coupling {
        phi: p / m2 + shear,
        shear,
        pressure: p / (params.gamma * m2),
    }
}

/// `-nu p + (d/dt p) / p`, the self-coupling of `A`.
#[inline]
pub(crate) fn a_self_coefficient(mode: &Mode, t: f64, nu: f64) -> f64 {
    let p = mode.p(t);
    -nu * p + mode.dt_p(t) / p
}

/// Right-hand side of the four-variable sheared system.
pub fn rhs_full(state: &ModeState, t: f64, params: &FlowParams) -> FullDerivative {
    let c = coupling(&state.mode, t, params);
    let a_self = a_self_coefficient(&state.mode, t, params.nu);
    FullDerivative {
        r: -state.a,
        a: state.a * a_self - state.omega * c.shear + (state.r + state.theta) * c.pressure,
        omega: state.a,
        theta: -state.a * (params.gamma - 1.0),
    }
}

/// Right-hand side of the reduced `(Phi, A)` system with forcing
/// `Phi_in + Omega_in`; zero forcing gives the constrained system.
pub fn rhs_reduced(
    state: &ReducedModeState,
    t: f64,
    params: &FlowParams,
    forcing: Complex64,
) -> ReducedDerivative {
    let c = coupling(&state.mode, t, params);
    let a_self = a_self_coefficient(&state.mode, t, params.nu);
    ReducedDerivative {
        phi: -state.a,
        a: state.a * a_self + state.phi * c.phi - forcing * c.shear,
    }
}

/// Drift of the two conserved combinations relative to `initial`:
/// `r1 = |(gamma-1)R - Theta - ((gamma-1)R_in - Theta_in)|` and
/// `r2 = |R + gamma Omega + Theta - (R_in + gamma Omega_in + Theta_in)|`.
pub fn conserved_residuals(
    state: &ModeState,
    initial: &ModeState,
    gamma: f64,
) -> Result<(f64, f64), DomainError> {
    if state.mode != initial.mode {
        return Err(DomainError::OutOfRange {
            name: "eta",
            value: state.mode.eta(),
        });
    }
    let r1 = (state.entropy_combination(gamma) - initial.entropy_combination(gamma)).norm();
    let r2 = (state.vorticity_combination(gamma) - initial.vorticity_combination(gamma)).norm();
    Ok((r1, r2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    const ZERO: Complex64 = Complex64::new(0.0, 0.0);
    const ONE: Complex64 = Complex64::new(1.0, 0.0);

    #[test]
    fn params_validation() {
        assert!(FlowParams::new(1.4, 0.01, 1.0, 1.5).is_ok());
        assert_eq!(
            FlowParams::new(1.0, 0.01, 1.0, 0.0).unwrap_err().key(),
            "gamma"
        );
        assert_eq!(FlowParams::new(1.4, 1.5, 1.0, 0.0).unwrap_err().key(), "nu");
        assert_eq!(
            FlowParams::new(1.4, 0.01, 101.0, 0.0).unwrap_err().key(),
            "M"
        );
        assert!(FlowParams::new(1.4, 0.01, 100.0, 0.0).is_ok());
        assert_eq!(FlowParams::new(1.4, 0.5, 1.0, -1.0).unwrap_err().key(), "s");
    }

    #[test]
    fn full_rhs_examples() {
        let p = FlowParams::new_unchecked(2.0, 0.0, 1.0, 0.0);
        let s = ModeState::new(1, 0.0, ONE, ZERO, ZERO, ZERO).unwrap();
        let d = rhs_full(&s, 0.0, &p);
        assert_eq!(
            (d.r, d.a, d.omega, d.theta),
            (ZERO, c(0.5, 0.0), ZERO, ZERO)
        );

        let p = FlowParams::new_unchecked(2.0, 0.01, 1.0, 0.0);
        let s = ModeState::new(1, 0.0, ZERO, ONE, ZERO, ZERO).unwrap();
        let d = rhs_full(&s, 0.0, &p);
        assert_eq!(d.r, -ONE);
        assert_relative_eq!(d.a.re, -0.01, epsilon = 1e-15);
        assert_eq!(d.omega, ONE);
        assert_eq!(d.theta, c(-1.0, 0.0));

        let s = ModeState::new(3, 1.0, ZERO, ZERO, ZERO, ZERO).unwrap();
        let d = rhs_full(&s, 0.7, &p);
        assert_eq!([d.r, d.a, d.omega, d.theta], [ZERO; 4]);
    }

    #[test]
    fn good_unknown_examples() {
        assert_eq!(good_unknown(ONE, ONE, 2.0), ONE);
        assert_eq!(good_unknown(ONE, -ONE, 1.4), ZERO);
        assert_eq!(good_unknown(c(2.0, 1.0), ZERO, 1.4), c(2.0, 1.0) / 1.4);
    }

    #[test]
    fn reduced_rhs_examples() {
        let p = FlowParams::new_unchecked(1.4, 0.01, 1.0, 0.0);
        let s = ReducedModeState::new(1, 0.0, ONE, ZERO).unwrap();
        let d = rhs_reduced(&s, 0.0, &p, ZERO);
        assert_eq!((d.phi, d.a), (ZERO, c(3.0, 0.0)));

        let s = ReducedModeState::new(1, 0.0, ZERO, ZERO).unwrap();
        let d = rhs_reduced(&s, 0.0, &p, ONE);
        assert_eq!((d.phi, d.a), (ZERO, c(-2.0, 0.0)));
        let d = rhs_reduced(&s, 0.0, &p, ZERO);
        assert_eq!((d.phi, d.a), (ZERO, ZERO));
    }

    #[test]
    fn omega_reconstruction() {
        let phi_in = c(0.3, -1.0);
        let om_in = c(2.0, 0.5);
        assert_eq!(reconstruct_omega(phi_in, phi_in, om_in), om_in);
        let phi = c(-0.7, 0.2);
        assert!((reconstruct_omega(phi, phi_in, -phi_in) + phi).norm() < 1e-15);
        assert_eq!(reconstruct_omega(c(1.0, 1.0), ONE, c(0.0, 1.0)), ZERO);
    }

    #[test]
    fn residuals_vanish_at_start_and_reject_mismatch() {
        let s = ModeState::new(2, 1.5, ONE, ONE, ONE, ONE).unwrap();
        assert_eq!(conserved_residuals(&s, &s, 1.4).unwrap(), (0.0, 0.0));
        let other = ModeState::new(2, 1.75, ONE, ONE, ONE, ONE).unwrap();
        assert!(conserved_residuals(&s, &other, 1.4).is_err());
    }

    #[test]
    fn conserved_combinations_have_zero_derivative() {
        let p = FlowParams::new_unchecked(1.67, 0.05, 0.8, 0.0);
        let s = ModeState::new(
            2,
            -3.0,
            c(0.3, 1.0),
            c(-2.0, 0.5),
            c(1.1, 0.0),
            c(0.0, -0.4),
        )
        .unwrap();
        let d = rhs_full(&s, 1.3, &p);
        let g = p.gamma;
        let e = d.r * (g - 1.0) - d.theta;
        let v = d.r + d.omega * g + d.theta;
        assert!(e.norm() < 1e-15 && v.norm() < 1e-15);
    }

    #[test]
    fn thermo_split_inverts() {
        let g = 1.4;
        let (rho, theta) = split_thermo(c(1.0, 2.0), c(-0.5, 0.25), g);
        assert!(((rho + theta) - c(1.0, 2.0) * g).norm() < 1e-15);
        assert!(((rho * (g - 1.0) - theta) - c(-0.5, 0.25)).norm() < 1e-15);
    }

    fn arb_c() -> impl Strategy<Value = Complex64> {
        (-5.0..5.0f64, -5.0..5.0f64).prop_map(|(a, b)| c(a, b))
    }

    proptest! {
        #[test]
        fn rhs_is_linear(x in prop::array::uniform4(arb_c()), y in prop::array::uniform4(arb_c()),
                         lambda in -3.0..3.0f64, t in 0.0..20.0f64, k in 1i64..6, eta in -10.0..10.0f64) {
            let p = FlowParams::new_unchecked(1.4, 0.01, 1.0, 0.0);
            let sx = ModeState::new(k, eta, x[0], x[1], x[2], x[3]).unwrap();
            let sy = sx.with_array(y);
            let comb = sx.with_array([0, 1, 2, 3].map(|i| x[i] + y[i] * lambda));
            let (dx, dy, dc) = (rhs_full(&sx, t, &p), rhs_full(&sy, t, &p), rhs_full(&comb, t, &p));
            let scale = 1.0 + dx.a.norm() + dy.a.norm() * lambda.abs();
            prop_assert!((dc.a - (dx.a + dy.a * lambda)).norm() <= 1e-12 * scale);
            prop_assert!((dc.theta - (dx.theta + dy.theta * lambda)).norm() <= 1e-12 * scale);

            let rx = sx.reduced(p.gamma);
            let fx = sx.forcing(p.gamma);
            let dr = rhs_reduced(&rx, t, &p, fx);
            // The reduced A-derivative equals the full one whenever Omega is the reconstruction.
            prop_assert!((dr.a - dx.a).norm() <= 1e-11 * scale * (1.0 + sx.mode.p(t)));
        }
    }
}
