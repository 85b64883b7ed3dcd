//! The `k = 0` (x-averaged) subsystem.
//!
//! It decouples from every other mode and reduces to a damped wave equation
//! for `alpha_0`, whose characteristic roots give a closed-form oracle for
//! the time integrator.

use num_complex::Complex64;

use crate::dynamics::FlowParams;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZeroModeState {
    pub eta: f64,
    pub rho0: Complex64,
    pub alpha0: Complex64,
    pub omega0: Complex64,
    pub theta0: Complex64,
}

impl ZeroModeState {
    pub fn zero(eta: f64) -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self {
            eta,
            rho0: z,
            alpha0: z,
            omega0: z,
            theta0: z,
        }
    }

    pub fn to_array(&self) -> [Complex64; 4] {
        [self.rho0, self.alpha0, self.omega0, self.theta0]
    }

    pub fn with_array(&self, y: [Complex64; 4]) -> Self {
        Self {
            eta: self.eta,
            rho0: y[0],
            alpha0: y[1],
            omega0: y[2],
            theta0: y[3],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.to_array().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// `d/dt (rho0, alpha0, omega0, theta0)` at frequency `eta`.
pub fn zero_mode_rhs(state: &ZeroModeState, params: &FlowParams) -> [Complex64; 4] {
    let eta2 = state.eta * state.eta;
    let a = state.alpha0;
    let pressure = eta2 / (params.gamma * params.mach * params.mach);
    [
        -a,
        (state.rho0 + state.theta0) * pressure - a * (params.nu * eta2),
        a,
        -a * (params.gamma - 1.0),
    ]
}

/// Roots of `lambda^2 + nu eta^2 lambda + eta^2 / M^2 = 0`, ordered `(+, -)`
/// by the sign in front of the square root of the discriminant.
pub fn damped_wave_roots(eta: f64, nu: f64, mach: f64) -> (Complex64, Complex64) {
    let eta2 = eta * eta;
    let b = nu * eta2;
    let c = eta2 / (mach * mach);
    let disc = Complex64::new(b * b - 4.0 * c, 0.0).sqrt();
    let minus_b = Complex64::new(-b, 0.0);
    ((minus_b + disc) * 0.5, (minus_b - disc) * 0.5)
}

/// Closed-form `alpha0(t)` of the damped wave equation, given `alpha0(0)`
/// and `alpha0'(0)`. Handles the repeated-root case.
pub fn damped_wave_alpha(
    eta: f64,
    nu: f64,
    mach: f64,
    alpha_init: Complex64,
    dalpha_init: Complex64,
    t: f64,
) -> Complex64 {
    let (lp, lm) = damped_wave_roots(eta, nu, mach);
    let gap = lp - lm;
    let scale = lp.norm().max(lm.norm()).max(1.0);
    if gap.norm() <= 1e-12 * scale {
        // alpha = (c0 + c1 t) e^(lambda t)
        let l = (lp + lm) * 0.5;
        let c1 = dalpha_init - alpha_init * l;
        return (alpha_init + c1 * t) * (l * t).exp();
    }
    let cp = (dalpha_init - alpha_init * lm) / gap;
    let cm = alpha_init - cp;
    cp * (lp * t).exp() + cm * (lm * t).exp()
}

/// Residual of `d^2/dt^2 (rho0 + theta0) + (eta^2 / M^2)(rho0 + theta0)`.
///
/// Differentiating the subsystem twice gives exactly
/// `gamma nu eta^2 alpha0`, so this residual vanishes only for `nu = 0` or
/// `alpha0 = 0`.
pub fn sum_wave_forcing(state: &ZeroModeState, params: &FlowParams) -> Complex64 {
    state.alpha0 * (params.gamma * params.nu * state.eta * state.eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_state_is_stationary() {
        let p = FlowParams::new_unchecked(1.4, 0.01, 1.0, 0.0);
        let d = zero_mode_rhs(&ZeroModeState::zero(2.5), &p);
        assert_eq!(d, [c(0.0, 0.0); 4]);
    }

    #[test]
    fn sum_identity_carries_viscous_forcing() {
        let p = FlowParams::new_unchecked(1.4, 0.05, 0.8, 0.0);
        let mut s = ZeroModeState::zero(1.7);
        s.rho0 = c(0.3, -0.2);
        s.alpha0 = c(-0.6, 0.4);
        s.omega0 = c(0.1, 0.9);
        s.theta0 = c(0.25, 0.05);
        let d1 = zero_mode_rhs(&s, &p);
        let d2 = zero_mode_rhs(&s.with_array(d1), &p);
        let lhs = d2[0] + d2[3] + (s.rho0 + s.theta0) * (s.eta * s.eta / (p.mach * p.mach));
        assert!((lhs - sum_wave_forcing(&s, &p)).norm() < 1e-14);
        let inviscid = FlowParams::new_unchecked(1.4, 0.0, 0.8, 0.0);
        assert_eq!(sum_wave_forcing(&s, &inviscid), c(0.0, 0.0));
    }

    #[test]
    fn rhs_examples() {
        let p = FlowParams::new_unchecked(2.0, 0.3, 1.0, 0.0);
        let mut s = ZeroModeState::zero(1.0);
        s.rho0 = c(1.0, 0.0);
        assert_eq!(
            zero_mode_rhs(&s, &p),
            [c(0.0, 0.0), c(0.5, 0.0), c(0.0, 0.0), c(0.0, 0.0)]
        );

        let mut s = ZeroModeState::zero(0.0);
        s.alpha0 = c(1.0, 2.0);
        s.rho0 = c(5.0, 0.0);
        let d = zero_mode_rhs(&s, &p);
        assert_eq!(d, [-s.alpha0, c(0.0, 0.0), s.alpha0, -s.alpha0]);
    }

    #[test]
    fn root_examples() {
        let (a, b) = damped_wave_roots(0.0, 0.3, 1.0);
        assert_eq!((a.norm(), b.norm()), (0.0, 0.0));

        let (a, b) = damped_wave_roots(1.0, 0.01, 1.0);
        assert_relative_eq!(a.re, -0.005, epsilon = 1e-15);
        assert_relative_eq!(a.im, (1.0f64 - 0.005 * 0.005).sqrt(), epsilon = 1e-15);
        assert_relative_eq!(a.im, 0.9999875, epsilon = 1e-7);
        assert_eq!(b, a.conj());

        let (a, b) = damped_wave_roots(3.0, 1.0, 1.0);
        assert_relative_eq!(a.re, (-9.0 + 45f64.sqrt()) / 2.0, epsilon = 1e-14);
        assert_relative_eq!(b.re, (-9.0 - 45f64.sqrt()) / 2.0, epsilon = 1e-14);
        assert_relative_eq!(a.re, -1.1459, epsilon = 1e-4);
        assert_relative_eq!(b.re, -7.8541, epsilon = 1e-4);
        assert_eq!((a.im, b.im), (0.0, 0.0));
    }

    #[test]
    fn closed_form_satisfies_the_ode() {
        for &(eta, nu, mach) in &[(1.0, 0.01, 1.0), (3.0, 1.0, 1.0), (2.0, 1.0, 1.0)] {
            let (a0, da0) = (c(0.4, -1.0), c(1.5, 0.2));
            let f = |t: f64| damped_wave_alpha(eta, nu, mach, a0, da0, t);
            let h = 1e-3;
            for &t in &[0.5, 1.7, 4.0] {
                let d1 = (f(t + h) - f(t - h)) / (2.0 * h);
                let d2 = (f(t + h) - f(t) * 2.0 + f(t - h)) / (h * h);
                let res = d2 + d1 * (nu * eta * eta) + f(t) * (eta * eta / (mach * mach));
                assert!(res.norm() < 1e-4, "eta={eta} residual {res}");
            }
            assert!((f(0.0) - a0).norm() < 1e-14);
        }
    }
}
