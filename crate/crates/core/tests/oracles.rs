//! Closed forms checked against quadrature or direct integration written here.

use couette::symbols::{
    dt_p_symbol, ghost_log_derivative, ghost_multiplier, gronwall_factor, p_symbol,
};
use couette::zero_mode::damped_wave_alpha;
use num_complex::Complex64;
use proptest::prelude::*;

/// Composite Simpson on `[a, b]` with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

/// Splits at `tc` when it lies inside `[0, t]`, where the integrands peak.
fn integrate(f: impl Fn(f64) -> f64 + Copy, t: f64, tc: f64, n: usize) -> f64 {
    if tc > 0.0 && tc < t {
        simpson(f, 0.0, tc, n) + simpson(f, tc, t, n)
    } else {
        simpson(f, 0.0, t, n)
    }
}

#[test]
fn gronwall_factor_is_the_integral_of_k2_over_p() {
    for &(k, eta, t) in &[
        (1, 0.0, 5.0),
        (2, 7.5, 10.0),
        (-3, 4.0, 30.0),
        (8, -32.0, 100.0),
        (1, 32.0, 100.0),
    ] {
        let kf = k as f64;
        let f = |s: f64| kf * kf / p_symbol(s, k, eta).unwrap();
        let quad = integrate(f, t, eta / kf, 20_000);
        let closed = gronwall_factor(t, k, eta).unwrap();
        assert!(
            (closed - quad).abs() <= 1e-10 * closed.abs().max(1e-3),
            "k={k} eta={eta}: {closed} vs {quad}"
        );
    }
}

#[test]
fn ghost_multiplier_solves_its_equation() {
    for &(k, eta, t, nu) in &[
        (1, 3.0, 50.0, 1e-2),
        (-2, 10.0, 400.0, 1e-3),
        (5, -20.0, 80.0, 1e-2),
        (1, 32.0, 1000.0, 1e-3),
    ] {
        let f = |s: f64| ghost_log_derivative(s, k, eta, nu).unwrap();
        let quad = integrate(f, t, eta / k as f64, 40_000).exp();
        let closed = ghost_multiplier(t, k, eta, nu).unwrap();
        assert!(
            (closed - quad).abs() <= 1e-10 * closed,
            "k={k} eta={eta} t={t}: {closed} vs {quad}"
        );
    }
}

#[test]
fn damped_wave_matches_direct_integration() {
    // alpha'' + nu eta^2 alpha' + (eta / M)^2 alpha = 0, classical RK4 with a fine step.
    for &(eta, nu, mach) in &[(0.5, 0.01, 1.0), (3.0, 0.05, 0.7), (2.0, 1.0, 1.0)] {
        let (a0, da0) = (Complex64::new(1.0, -0.5), Complex64::new(0.2, 0.3));
        let (b, c) = (nu * eta * eta, eta * eta / (mach * mach));
        let rhs = |y: [Complex64; 2]| [y[1], -y[1] * b - y[0] * c];
        let mut y = [a0, da0];
        let h = 1e-3;
        for i in 1..=10_000 {
            let k1 = rhs(y);
            let k2 = rhs([y[0] + k1[0] * (h / 2.0), y[1] + k1[1] * (h / 2.0)]);
            let k3 = rhs([y[0] + k2[0] * (h / 2.0), y[1] + k2[1] * (h / 2.0)]);
            let k4 = rhs([y[0] + k3[0] * h, y[1] + k3[1] * h]);
            for j in 0..2 {
                y[j] += (k1[j] + (k2[j] + k3[j]) * 2.0 + k4[j]) * (h / 6.0);
            }
            if i % 1000 == 0 {
                let t = i as f64 * h;
                let closed = damped_wave_alpha(eta, nu, mach, a0, da0, t);
                assert!(
                    (closed - y[0]).norm() <= 1e-9,
                    "eta={eta} t={t}: {closed} vs {}",
                    y[0]
                );
            }
        }
    }
}

proptest! {
    #[test]
    fn dt_p_is_the_time_derivative(k in prop_oneof![-8i64..=-1, 1i64..=8], eta in -32.0f64..32.0, t in 0.0f64..100.0) {
        // p is quadratic in t, so the central difference is exact up to rounding.
        let h = 1e-3;
        let fd = (p_symbol(t + h, k, eta).unwrap() - p_symbol(t - h, k, eta).unwrap()) / (2.0 * h);
        let exact = dt_p_symbol(t, k, eta).unwrap();
        let scale = p_symbol(t, k, eta).unwrap();
        prop_assert!((fd - exact).abs() <= 1e-8 * scale);
        prop_assert!(exact.abs() <= 2.0 * (k as f64).abs() * scale.sqrt() * (1.0 + 1e-15));
    }

    #[test]
    fn ghost_stays_in_range(k in prop_oneof![-8i64..=-1, 1i64..=8], eta in -32.0f64..32.0, t in 0.0f64..1000.0, nu in 1e-4f64..0.5) {
        let m = ghost_multiplier(t, k, eta, nu).unwrap();
        prop_assert!(m > (-std::f64::consts::PI).exp() && m <= 1.0);
    }
}
