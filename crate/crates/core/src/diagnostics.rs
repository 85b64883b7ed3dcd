//! Norm diagnostics of a solution at one instant.
//!
//! All quantities are rectangle-rule quadratures over the `k != 0` part of
//! the lattice, summed in storage order. `k = 0` content must be absent; it
//! evolves on its own and is reported separately.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{split_thermo, FlowParams};
use crate::energy::mode_energy;
use crate::grid::ScalarField;
use crate::symbols::Mode;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("field has k = 0 content of size {0}")]
    ZeroModeContent(f64),
    #[error("gamma must exceed 1 (got {0})")]
    Gamma(f64),
    #[error("fields live on different grids")]
    GridMismatch,
}

fn check(fields: &[&ScalarField]) -> Result<(), DiagnosticsError> {
    let grid = fields[0].grid();
    for f in fields {
        if f.grid() != grid {
            return Err(DiagnosticsError::GridMismatch);
        }
        let z = f.zero_mode_max();
        if z != 0.0 {
            return Err(DiagnosticsError::ZeroModeContent(z));
        }
    }
    Ok(())
}

/// `sqrt(delta_eta * sum_{k != 0} weight(mode)^2 |f|^2)`.
fn sheared_norm(field: &ScalarField, mut weight: impl FnMut(&Mode) -> f64) -> f64 {
    let grid = field.grid();
    let mut acc = 0.0;
    for (i, c) in field.coeffs().iter().enumerate() {
        let (k, j) = grid.point(i);
        if k == 0 {
            continue;
        }
        let mode = Mode::new(k, grid.eta(j)).expect("k != 0");
        let w = weight(&mode);
        acc += w * w * c.norm_sqr();
    }
    (acc * grid.delta_eta()).sqrt()
}

/// `|| (|eta - k t| / p) Omega ||`.
pub fn incompressible_x_norm(omega: &ScalarField, t: f64) -> Result<f64, DiagnosticsError> {
    check(&[omega])?;
    Ok(sheared_norm(omega, |m| m.shear(t).abs() / m.p(t)))
}

/// `|| (|k| / p) Omega ||`.
pub fn incompressible_y_norm(omega: &ScalarField, t: f64) -> Result<f64, DiagnosticsError> {
    check(&[omega])?;
    Ok(sheared_norm(omega, |m| m.k().abs() as f64 / m.p(t)))
}

/// `|| p^(-1/2) A ||`.
pub fn compressible_norm(a: &ScalarField, t: f64) -> Result<f64, DiagnosticsError> {
    check(&[a])?;
    Ok(sheared_norm(a, |m| m.p(t).powf(-0.5)))
}

/// `(||rho||, ||theta||, ||rho + theta||)` reconstructed mode by mode from
/// `Phi` and the conserved combination `(gamma-1) R - Theta`.
pub fn thermo_norms(
    phi: &ScalarField,
    entropy: &ScalarField,
    gamma: f64,
) -> Result<(f64, f64, f64), DiagnosticsError> {
    if !(gamma > 1.0) {
        return Err(DiagnosticsError::Gamma(gamma));
    }
    check(&[phi, entropy])?;
    let grid = phi.grid();
    let (mut rr, mut tt, mut ss) = (0.0, 0.0, 0.0);
    for (i, (f, e)) in phi.coeffs().iter().zip(entropy.coeffs()).enumerate() {
        if grid.point(i).0 == 0 {
            continue;
        }
        let (rho, theta) = split_thermo(*f, *e, gamma);
        rr += rho.norm_sqr();
        tt += theta.norm_sqr();
        ss += (f * gamma).norm_sqr();
    }
    let d = grid.delta_eta();
    Ok(((rr * d).sqrt(), (tt * d).sqrt(), (ss * d).sqrt()))
}

/// `(1/M) ||p^(-1/4) Phi||_{H^s} + ||p^(-3/4) A||_{H^s}`.
pub fn lemma_quantity(
    phi: &ScalarField,
    a: &ScalarField,
    t: f64,
    s: f64,
    mach: f64,
) -> Result<f64, DiagnosticsError> {
    check(&[phi, a])?;
    let w = |m: &Mode, e: f64| m.bracket_sq().powf(0.5 * s) * m.p(t).powf(e);
    Ok(sheared_norm(phi, |m| w(m, -0.25)) / mach + sheared_norm(a, |m| w(m, -0.75)))
}

/// `delta_eta * sum_{k != 0} E(t, k, eta)`.
pub fn energy_sum(
    phi: &ScalarField,
    a: &ScalarField,
    t: f64,
    params: &FlowParams,
) -> Result<f64, DiagnosticsError> {
    check(&[phi, a])?;
    let grid = phi.grid();
    let mut acc = 0.0;
    for (i, (f, al)) in phi.coeffs().iter().zip(a.coeffs()).enumerate() {
        let (k, j) = grid.point(i);
        if k == 0 {
            continue;
        }
        let mode = Mode::new(k, grid.eta(j)).expect("k != 0");
        acc += mode_energy(&mode, *f, *al, t, params);
    }
    Ok(acc * grid.delta_eta())
}

/// Fields needed for one diagnostics row.
pub struct DiagnosticsInputs<'a> {
    pub t: f64,
    pub phi: &'a ScalarField,
    pub a: &'a ScalarField,
    pub omega: &'a ScalarField,
    /// `(gamma-1) R - Theta`.
    pub entropy: &'a ScalarField,
}

/// One row of the trajectory table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    #[serde(rename = "norm_Pvx")]
    pub norm_pvx: f64,
    #[serde(rename = "norm_Pvy")]
    pub norm_pvy: f64,
    #[serde(rename = "norm_Qv")]
    pub norm_qv: f64,
    pub norm_rho: f64,
    pub norm_theta: f64,
    pub norm_rho_plus_theta: f64,
    #[serde(rename = "lemma_Q")]
    pub lemma_q: f64,
    pub energy_sum: f64,
    pub conserved_r1_max: f64,
    pub conserved_r2_max: f64,
}

impl DiagnosticsRecord {
    pub const COLUMNS: [&'static str; 11] = [
        "t",
        "norm_Pvx",
        "norm_Pvy",
        "norm_Qv",
        "norm_rho",
        "norm_theta",
        "norm_rho_plus_theta",
        "lemma_Q",
        "energy_sum",
        "conserved_r1_max",
        "conserved_r2_max",
    ];

    pub fn compute(
        inputs: &DiagnosticsInputs<'_>,
        params: &FlowParams,
        conserved_r1_max: f64,
        conserved_r2_max: f64,
    ) -> Result<Self, DiagnosticsError> {
        let t = inputs.t;
        let (norm_rho, norm_theta, norm_rho_plus_theta) =
            thermo_norms(inputs.phi, inputs.entropy, params.gamma)?;
        Ok(Self {
            t,
            norm_pvx: incompressible_x_norm(inputs.omega, t)?,
            norm_pvy: incompressible_y_norm(inputs.omega, t)?,
            norm_qv: compressible_norm(inputs.a, t)?,
            norm_rho,
            norm_theta,
            norm_rho_plus_theta,
            lemma_q: lemma_quantity(inputs.phi, inputs.a, t, params.s, params.mach)?,
            energy_sum: energy_sum(inputs.phi, inputs.a, t, params)?,
            conserved_r1_max,
            conserved_r2_max,
        })
    }

    pub fn values(&self) -> [f64; 11] {
        [
            self.t,
            self.norm_pvx,
            self.norm_pvy,
            self.norm_qv,
            self.norm_rho,
            self.norm_theta,
            self.norm_rho_plus_theta,
            self.lemma_q,
            self.energy_sum,
            self.conserved_r1_max,
            self.conserved_r2_max,
        ]
    }

    pub fn from_values(v: [f64; 11]) -> Self {
        Self {
            t: v[0],
            norm_pvx: v[1],
            norm_pvy: v[2],
            norm_qv: v[3],
            norm_rho: v[4],
            norm_theta: v[5],
            norm_rho_plus_theta: v[6],
            lemma_q: v[7],
            energy_sum: v[8],
            conserved_r1_max: v[9],
            conserved_r2_max: v[10],
        }
    }
}

/// Puts `value` at `(k, j)` and its conjugate at `(-k, -j)`.
pub fn set_pair(field: &mut ScalarField, k: i64, j: i64, value: Complex64) {
    field.set(k, j, value);
    field.set(-k, -j, value.conj());
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn unit_pair() -> ScalarField {
        let g = GridSpec::new(2, 2.0, 0.5).unwrap();
        let mut f = ScalarField::zeros(g);
        set_pair(&mut f, 1, 0, c(1.0, 0.0));
        f
    }

    #[test]
    fn velocity_norm_examples() {
        let f = unit_pair();
        let base = (2.0f64 * 0.5).sqrt();
        assert_eq!(incompressible_x_norm(&f, 0.0).unwrap(), 0.0);
        assert_relative_eq!(
            incompressible_x_norm(&f, 2.0).unwrap(),
            0.4 * base,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            incompressible_y_norm(&f, 2.0).unwrap(),
            0.2 * base,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            incompressible_y_norm(&f, 0.0).unwrap(),
            base,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            compressible_norm(&f, 2.0).unwrap(),
            5f64.powf(-0.5) * base,
            epsilon = 1e-15
        );
        assert_eq!(
            compressible_norm(&ScalarField::zeros(*f.grid()), 1.0).unwrap(),
            0.0
        );
    }

    #[test]
    fn zero_mode_content_is_rejected() {
        let mut f = unit_pair();
        f.set(0, 1, c(1e-3, 0.0));
        assert!(incompressible_x_norm(&f, 0.0).is_err());
        assert!(compressible_norm(&f, 0.0).is_err());
        assert!(lemma_quantity(&f, &unit_pair(), 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn lemma_examples() {
        let mach = 0.7;
        let mut phi = unit_pair();
        phi.scale(mach);
        let z = ScalarField::zeros(*phi.grid());
        assert_relative_eq!(
            lemma_quantity(&phi, &z, 0.0, 0.0, mach).unwrap(),
            (2.0f64 * 0.5).sqrt(),
            epsilon = 1e-15
        );
        assert_eq!(lemma_quantity(&z, &z, 3.0, 1.5, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn thermo_examples() {
        let phi = unit_pair();
        let z = ScalarField::zeros(*phi.grid());
        let (r, th, s) = thermo_norms(&phi, &z, 1.4).unwrap();
        assert_relative_eq!(r, (2.0f64 * 0.5).sqrt(), epsilon = 1e-15);
        assert_relative_eq!(th, 0.4 * r, epsilon = 1e-15);
        assert_relative_eq!(s, 1.4 * r, epsilon = 1e-15);
        let (_, _, s) = thermo_norms(&z, &phi, 1.4).unwrap();
        assert_eq!(s, 0.0);
        assert!(thermo_norms(&phi, &z, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn diagnostics_are_homogeneous(
            re in -1.0f64..1.0, im in -1.0f64..1.0, scale in -5.0f64..5.0, t in 0.0f64..20.0,
        ) {
            let g = GridSpec::new(2, 2.0, 0.5).unwrap();
            let mut f = ScalarField::zeros(g);
            set_pair(&mut f, 2, 3, c(re, im));
            set_pair(&mut f, 1, -1, c(im, 0.5));
            let mut h = f.clone();
            h.scale(scale);
            let pairs = [
                (incompressible_x_norm(&f, t).unwrap(), incompressible_x_norm(&h, t).unwrap()),
                (incompressible_y_norm(&f, t).unwrap(), incompressible_y_norm(&h, t).unwrap()),
                (compressible_norm(&f, t).unwrap(), compressible_norm(&h, t).unwrap()),
                (lemma_quantity(&f, &f, t, 1.5, 1.0).unwrap(), lemma_quantity(&h, &h, t, 1.5, 1.0).unwrap()),
            ];
            for (a, b) in pairs {
                prop_assert!((b - scale.abs() * a).abs() <= 1e-13 * b.abs().max(1e-300));
            }
        }

        #[test]
        fn sheared_x_weight_below_inverse_sqrt_p(k in 1i64..10, eta in -40.0f64..40.0, t in 0.0f64..100.0) {
            let m = Mode::new(k, eta).unwrap();
            prop_assert!(m.shear(t).abs() / m.p(t) <= m.p(t).powf(-0.5) * (1.0 + 1e-15));
        }
    }
}
