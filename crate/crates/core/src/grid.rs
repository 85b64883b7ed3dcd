//! Truncated frequency lattice for `T x R`, per-scalar coefficient storage
//! and Sobolev-norm quadrature.
//!
//! The continuous frequency `eta` is replaced by the lattice `delta_eta * Z`
//! cut at `eta_max`. Coefficients are stored row-major, ascending in `k` and
//! then in `eta`, which is also the summation order of every quadrature.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("K must be at least 1 (got {0})")]
    NonPositiveK(i64),
    #[error("delta_eta must be positive and finite (got {0})")]
    BadSpacing(f64),
    #[error("eta_max ({eta_max}) must be at least delta_eta ({delta_eta})")]
    EtaMaxTooSmall { eta_max: f64, delta_eta: f64 },
    #[error("fields live on different grids")]
    Mismatch,
}

/// Lattice description: `k in -K..=K`, `eta = j * delta_eta` for `|j| <= N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct GridSpec {
    k_max: i64,
    eta_max: f64,
    delta_eta: f64,
    n_eta_half: i64,
}

#[derive(Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    #[serde(rename = "K")]
    k_max: i64,
    eta_max: f64,
    delta_eta: f64,
}

impl TryFrom<RawGrid> for GridSpec {
    type Error = GridError;

    fn try_from(raw: RawGrid) -> Result<Self, GridError> {
        GridSpec::new(raw.k_max, raw.eta_max, raw.delta_eta)
    }
}

impl From<GridSpec> for RawGrid {
    fn from(g: GridSpec) -> Self {
        RawGrid {
            k_max: g.k_max,
            eta_max: g.eta_max,
            delta_eta: g.delta_eta,
        }
    }
}

impl GridSpec {
    pub fn new(k_max: i64, eta_max: f64, delta_eta: f64) -> Result<Self, GridError> {
        if k_max < 1 {
            return Err(GridError::NonPositiveK(k_max));
        }
        if !(delta_eta > 0.0 && delta_eta.is_finite()) {
            return Err(GridError::BadSpacing(delta_eta));
        }
        if !(eta_max >= delta_eta && eta_max.is_finite()) {
            return Err(GridError::EtaMaxTooSmall { eta_max, delta_eta });
        }
        // Guard the floor against ratios like 32/0.25 landing a hair below an integer.
        let n_eta_half = (eta_max / delta_eta * (1.0 + 4.0 * f64::EPSILON)).floor() as i64;
        Ok(Self {
            k_max,
            eta_max,
            delta_eta,
            n_eta_half,
        })
    }

    pub fn k_max(&self) -> i64 {
        self.k_max
    }

    pub fn eta_max(&self) -> f64 {
        self.eta_max
    }

    pub fn delta_eta(&self) -> f64 {
        self.delta_eta
    }

    /// `N` in `eta in {-N*delta_eta, ..., N*delta_eta}`.
    pub fn n_eta_half(&self) -> i64 {
        self.n_eta_half
    }

    pub fn n_k(&self) -> usize {
        (2 * self.k_max + 1) as usize
    }

    pub fn n_eta(&self) -> usize {
        (2 * self.n_eta_half + 1) as usize
    }

    pub fn len(&self) -> usize {
        self.n_k() * self.n_eta()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn eta(&self, j: i64) -> f64 {
        j as f64 * self.delta_eta
    }

    /// Flat index of lattice point `(k, j)`; `None` outside the lattice.
    pub fn index(&self, k: i64, j: i64) -> Option<usize> {
        if k.abs() > self.k_max || j.abs() > self.n_eta_half {
            return None;
        }
        let row = (k + self.k_max) as usize;
        let col = (j + self.n_eta_half) as usize;
        Some(row * self.n_eta() + col)
    }

    /// Inverse of [`GridSpec::index`]: `(k, j)` of a flat index.
    pub fn point(&self, idx: usize) -> (i64, i64) {
        let n_eta = self.n_eta();
        let k = (idx / n_eta) as i64 - self.k_max;
        let j = (idx % n_eta) as i64 - self.n_eta_half;
        (k, j)
    }

    /// Flat index of the Hermitian partner `(-k, -eta)`.
    pub fn mirror(&self, idx: usize) -> usize {
        self.len() - 1 - idx
    }

    /// All lattice points in storage order.
    pub fn points(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "K={} eta_max={} delta_eta={} ({}x{} points)",
            self.k_max,
            self.eta_max,
            self.delta_eta,
            self.n_k(),
            self.n_eta()
        )
    }
}

/// Complex coefficients of one scalar on the lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    coeffs: Vec<Complex64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_coeffs(grid: GridSpec, coeffs: Vec<Complex64>) -> Result<Self, GridError> {
        if coeffs.len() != grid.len() {
            return Err(GridError::Mismatch);
        }
        Ok(Self { grid, coeffs })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn get(&self, k: i64, j: i64) -> Option<Complex64> {
        self.grid.index(k, j).map(|i| self.coeffs[i])
    }

    pub fn set(&mut self, k: i64, j: i64, value: Complex64) {
        if let Some(i) = self.grid.index(k, j) {
            self.coeffs[i] = value;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for c in &mut self.coeffs {
            *c *= factor;
        }
    }

    /// Largest modulus on the `k = 0` row.
    pub fn zero_mode_max(&self) -> f64 {
        let j_max = self.grid.n_eta_half();
        (-j_max..=j_max)
            .filter_map(|j| self.get(0, j))
            .fold(0.0, |acc, c| acc.max(c.norm()))
    }

    /// Largest `|f(k, eta) - conj f(-k, -eta)|` over the lattice.
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.coeffs.len())
            .map(|i| (self.coeffs[i] - self.coeffs[self.grid.mirror(i)].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Rectangle-rule weighted `L^2` quadrature,
    /// `sqrt(sum delta_eta * weight(k, eta)^2 |f|^2)`, in storage order.
    pub fn weighted_norm(&self, mut weight: impl FnMut(i64, f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for (i, c) in self.coeffs.iter().enumerate() {
            let (k, j) = self.grid.point(i);
            let w = weight(k, self.grid.eta(j));
            acc += w * w * c.norm_sqr();
        }
        (acc * self.grid.delta_eta()).sqrt()
    }
}

/// `<k, eta> = sqrt(1 + k^2 + eta^2)`.
pub fn japanese_bracket(k: f64, eta: f64) -> f64 {
    (1.0 + k * k + eta * eta).sqrt()
}

/// Discrete `H^s` norm: `sqrt(sum_k sum_eta delta_eta (1+k^2+eta^2)^s |f|^2)`.
pub fn sobolev_norm(field: &ScalarField, s: f64) -> f64 {
    let mut acc = 0.0;
    for (i, c) in field.coeffs.iter().enumerate() {
        let (k, j) = field.grid.point(i);
        let eta = field.grid.eta(j);
        let kk = k as f64;
        acc += (1.0 + kk * kk + eta * eta).powf(s) * c.norm_sqr();
    }
    (acc * field.grid.delta_eta()).sqrt()
}

/// Replaces every Hermitian pair by its symmetric average. Idempotent.
pub fn hermitian_project(field: &ScalarField) -> ScalarField {
    let mut out = field.clone();
    let n = field.coeffs.len();
    for i in 0..n {
        let m = field.grid.mirror(i);
        if m < i {
            continue;
        }
        if m == i {
            out.coeffs[i] = Complex64::new(field.coeffs[i].re, 0.0);
            continue;
        }
        let avg = (field.coeffs[i] + field.coeffs[m].conj()) * 0.5;
        out.coeffs[i] = avg;
        out.coeffs[m] = avg.conj();
    }
    out
}

/// The four transported scalars. In the lab frame these are
/// `(rho, alpha, omega, theta)`; snapshots from the solver carry the
/// moving-frame amplitudes `(R, A, Omega, Theta)` in the same slots.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Component {
    Rho,
    Alpha,
    Omega,
    Theta,
}

impl Component {
    pub const ALL: [Component; 4] = [
        Component::Rho,
        Component::Alpha,
        Component::Omega,
        Component::Theta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Component::Rho => "rho",
            Component::Alpha => "alpha",
            Component::Omega => "omega",
            Component::Theta => "theta",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    pub rho: ScalarField,
    pub alpha: ScalarField,
    pub omega: ScalarField,
    pub theta: ScalarField,
}

impl SpectralField {
    pub fn zeros(grid: GridSpec) -> Self {
        let z = ScalarField::zeros(grid);
        Self {
            rho: z.clone(),
            alpha: z.clone(),
            omega: z.clone(),
            theta: z,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        self.rho.grid()
    }

    pub fn component(&self, c: Component) -> &ScalarField {
        match c {
            Component::Rho => &self.rho,
            Component::Alpha => &self.alpha,
            Component::Omega => &self.omega,
            Component::Theta => &self.theta,
        }
    }

    pub fn component_mut(&mut self, c: Component) -> &mut ScalarField {
        match c {
            Component::Rho => &mut self.rho,
            Component::Alpha => &mut self.alpha,
            Component::Omega => &mut self.omega,
            Component::Theta => &mut self.theta,
        }
    }

    pub fn components(&self) -> [&ScalarField; 4] {
        [&self.rho, &self.alpha, &self.omega, &self.theta]
    }

    pub fn hermitian_project(&self) -> Self {
        Self {
            rho: hermitian_project(&self.rho),
            alpha: hermitian_project(&self.alpha),
            omega: hermitian_project(&self.omega),
            theta: hermitian_project(&self.theta),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for c in Component::ALL {
            self.component_mut(c).scale(factor);
        }
    }

    pub fn hermitian_defect(&self) -> f64 {
        self.components()
            .iter()
            .map(|f| f.hermitian_defect())
            .fold(0.0, f64::max)
    }

    pub fn zero_mode_max(&self) -> f64 {
        self.components()
            .iter()
            .map(|f| f.zero_mode_max())
            .fold(0.0, f64::max)
    }

    /// Largest `H^s` norm among the four scalars.
    pub fn max_sobolev_norm(&self, s: f64) -> f64 {
        self.components()
            .iter()
            .map(|f| sobolev_norm(f, s))
            .fold(0.0, f64::max)
    }
}
