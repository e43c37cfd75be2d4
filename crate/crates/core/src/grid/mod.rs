//! Periodic-box discretization: grids, real fields, spectral fields and the
//! solver state `(u, u_t)`.
//!
//! Grid point `j` on each axis sits at `x_j = -L/2 + j h`, so the box centre is
//! the grid point with index `n/2` on every axis. Spatial displacements are
//! always taken in the minimum-image convention.

mod lp;
mod snapshot;
mod transform;

pub use lp::{bump, dyadic_range, lp_multiplier, lp_project, LpMode};
pub use snapshot::{read_snapshot, read_state, write_snapshot, write_state, SnapshotHeader};
pub use transform::{
    apply_multiplier, bessel_derivative, bessel_symbol, divergence, forward_transform, fractional_derivative, gradient,
    inverse_transform, transform_for, Transform,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

pub type Point = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    n: usize,
    box_length: f64,
}

impl GridSpec {
    pub fn new(dim: usize, n: usize, box_length: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Grid(format!("dimension {dim} not in 1..=3")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::Grid(format!("n = {n} must be a power of two >= 8")));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(Error::Grid(format!("box length {box_length} must be positive")));
        }
        Ok(Self { dim, n, box_length })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn spacing(&self) -> f64 {
        self.box_length / self.n as f64
    }

    /// Number of grid points, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.box_length.powi(self.dim as i32)
    }

    /// Fundamental wavenumber `2π/L`.
    pub fn k0(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.box_length
    }

    /// Largest resolvable wavenumber along an axis, `πn/L`.
    pub fn k_nyquist(&self) -> f64 {
        std::f64::consts::PI * self.n as f64 / self.box_length
    }

    pub fn coordinate(&self, j: usize) -> f64 {
        -0.5 * self.box_length + j as f64 * self.spacing()
    }

    /// Signed integer mode of FFT index `j`, in `{-n/2, ..., n/2 - 1}`.
    pub fn mode(&self, j: usize) -> i64 {
        let n = self.n as i64;
        let j = j as i64;
        if j >= n / 2 {
            j - n
        } else {
            j
        }
    }

    pub fn unravel(&self, flat: usize) -> [usize; 3] {
        let n = self.n;
        match self.dim {
            1 => [flat, 0, 0],
            2 => [flat / n, flat % n, 0],
            _ => [flat / (n * n), (flat / n) % n, flat % n],
        }
    }

    pub fn ravel(&self, idx: [usize; 3]) -> usize {
        let n = self.n;
        match self.dim {
            1 => idx[0],
            2 => idx[0] * n + idx[1],
            _ => (idx[0] * n + idx[1]) * n + idx[2],
        }
    }

    pub fn position(&self, flat: usize) -> Point {
        let idx = self.unravel(flat);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = self.coordinate(idx[a]);
        }
        x
    }

    /// Minimum-image displacement `x - c` of grid point `flat` from `c`.
    pub fn displacement(&self, flat: usize, center: &Point) -> Point {
        let x = self.position(flat);
        let l = self.box_length;
        let mut dx = [0.0; 3];
        for a in 0..self.dim {
            let r = x[a] - center[a];
            dx[a] = r - l * (r / l).round();
        }
        dx
    }

    pub fn distance(&self, flat: usize, center: &Point) -> f64 {
        let dx = self.displacement(flat, center);
        (dx[0] * dx[0] + dx[1] * dx[1] + dx[2] * dx[2]).sqrt()
    }

    /// Lifts a coordinate slice of length `d` into a padded point.
    pub fn point(&self, coords: &[f64]) -> Result<Point> {
        if coords.len() != self.dim {
            return domain(format!("point has {} coordinates, grid has d = {}", coords.len(), self.dim));
        }
        let mut p = [0.0; 3];
        p[..self.dim].copy_from_slice(coords);
        Ok(p)
    }

    /// Grid index of the point nearest to `x` (periodic).
    pub fn nearest(&self, x: &Point) -> usize {
        let mut idx = [0usize; 3];
        let n = self.n as i64;
        for a in 0..self.dim {
            let j = ((x[a] + 0.5 * self.box_length) / self.spacing()).round() as i64;
            idx[a] = j.rem_euclid(n) as usize;
        }
        self.ravel(idx)
    }

    pub fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch("fields live on different grids"))
        }
    }
}

/// Real scalar field sampled on a grid, row-major. Always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Grid(format!("{} values for {} grid points", values.len(), grid.len())));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Corruption { index, context: "field values" });
        }
        Ok(Self { grid, values })
    }

    /// Constructor for values already known to be finite and of the right length.
    pub(crate) fn from_raw(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    /// Samples `f` at every grid point; the closure receives the position.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(&Point) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(&grid.position(i))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::from_raw(self.grid, self.values.iter().map(|v| c * v).collect())
    }

    pub fn axpy(&self, a: f64, other: &Field) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| x + a * y).collect();
        Self::new(self.grid, values)
    }

    pub fn sub(&self, other: &Field) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn argmax_abs(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if v.abs() > self.values[best].abs() {
                best = i;
            }
        }
        best
    }

    /// Riemann sum `h^d Σ f`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Discrete `L²` inner product.
    pub fn dot(&self, other: &Field) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>() * self.grid.cell_volume()
    }

    /// Periodic translation by whole cells: `out(x) = self(x - shift·h)`.
    pub fn roll(&self, shift: [i64; 3]) -> Self {
        let g = self.grid;
        let n = g.n as i64;
        let mut out = vec![0.0; g.len()];
        for (i, &v) in self.values.iter().enumerate() {
            let idx = g.unravel(i);
            let mut j = [0usize; 3];
            for a in 0..g.dim {
                j[a] = (idx[a] as i64 + shift[a]).rem_euclid(n) as usize;
            }
            out[g.ravel(j)] = v;
        }
        Self::from_raw(g, out)
    }
}

/// Discrete Fourier coefficients in FFT index order (unnormalized forward DFT).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: GridSpec, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::Grid(format!("{} coefficients for {} modes", coeffs.len(), grid.len())));
        }
        Ok(Self { grid, coeffs })
    }

    pub(crate) fn from_raw(grid: GridSpec, coeffs: Vec<Complex64>) -> Self {
        Self { grid, coeffs }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// `Σ|F|²` weighted so that it equals `∫|f|²` (discrete Plancherel).
    pub fn l2_norm_squared(&self) -> f64 {
        let w = self.grid.cell_volume() / self.grid.len() as f64;
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() * w
    }

    /// Largest violation of `F(-ξ) = conj F(ξ)`.
    pub fn hermitian_defect(&self) -> f64 {
        let t = transform_for(&self.grid);
        let mut worst: f64 = 0.0;
        for (i, c) in self.coeffs.iter().enumerate() {
            let m = self.coeffs[t.mirror(i)];
            worst = worst.max((c - m.conj()).norm());
        }
        worst
    }
}

/// Physical parameters of `u_tt - Δu + m²u = coupling·|u|^p u`.
///
/// `coupling = 1` is the focusing equation; `coupling = 0` switches the
/// nonlinearity off (linear Klein–Gordon) for manufactured-solution audits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Physics {
    pub mass: f64,
    pub exponent: f64,
    pub coupling: f64,
}

impl Physics {
    pub fn focusing(mass: f64, exponent: f64) -> Self {
        Self { mass, exponent, coupling: 1.0 }
    }

    pub fn linear(mass: f64, exponent: f64) -> Self {
        Self { mass, exponent, coupling: 0.0 }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mass) {
            return domain(format!("mass parameter m = {} outside [0, 1]", self.mass));
        }
        if !(self.exponent.is_finite() && self.exponent > 0.0) {
            return domain(format!("exponent p = {} must be positive", self.exponent));
        }
        if dim >= 3 && self.exponent >= 4.0 / (dim as f64 - 2.0) {
            return domain(format!("exponent p = {} not below 4/(d-2) for d = {dim}", self.exponent));
        }
        if !self.coupling.is_finite() {
            return domain("coupling must be finite");
        }
        Ok(())
    }

    /// `|u|^{p+2}` weighted by the coupling, the potential term of every tensor.
    pub fn potential(&self, u: f64) -> f64 {
        if self.coupling == 0.0 {
            0.0
        } else {
            self.coupling * u.abs().powf(self.exponent + 2.0)
        }
    }
}

/// The pair `(u, u_t)` at one time instant.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: Field,
    pub v: Field,
    pub time: f64,
    pub physics: Physics,
}

impl State {
    pub fn new(u: Field, v: Field, time: f64, physics: Physics) -> Result<Self> {
        u.grid.check_same(&v.grid)?;
        physics.validate(u.grid.dim)?;
        if !time.is_finite() {
            return domain("state time must be finite");
        }
        Ok(Self { u, v, time, physics })
    }

    pub fn zero(grid: GridSpec, physics: Physics) -> Result<Self> {
        Self::new(Field::zeros(grid), Field::zeros(grid), 0.0, physics)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.u.grid
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }
}
