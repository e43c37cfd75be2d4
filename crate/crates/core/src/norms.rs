//! Lebesgue and Sobolev norms, region-restricted quadrature, the energy and
//! the Gagliardo–Nirenberg ratios.
//!
//! Region integrals use sharp indicators: `h^d Σ` over grid points inside the
//! region, times the region weight.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::grid::{transform_for, Field, GridSpec, Point, State};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    WholeBox,
    Ball { center: Point, radius: f64 },
    Annulus { center: Point, r_inner: f64, r_outer: f64 },
    /// `{|x - c| < t/2}` weighted by `(1 - |x - c|/t)^k`.
    HalfConeSlice { center: Point, cone_time: f64, weight_exponent: f64 },
}

impl Region {
    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        let half = 0.5 * grid.box_length();
        let (inner, outer) = match *self {
            Region::WholeBox => return Ok(()),
            Region::Ball { radius, .. } => (0.0, radius),
            Region::Annulus { r_inner, r_outer, .. } => (r_inner, r_outer),
            Region::HalfConeSlice { cone_time, .. } => (0.0, 0.5 * cone_time),
        };
        if !(outer > 0.0 && inner >= 0.0 && inner < outer) {
            return domain(format!("region radii must satisfy 0 <= {inner} < {outer}, outer > 0"));
        }
        if outer > half {
            return domain(format!("region radius {outer} exceeds half the box {half}"));
        }
        Ok(())
    }

    /// Weight at grid point `flat`, `None` outside the region.
    pub fn weight(&self, grid: &GridSpec, flat: usize) -> Option<f64> {
        match *self {
            Region::WholeBox => Some(1.0),
            Region::Ball { center, radius } => (grid.distance(flat, &center) < radius).then_some(1.0),
            Region::Annulus { center, r_inner, r_outer } => {
                let r = grid.distance(flat, &center);
                (r >= r_inner && r < r_outer).then_some(1.0)
            }
            Region::HalfConeSlice { center, cone_time, weight_exponent } => {
                let r = grid.distance(flat, &center);
                (r < 0.5 * cone_time).then(|| (1.0 - r / cone_time).powf(weight_exponent))
            }
        }
    }
}

/// A region quadrature together with the number of grid points it used;
/// `points == 0` flags an empty region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub points: usize,
}

impl Quadrature {
    pub fn is_empty(&self) -> bool {
        self.points == 0
    }
}

/// `∫_region w·g` for pointwise integrand values `g`.
pub fn region_integral(grid: &GridSpec, g: &[f64], region: &Region) -> Result<Quadrature> {
    region.validate(grid)?;
    let mut sum = 0.0;
    let mut points = 0;
    for (i, v) in g.iter().enumerate() {
        if let Some(w) = region.weight(grid, i) {
            sum += w * v;
            points += 1;
        }
    }
    Ok(Quadrature { value: sum * grid.cell_volume(), points })
}

pub fn lebesgue_norm(f: &Field, q: f64, region: &Region) -> Result<Quadrature> {
    if q.is_nan() || q < 1.0 {
        return domain(format!("Lebesgue exponent q = {q} must be >= 1"));
    }
    let grid = f.grid();
    region.validate(grid)?;
    if q.is_infinite() {
        let mut m: f64 = 0.0;
        let mut points = 0;
        for (i, v) in f.values().iter().enumerate() {
            if region.weight(grid, i).is_some() {
                m = m.max(v.abs());
                points += 1;
            }
        }
        return Ok(Quadrature { value: m, points });
    }
    let powered: Vec<f64> = f.values().iter().map(|v| v.abs().powf(q)).collect();
    let quad = region_integral(grid, &powered, region)?;
    Ok(Quadrature { value: quad.value.powf(1.0 / q), points: quad.points })
}

/// Whole-box `‖f‖_q`.
pub fn lq(f: &Field, q: f64) -> f64 {
    if q.is_infinite() {
        return f.max_abs();
    }
    let s: f64 = f.values().iter().map(|v| v.abs().powf(q)).sum();
    (s * f.grid().cell_volume()).powf(1.0 / q)
}

/// `‖f‖_{Ḣ^s}` (homogeneous, weight `|ξ|^s`, mean dropped for `s < 0`) or
/// `‖f‖_{H^s}` (weight `⟨ξ⟩_m^s`).
pub fn sobolev_norm(f: &Field, s: f64, homogeneous: bool, m: f64) -> f64 {
    let t = transform_for(f.grid());
    let spec = t.forward(f);
    let table = t.shell_table(|xi| {
        let w = if homogeneous { xi.powf(s) } else { m.hypot(xi).powf(s) };
        w * w
    });
    let zero_weight = if homogeneous {
        if s == 0.0 {
            1.0
        } else {
            0.0
        }
    } else if m == 0.0 && s < 0.0 {
        0.0
    } else {
        table[0]
    };
    let mut acc = 0.0;
    for (c, &sh) in spec.coeffs().iter().zip(t.shells()) {
        let w = if sh == 0 { zero_weight } else { table[sh as usize] };
        acc += w * c.norm_sqr();
    }
    let g = f.grid();
    (acc * g.cell_volume() / g.len() as f64).sqrt()
}

/// `∫|∇f|²` through Parseval, using the same Nyquist convention as the
/// spectral gradient.
pub fn gradient_norm_squared(f: &Field) -> f64 {
    let t = transform_for(f.grid());
    let spec = t.forward(f);
    let d = f.grid().dim();
    let mut acc = 0.0;
    for (i, c) in spec.coeffs().iter().enumerate() {
        let mut k2 = 0.0;
        for a in 0..d {
            let k = t.odd_wavenumber(i, a);
            k2 += k * k;
        }
        acc += k2 * c.norm_sqr();
    }
    let g = f.grid();
    acc * g.cell_volume() / g.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParts {
    pub kinetic: f64,
    pub gradient: f64,
    pub mass: f64,
    pub potential: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.kinetic + self.gradient + self.mass - self.potential
    }
}

/// Terms of `E = ∫ ½u_t² + ½|∇u|² + (m²/2)u² - |u|^{p+2}/(p+2)`.
pub fn energy_parts(state: &State) -> EnergyParts {
    let ph = state.physics;
    let dv = state.grid().cell_volume();
    let kinetic = 0.5 * state.v.values().iter().map(|v| v * v).sum::<f64>() * dv;
    let gradient = 0.5 * gradient_norm_squared(&state.u);
    let mass = 0.5 * ph.mass * ph.mass * state.u.values().iter().map(|u| u * u).sum::<f64>() * dv;
    let potential = state.u.values().iter().map(|&u| ph.potential(u)).sum::<f64>() * dv / (ph.exponent + 2.0);
    EnergyParts { kinetic, gradient, mass, potential }
}

pub fn energy(state: &State) -> f64 {
    energy_parts(state).total()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    SubConformal,
    Conformal,
    SuperConformal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalParams {
    pub dim: usize,
    pub p: f64,
    pub s_c: f64,
    pub alpha: f64,
    pub regime: Regime,
}

/// Relative tolerance of the conformal test `p = 4/(d-1)`; exponents from a
/// config file are decimal, so `4/3` arrives rounded.
const CONFORMAL_RTOL: f64 = 1e-12;

pub fn critical_exponent(dim: usize, p: f64) -> Result<CriticalParams> {
    if !(1..=3).contains(&dim) {
        return domain(format!("dimension {dim} not in 1..=3"));
    }
    if !(p.is_finite() && p > 0.0) {
        return domain(format!("exponent p = {p} must be positive"));
    }
    if dim >= 3 && p >= 4.0 / (dim as f64 - 2.0) {
        return domain(format!("exponent p = {p} not below the energy-critical 4/(d-2)"));
    }
    let s_c = 0.5 * dim as f64 - 2.0 / p;
    // p(d-1) against 4, both exact for integer d.
    let lhs = p * (dim as f64 - 1.0);
    let regime = if dim > 1 && (lhs - 4.0).abs() <= CONFORMAL_RTOL * 4.0 {
        Regime::Conformal
    } else if lhs < 4.0 {
        Regime::SubConformal
    } else {
        Regime::SuperConformal
    };
    let s_c = if regime == Regime::Conformal { 0.5 } else { s_c };
    Ok(CriticalParams { dim, p, s_c, alpha: 0.5 - s_c, regime })
}

/// `‖f‖_{p+2}^{p+2} / (‖f‖_{pd/2}^p ‖∇f‖₂²)`, a lower bound for the optimal
/// Gagliardo–Nirenberg constant.
pub fn gn_ratio(f: &Field, params: &CriticalParams) -> Result<f64> {
    let p = params.p;
    let q = p * params.dim as f64 / 2.0;
    if q < 1.0 {
        return domain(format!("pd/2 = {q} < 1 is not a norm exponent"));
    }
    let num = lq(f, p + 2.0).powf(p + 2.0);
    let den = lq(f, q).powf(p) * gradient_norm_squared(f);
    if !(den > 0.0) {
        return Err(Error::Domain("zero denominator in GN ratio".into()));
    }
    Ok(num / den)
}

/// `‖f‖_{pd/2} / (‖f‖₂^{1-s_c} ‖∇f‖₂^{s_c})`, the second GN form.
pub fn gn_second_ratio(f: &Field, params: &CriticalParams) -> Result<f64> {
    let q = params.p * params.dim as f64 / 2.0;
    if q < 1.0 {
        return domain(format!("pd/2 = {q} < 1 is not a norm exponent"));
    }
    let den = lq(f, 2.0).powf(1.0 - params.s_c) * gradient_norm_squared(f).sqrt().powf(params.s_c);
    if !(den > 0.0) {
        return Err(Error::Domain("zero denominator in GN ratio".into()));
    }
    Ok(lq(f, q) / den)
}
