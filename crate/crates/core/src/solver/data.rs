use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::grid::{Field, GridSpec, Physics, Point, State};
use crate::norms::{energy, gradient_norm_squared};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianBump {
    pub amplitude: f64,
    pub width: f64,
    /// Defaults to the box centre.
    #[serde(default)]
    pub center: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialData {
    Zero,
    Constant {
        amplitude: f64,
        #[serde(default)]
        velocity: f64,
    },
    /// `A e^{-|x-c|²/(2w²)}`, at rest.
    Gaussian {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    Gaussians {
        bumps: Vec<GaussianBump>,
    },
    /// `A cos(k·x)` with `k = 2π/L·mode`; traveling waves carry `u_t = A ω sin(k·x)`.
    PlaneWave {
        mode: Vec<i64>,
        amplitude: f64,
        #[serde(default)]
        traveling: bool,
    },
    /// `A exp(1 - 1/(1 - r²/R²))` inside `r < R`, zero outside.
    Bump {
        amplitude: f64,
        radius: f64,
    },
    /// Two-dimensional logarithmic profile `-log(|x|/R)/√log R`, capped at
    /// `√log R` inside the unit ball and zero outside radius `R`.
    LogProfile {
        radius: f64,
    },
    /// Gaussian whose amplitude is raised by bisection until `E < 0`.
    NegativeEnergy {
        amplitude: f64,
        width: f64,
        #[serde(default = "default_amplitude_cap")]
        amplitude_cap: f64,
    },
}

fn default_amplitude_cap() -> f64 {
    1e3
}

fn center_point(grid: &GridSpec, center: &Option<Vec<f64>>) -> Result<Point> {
    match center {
        Some(c) => grid.point(c),
        None => Ok([0.0; 3]),
    }
}

fn gaussian_field(grid: &GridSpec, a: f64, w: f64, c: &Point) -> Result<Field> {
    if !(w > 0.0) {
        return domain(format!("gaussian width {w} must be positive"));
    }
    let dist = |i: usize| grid.distance(i, c);
    Field::new(*grid, (0..grid.len()).map(|i| a * (-dist(i).powi(2) / (2.0 * w * w)).exp()).collect())
}

pub fn initial_data(grid: &GridSpec, physics: Physics, data: &InitialData) -> Result<State> {
    physics.validate(grid.dim())?;
    let g = *grid;
    let at_rest = |u: Field| State::new(u, Field::zeros(g), 0.0, physics);
    match data {
        InitialData::Zero => State::zero(g, physics),
        InitialData::Constant { amplitude, velocity } => {
            State::new(Field::constant(g, *amplitude), Field::constant(g, *velocity), 0.0, physics)
        }
        InitialData::Gaussian { amplitude, width, center } => {
            at_rest(gaussian_field(grid, *amplitude, *width, &center_point(grid, center)?)?)
        }
        InitialData::Gaussians { bumps } => {
            let mut u = Field::zeros(g);
            for b in bumps {
                u = u.axpy(1.0, &gaussian_field(grid, b.amplitude, b.width, &center_point(grid, &b.center)?)?)?;
            }
            at_rest(u)
        }
        InitialData::PlaneWave { mode, amplitude, traveling } => {
            if mode.len() != g.dim() {
                return domain(format!("plane-wave mode has {} entries, d = {}", mode.len(), g.dim()));
            }
            let k: Vec<f64> = mode.iter().map(|&m| g.k0() * m as f64).collect();
            let kk: f64 = k.iter().map(|x| x * x).sum();
            let omega = (physics.mass * physics.mass + kk).sqrt();
            let phase = |x: &Point| k.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            let u = Field::from_fn(g, |x| amplitude * phase(x).cos())?;
            let v = if *traveling {
                Field::from_fn(g, |x| amplitude * omega * phase(x).sin())?
            } else {
                Field::zeros(g)
            };
            State::new(u, v, 0.0, physics)
        }
        InitialData::Bump { amplitude, radius } => {
            if !(*radius > 0.0 && *radius < 0.5 * g.box_length()) {
                return domain(format!("bump radius {radius} must lie in (0, L/2)"));
            }
            let u = Field::new(
                g,
                (0..g.len())
                    .map(|i| {
                        let s = (g.distance(i, &[0.0; 3]) / radius).powi(2);
                        if s < 1.0 {
                            amplitude * (1.0 - 1.0 / (1.0 - s)).exp()
                        } else {
                            0.0
                        }
                    })
                    .collect(),
            )?;
            at_rest(u)
        }
        InitialData::LogProfile { radius } => {
            if g.dim() != 2 {
                return domain("log profile is defined for d = 2 only");
            }
            if !(*radius > 1.0 && *radius < 0.5 * g.box_length()) {
                return domain(format!("log-profile radius {radius} must lie in (1, L/2)"));
            }
            let norm = radius.ln().sqrt();
            let u = Field::new(
                g,
                (0..g.len())
                    .map(|i| {
                        let r = g.distance(i, &[0.0; 3]);
                        if r < 1.0 {
                            norm
                        } else if r <= *radius {
                            -(r / radius).ln() / norm
                        } else {
                            0.0
                        }
                    })
                    .collect(),
            )?;
            at_rest(u)
        }
        InitialData::NegativeEnergy { amplitude, width, amplitude_cap } => {
            let build = |a: f64| -> Result<State> { at_rest(gaussian_field(grid, a, *width, &[0.0; 3])?) };
            let s0 = build(*amplitude)?;
            if energy(&s0) < 0.0 {
                return Ok(s0);
            }
            if energy(&build(*amplitude_cap)?) >= 0.0 {
                return domain(format!("no amplitude up to {amplitude_cap} gives negative energy"));
            }
            // Bisection for the zero of E(A) on [amplitude, cap].
            let (mut lo, mut hi) = (*amplitude, *amplitude_cap);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if energy(&build(mid)?) < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo <= 1e-12 * hi {
                    break;
                }
            }
            let a = (1.1 * hi).min(0.5 * (hi + amplitude_cap));
            let s = build(a)?;
            if energy(&s) < 0.0 {
                Ok(s)
            } else {
                domain("bisection did not produce negative energy")
            }
        }
    }
}

/// `√(M/D)` with `M = ∫u²` and `D = ∫u_t² + |∇u|² + m²u² + coupling·|u|^{p+2}`:
/// the time over which the data's own norms change by order one.
pub fn natural_time_scale(state: &State) -> f64 {
    let dv = state.grid().cell_volume();
    let m2: f64 = state.u.values().iter().map(|u| u * u).sum::<f64>() * dv;
    let ph = state.physics;
    let denom = state.v.values().iter().map(|v| v * v).sum::<f64>() * dv
        + gradient_norm_squared(&state.u)
        + ph.mass * ph.mass * m2
        + state.u.values().iter().map(|&u| ph.potential(u)).sum::<f64>() * dv;
    if denom > 0.0 {
        (m2 / denom).sqrt()
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::lq;
    use std::f64::consts::PI;

    #[test]
    fn constant_zero_is_zero_state() {
        let g = GridSpec::new(2, 8, 1.0).unwrap();
        let s = initial_data(&g, Physics::focusing(0.0, 2.0), &InitialData::Constant { amplitude: 0.0, velocity: 0.0 }).unwrap();
        assert_eq!(s, State::zero(g, Physics::focusing(0.0, 2.0)).unwrap());
    }

    #[test]
    fn gaussian_mass_matches_closed_form() {
        let g = GridSpec::new(2, 128, 16.0).unwrap();
        let (a, w) = (1.7, 0.8);
        let s = initial_data(&g, Physics::focusing(0.5, 2.0), &InitialData::Gaussian { amplitude: a, width: w, center: None }).unwrap();
        let exact = a * a * PI * w * w;
        assert!((lq(&s.u, 2.0).powi(2) - exact).abs() / exact < 1e-4);
    }

    #[test]
    fn negative_energy_is_negative() {
        let g = GridSpec::new(2, 64, 12.0).unwrap();
        let data = InitialData::NegativeEnergy { amplitude: 0.1, width: 1.0, amplitude_cap: 100.0 };
        let s = initial_data(&g, Physics::focusing(0.0, 4.0), &data).unwrap();
        assert!(energy(&s) < 0.0);
        let capped = InitialData::NegativeEnergy { amplitude: 0.1, width: 1.0, amplitude_cap: 0.2 };
        assert!(initial_data(&g, Physics::focusing(0.0, 4.0), &capped).is_err());
    }

    #[test]
    fn log_profile_shape() {
        let g = GridSpec::new(2, 64, 16.0).unwrap();
        let s = initial_data(&g, Physics::focusing(0.0, 2.0), &InitialData::LogProfile { radius: 4.0 }).unwrap();
        assert!((s.u.max_abs() - 4f64.ln().sqrt()).abs() < 1e-14);
        let corner = g.ravel([0, 0, 0]);
        assert_eq!(s.u.values()[corner], 0.0);
        assert!(initial_data(&GridSpec::new(3, 8, 16.0).unwrap(), Physics::focusing(0.0, 2.0), &InitialData::LogProfile { radius: 4.0 }).is_err());
    }

    #[test]
    fn traveling_plane_wave_velocity() {
        let g = GridSpec::new(2, 16, 2.0 * PI).unwrap();
        let data = InitialData::PlaneWave { mode: vec![1, 2], amplitude: 0.5, traveling: true };
        let s = initial_data(&g, Physics::linear(1.0, 2.0), &data).unwrap();
        assert!((s.v.max_abs() - 0.5 * 6f64.sqrt()).abs() < 1e-12);
    }
}
