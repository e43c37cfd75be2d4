use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{transform_for, Field, GridSpec, State};

use super::Dealias;

/// Exact linear Klein–Gordon flow over `dt` (any sign):
/// `û ← cos(ωt)û + sin(ωt)/ω v̂`, `v̂ ← -ω sin(ωt)û + cos(ωt)v̂`, `ω = ⟨ξ⟩_m`.
///
/// `u` and `v` are packed into one complex FFT as `u + iv`.
pub fn linear_propagator(state: &State, dt: f64) -> Result<State> {
    if dt == 0.0 {
        return Ok(state.clone());
    }
    let grid = *state.grid();
    let t = transform_for(&grid);
    let m = state.physics.mass;
    let data = state.u.values().iter().zip(state.v.values()).map(|(&a, &b)| Complex64::new(a, b)).collect();
    let w = t.forward_complex(data);
    let omega = t.shell_table(|xi| m.hypot(xi));
    let cos: Vec<f64> = omega.iter().map(|&o| (o * dt).cos()).collect();
    let sinc: Vec<f64> = omega.iter().map(|&o| if o == 0.0 { dt } else { (o * dt).sin() / o }).collect();
    let osin: Vec<f64> = omega.iter().map(|&o| o * (o * dt).sin()).collect();
    let shells = t.shells();
    let mut out = Vec::with_capacity(w.len());
    for (i, &wk) in w.iter().enumerate() {
        let wm = w[t.mirror(i)].conj();
        let a = 0.5 * (wk + wm);
        let diff = 0.5 * (wk - wm);
        let b = Complex64::new(diff.im, -diff.re);
        let s = shells[i] as usize;
        let a2 = cos[s] * a + sinc[s] * b;
        let b2 = -osin[s] * a + cos[s] * b;
        out.push(a2 + Complex64::new(-b2.im, b2.re));
    }
    let out = t.inverse_complex(out);
    let u = Field::new(grid, out.iter().map(|c| c.re).collect())?;
    let v = Field::new(grid, out.iter().map(|c| c.im).collect())?;
    Ok(State { u, v, time: state.time + dt, physics: state.physics })
}

/// `|u|^p u`, with cheap paths for small even integer `p`.
fn nonlinearity(u: f64, p: f64) -> f64 {
    if p == 2.0 {
        u * u * u
    } else if p == 4.0 {
        let u2 = u * u;
        u2 * u2 * u
    } else {
        u.abs().powf(p) * u
    }
}

fn nonlinear_field(u: &Field, p: f64, dealias: Dealias) -> Result<Vec<f64>> {
    match dealias {
        Dealias::None => Ok(u.values().iter().map(|&x| nonlinearity(x, p)).collect()),
        Dealias::Pad2x => padded_nonlinearity(u, p),
    }
}

/// Evaluates `|u|^p u` on a grid refined by two in every axis (band-limited
/// interpolation), then truncates back to the resolved modes.
fn padded_nonlinearity(u: &Field, p: f64) -> Result<Vec<f64>> {
    let g = *u.grid();
    let n = g.n();
    let big = GridSpec::new(g.dim(), 2 * n, g.box_length())?;
    let t = transform_for(&g);
    let tb = transform_for(&big);
    let spec = t.forward(u);
    let embed = |idx: usize, from: usize, to: usize| -> Option<usize> {
        let k = if idx >= from / 2 { idx as i64 - from as i64 } else { idx as i64 };
        if k == -(from as i64) / 2 {
            None
        } else {
            Some(k.rem_euclid(to as i64) as usize)
        }
    };
    let mut padded = vec![Complex64::new(0.0, 0.0); big.len()];
    for (i, c) in spec.coeffs().iter().enumerate() {
        let idx = g.unravel(i);
        let mut j = [0usize; 3];
        let mut keep = true;
        for a in 0..g.dim() {
            match embed(idx[a], n, 2 * n) {
                Some(v) => j[a] = v,
                None => keep = false,
            }
        }
        if keep {
            padded[big.ravel(j)] = *c;
        }
    }
    let scale = (1u64 << g.dim()) as f64;
    let fine: Vec<Complex64> = tb
        .inverse_complex(padded)
        .into_iter()
        .map(|c| Complex64::new(nonlinearity(c.re * scale, p), 0.0))
        .collect();
    let fine_spec = tb.forward_complex(fine);
    let mut coarse = vec![Complex64::new(0.0, 0.0); g.len()];
    for (i, slot) in coarse.iter_mut().enumerate() {
        let idx = g.unravel(i);
        let mut j = [0usize; 3];
        let mut keep = true;
        for a in 0..g.dim() {
            match embed(idx[a], n, 2 * n) {
                Some(v) => j[a] = v,
                None => keep = false,
            }
        }
        if keep {
            *slot = fine_spec[big.ravel(j)] / scale;
        }
    }
    Ok(t.inverse_complex(coarse).into_iter().map(|c| c.re).collect())
}

/// `v ← v + dt·coupling·|u|^p u`; `u` is unchanged.
pub fn nonlinear_kick(state: &State, dt: f64) -> Result<State> {
    kick_with(state, dt, Dealias::None)
}

pub(crate) fn kick_with(state: &State, dt: f64, dealias: Dealias) -> Result<State> {
    let ph = state.physics;
    if ph.coupling == 0.0 || dt == 0.0 {
        return Ok(state.clone());
    }
    let nl = nonlinear_field(&state.u, ph.exponent, dealias)?;
    let c = dt * ph.coupling;
    let mut v = Vec::with_capacity(nl.len());
    for (&vi, &ni) in state.v.values().iter().zip(&nl) {
        let x = vi + c * ni;
        if !x.is_finite() {
            return Err(Error::KickOverflow { time: state.time });
        }
        v.push(x);
    }
    Ok(State { u: state.u.clone(), v: Field::new(*state.grid(), v)?, time: state.time, physics: ph })
}

/// Second-order splitting `kick(dt/2) ∘ linear(dt) ∘ kick(dt/2)`.
pub fn strang_step(state: &State, dt: f64) -> Result<State> {
    strang_with(state, dt, Dealias::None)
}

pub(crate) fn strang_with(state: &State, dt: f64, dealias: Dealias) -> Result<State> {
    let half = kick_with(state, 0.5 * dt, dealias)?;
    let lin = linear_propagator(&half, dt)?;
    kick_with(&lin, 0.5 * dt, dealias)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Physics;
    use std::f64::consts::PI;

    fn grid2() -> GridSpec {
        GridSpec::new(2, 16, 2.0 * PI).unwrap()
    }

    fn mode_state(m: f64) -> State {
        let g = grid2();
        let u = Field::from_fn(g, |x| (2.0 * x[0] + x[1]).cos()).unwrap();
        let v = Field::from_fn(g, |x| (x[0] - 3.0 * x[1]).sin()).unwrap();
        State::new(u, v, 0.0, Physics::focusing(m, 2.0)).unwrap()
    }

    #[test]
    fn eigenmode_rotates_at_dispersion_frequency() {
        let g = grid2();
        let m = 0.6;
        let u = Field::from_fn(g, |x| (2.0 * x[0] + x[1]).cos()).unwrap();
        let s = State::new(u.clone(), Field::zeros(g), 0.0, Physics::focusing(m, 2.0)).unwrap();
        let dt = 0.37;
        let out = linear_propagator(&s, dt).unwrap();
        let w = (m * m + 5.0f64).sqrt();
        assert!(out.u.sub(&u.scale((w * dt).cos())).unwrap().max_abs() < 1e-13);
        assert!(out.v.sub(&u.scale(-w * (w * dt).sin())).unwrap().max_abs() < 1e-12);
        assert!((out.time - dt).abs() < 1e-15);
    }

    #[test]
    fn massless_zero_mode_uses_the_limit() {
        let g = grid2();
        let s = State::new(Field::constant(g, 1.5), Field::constant(g, -0.5), 0.0, Physics::focusing(0.0, 2.0)).unwrap();
        let out = linear_propagator(&s, 0.8).unwrap();
        assert!(out.u.sub(&Field::constant(g, 1.1)).unwrap().max_abs() < 1e-13);
        assert!(out.v.sub(&Field::constant(g, -0.5)).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn propagator_composes_and_reverses() {
        let s = mode_state(0.3);
        let ab = linear_propagator(&linear_propagator(&s, 0.2).unwrap(), 0.5).unwrap();
        let direct = linear_propagator(&s, 0.7).unwrap();
        assert!(ab.u.sub(&direct.u).unwrap().max_abs() < 1e-12);
        let back = linear_propagator(&direct, -0.7).unwrap();
        assert!(back.u.sub(&s.u).unwrap().max_abs() < 1e-12);
        assert!(back.v.sub(&s.v).unwrap().max_abs() < 1e-12);
        assert_eq!(linear_propagator(&s, 0.0).unwrap(), s);
    }

    #[test]
    fn kick_examples() {
        let g = grid2();
        let s = State::new(Field::constant(g, 1.0), Field::zeros(g), 0.0, Physics::focusing(0.0, 2.0)).unwrap();
        let k = nonlinear_kick(&s, 0.25).unwrap();
        assert!(k.v.sub(&Field::constant(g, 0.25)).unwrap().max_abs() < 1e-15);
        let z = State::zero(g, Physics::focusing(0.0, 2.0)).unwrap();
        assert_eq!(nonlinear_kick(&z, 0.3).unwrap(), z);
        let r = mode_state(0.5);
        let twice = nonlinear_kick(&nonlinear_kick(&r, 0.05).unwrap(), 0.05).unwrap();
        let once = nonlinear_kick(&r, 0.1).unwrap();
        assert!(twice.v.sub(&once.v).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn kick_overflow_is_reported() {
        let g = grid2();
        let s = State::new(Field::constant(g, 1e120), Field::zeros(g), 0.0, Physics::focusing(0.0, 2.0)).unwrap();
        assert!(matches!(nonlinear_kick(&s, 1.0), Err(Error::KickOverflow { .. })));
    }

    #[test]
    fn linear_strang_is_the_propagator() {
        let mut s = mode_state(0.5);
        s.physics.coupling = 0.0;
        let a = strang_step(&s, 0.1).unwrap();
        let b = linear_propagator(&s, 0.1).unwrap();
        assert!(a.u.sub(&b.u).unwrap().max_abs() < 1e-12);
        assert!(a.v.sub(&b.v).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn padded_cubic_is_exact_for_low_modes() {
        // cos(x)³ = (3cos x + cos 3x)/4 is resolved on n = 16, so padding changes nothing.
        let g = grid2();
        let u = Field::from_fn(g, |x| x[0].cos()).unwrap();
        let a = padded_nonlinearity(&u, 2.0).unwrap();
        for (i, v) in a.iter().enumerate() {
            let x = g.position(i)[0];
            assert!((v - x.cos().powi(3)).abs() < 1e-13);
        }
    }
}
