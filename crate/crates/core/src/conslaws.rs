//! The six conserved or monotone space-time tensors `(z⁰, z⃗)` with their
//! sources, `∂_t z⁰ + ∇·z⃗ = source`, and audits of those identities on
//! numerical trajectories.
//!
//! Time-weighted tensors are evaluated at cone time `t = state.time - apex.time`
//! and displacement `X = x - apex.point` (minimum image). Real solutions only.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::grid::{transform_for, Field, GridSpec, Point, State};
use crate::norms::critical_exponent;
use crate::solver::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorKind {
    Energy,
    Dilation,
    ModDilation,
    Charge,
    ConfEnergy,
    /// Dilation plus `α = 1/2 - s_c` times charge; sub-conformal only.
    Combined,
}

impl TensorKind {
    pub const ALL: [TensorKind; 6] = [
        TensorKind::Energy,
        TensorKind::Dilation,
        TensorKind::ModDilation,
        TensorKind::Charge,
        TensorKind::ConfEnergy,
        TensorKind::Combined,
    ];

    pub fn is_time_weighted(self) -> bool {
        !matches!(self, TensorKind::Energy | TensorKind::Charge)
    }

    pub fn name(self) -> &'static str {
        match self {
            TensorKind::Energy => "energy",
            TensorKind::Dilation => "dilation",
            TensorKind::ModDilation => "mod_dilation",
            TensorKind::Charge => "charge",
            TensorKind::ConfEnergy => "conf_energy",
            TensorKind::Combined => "combined",
        }
    }
}

/// Space-time origin of the weights: cone time is measured from `time` and
/// positions from `point`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Apex {
    pub point: Point,
    pub time: f64,
}

impl Apex {
    pub fn at(point: Point, time: f64) -> Self {
        Self { point, time }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorSample {
    pub kind: TensorKind,
    pub density: Field,
    pub flux: Vec<Field>,
    pub source: Field,
    /// Cone time `t`.
    pub eval_time: f64,
    pub apex: Apex,
}

/// Pointwise inputs shared by every tensor.
struct Local {
    u: f64,
    v: f64,
    g: [f64; 3],
    x: [f64; 3],
    gg: f64,
    xg: f64,
    xx: f64,
    pot: f64,
}

struct Ctx {
    d: f64,
    p: f64,
    m2: f64,
    t: f64,
    alpha: f64,
}

fn locals(state: &State, apex: &Apex) -> Result<Vec<Local>> {
    let grid = *state.grid();
    let grad = transform_for(&grid).gradient(&state.u)?;
    let dim = grid.dim();
    let u = state.u.values();
    let v = state.v.values();
    Ok((0..grid.len())
        .map(|i| {
            let mut g = [0.0; 3];
            for a in 0..dim {
                g[a] = grad[a].values()[i];
            }
            let x = grid.displacement(i, &apex.point);
            Local {
                u: u[i],
                v: v[i],
                g,
                x,
                gg: g[0] * g[0] + g[1] * g[1] + g[2] * g[2],
                xg: x[0] * g[0] + x[1] * g[1] + x[2] * g[2],
                xx: x[0] * x[0] + x[1] * x[1] + x[2] * x[2],
                pot: state.physics.potential(u[i]),
            }
        })
        .collect())
}

fn context(state: &State, kind: TensorKind, apex: &Apex) -> Result<Ctx> {
    let ph = state.physics;
    let d = state.grid().dim();
    let t = state.time - apex.time;
    if kind.is_time_weighted() && !(t > 0.0) {
        return domain(format!("{} tensor needs cone time t > 0, got {t}", kind.name()));
    }
    let mut alpha = 0.0;
    if kind == TensorKind::Combined {
        let cp = critical_exponent(d, ph.exponent)?;
        if !(cp.alpha > 0.0) {
            return domain(format!("combined tensor needs s_c < 1/2, got s_c = {}", cp.s_c));
        }
        alpha = cp.alpha;
    }
    Ok(Ctx { d: d as f64, p: ph.exponent, m2: ph.mass * ph.mass, t, alpha })
}

/// Density, flux and source at one point.
fn pointwise(kind: TensorKind, c: &Ctx, l: &Local) -> (f64, [f64; 3], f64) {
    let Local { u, v, g, x, gg, xg, xx, pot } = *l;
    let (d, p, m2, t) = (c.d, c.p, c.m2, c.t);
    let q = p + 2.0;
    let scale = |s: f64, a: [f64; 3]| [s * a[0], s * a[1], s * a[2]];
    let add = |a: [f64; 3], b: [f64; 3]| [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
    let dil_src = (p * (d - 1.0) - 4.0) / (2.0 * q) * pot + m2 * u * u;
    let dilation = || {
        let lag = 0.5 * gg - 0.5 * v * v + 0.5 * m2 * u * u - pot / q;
        let dd = xg + t * v + 0.5 * (d - 1.0) * u;
        (t * lag + dd * v, add(scale(lag, x), scale(-dd, g)))
    };
    let xflux = |k: f64| scale(-k * (2.0 * u * v / t - u * u / (t * t)), x);
    match kind {
        TensorKind::Energy => {
            let e0 = 0.5 * v * v + 0.5 * gg + 0.5 * m2 * u * u - pot / q;
            (e0, scale(-v, g), 0.0)
        }
        TensorKind::Charge => (u * v, scale(-u, g), v * v - gg - m2 * u * u + pot),
        TensorKind::Dilation => {
            let (d0, dv) = dilation();
            (d0, dv, dil_src)
        }
        TensorKind::ModDilation => {
            let (d0, dv) = dilation();
            let l0 = d0 + (d - 1.0) / (4.0 * t) * (d * u * u + 2.0 * u * xg);
            (l0, add(dv, xflux(0.25 * (d - 1.0))), dil_src)
        }
        TensorKind::ConfEnergy => {
            let e0 = 0.5 * v * v + 0.5 * gg + 0.5 * m2 * u * u - pot / q;
            let w = t * t + xx;
            let k0 = w * e0 + 2.0 * t * v * xg + (d - 1.0) * t * u * v - 0.5 * (d - 1.0) * u * u;
            let gcoef = -(w * v + 2.0 * t * xg + (d - 1.0) * t * u);
            let xcoef = -2.0 * t * (0.5 * v * v - 0.5 * gg - 0.5 * m2 * u * u + pot / q);
            let src = t * (p * (d - 1.0) - 4.0) / q * pot + 2.0 * t * m2 * u * u;
            (k0, add(scale(gcoef, g), scale(xcoef, x)), src)
        }
        TensorKind::Combined => {
            let a = c.alpha;
            let y = xg + t * v + 2.0 / p * u;
            let z0 = y * y / (2.0 * t) + 0.5 * t * (gg - xg * xg / (t * t)) - t * pot / q
                + (0.5 * m2 * t + q / (p * p * t)) * u * u;
            let (_, dv) = dilation();
            let zv = add(add(dv, scale(-a * u, g)), xflux(1.0 / p));
            let src = dil_src
                + a * (v * v - gg - m2 * u * u + pot)
                + 2.0 * a / p * (2.0 * u * v / t - u * u / (t * t));
            (z0, zv, src)
        }
    }
}

pub fn eval_tensor(state: &State, kind: TensorKind, apex: &Apex) -> Result<TensorSample> {
    let c = context(state, kind, apex)?;
    let grid = *state.grid();
    let dim = grid.dim();
    let pts = locals(state, apex)?;
    let mut density = Vec::with_capacity(pts.len());
    let mut flux = vec![Vec::with_capacity(pts.len()); dim];
    let mut source = Vec::with_capacity(pts.len());
    for l in &pts {
        let (z0, zv, s) = pointwise(kind, &c, l);
        density.push(z0);
        for (a, f) in flux.iter_mut().enumerate() {
            f.push(zv[a]);
        }
        source.push(s);
    }
    Ok(TensorSample {
        kind,
        density: Field::new(grid, density)?,
        flux: flux.into_iter().map(|f| Field::new(grid, f)).collect::<Result<_>>()?,
        source: Field::new(grid, source)?,
        eval_time: c.t,
        apex: *apex,
    })
}

/// The modified dilation density in its completed-square form
/// `(1/2t)D² + (t/2)(|∇u|² - (X·∇u)²/t²) - tP/(p+2) + (d²-1)u²/(8t) + tm²u²/2`,
/// an independent expansion of the definition used by [`eval_tensor`].
pub fn mod_dilation_density_expanded(state: &State, apex: &Apex) -> Result<Field> {
    let c = context(state, TensorKind::ModDilation, apex)?;
    let (d, p, m2, t) = (c.d, c.p, c.m2, c.t);
    let vals = locals(state, apex)?
        .iter()
        .map(|l| {
            let dd = l.xg + t * l.v + 0.5 * (d - 1.0) * l.u;
            dd * dd / (2.0 * t) + 0.5 * t * (l.gg - l.xg * l.xg / (t * t)) - t * l.pot / (p + 2.0)
                + (d * d - 1.0) / (8.0 * t) * l.u * l.u
                + 0.5 * t * m2 * l.u * l.u
        })
        .collect();
    Field::new(*state.grid(), vals)
}

/// Integrand of the weighted monotonicity formula for the combined tensor,
/// `2α(X·∇u + tu_t + 2u/p)² s^{α-1} + m²u² s^α` with `s = t² - |X|²`, set to
/// zero outside the cone `|X| < t`. Nonnegative by construction.
pub fn combined_weighted_source(state: &State, apex: &Apex) -> Result<Field> {
    let c = context(state, TensorKind::Combined, apex)?;
    let (p, m2, t, a) = (c.p, c.m2, c.t, c.alpha);
    let vals = locals(state, apex)?
        .iter()
        .map(|l| {
            let s = t * t - l.xx;
            if s <= 0.0 {
                return 0.0;
            }
            let y = l.xg + t * l.v + 2.0 / p * l.u;
            2.0 * a * y * y * s.powf(a - 1.0) + m2 * l.u * l.u * s.powf(a)
        })
        .collect();
    Field::new(*state.grid(), vals)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualNorms {
    pub l2: f64,
    pub linf: f64,
}

pub fn residual_norms(residual: &Field) -> ResidualNorms {
    ResidualNorms { l2: residual.dot(residual).sqrt(), linf: residual.max_abs() }
}

/// `(z⁰(t₊) - z⁰(t₋))/(t₊ - t₋) + ∇·z⃗(t) - source(t)` at the middle snapshot.
///
/// The time derivative is a centred difference, independent of the tensor
/// algebra, so an error in the tensors cannot cancel.
pub fn divergence_residual(window: [&State; 3], kind: TensorKind, apex: &Apex) -> Result<Field> {
    let [a, b, c] = window;
    a.grid().check_same(b.grid())?;
    a.grid().check_same(c.grid())?;
    let (h1, h2) = (b.time - a.time, c.time - b.time);
    if !(h1 > 0.0 && h2 > 0.0) || (h1 - h2).abs() > 1e-9 * h1.max(h2) {
        return domain(format!("snapshots must be equally spaced and increasing (steps {h1}, {h2})"));
    }
    let za = eval_tensor(a, kind, apex)?;
    let zb = eval_tensor(b, kind, apex)?;
    let zc = eval_tensor(c, kind, apex)?;
    let div = transform_for(b.grid()).divergence(&zb.flux)?;
    let dt = c.time - a.time;
    let vals = zc
        .density
        .values()
        .iter()
        .zip(za.density.values())
        .zip(div.values().iter().zip(zb.source.values()))
        .map(|((&hi, &lo), (&dv, &s))| (hi - lo) / dt + dv - s)
        .collect();
    Field::new(*b.grid(), vals)
}

/// Observed convergence orders `log₂(e_i/e_{i+1})` for errors measured at
/// successive halvings of `(h, dt)`.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlabIdentity {
    pub t0: f64,
    pub t1: f64,
    /// `∫∫ u_t² - |∇u|² - m²u² + coupling·|u|^{p+2}` by the trapezoid rule.
    pub lhs: f64,
    /// `∫ u u_t (t₁) - ∫ u u_t (t₀)`.
    pub rhs: f64,
    /// `|lhs - rhs| / max(|lhs|, |rhs|)`, zero when both vanish.
    pub gap: f64,
    /// Time averages of `∫u_t²` and of `∫|∇u|² + m²u² - coupling·|u|^{p+2}`;
    /// they agree up to `rhs/(t₁ - t₀)`.
    pub kinetic_average: f64,
    pub virial_average: f64,
}

fn trapezoid(t: &[f64], f: &[f64]) -> f64 {
    t.windows(2).zip(f.windows(2)).map(|(tw, fw)| 0.5 * (tw[1] - tw[0]) * (fw[0] + fw[1])).sum()
}

/// Relative gap `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_gap(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s > 0.0 {
        (a - b).abs() / s
    } else {
        0.0
    }
}

/// Snapshots with `t0 <= time <= t1` (relative tolerance 1e-9).
pub(crate) fn window_states(traj: &Trajectory, t0: f64, t1: f64) -> Vec<&State> {
    let tol = 1e-9 * t0.abs().max(t1.abs()).max(1.0);
    traj.snapshots.iter().filter(|s| s.time >= t0 - tol && s.time <= t1 + tol).collect()
}

pub fn charge_slab_identity(traj: &Trajectory, t0: f64, t1: f64) -> Result<SlabIdentity> {
    let states = window_states(traj, t0, t1);
    if states.len() < 3 {
        return domain(format!("slab [{t0}, {t1}] holds {} snapshots, need at least 3", states.len()));
    }
    let mut times = Vec::with_capacity(states.len());
    let mut kinetic = Vec::with_capacity(states.len());
    let mut virial = Vec::with_capacity(states.len());
    for s in &states {
        let dv = s.grid().cell_volume();
        let m2 = s.physics.mass * s.physics.mass;
        let grad2 = crate::norms::gradient_norm_squared(&s.u);
        let k: f64 = s.v.values().iter().map(|v| v * v).sum::<f64>() * dv;
        let rest: f64 = s.u.values().iter().map(|&u| m2 * u * u - s.physics.potential(u)).sum::<f64>() * dv;
        times.push(s.time);
        kinetic.push(k);
        virial.push(grad2 + rest);
    }
    let lhs = trapezoid(&times, &kinetic) - trapezoid(&times, &virial);
    let charge = |s: &State| s.u.dot(&s.v);
    let (first, last) = (states[0], states[states.len() - 1]);
    let rhs = charge(last) - charge(first);
    let span = last.time - first.time;
    Ok(SlabIdentity {
        t0: first.time,
        t1: last.time,
        lhs,
        rhs,
        gap: relative_gap(lhs, rhs),
        kinetic_average: trapezoid(&times, &kinetic) / span,
        virial_average: trapezoid(&times, &virial) / span,
    })
}

/// Machine-readable summary of a tensor audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub kind: TensorKind,
    pub times: Vec<f64>,
    pub residual_l2: Vec<f64>,
    pub residual_linf: Vec<f64>,
    pub refinement_orders: Vec<f64>,
    pub slab_identities: Vec<SlabIdentity>,
}

/// Divergence residuals over every interior window of equally spaced
/// snapshots in `traj`; windows with unequal spacing are skipped.
pub fn audit_trajectory(traj: &Trajectory, kind: TensorKind, apex: &Apex) -> Result<AuditReport> {
    let mut report = AuditReport {
        kind,
        times: Vec::new(),
        residual_l2: Vec::new(),
        residual_linf: Vec::new(),
        refinement_orders: Vec::new(),
        slab_identities: Vec::new(),
    };
    for w in traj.snapshots.windows(3) {
        let (h1, h2) = (w[1].time - w[0].time, w[2].time - w[1].time);
        if (h1 - h2).abs() > 1e-9 * h1.max(h2) {
            continue;
        }
        let r = residual_norms(&divergence_residual([&w[0], &w[1], &w[2]], kind, apex)?);
        report.times.push(w[1].time);
        report.residual_l2.push(r.l2);
        report.residual_linf.push(r.linf);
    }
    Ok(report)
}

/// `X u²/t` as `d` fields, the potential whose space-time divergence turns the
/// dilation tensor into the modified one.
pub fn dilation_correction_potential(state: &State, apex: &Apex) -> Result<Vec<Field>> {
    let t = state.time - apex.time;
    if !(t > 0.0) {
        return domain(format!("cone time must be positive, got {t}"));
    }
    let grid: GridSpec = *state.grid();
    (0..grid.dim())
        .map(|a| {
            let vals =
                (0..grid.len()).map(|i| grid.displacement(i, &apex.point)[a] * state.u.values()[i].powi(2) / t).collect();
            Field::new(grid, vals)
        })
        .collect()
}
