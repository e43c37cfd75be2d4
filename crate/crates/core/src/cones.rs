//! Light-cone functionals and monitors.
//!
//! Everything is phrased in the forward-cone convention `{0 < t ≤ T, |x - x₀| < t}`.
//! A backward cone ending at `(T*, x₀)` is handled by time reversal: a state at
//! time `s` is viewed as `(u, -u_t)` at cone time `t = T* - s`, which solves the
//! same equation.

use serde::{Deserialize, Serialize};

use crate::conslaws::{eval_tensor, relative_gap, Apex, TensorKind};
use crate::error::{domain, Result};
use crate::grid::{transform_for, Field, Point, State};
use crate::norms::{critical_exponent, CriticalParams, Regime};
use crate::series::DiagnosticSeries;
use crate::solver::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Cone time `t = s - vertex_time`.
    Forward,
    /// Cone time `t = vertex_time - s`, velocity reversed.
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub vertex: Point,
    pub vertex_time: f64,
    /// Largest cone time `T`.
    pub top_time: f64,
    pub orientation: Orientation,
    /// Cone times below this are never evaluated.
    #[serde(default)]
    pub t_floor: f64,
}

/// Grid cells of clearance required between the cone and the box faces.
pub const BOX_MARGIN_CELLS: f64 = 3.0;

impl ConeSpec {
    pub fn forward(vertex: Point, vertex_time: f64, top_time: f64) -> Self {
        Self { vertex, vertex_time, top_time, orientation: Orientation::Forward, t_floor: 0.0 }
    }

    pub fn backward(vertex: Point, vertex_time: f64, top_time: f64) -> Self {
        Self { vertex, vertex_time, top_time, orientation: Orientation::Backward, t_floor: 0.0 }
    }

    pub fn cone_time(&self, s: f64) -> f64 {
        match self.orientation {
            Orientation::Forward => s - self.vertex_time,
            Orientation::Backward => self.vertex_time - s,
        }
    }

    /// Whether cone time `t` is admissible: `t_floor < t ≤ T` and the ball of
    /// radius `t` clears the box by the margin.
    pub fn admits(&self, state: &State) -> bool {
        self.check(state).is_ok()
    }

    fn check(&self, state: &State) -> Result<f64> {
        let t = self.cone_time(state.time);
        let g = state.grid();
        let tol = 1e-12 * self.top_time.abs().max(1.0);
        if !(t > 0.0 && t > self.t_floor && t <= self.top_time + tol) {
            return domain(format!("cone time {t} outside ({}, {}]", self.t_floor.max(0.0), self.top_time));
        }
        let reach = t + BOX_MARGIN_CELLS * g.spacing();
        if reach > 0.5 * g.box_length() {
            return domain(format!(
                "cone radius {t} plus {BOX_MARGIN_CELLS} cells exceeds half the box {}",
                0.5 * g.box_length()
            ));
        }
        Ok(t)
    }

    /// The state in forward-cone coordinates: time `t`, vertex at the origin of
    /// time, velocity negated for backward cones.
    pub fn view(&self, state: &State) -> Result<State> {
        let t = self.check(state)?;
        let v = match self.orientation {
            Orientation::Forward => state.v.clone(),
            Orientation::Backward => state.v.scale(-1.0),
        };
        State::new(state.u.clone(), v, t, state.physics)
    }

    fn apex(&self) -> Apex {
        Apex::at(self.vertex, 0.0)
    }
}

/// `∫ w(r) g` over `r = |x - x₀| < radius`; `w` receives `r`.
fn ball_integral(view: &State, center: &Point, radius: f64, g: &[f64], w: impl Fn(f64) -> f64) -> f64 {
    let grid = view.grid();
    let mut sum = 0.0;
    for (i, &gi) in g.iter().enumerate() {
        let r = grid.distance(i, center);
        if r < radius {
            sum += w(r) * gi;
        }
    }
    sum * grid.cell_volume()
}

/// `L(t) = ∫_{|x-x₀|<t} l⁰(t, x) dx` for the modified dilation density.
#[allow(non_snake_case)]
pub fn L_functional(state: &State, cone: &ConeSpec) -> Result<f64> {
    let view = cone.view(state)?;
    let l = eval_tensor(&view, TensorKind::ModDilation, &cone.apex())?;
    Ok(ball_integral(&view, &cone.vertex, view.time, l.density.values(), |_| 1.0))
}

/// `Z(t) = ∫_{|x-x₀|<t} z⁰(t, x)(t² - |x-x₀|²)^α dx`; sub-conformal only.
#[allow(non_snake_case)]
pub fn Z_functional(state: &State, cone: &ConeSpec) -> Result<f64> {
    let view = cone.view(state)?;
    let z = eval_tensor(&view, TensorKind::Combined, &cone.apex())?;
    let cp = critical_exponent(view.grid().dim(), view.physics.exponent)?;
    let t = view.time;
    Ok(ball_integral(&view, &cone.vertex, t, z.density.values(), |r| (t * t - r * r).powf(cp.alpha)))
}

/// Radial derivative `u_r = x̂·∇u` and angular part `∇u - x̂ u_r` about `vertex`.
/// At the vertex itself `u_r = 0`.
pub fn radial_angular_split(grad: &[Field], vertex: &Point) -> Result<(Field, Vec<Field>)> {
    let Some(first) = grad.first() else {
        return domain("empty gradient");
    };
    let grid = *first.grid();
    if grad.len() != grid.dim() {
        return domain(format!("gradient has {} components, d = {}", grad.len(), grid.dim()));
    }
    let d = grid.dim();
    let mut ur = Vec::with_capacity(grid.len());
    let mut ang = vec![Vec::with_capacity(grid.len()); d];
    for i in 0..grid.len() {
        let x = grid.displacement(i, vertex);
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let radial = if r > 0.0 { (0..d).map(|a| x[a] / r * grad[a].values()[i]).sum() } else { 0.0 };
        ur.push(radial);
        for (a, comp) in ang.iter_mut().enumerate() {
            let unit = if r > 0.0 { x[a] / r } else { 0.0 };
            comp.push(grad[a].values()[i] - unit * radial);
        }
    }
    Ok((Field::new(grid, ur)?, ang.into_iter().map(|c| Field::new(grid, c)).collect::<Result<_>>()?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxIdentity {
    /// Change of `∫ (t² - |x|²)/t · e⁰` between the first and last cone times.
    pub lhs: f64,
    /// Bulk integral of the null-decomposed energy density.
    pub rhs: f64,
    pub gap: f64,
}

fn window<'a>(traj: &'a Trajectory, cone: &ConeSpec, t0: f64, t1: f64) -> Result<Vec<State>> {
    let (lo, hi) = (t0.min(t1), t0.max(t1));
    let tol = 1e-9 * hi.abs().max(1.0);
    let mut views: Vec<State> = traj
        .snapshots
        .iter()
        .filter(|s| s.time >= lo - tol && s.time <= hi + tol)
        .map(|s| cone.view(s))
        .collect::<Result<_>>()?;
    views.sort_by(|a, b| a.time.total_cmp(&b.time));
    Ok(views)
}

fn trapezoid(t: &[f64], f: &[f64]) -> f64 {
    t.windows(2).zip(f.windows(2)).map(|(tw, fw)| 0.5 * (tw[1] - tw[0]) * (fw[0] + fw[1])).sum()
}

/// Energy-flux identity on the cone between snapshot times `t0` and `t1`
/// (solver times; the bulk term is integrated by the trapezoid rule).
pub fn energy_flux_check(traj: &Trajectory, cone: &ConeSpec, t0: f64, t1: f64) -> Result<FluxIdentity> {
    let views = window(traj, cone, t0, t1)?;
    if views.len() < 3 {
        return domain(format!("flux window holds {} admissible snapshots, need at least 3", views.len()));
    }
    let mut boundary = Vec::with_capacity(views.len());
    let mut bulk = Vec::with_capacity(views.len());
    for view in &views {
        let t = view.time;
        let grid = *view.grid();
        let ph = view.physics;
        let e = eval_tensor(view, TensorKind::Energy, &cone.apex())?;
        boundary.push(ball_integral(view, &cone.vertex, t, e.density.values(), |r| (t * t - r * r) / t));
        let grad = transform_for(&grid).gradient(&view.u)?;
        let (ur, ang) = radial_angular_split(&grad, &cone.vertex)?;
        let m2 = ph.mass * ph.mass;
        let q = ph.exponent + 2.0;
        let integrand: Vec<f64> = (0..grid.len())
            .map(|i| {
                let rho = grid.distance(i, &cone.vertex) / t;
                let (u, v, r) = (view.u.values()[i], view.v.values()[i], ur.values()[i]);
                let a2: f64 = ang.iter().map(|c| c.values()[i].powi(2)).sum();
                0.25 * (1.0 + rho).powi(2) * (v + r).powi(2)
                    + 0.25 * (1.0 - rho).powi(2) * (v - r).powi(2)
                    + (1.0 + rho * rho) * (0.5 * a2 + 0.5 * m2 * u * u - ph.potential(u) / q)
            })
            .collect();
        bulk.push(ball_integral(view, &cone.vertex, t, &integrand, |_| 1.0));
    }
    let times: Vec<f64> = views.iter().map(|v| v.time).collect();
    let lhs = boundary[boundary.len() - 1] - boundary[0];
    let rhs = trapezoid(&times, &bulk);
    Ok(FluxIdentity { lhs, rhs, gap: relative_gap(lhs, rhs) })
}

/// `|∇_{t,x}u|²` pointwise.
fn spacetime_gradient_sq(view: &State) -> Result<Vec<f64>> {
    let grad = transform_for(view.grid()).gradient(&view.u)?;
    Ok((0..view.grid().len())
        .map(|i| view.v.values()[i].powi(2) + grad.iter().map(|g| g.values()[i].powi(2)).sum::<f64>())
        .collect())
}

/// Normalized weighted space-time gradient average over a dyadic time range
/// starting at cone time `t0`:
///
/// - conformal: `(α t₀^{d+1})⁻¹ ∫_{t₀}^{(1+α)t₀} ∫_{|x|<αt} (t-|x|)^{d+1}|∇_{t,x}u|² + (t-|x|)^{d-1}u²`
/// - sub-conformal: `t₀^{-(d+1)} ∫_{t₀}^{2t₀} ∫_{|x|<t} (t-|x|)^{d+2-2s_c}|∇_{t,x}u|² + (t-|x|)^{d-2s_c}u²`
/// - super-conformal: `∫_{t₀}^{2t₀} ∫_{|x|<t} |∇_{t,x}u|²`
///
/// `alpha` is used in the conformal case only.
pub fn averaged_gradient_bound(traj: &Trajectory, cone: &ConeSpec, t0: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) || !(t0 > 0.0) {
        return domain(format!("need t0 > 0 and alpha in (0, 1], got t0 = {t0}, alpha = {alpha}"));
    }
    let Some(first) = traj.snapshots.first() else {
        return domain("empty trajectory");
    };
    let d = first.grid().dim() as f64;
    let cp = critical_exponent(first.grid().dim(), first.physics.exponent)?;
    let t_end = if cp.regime == Regime::Conformal { (1.0 + alpha) * t0 } else { 2.0 * t0 };
    let tol = 1e-9 * t_end;
    let mut views: Vec<State> = traj
        .snapshots
        .iter()
        .filter(|s| {
            let t = cone.cone_time(s.time);
            t >= t0 - tol && t <= t_end + tol
        })
        .map(|s| cone.view(s))
        .collect::<Result<_>>()?;
    views.sort_by(|a, b| a.time.total_cmp(&b.time));
    let covered = views.first().is_some_and(|v| v.time <= t0 + tol) && views.last().is_some_and(|v| v.time >= t_end - tol);
    if views.len() < 3 || !covered {
        return domain(format!("snapshots do not cover cone times [{t0}, {t_end}]"));
    }
    let mut vals = Vec::with_capacity(views.len());
    for view in &views {
        let t = view.time;
        let grad2 = spacetime_gradient_sq(view)?;
        let u = view.u.values();
        let (radius, norm_weights): (f64, Box<dyn Fn(f64) -> (f64, f64)>) = match cp.regime {
            Regime::Conformal => (alpha * t, Box::new(move |r| ((t - r).powf(d + 1.0), (t - r).powf(d - 1.0)))),
            Regime::SubConformal => {
                let sc = cp.s_c;
                (t, Box::new(move |r| ((t - r).powf(d + 2.0 - 2.0 * sc), (t - r).powf(d - 2.0 * sc))))
            }
            Regime::SuperConformal => (t, Box::new(|_| (1.0, 0.0))),
        };
        let integrand: Vec<f64> = (0..u.len())
            .map(|i| {
                let r = view.grid().distance(i, &cone.vertex);
                let (wg, wu) = norm_weights(r);
                wg * grad2[i] + wu * u[i] * u[i]
            })
            .collect();
        vals.push(ball_integral(view, &cone.vertex, radius, &integrand, |_| 1.0));
    }
    let times: Vec<f64> = views.iter().map(|v| v.time).collect();
    let total = trapezoid(&times, &vals);
    Ok(match cp.regime {
        Regime::Conformal => total / (alpha * t0.powf(d + 1.0)),
        Regime::SubConformal => total / t0.powf(d + 1.0),
        Regime::SuperConformal => total,
    })
}

/// How a monitor series should be read.
pub const KIND_POINTWISE: &str = "pointwise";
pub const KIND_CUMULATIVE: &str = "cumulative";

fn tagged(name: &str, cone: &ConeSpec, cp: &CriticalParams, kind: &str, normalization: &str) -> DiagnosticSeries {
    let mut s = DiagnosticSeries::new(name)
        .with_meta("kind", kind)
        .with_meta("normalization", normalization)
        .with_meta("vertex", format!("{:?}", cone.vertex))
        .with_meta("vertex_time", cone.vertex_time)
        .with_meta("orientation", format!("{:?}", cone.orientation).to_lowercase());
    s.regime = Some(cp.regime);
    s
}

/// Normalized cone quantities that stay bounded up to blowup when the rate
/// estimates hold, each divided by the expected power of the cone time `t`:
///
/// - `mass_half`: `t^{-a}∫_{|x|<t/2} u²` with `a = pd/(p+4)` if `s_c > 1/2`, else `2s_c`
/// - `gradient_dyadic_half`: `∫_{t₀}^{2t₀}∫_{|x|<t/2} |∇_{t,x}u|²`, divided by `t₀^{2s_c-1}` if `s_c ≤ 1/2`
/// - sub-conformal and conformal: `energy_half` = `∫_{|x|<t/2} t^{-2s_c}u² + t^{2(1-s_c)}|∇_{t,x}u|²`
/// - super-conformal: `mass_cone` = `t^{-pd/(p+4)}∫_{|x|<t} u²`, `lp_cone` = `∫_{|x|<t} |u|^{(p+4)/2}`,
///   `gradient_dyadic` = `∫_{t₀}^{2t₀}∫_{|x|<t} |∇_{t,x}u|²`, and the cumulative
///   `weighted_energy` = `∫∫_{cone} (1-|x|/t)²|∇_{t,x}u|² + |u|^{p+2}` accumulated
///   from the largest cone time downwards
///
/// Dyadic series are indexed by `t₀` and need samples reaching `2t₀`.
pub fn cone_monitor(traj: &Trajectory, cone: &ConeSpec) -> Result<Vec<DiagnosticSeries>> {
    let Some(first) = traj.snapshots.first() else {
        return Ok(Vec::new());
    };
    let d = first.grid().dim() as f64;
    let p = first.physics.exponent;
    let cp = critical_exponent(first.grid().dim(), p)?;
    let superc = cp.regime == Regime::SuperConformal;
    let mass_pow = if cp.s_c > 0.5 { p * d / (p + 4.0) } else { 2.0 * cp.s_c };

    struct Sample {
        t: f64,
        mass_half: f64,
        grad_half: f64,
        energy_half: f64,
        mass_cone: f64,
        lp_cone: f64,
        grad_cone: f64,
        weighted: f64,
    }
    let mut samples: Vec<Sample> = Vec::new();
    for s in &traj.snapshots {
        if !cone.admits(s) {
            continue;
        }
        let view = cone.view(s)?;
        let t = view.time;
        let c = &cone.vertex;
        let u = view.u.values();
        let u2: Vec<f64> = u.iter().map(|x| x * x).collect();
        let g2 = spacetime_gradient_sq(&view)?;
        let mass_half = ball_integral(&view, c, 0.5 * t, &u2, |_| 1.0);
        let grad_half = ball_integral(&view, c, 0.5 * t, &g2, |_| 1.0);
        let lp: Vec<f64> = u.iter().map(|x| x.abs().powf(0.5 * (p + 4.0))).collect();
        let pot: Vec<f64> = u.iter().map(|x| x.abs().powf(p + 2.0)).collect();
        let weighted_integrand: Vec<f64> = (0..u.len())
            .map(|i| (1.0 - view.grid().distance(i, c) / t).powi(2) * g2[i] + pot[i])
            .collect();
        samples.push(Sample {
            t,
            mass_half,
            grad_half,
            energy_half: t.powf(-2.0 * cp.s_c) * mass_half + t.powf(2.0 * (1.0 - cp.s_c)) * grad_half,
            mass_cone: ball_integral(&view, c, t, &u2, |_| 1.0),
            lp_cone: ball_integral(&view, c, t, &lp, |_| 1.0),
            grad_cone: ball_integral(&view, c, t, &g2, |_| 1.0),
            weighted: ball_integral(&view, c, t, &weighted_integrand, |_| 1.0),
        });
    }
    samples.sort_by(|a, b| a.t.total_cmp(&b.t));

    let mut out = Vec::new();
    let mut mass = tagged("mass_half", cone, &cp, KIND_POINTWISE, &format!("t^-{mass_pow}"));
    for s in &samples {
        mass.push(s.t, s.mass_half * s.t.powf(-mass_pow));
    }
    out.push(mass);

    let times: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let dyadic = |f: &dyn Fn(&Sample) -> f64, norm: &dyn Fn(f64) -> f64, name: &str, label: &str| {
        let mut series = tagged(name, cone, &cp, KIND_POINTWISE, label);
        let vals: Vec<f64> = samples.iter().map(f).collect();
        for (i, &t0) in times.iter().enumerate() {
            let (t1, tol) = (2.0 * t0, 1e-9 * t0);
            let Some(j) = times.iter().rposition(|&t| t <= t1 + tol) else { continue };
            if j < i + 2 {
                continue;
            }
            let mut integral = trapezoid(&times[i..=j], &vals[i..=j]);
            if times[j] < t1 - tol {
                // Close the shell at `2 t0` by linear interpolation; no extrapolation.
                let Some(&tn) = times.get(j + 1) else { continue };
                let fe = vals[j] + (vals[j + 1] - vals[j]) * (t1 - times[j]) / (tn - times[j]);
                integral += 0.5 * (t1 - times[j]) * (vals[j] + fe);
            }
            series.push(t0, integral / norm(t0));
        }
        series
    };
    if superc {
        out.push(dyadic(&|s| s.grad_half, &|_| 1.0, "gradient_dyadic_half", "1"));
    } else {
        let e = 2.0 * cp.s_c - 1.0;
        out.push(dyadic(&|s| s.grad_half, &|t0| t0.powf(e), "gradient_dyadic_half", &format!("t0^{e}")));
        let mut en = tagged("energy_half", cone, &cp, KIND_POINTWISE, "1");
        for s in &samples {
            en.push(s.t, s.energy_half);
        }
        out.push(en);
    }
    if superc {
        let pw = p * d / (p + 4.0);
        let mut mc = tagged("mass_cone", cone, &cp, KIND_POINTWISE, &format!("t^-{pw}"));
        let mut lc = tagged("lp_cone", cone, &cp, KIND_POINTWISE, "1");
        for s in &samples {
            mc.push(s.t, s.mass_cone * s.t.powf(-pw));
            lc.push(s.t, s.lp_cone);
        }
        out.push(mc);
        out.push(lc);
        out.push(dyadic(&|s| s.grad_cone, &|_| 1.0, "gradient_dyadic", "1"));
        let mut we = tagged("weighted_energy", cone, &cp, KIND_CUMULATIVE, "1");
        let mut acc = 0.0;
        let mut rev = Vec::with_capacity(samples.len());
        for k in (0..samples.len()).rev() {
            if k + 1 < samples.len() {
                acc += 0.5 * (samples[k + 1].t - samples[k].t) * (samples[k + 1].weighted + samples[k].weighted);
            }
            rev.push((samples[k].t, acc));
        }
        for (t, v) in rev.into_iter().rev() {
            we.push(t, v);
        }
        out.push(we);
    }
    Ok(out)
}
