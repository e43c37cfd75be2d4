//! Blowup-time estimation and rates, the mass functional and its convexity,
//! critical-norm growth, the local lower bound near a blowup point, and the
//! blowup-surface estimator.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::grid::{transform_for, Field, Point, State};
use crate::norms::{critical_exponent, energy, gradient_norm_squared, sobolev_norm};
use crate::series::{linear_fit, DiagnosticSeries};
use crate::solver::{Termination, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Trailing sup-norm samples used for the `T*` regression.
    pub tail: usize,
    /// Rate fits start once `‖u‖_∞` has grown by this factor.
    pub growth_floor: f64,
    /// Rate fits stop at `T* - t = gap_factor·(T* - t_last)`, keeping clear of
    /// the `T*` regression error.
    pub gap_factor: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { tail: 20, growth_floor: 10.0, gap_factor: 100.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    pub detected: bool,
    pub t_star: Option<f64>,
    /// Times of the samples in the `T*` regression.
    pub fit_window: Vec<f64>,
    /// RMS residual of the `‖u‖_∞^{-p/2}` regression.
    pub fit_residual: f64,
    /// `(T* - t)` range of the rate regressions.
    pub rate_window: Option<(f64, f64)>,
    /// Fitted exponent `e` in `quantity ~ (T* - t)^e`.
    pub rate_exponents: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl BlowupReport {
    fn undetected(note: String) -> Self {
        Self {
            detected: false,
            t_star: None,
            fit_window: Vec::new(),
            fit_residual: 0.0,
            rate_window: None,
            rate_exponents: BTreeMap::new(),
            notes: vec![note],
        }
    }
}

/// Log-log slope of `values` against `t_star - times` over the samples whose
/// distance to `t_star` lies in `[lo, hi]`.
fn rate_exponent(times: &[f64], values: &[f64], t_star: f64, lo: f64, hi: f64) -> Option<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(values)
        .filter(|(&t, &v)| {
            let tau = t_star - t;
            tau >= lo && tau <= hi && v > 0.0
        })
        .map(|(&t, &v)| ((t_star - t).ln(), v.ln()))
        .unzip();
    if x.len() < 3 {
        return None;
    }
    linear_fit(&x, &y).map(|(_, b, _)| b)
}

/// Fits `T*` as the zero of the least-squares line through the last
/// `tail` samples of `‖u‖_∞^{-p/2}`, then fits rates of `sup_norm`, the mass
/// `∫u²` and every monitor series against `T* - t`.
pub fn detect_and_fit(traj: &Trajectory, opts: &FitOptions) -> BlowupReport {
    if traj.termination != Termination::BlowupDetected {
        return BlowupReport::undetected(format!("trajectory terminated with {:?}", traj.termination));
    }
    let p = traj.last().physics.exponent;
    let sup = &traj.sup_norm;
    let n = sup.len();
    if n < opts.tail.max(3) {
        return BlowupReport::undetected(format!("{n} sup-norm samples, need {}", opts.tail.max(3)));
    }
    let tail_t = &sup.times[n - opts.tail..];
    let tail_v = &sup.values[n - opts.tail..];
    if tail_v.windows(2).any(|w| !(w[1] > w[0])) {
        return BlowupReport::undetected("sup norm not strictly increasing over the fit window".into());
    }
    let y: Vec<f64> = tail_v.iter().map(|v| v.powf(-0.5 * p)).collect();
    let Some((a, b, rms)) = linear_fit(tail_t, &y) else {
        return BlowupReport::undetected("degenerate fit window".into());
    };
    let t_last = *tail_t.last().expect("nonempty");
    if !(b < 0.0) || !(-a / b > t_last) {
        return BlowupReport::undetected(format!("regression slope {b} gives no blowup after t = {t_last}"));
    }
    let t_star = -a / b;
    let mut report = BlowupReport {
        detected: true,
        t_star: Some(t_star),
        fit_window: tail_t.to_vec(),
        fit_residual: rms,
        rate_window: None,
        rate_exponents: BTreeMap::new(),
        notes: Vec::new(),
    };
    let floor = opts.growth_floor * sup.values[0].max(f64::MIN_POSITIVE);
    let Some(start) = sup.values.iter().position(|&v| v >= floor) else {
        report.notes.push(format!("sup norm never grew by {}; no rate window", opts.growth_floor));
        return report;
    };
    let hi = t_star - sup.times[start];
    let lo = opts.gap_factor * (t_star - t_last);
    if !(lo < hi) {
        report.notes.push(format!("empty rate window [{lo}, {hi}]"));
        return report;
    }
    report.rate_window = Some((lo, hi));
    if let Some(e) = rate_exponent(&sup.times, &sup.values, t_star, lo, hi) {
        report.rate_exponents.insert("sup_norm".into(), e);
    }
    let times = traj.times();
    let mass: Vec<f64> = traj.snapshots.iter().map(|s| s.u.dot(&s.u)).collect();
    if let Some(e) = rate_exponent(&times, &mass, t_star, lo, hi) {
        report.rate_exponents.insert("mass".into(), e);
    }
    for s in &traj.series {
        if let Some(e) = rate_exponent(&s.times, &s.values, t_star, lo, hi) {
            report.rate_exponents.insert(s.name.clone(), e);
        }
    }
    report
}

/// `M = ∫u²`, `M' = 2∫u u_t` and `M'' = -2(p+2)E + ∫(p+4)u_t² + p|∇u|² + pm²u²`
/// from their closed forms, with `E` evaluated on each snapshot.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MassSeries {
    pub times: Vec<f64>,
    pub m: Vec<f64>,
    pub m_prime: Vec<f64>,
    pub m_doubleprime: Vec<f64>,
    pub energy: Vec<f64>,
    pub grad_sq: Vec<f64>,
    pub kinetic: Vec<f64>,
    /// First time with `2(p+2)E ≤ (p/2)‖∇u‖₂²`.
    pub t0: Option<f64>,
    pub exponent: f64,
}

pub fn mass_diagnostics(traj: &Trajectory) -> MassSeries {
    let mut out = MassSeries::default();
    let Some(first) = traj.snapshots.first() else {
        return out;
    };
    let p = first.physics.exponent;
    out.exponent = p;
    for s in &traj.snapshots {
        let e = energy(s);
        let g2 = gradient_norm_squared(&s.u);
        let m = s.u.dot(&s.u);
        let k = s.v.dot(&s.v);
        let m2 = s.physics.mass * s.physics.mass;
        out.times.push(s.time);
        out.m.push(m);
        out.m_prime.push(2.0 * s.u.dot(&s.v));
        out.m_doubleprime.push(-2.0 * (p + 2.0) * e + (p + 4.0) * k + p * g2 + p * m2 * m);
        out.energy.push(e);
        out.grad_sq.push(g2);
        out.kinetic.push(k);
        if out.t0.is_none() && 2.0 * (p + 2.0) * e <= 0.5 * p * g2 {
            out.t0 = Some(s.time);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcavityReport {
    /// Samples at or after `t₀` that were checked.
    pub checked: usize,
    /// Violations of `|M'|² ≤ 4/(p+4)·M·M''`.
    pub cauchy_schwarz_violations: usize,
    /// Positive second differences of `M^{-p/4}`.
    pub concavity_violations: usize,
    /// Largest violation of each kind relative to its scale.
    pub worst_cauchy_schwarz: f64,
    pub worst_concavity: f64,
}

/// Checks both inequalities after `t₀`. A Cauchy–Schwarz violation needs
/// `|M'|² - 4/(p+4)·M·M'' > tol·(|M'|² + 4/(p+4)·M·|M''|)`; a concavity
/// violation needs a positive (non-uniform) second difference of
/// `f = M^{-p/4}` exceeding `tol·(|f₋| + 2|f| + |f₊|)`.
pub fn concavity_check(series: &MassSeries, tol: f64) -> ConcavityReport {
    let mut r = ConcavityReport {
        checked: 0,
        cauchy_schwarz_violations: 0,
        concavity_violations: 0,
        worst_cauchy_schwarz: 0.0,
        worst_concavity: 0.0,
    };
    let Some(t0) = series.t0 else {
        return r;
    };
    let p = series.exponent;
    let c = 4.0 / (p + 4.0);
    let start = series.times.iter().position(|&t| t >= t0).unwrap_or(series.times.len());
    for i in start..series.times.len() {
        r.checked += 1;
        let lhs = series.m_prime[i].powi(2);
        let rhs = c * series.m[i] * series.m_doubleprime[i];
        let scale = lhs + (c * series.m[i] * series.m_doubleprime[i]).abs();
        if scale > 0.0 {
            let excess = (lhs - rhs) / scale;
            r.worst_cauchy_schwarz = r.worst_cauchy_schwarz.max(excess);
            if excess > tol {
                r.cauchy_schwarz_violations += 1;
            }
        }
    }
    let f: Vec<f64> = series.m.iter().map(|&m| if m > 0.0 { m.powf(-0.25 * p) } else { f64::INFINITY }).collect();
    for i in start.max(1)..series.times.len().saturating_sub(1) {
        let (hm, hp) = (series.times[i] - series.times[i - 1], series.times[i + 1] - series.times[i]);
        if !(f[i - 1].is_finite() && f[i].is_finite() && f[i + 1].is_finite()) {
            continue;
        }
        let second = (hm * f[i + 1] + hp * f[i - 1] - (hm + hp) * f[i]) / (0.5 * (hm + hp));
        let scale = f[i - 1].abs() + 2.0 * f[i].abs() + f[i + 1].abs();
        if scale > 0.0 {
            let excess = second / scale;
            r.worst_concavity = r.worst_concavity.max(excess);
            if excess > tol {
                r.concavity_violations += 1;
            }
        }
    }
    r
}

/// The cutoff `φ(r)`: 1 on `r ≤ 1`, `1 - 2(r-1)²` on `[1, 3/2]`, `2(2-r)²` on
/// `[3/2, 2]`, 0 beyond. Returns `(φ, φ', φ'')`.
pub fn mass_cutoff(r: f64) -> (f64, f64, f64) {
    if r <= 1.0 {
        (1.0, 0.0, 0.0)
    } else if r <= 1.5 {
        (1.0 - 2.0 * (r - 1.0).powi(2), -4.0 * (r - 1.0), -4.0)
    } else if r <= 2.0 {
        (2.0 * (2.0 - r).powi(2), -4.0 * (2.0 - r), 4.0)
    } else {
        (0.0, 0.0, 0.0)
    }
}

/// Truncated mass `M(t) = ∫φ(|x - c|/(R + t))u²` with its second derivative
/// evaluated two ways.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TruncatedMass {
    pub times: Vec<f64>,
    pub m: Vec<f64>,
    pub m_prime: Vec<f64>,
    /// Right-hand side of the second-derivative identity, term by term.
    pub m_doubleprime: Vec<f64>,
    /// Second differences of `m` at interior samples (first and last are `None`).
    pub m_doubleprime_discrete: Vec<Option<f64>>,
    /// `max |discrete - identity| / max |identity|` over interior samples.
    pub gap: f64,
}

/// With `ρ = R + t`, `y = (x - c)/ρ` and `ψ = φ(|y|)`:
///
/// `M'' = -2(p+2)E + ∫(4φ u_t² + p|∇_{t,x}u|² + pm²u²) + ∫2φᶜ(|∇_{t,x}u|² + m²u² - coupling·|u|^{p+2})`
/// `      + ∫ψ_tt u² + 4ψ_t u u_t - 2u ∇ψ·∇u`,
///
/// where `ψ_t = -|y|φ'/ρ`, `ψ_tt = (2|y|φ' + |y|²φ'')/ρ²` and `∇ψ = φ' ŷ/ρ`.
/// For `m = 0` this is the classical cutoff virial identity.
pub fn truncated_mass(traj: &Trajectory, radius: f64, center: &Point) -> Result<TruncatedMass> {
    let Some(first) = traj.snapshots.first() else {
        return Ok(TruncatedMass::default());
    };
    let g = *first.grid();
    let t_max = traj.snapshots.iter().map(|s| s.time.abs()).fold(0.0, f64::max);
    let reach = 2.0 * (radius + t_max) + 3.0 * g.spacing();
    if !(radius > 0.0) || reach > 0.5 * g.box_length() {
        return domain(format!(
            "cutoff support 2(R + t_max) = {} plus 3 cells exceeds half the box {}",
            2.0 * (radius + t_max),
            0.5 * g.box_length()
        ));
    }
    let mut out = TruncatedMass::default();
    let dim = g.dim();
    for s in &traj.snapshots {
        let rho = radius + s.time.abs();
        let ph = s.physics;
        let p = ph.exponent;
        let m2 = ph.mass * ph.mass;
        let grad = transform_for(&g).gradient(&s.u)?;
        let e = energy(s);
        let (mut m, mut mp, mut mpp) = (0.0, 0.0, 0.0);
        for i in 0..g.len() {
            let x = g.displacement(i, center);
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            let y = r / rho;
            let (phi, dphi, ddphi) = mass_cutoff(y);
            let (u, v) = (s.u.values()[i], s.v.values()[i]);
            let gg: f64 = grad.iter().map(|f| f.values()[i].powi(2)).sum();
            let ur = if r > 0.0 { (0..dim).map(|a| x[a] / r * grad[a].values()[i]).sum::<f64>() } else { 0.0 };
            let psi_t = -y * dphi / rho;
            let psi_tt = (2.0 * y * dphi + y * y * ddphi) / (rho * rho);
            let st = v * v + gg;
            m += phi * u * u;
            mp += psi_t * u * u + 2.0 * phi * u * v;
            mpp += 4.0 * phi * v * v + p * st + p * m2 * u * u
                + 2.0 * (1.0 - phi) * (st + m2 * u * u - ph.potential(u))
                + psi_tt * u * u
                + 4.0 * psi_t * u * v
                - 2.0 * u * dphi / rho * ur;
        }
        let dv = g.cell_volume();
        out.times.push(s.time);
        out.m.push(m * dv);
        out.m_prime.push(mp * dv);
        out.m_doubleprime.push(-2.0 * (p + 2.0) * e + mpp * dv);
    }
    let n = out.times.len();
    let mut worst: f64 = 0.0;
    let scale = out.m_doubleprime.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    out.m_doubleprime_discrete = vec![None; n];
    for i in 1..n.saturating_sub(1) {
        let (hm, hp) = (out.times[i] - out.times[i - 1], out.times[i + 1] - out.times[i]);
        let dd = 2.0 * ((out.m[i + 1] - out.m[i]) / hp - (out.m[i] - out.m[i - 1]) / hm) / (hm + hp);
        out.m_doubleprime_discrete[i] = Some(dd);
        worst = worst.max((dd - out.m_doubleprime[i]).abs());
    }
    out.gap = if scale > 0.0 { worst / scale } else { 0.0 };
    Ok(out)
}

/// `‖u‖_{Ḣ^{s_c}} + ‖u_t‖_{H^{s_c-1}}` per snapshot, the second norm with
/// `⟨ξ⟩₁` and the zero mode removed.
pub fn critical_norm_series(traj: &Trajectory) -> Result<DiagnosticSeries> {
    let mut out = DiagnosticSeries::new("critical_norm");
    let Some(first) = traj.snapshots.first() else {
        return Ok(out);
    };
    let cp = critical_exponent(first.grid().dim(), first.physics.exponent)?;
    out.regime = Some(cp.regime);
    out = out.with_meta("s_c", cp.s_c);
    for s in &traj.snapshots {
        let mean = s.v.values().iter().sum::<f64>() / s.v.values().len() as f64;
        let v0 = s.v.map(|x| x - mean)?;
        out.push(s.time, sobolev_norm(&s.u, cp.s_c, true, 0.0) + sobolev_norm(&v0, cp.s_c - 1.0, false, 1.0));
    }
    Ok(out)
}

/// `(T* - t)^{-2s_c} ∫_{|x-x₀| ≤ T*-t} u² + (T* - t)²|∇_{t,x}u|²` for every
/// snapshot before `t_star` whose ball fits in half the box.
pub fn lower_bound_check(traj: &Trajectory, t_star: f64, x0: &Point) -> Result<DiagnosticSeries> {
    let mut out = DiagnosticSeries::new("local_lower_bound").with_meta("t_star", t_star).with_meta("x0", format!("{x0:?}"));
    let Some(first) = traj.snapshots.first() else {
        return Ok(out);
    };
    let g = *first.grid();
    let cp = critical_exponent(g.dim(), first.physics.exponent)?;
    out.regime = Some(cp.regime);
    for s in &traj.snapshots {
        let tau = t_star - s.time;
        if !(tau > 0.0) || tau > 0.5 * g.box_length() {
            continue;
        }
        let grad = transform_for(&g).gradient(&s.u)?;
        let mut acc = 0.0;
        for i in 0..g.len() {
            if g.distance(i, x0) <= tau {
                let gg: f64 = grad.iter().map(|f| f.values()[i].powi(2)).sum();
                let (u, v) = (s.u.values()[i], s.v.values()[i]);
                acc += tau.powf(-2.0 * cp.s_c) * u * u + tau * tau * (v * v + gg);
            }
        }
        out.push(s.time, acc * g.cell_volume());
    }
    Ok(out)
}

/// Smallest 1-Lipschitz majorant-from-below: `σ(x) ← min_y σ(y) + |x - y|`
/// over the periodic neighbour graph (axis and diagonal steps), iterated to a
/// fixed point. Along grid axes the result is exactly 1-Lipschitz.
pub fn lipschitz_envelope(grid: &crate::grid::GridSpec, sigma: &mut [f64]) {
    let d = grid.dim();
    let n = grid.n() as i64;
    let h = grid.spacing();
    let mut offsets: Vec<([i64; 3], f64)> = Vec::new();
    let range = |a: usize| if a < d { -1..=1 } else { 0..=0 };
    for i in range(0) {
        for j in range(1) {
            for k in range(2) {
                if (i, j, k) != (0, 0, 0) {
                    offsets.push(([i, j, k], h * ((i * i + j * j + k * k) as f64).sqrt()));
                }
            }
        }
    }
    let relax = |sigma: &mut [f64], flat: usize| -> bool {
        let idx = grid.unravel(flat);
        let mut best = sigma[flat];
        for (off, dist) in &offsets {
            let mut j = [0usize; 3];
            for a in 0..d {
                j[a] = (idx[a] as i64 + off[a]).rem_euclid(n) as usize;
            }
            best = best.min(sigma[grid.ravel(j)] + dist);
        }
        if best < sigma[flat] {
            sigma[flat] = best;
            true
        } else {
            false
        }
    };
    loop {
        let mut changed = false;
        for flat in 0..sigma.len() {
            changed |= relax(sigma, flat);
        }
        for flat in (0..sigma.len()).rev() {
            changed |= relax(sigma, flat);
        }
        if !changed {
            break;
        }
    }
}

/// First time `|u(t, x)|` reaches `threshold` at each grid point (linear
/// interpolation between snapshots), projected onto 1-Lipschitz functions.
pub fn blowup_surface_estimate(traj: &Trajectory, threshold: f64) -> Result<Field> {
    let Some(first) = traj.snapshots.first() else {
        return domain("empty trajectory");
    };
    let g = *first.grid();
    let mut sigma = vec![f64::INFINITY; g.len()];
    for (i, slot) in sigma.iter_mut().enumerate() {
        let mut prev: Option<(f64, f64)> = None;
        for s in &traj.snapshots {
            let a = s.u.values()[i].abs();
            if a >= threshold {
                *slot = match prev {
                    Some((t0, a0)) if a > a0 => t0 + (threshold - a0) / (a - a0) * (s.time - t0),
                    _ => s.time,
                };
                break;
            }
            prev = Some((s.time, a));
        }
    }
    if sigma.iter().all(|v| v.is_infinite()) {
        return domain(format!("|u| never reached {threshold}"));
    }
    lipschitz_envelope(&g, &mut sigma);
    Field::new(g, sigma)
}

/// `10 × natural_time_scale`: the horizon within which data of non-positive
/// energy is expected to blow up in scenario checks.
pub fn energy_scale_horizon(state: &State) -> f64 {
    10.0 * crate::solver::natural_time_scale(state)
}

/// Relative gap between closed-form `M'` and the centred difference of `M`.
pub fn mass_derivative_gap(series: &MassSeries) -> f64 {
    let mut worst: f64 = 0.0;
    let scale = series.m_prime.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for i in 1..series.times.len().saturating_sub(1) {
        let c = (series.m[i + 1] - series.m[i - 1]) / (series.times[i + 1] - series.times[i - 1]);
        worst = worst.max((c - series.m_prime[i]).abs());
    }
    if scale > 0.0 {
        worst / scale
    } else {
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridSpec, Physics};
    use crate::solver::{evolve, SolverConfig};

    fn constant_blowup(p: f64, a: f64, dt: f64) -> Trajectory {
        let g = GridSpec::new(1, 8, 1.0).unwrap();
        let s = State::new(Field::constant(g, a), Field::zeros(g), 0.0, Physics::focusing(0.0, p)).unwrap();
        let mut cfg = SolverConfig::new(dt, 10.0);
        cfg.blowup_threshold = 1e6;
        cfg.snapshot_stride = 10;
        evolve(&s, &cfg, &[]).unwrap()
    }

    #[test]
    fn zero_run_is_not_detected() {
        let g = GridSpec::new(2, 16, 16.0).unwrap();
        let s = State::zero(g, Physics::focusing(0.0, 2.0)).unwrap();
        let tr = evolve(&s, &SolverConfig::new(0.1, 1.0), &[]).unwrap();
        let r = detect_and_fit(&tr, &FitOptions::default());
        assert!(!r.detected && r.t_star.is_none());
        let m = mass_diagnostics(&tr);
        assert!(m.m.iter().chain(&m.m_prime).chain(&m.m_doubleprime).all(|&v| v == 0.0));
        let c = concavity_check(&m, 1e-6);
        assert_eq!(c.cauchy_schwarz_violations + c.concavity_violations, 0);
        assert!(critical_norm_series(&tr).unwrap().values.iter().all(|&v| v == 0.0));
        let tm = truncated_mass(&tr, 0.1, &[0.0; 3]).unwrap();
        assert!(tm.m.iter().all(|&v| v == 0.0));
        assert!(blowup_surface_estimate(&tr, 1.0).is_err());
    }

    #[test]
    fn cubic_fit_matches_lifespan() {
        let tr = constant_blowup(2.0, 1.0, 2e-3);
        let r = detect_and_fit(&tr, &FitOptions::default());
        assert!(r.detected);
        let t = r.t_star.unwrap();
        assert!(t > tr.last().time);
        assert!((t - 1.854_074_677_301_372).abs() < 1e-3, "{t}");
        let e = r.rate_exponents["sup_norm"];
        assert!((e + 1.0).abs() < 0.01, "{e}");
    }

    #[test]
    fn mass_closed_forms_match_constant_state() {
        // Near blowup the Cauchy–Schwarz margin is carried by E < 0 alone, so the
        // splitting's O(dt²) energy drift must stay below the tolerance.
        let tr = constant_blowup(3.0, 0.8, 2.5e-4);
        let m = mass_diagnostics(&tr);
        for (i, s) in tr.snapshots.iter().enumerate() {
            let (a, b) = (s.u.values()[0], s.v.values()[0]);
            let vol = s.grid().volume();
            assert!((m.m[i] - vol * a * a).abs() <= 1e-12 * m.m[i]);
            assert!((m.m_prime[i] - 2.0 * vol * a * b).abs() <= 1e-12 * m.m_prime[i].abs().max(1e-300));
            // u'' = u^{p+1}: M'' = 2V(b² + a^{p+2}).
            let mpp = 2.0 * vol * (b * b + a.powf(5.0));
            assert!((m.m_doubleprime[i] - mpp).abs() <= 1e-9 * mpp);
        }
        assert_eq!(m.t0, Some(0.0));
        let c = concavity_check(&m, 1e-6);
        assert_eq!(c.cauchy_schwarz_violations, 0);
        assert_eq!(c.concavity_violations, 0);
    }

    #[test]
    fn cutoff_is_c1() {
        for r in [1.0, 1.5, 2.0] {
            let (a, da, _) = mass_cutoff(r - 1e-9);
            let (b, db, _) = mass_cutoff(r + 1e-9);
            assert!((a - b).abs() < 1e-8 && (da - db).abs() < 1e-7, "r = {r}");
        }
    }

    #[test]
    fn envelope_is_idempotent_and_lipschitz() {
        let g = GridSpec::new(2, 16, 4.0).unwrap();
        let mut s = vec![f64::INFINITY; g.len()];
        s[g.ravel([3, 4, 0])] = 0.5;
        s[g.ravel([12, 10, 0])] = 0.1;
        s[g.ravel([8, 8, 0])] = 7.0;
        lipschitz_envelope(&g, &mut s);
        let once = s.clone();
        lipschitz_envelope(&g, &mut s);
        assert_eq!(s, once);
        let h = g.spacing();
        for i in 0..g.len() {
            let idx = g.unravel(i);
            for a in 0..2 {
                let mut j = idx;
                j[a] = (j[a] + 1) % g.n();
                assert!((s[i] - s[g.ravel(j)]).abs() <= h * (1.0 + 1e-12));
            }
        }
        assert!(s[g.ravel([8, 8, 0])] < 7.0);
    }

    #[test]
    fn constant_surface_is_flat() {
        let tr = constant_blowup(2.0, 1.0, 2e-3);
        let sigma = blowup_surface_estimate(&tr, 1e3).unwrap();
        let v = sigma.values();
        assert!(v.iter().all(|&x| x == v[0]));
        assert!(v[0] < 1.8541 && v[0] > 1.85);
    }
}
