//! Bubble extraction for bounded families of fields.
//!
//! A family `{f_n}` is decomposed as `f_n = Σ_j φʲ(· - x_nʲ) + r_n`. Each
//! profile is found by locating a frequency band carrying a fixed share of
//! `‖f_n‖_{p+2}`, centring every member at the peak of that band, and taking a
//! windowed average of the centred members. The average stands in for a weak
//! limit: bubbles whose distance from the centre grows with `n` are cut off by
//! the window and so do not leak into the profile.
//!
//! Profiles are stored centred at the box origin; `roll` places them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::grid::{bump, dyadic_range, lp_project, LpMode};
use crate::grid::{Field, GridSpec, Point};
use crate::norms::{lq, sobolev_norm, CriticalParams};

/// Window radius floor in cells.
pub const WINDOW_FLOOR_CELLS: f64 = 8.0;
/// Peaks below this fraction of the largest one are ignored when measuring
/// inter-centre distances.
const PEAK_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionFamily {
    members: Vec<Field>,
}

impl FunctionFamily {
    pub fn new(members: Vec<Field>) -> Result<Self> {
        let first = members.first().ok_or_else(|| Error::Domain("empty family".into()))?;
        for f in &members[1..] {
            first.grid().check_same(f.grid())?;
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[Field] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn grid(&self) -> &GridSpec {
        self.members[0].grid()
    }

    /// Translate every member by the same whole-cell shift.
    pub fn translated(&self, shift: [i64; 3]) -> Self {
        Self { members: self.members.iter().map(|f| f.roll(shift)).collect() }
    }
}

fn check_params(grid: &GridSpec, params: &CriticalParams) -> Result<()> {
    if params.dim != grid.dim() {
        return domain(format!("critical parameters are for d = {}, grid has d = {}", params.dim, grid.dim()));
    }
    if !(0.0..1.0).contains(&params.s_c) {
        return domain(format!("s_c = {} outside [0, 1): extraction needs 4/d <= p < 4/(d-2)", params.s_c));
    }
    Ok(())
}

/// `(‖f‖²_{Ḣ^{s_c}} + ‖f‖²_{Ḣ¹})^{1/2}`.
pub fn sobolev_level(f: &Field, params: &CriticalParams) -> f64 {
    (sobolev_norm(f, params.s_c, true, 0.0).powi(2) + sobolev_norm(f, 1.0, true, 0.0).powi(2)).sqrt()
}

fn origin_index(grid: &GridSpec) -> [i64; 3] {
    let mut o = [0i64; 3];
    for a in o.iter_mut().take(grid.dim()) {
        *a = (grid.n() / 2) as i64;
    }
    o
}

fn index_of(grid: &GridSpec, flat: usize) -> [i64; 3] {
    let idx = grid.unravel(flat);
    [idx[0] as i64, idx[1] as i64, idx[2] as i64]
}

/// Shift carrying grid index `from` onto grid index `to`.
fn shift_between(from: [i64; 3], to: [i64; 3]) -> [i64; 3] {
    [to[0] - from[0], to[1] - from[1], to[2] - from[2]]
}

/// `φ(· - x)` for a profile stored at the origin and a centre given by flat index.
pub fn place(profile: &Field, center: usize) -> Field {
    let g = profile.grid();
    profile.roll(shift_between(origin_index(g), index_of(g, center)))
}

fn align(f: &Field, center: usize) -> Field {
    let g = f.grid();
    f.roll(shift_between(index_of(g, center), origin_index(g)))
}

/// Local maxima of `|f|` above `PEAK_FRACTION·max|f|`, strongest first, with
/// peaks inside `suppress` of a stronger one discarded.
pub fn significant_peaks(f: &Field, suppress: f64) -> Vec<usize> {
    let g = *f.grid();
    let vals = f.values();
    let top = f.max_abs();
    if top == 0.0 {
        return Vec::new();
    }
    let n = g.n() as i64;
    let d = g.dim();
    let mut candidates = Vec::new();
    for (i, v) in vals.iter().enumerate() {
        let a = v.abs();
        if a < PEAK_FRACTION * top {
            continue;
        }
        let idx = index_of(&g, i);
        let mut is_max = true;
        let steps = 3usize.pow(d as u32);
        for s in 0..steps {
            let mut j = [0usize; 3];
            let mut rem = s;
            for ax in 0..d {
                let off = (rem % 3) as i64 - 1;
                rem /= 3;
                j[ax] = (idx[ax] + off).rem_euclid(n) as usize;
            }
            if vals[g.ravel(j)].abs() > a {
                is_max = false;
                break;
            }
        }
        if is_max {
            candidates.push(i);
        }
    }
    candidates.sort_by(|&a, &b| vals[b].abs().total_cmp(&vals[a].abs()).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for c in candidates {
        let x = g.position(c);
        if kept.iter().all(|&k| g.distance(k, &x) > suppress) {
            kept.push(c);
        }
    }
    kept
}

fn min_pairwise(grid: &GridSpec, centers: &[usize]) -> f64 {
    let mut best = f64::INFINITY;
    for (a, &i) in centers.iter().enumerate() {
        let x = grid.position(i);
        for &j in &centers[a + 1..] {
            best = best.min(grid.distance(j, &x));
        }
    }
    best
}

/// Quarter of the smallest peak distance in the last member, floored at
/// `WINDOW_FLOOR_CELLS` cells and capped at `L/4`. A single peak gives `L/4`.
pub fn window_radius(family: &FunctionFamily) -> f64 {
    let g = family.grid();
    let h = g.spacing();
    let cap = 0.25 * g.box_length();
    let last = &family.members()[family.len() - 1];
    let peaks = significant_peaks(last, WINDOW_FLOOR_CELLS * h);
    let d = min_pairwise(g, &peaks);
    if d.is_finite() {
        (0.25 * d).max(WINDOW_FLOOR_CELLS * h).min(cap)
    } else {
        cap
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractOptions {
    /// Extraction stops when `min_n ‖f_n‖_{p+2}` is at or below this.
    pub floor: f64,
    /// Overrides the peak-distance rule when set.
    pub window_radius: Option<f64>,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self { floor: 1e-10, window_radius: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionStats {
    /// `min_n ‖f_n‖_{p+2}`.
    pub epsilon: f64,
    /// `max_n (‖f_n‖²_{Ḣ^{s_c}} + ‖f_n‖²_{Ḣ¹})^{1/2}`.
    pub sobolev_level: f64,
    /// `(M/ε)^{(p+2)/(2p(1-s_c))}`.
    pub k: f64,
    /// Dyadic band searched, after clipping to resolvable frequencies.
    pub band: (f64, f64),
    /// The band `[K^{-p}, K²]` missed the grid entirely and the full resolvable range was used.
    pub band_fallback: bool,
    /// Per-member pigeonhole choice `N_n`.
    pub frequencies: Vec<f64>,
    /// Frequency shared by the family, used for the centres.
    pub common_frequency: f64,
    /// `‖P_N f_n‖_{p+2}` at the common frequency.
    pub band_norms: Vec<f64>,
    /// Members meeting `‖P_{N_n} f_n‖_{p+2} ≥ ε / max(log K, 1)`.
    pub pigeonhole_hits: usize,
    /// `min_n |P_N f_n(x_n)|` against the proof's bound `(ε² M^{-1-pd/(2(p+2))})^{(p+2)/(p(1-s_c))}`.
    pub peak_value: f64,
    pub peak_bound: f64,
    pub window_radius: f64,
    pub phi_h1_sq: f64,
    pub phi_hsc_sq: f64,
    /// `‖φ‖_{p+2}^{p+2}`.
    pub phi_lp_pow: f64,
    /// Measured exponents `α` in `‖φ‖² = ε²(ε/M)^α` (Ḣ¹, Ḣ^{s_c}) and
    /// `‖φ‖_{p+2}^{p+2} = ε^{p+2}(ε/M)^α`; `None` when `ε = M`.
    pub alphas: [Option<f64>; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub profile: Field,
    /// Flat grid index of `x_n` per member.
    pub centers: Vec<usize>,
    pub stats: ExtractionStats,
}

pub fn inverse_gn_extract(family: &FunctionFamily, params: &CriticalParams, opts: &ExtractOptions) -> Result<Extraction> {
    let g = *family.grid();
    check_params(&g, params)?;
    let p = params.p;
    let q = p + 2.0;
    let members = family.members();
    let epsilon = members.iter().map(|f| lq(f, q)).fold(f64::INFINITY, f64::min);
    if !(epsilon > opts.floor) {
        return Err(Error::ExtractionExhausted { epsilon, floor: opts.floor });
    }
    let m_level = members.iter().map(|f| sobolev_level(f, params)).fold(0.0, f64::max);
    let k = (m_level / epsilon).powf(q / (2.0 * p * (1.0 - params.s_c)));

    let resolvable = dyadic_range(&g);
    let (lo, hi) = (k.powf(-p), k * k);
    let mut band: Vec<f64> = resolvable.iter().copied().filter(|&n| n >= lo && n <= hi).collect();
    let band_fallback = band.is_empty();
    if band_fallback {
        band = resolvable.clone();
    }
    if band.is_empty() {
        return domain("grid resolves no dyadic frequency");
    }

    let log_k = k.ln().max(1.0);
    // Per-member pigeonhole, then one common frequency for the family: the
    // most frequent choice, ties to the larger summed band norm.
    let mut per_member = Vec::with_capacity(members.len());
    for f in members {
        let norms: Vec<f64> = band.iter().map(|&n| Ok(lq(&lp_project(f, n, LpMode::Band)?, q))).collect::<Result<_>>()?;
        let best = (0..band.len()).fold(0, |b, i| if norms[i] > norms[b] { i } else { b });
        per_member.push((best, norms));
    }
    let votes = |i: usize| per_member.iter().filter(|(b, _)| *b == i).count();
    let total = |i: usize| per_member.iter().map(|(_, n)| n[i]).sum::<f64>();
    let common = (0..band.len())
        .max_by(|&a, &b| votes(a).cmp(&votes(b)).then(total(a).total_cmp(&total(b))))
        .expect("band is nonempty");
    let hits = per_member.iter().filter(|(b, n)| n[*b] >= epsilon / log_k).count();
    let frequencies: Vec<f64> = per_member.iter().map(|(b, _)| band[*b]).collect();
    let band_norms: Vec<f64> = per_member.iter().map(|(_, n)| n[common]).collect();
    let mut centers = Vec::with_capacity(members.len());
    let mut peak_value = f64::INFINITY;
    for f in members {
        let pf = lp_project(f, band[common], LpMode::Band)?;
        let c = pf.argmax_abs();
        peak_value = peak_value.min(pf.values()[c].abs());
        centers.push(c);
    }
    let d = params.dim as f64;
    let peak_bound = (epsilon * epsilon * m_level.powf(-1.0 - p * d / (2.0 * q))).powf(q / (p * (1.0 - params.s_c)));

    let radius = match opts.window_radius {
        Some(r) if r > 0.0 && r <= 0.25 * g.box_length() => r,
        Some(r) => return domain(format!("window radius {r} must lie in (0, L/4]")),
        None => window_radius(family),
    };
    let mut acc = vec![0.0; g.len()];
    for (f, &c) in members.iter().zip(&centers) {
        for (a, v) in acc.iter_mut().zip(align(f, c).values()) {
            *a += v;
        }
    }
    let scale = 1.0 / members.len() as f64;
    let origin = [0.0; 3];
    let profile = Field::new(g, acc.iter().enumerate().map(|(i, a)| a * scale * bump(g.distance(i, &origin) / radius)).collect())?;

    let phi_h1_sq = sobolev_norm(&profile, 1.0, true, 0.0).powi(2);
    let phi_hsc_sq = sobolev_norm(&profile, params.s_c, true, 0.0).powi(2);
    let phi_lp_pow = lq(&profile, q).powf(q);
    let ratio = epsilon / m_level;
    let alpha = |value: f64, base: f64| {
        if ratio == 1.0 || !(value > 0.0) {
            None
        } else {
            Some((value / base).ln() / ratio.ln())
        }
    };
    let alphas = [
        alpha(phi_h1_sq, epsilon * epsilon),
        alpha(phi_hsc_sq, epsilon * epsilon),
        alpha(phi_lp_pow, epsilon.powf(q)),
    ];
    Ok(Extraction {
        profile,
        centers,
        stats: ExtractionStats {
            epsilon,
            sobolev_level: m_level,
            k,
            band: (band[0], band[band.len() - 1]),
            band_fallback,
            frequencies,
            common_frequency: band[common],
            band_norms,
            pigeonhole_hits: hits,
            peak_value,
            peak_bound,
            window_radius: radius,
            phi_h1_sq,
            phi_hsc_sq,
            phi_lp_pow,
            alphas,
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bubble {
    pub profile: Field,
    pub centers: Vec<usize>,
}

impl Bubble {
    pub fn center_points(&self) -> Vec<Point> {
        let g = self.profile.grid();
        self.centers.iter().map(|&c| g.position(c)).collect()
    }
}

/// `ε_J` and `M_J` of the residual before extraction `J + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub epsilon: f64,
    pub sobolev_level: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub bubbles: Vec<Bubble>,
    pub residuals: Vec<Field>,
    /// One entry per residual `r^0, …, r^J`.
    pub levels: Vec<Level>,
    pub stats: Vec<ExtractionStats>,
}

impl Decomposition {
    /// Decomposition with given profiles and centres; residuals by subtraction.
    pub fn from_parts(family: &FunctionFamily, bubbles: Vec<Bubble>, params: &CriticalParams) -> Result<Self> {
        let mut residuals = family.members().to_vec();
        let mut levels = vec![level_of(&residuals, params)];
        for b in &bubbles {
            if b.centers.len() != family.len() {
                return domain(format!("bubble has {} centres for {} members", b.centers.len(), family.len()));
            }
            family.grid().check_same(b.profile.grid())?;
            residuals = subtract(&residuals, b)?;
            levels.push(level_of(&residuals, params));
        }
        Ok(Self { bubbles, residuals, levels, stats: Vec::new() })
    }

    /// `Σ_j φʲ(· - x_nʲ) + r_n`.
    pub fn reconstruct(&self, n: usize) -> Result<Field> {
        let mut f = self.residuals[n].clone();
        for b in &self.bubbles {
            f = f.axpy(1.0, &place(&b.profile, b.centers[n]))?;
        }
        Ok(f)
    }

    /// Stopping level `J*`.
    pub fn depth(&self) -> usize {
        self.bubbles.len()
    }
}

fn subtract(residuals: &[Field], b: &Bubble) -> Result<Vec<Field>> {
    residuals.iter().zip(&b.centers).map(|(r, &c)| r.sub(&place(&b.profile, c))).collect()
}

fn level_of(residuals: &[Field], params: &CriticalParams) -> Level {
    let q = params.p + 2.0;
    Level {
        epsilon: residuals.iter().map(|r| lq(r, q)).fold(f64::INFINITY, f64::min),
        sobolev_level: residuals.iter().map(|r| sobolev_level(r, params)).fold(0.0, f64::max),
    }
}

/// Extract until `max_n ‖r_n‖_{p+2} ≤ tol`, `j_max` bubbles, or exhaustion
/// (`min_n ‖r_n‖_{p+2} ≤ tol`). The window radius is fixed from the input
/// family so every level uses the same window.
pub fn bubble_decompose(family: &FunctionFamily, params: &CriticalParams, j_max: usize, tol: f64) -> Result<Decomposition> {
    check_params(family.grid(), params)?;
    if !(tol >= 0.0) {
        return domain(format!("tolerance {tol} must be nonnegative"));
    }
    let q = params.p + 2.0;
    let opts = ExtractOptions { floor: tol, window_radius: Some(window_radius(family)) };
    let mut residuals = family.members().to_vec();
    let mut levels = vec![level_of(&residuals, params)];
    let mut bubbles = Vec::new();
    let mut stats = Vec::new();
    while bubbles.len() < j_max {
        let worst = residuals.iter().map(|r| lq(r, q)).fold(0.0, f64::max);
        if worst <= tol {
            break;
        }
        let current = FunctionFamily { members: residuals.clone() };
        let ext = match inverse_gn_extract(&current, params, &opts) {
            Ok(e) => e,
            Err(Error::ExtractionExhausted { .. }) => break,
            Err(e) => return Err(e),
        };
        let bubble = Bubble { profile: ext.profile, centers: ext.centers };
        let next = subtract(&residuals, &bubble)?;
        let level = level_of(&next, params);
        let prev = levels[levels.len() - 1].epsilon;
        if level.epsilon >= prev {
            return Err(Error::Stagnation { level: bubbles.len() + 1, previous: prev, current: level.epsilon });
        }
        residuals = next;
        levels.push(level);
        stats.push(ext.stats);
        bubbles.push(bubble);
    }
    Ok(Decomposition { bubbles, residuals, levels, stats })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecouplingGaps {
    /// Member the gaps are evaluated on (the last one).
    pub member: usize,
    pub h1: f64,
    pub hsc: f64,
    pub lp: f64,
    /// Minimum pairwise centre distance per member; `∞` with fewer than two bubbles.
    pub min_separation: Vec<f64>,
    pub separation_nondecreasing: bool,
}

impl DecouplingGaps {
    pub fn max_gap(&self) -> f64 {
        self.h1.max(self.hsc).max(self.lp)
    }
}

fn relative(total: f64, parts: f64) -> f64 {
    if total == 0.0 {
        if parts == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (total - parts).abs() / total
    }
}

pub fn decoupling_audit(dec: &Decomposition, family: &FunctionFamily, params: &CriticalParams) -> Result<DecouplingGaps> {
    if dec.residuals.len() != family.len() {
        return domain("decomposition does not match the family");
    }
    let n = family.len() - 1;
    let f = &family.members()[n];
    let r = &dec.residuals[n];
    let q = params.p + 2.0;
    let hom = |g: &Field, s: f64| sobolev_norm(g, s, true, 0.0).powi(2);
    let gap = |norm: &dyn Fn(&Field) -> f64| {
        let parts: f64 = dec.bubbles.iter().map(|b| norm(&b.profile)).sum::<f64>() + norm(r);
        relative(norm(f), parts)
    };
    let h1 = gap(&|g| hom(g, 1.0));
    let hsc = gap(&|g| hom(g, params.s_c));
    let lp = gap(&|g| lq(g, q).powf(q));

    let grid = family.grid();
    let min_separation: Vec<f64> = (0..family.len())
        .map(|m| min_pairwise(grid, &dec.bubbles.iter().map(|b| b.centers[m]).collect::<Vec<_>>()))
        .collect();
    // Rounding centres to cells can move a distance by up to one cell diagonal.
    let slack = grid.spacing() * (grid.dim() as f64).sqrt();
    let separation_nondecreasing = min_separation.windows(2).all(|w| w[1] + slack >= w[0] || w[0].is_infinite());
    Ok(DecouplingGaps { member: n, h1, hsc, lp, min_separation, separation_nondecreasing })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticBubble {
    pub amplitude: f64,
    /// Gaussian width in length units.
    pub width: f64,
}

/// Family of Gaussian bubbles on a regular polygon of side `separations[n]`
/// (length units), with seeded random rotation and on-grid shift per member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub bubbles: Vec<SyntheticBubble>,
    pub separations: Vec<f64>,
    /// Pointwise uniform noise amplitude relative to the largest bubble amplitude.
    #[serde(default)]
    pub noise: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFamily {
    pub family: FunctionFamily,
    /// Exact profiles, centred at the origin.
    pub profiles: Vec<Field>,
    /// Flat centre index per member, per bubble.
    pub centers: Vec<Vec<usize>>,
}

pub fn gaussian_profile(grid: &GridSpec, amplitude: f64, width: f64) -> Result<Field> {
    let origin = [0.0; 3];
    Field::new(
        *grid,
        (0..grid.len()).map(|i| amplitude * (-grid.distance(i, &origin).powi(2) / (2.0 * width * width)).exp()).collect(),
    )
}

pub fn synthetic_family(grid: &GridSpec, spec: &SyntheticSpec) -> Result<SyntheticFamily> {
    if spec.bubbles.is_empty() || spec.separations.is_empty() {
        return domain("synthetic family needs at least one bubble and one member");
    }
    if grid.dim() < 2 && spec.bubbles.len() > 2 {
        return domain("more than two bubbles need d >= 2");
    }
    let profiles: Vec<Field> =
        spec.bubbles.iter().map(|b| gaussian_profile(grid, b.amplitude, b.width)).collect::<Result<_>>()?;
    let amp = spec.bubbles.iter().map(|b| b.amplitude.abs()).fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let j = spec.bubbles.len();
    let half = 0.5 * grid.box_length();
    let mut members = Vec::with_capacity(spec.separations.len());
    let mut centers = Vec::with_capacity(spec.separations.len());
    for &s in &spec.separations {
        let radius = if j > 1 { s / (2.0 * (std::f64::consts::PI / j as f64).sin()) } else { 0.0 };
        let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let mut shift = [0.0; 3];
        for a in shift.iter_mut().take(grid.dim()) {
            *a = rng.random_range(-half..half);
        }
        let mut f = Field::zeros(*grid);
        let mut cs = Vec::with_capacity(j);
        for (b, prof) in profiles.iter().enumerate() {
            let ang = theta + std::f64::consts::TAU * b as f64 / j as f64;
            let mut x = shift;
            x[0] += radius * ang.cos();
            if grid.dim() > 1 {
                x[1] += radius * ang.sin();
            }
            let c = grid.nearest(&x);
            f = f.axpy(1.0, &place(prof, c))?;
            cs.push(c);
        }
        if spec.noise > 0.0 {
            let noise: Vec<f64> = (0..grid.len()).map(|_| spec.noise * amp * rng.random_range(-1.0..1.0)).collect();
            f = f.axpy(1.0, &Field::new(*grid, noise)?)?;
        }
        members.push(f);
        centers.push(cs);
    }
    Ok(SyntheticFamily { family: FunctionFamily::new(members)?, profiles, centers })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::critical_exponent;

    fn h1_error(a: &Field, b: &Field) -> f64 {
        let d = a.sub(b).unwrap();
        (sobolev_norm(&d, 1.0, false, 1.0) / sobolev_norm(b, 1.0, false, 1.0)).abs()
    }

    #[test]
    fn place_and_align_are_inverse() {
        let g = GridSpec::new(2, 16, 16.0).unwrap();
        let f = gaussian_profile(&g, 1.0, 1.5).unwrap();
        let c = g.ravel([3, 11, 0]);
        let placed = place(&f, c);
        assert_eq!(placed.argmax_abs(), c);
        assert_eq!(align(&placed, c), f);
    }

    #[test]
    fn zero_family_is_exhausted() {
        let g = GridSpec::new(2, 32, 32.0).unwrap();
        let fam = FunctionFamily::new(vec![Field::zeros(g); 3]).unwrap();
        let params = critical_exponent(2, 4.0).unwrap();
        let err = inverse_gn_extract(&fam, &params, &ExtractOptions::default()).unwrap_err();
        assert!(matches!(err, Error::ExtractionExhausted { .. }));
        let dec = bubble_decompose(&fam, &params, 5, 1e-8).unwrap();
        assert_eq!(dec.depth(), 0);
    }

    #[test]
    fn single_bubble_is_recovered() {
        let g = GridSpec::new(2, 128, 128.0).unwrap();
        let spec = SyntheticSpec {
            bubbles: vec![SyntheticBubble { amplitude: 1.0, width: 4.0 }],
            separations: vec![0.0; 8],
            noise: 0.0,
            seed: 7,
        };
        let syn = synthetic_family(&g, &spec).unwrap();
        let params = critical_exponent(2, 4.0).unwrap();
        let ext = inverse_gn_extract(&syn.family, &params, &ExtractOptions::default()).unwrap();
        for (n, &c) in ext.centers.iter().enumerate() {
            assert!(g.distance(c, &g.position(syn.centers[n][0])) <= g.spacing());
        }
        assert!(h1_error(&ext.profile, &syn.profiles[0]) <= 0.02);

        let dec = bubble_decompose(&syn.family, &params, 4, 1e-6).unwrap();
        assert_eq!(dec.depth(), 1);
        assert!(dec.residuals.iter().all(|r| lq(r, 6.0) <= 1e-6));
        let gaps = decoupling_audit(&dec, &syn.family, &params).unwrap();
        assert!(gaps.max_gap() < 1e-10, "{gaps:?}");
    }

    #[test]
    fn exact_parts_have_zero_gaps() {
        let g = GridSpec::new(2, 64, 64.0).unwrap();
        let params = critical_exponent(2, 3.0).unwrap();
        let phi = gaussian_profile(&g, 0.7, 3.0).unwrap();
        let centers = vec![g.ravel([5, 9, 0]), g.ravel([40, 2, 0])];
        let fam = FunctionFamily::new(centers.iter().map(|&c| place(&phi, c)).collect()).unwrap();
        let dec = Decomposition::from_parts(&fam, vec![Bubble { profile: phi, centers }], &params).unwrap();
        let gaps = decoupling_audit(&dec, &fam, &params).unwrap();
        assert!(gaps.max_gap() < 1e-10);
        assert!(dec.residuals.iter().all(|r| r.max_abs() == 0.0));
    }

    #[test]
    fn window_uses_peak_distance() {
        let g = GridSpec::new(2, 128, 128.0).unwrap();
        let phi = gaussian_profile(&g, 1.0, 2.0).unwrap();
        let f = place(&phi, g.ravel([20, 64, 0])).axpy(1.0, &place(&phi, g.ravel([60, 64, 0]))).unwrap();
        let fam = FunctionFamily::new(vec![f]).unwrap();
        assert_eq!(window_radius(&fam), 10.0);
        let single = FunctionFamily::new(vec![phi]).unwrap();
        assert_eq!(window_radius(&single), 32.0);
    }
}
