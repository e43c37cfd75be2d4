use serde::{Deserialize, Serialize};

use super::{transform_for, Field, GridSpec};
use crate::error::Result;

/// Radial Littlewood–Paley bump: 1 on `r ≤ 1`, 0 on `r ≥ 11/10`, joined by the
/// quintic smoothstep so value, slope and curvature match at both ends.
pub fn bump(r: f64) -> f64 {
    if r <= 1.0 {
        1.0
    } else if r >= 1.1 {
        0.0
    } else {
        let s = (r - 1.0) / 0.1;
        1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpMode {
    /// `P_{≤N}`, symbol `φ(ξ/N)`.
    Leq,
    /// `P_{>N}`, symbol `1 - φ(ξ/N)`.
    Gt,
    /// `P_N`, symbol `φ(ξ/N) - φ(2ξ/N)`.
    Band,
}

pub fn lp_multiplier(xi: f64, n_dyadic: f64, mode: LpMode) -> f64 {
    match mode {
        LpMode::Leq => bump(xi / n_dyadic),
        LpMode::Gt => 1.0 - bump(xi / n_dyadic),
        LpMode::Band => bump(xi / n_dyadic) - bump(2.0 * xi / n_dyadic),
    }
}

pub fn lp_project(f: &Field, n_dyadic: f64, mode: LpMode) -> Result<Field> {
    let t = transform_for(f.grid());
    let spec = t.forward(f);
    t.inverse(&t.apply_radial(&spec, |xi| lp_multiplier(xi, n_dyadic, mode), None)?)
}

/// Dyadic frequencies `2^j` inside the resolvable band `[2π/L, πn/L]`.
pub fn dyadic_range(grid: &GridSpec) -> Vec<f64> {
    let lo = grid.k0().log2().ceil() as i32;
    let hi = grid.k_nyquist().log2().floor() as i32;
    (lo..=hi).map(|j| 2f64.powi(j)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn bump_is_c2_at_the_joins() {
        let eps = 1e-6;
        for r in [1.0, 1.1] {
            let d1 = (bump(r + eps) - bump(r - eps)) / (2.0 * eps);
            let d2 = (bump(r + eps) - 2.0 * bump(r) + bump(r - eps)) / (eps * eps);
            assert!(d1.abs() < 1e-4, "slope at {r}: {d1}");
            assert!(d2.abs() < 1e-1, "curvature at {r}: {d2}");
        }
        assert!((bump(1.05) - 0.5).abs() < 1e-12);
        let mut prev = 1.0;
        for i in 0..=100 {
            let b = bump(1.0 + 0.001 * i as f64);
            assert!(b <= prev + 1e-15);
            prev = b;
        }
    }

    #[test]
    fn constant_field_has_no_band_content() {
        let g = GridSpec::new(2, 16, 2.0 * PI).unwrap();
        let f = Field::constant(g, 3.0);
        for n in dyadic_range(&g) {
            assert!(lp_project(&f, n, LpMode::Band).unwrap().max_abs() < 1e-14);
        }
    }

    #[test]
    fn low_projection_keeps_inner_wave() {
        let g = GridSpec::new(2, 32, 2.0 * PI).unwrap();
        let f = Field::from_fn(g, |x| (4.0 * x[0]).cos()).unwrap();
        let p = lp_project(&f, 16.0, LpMode::Leq).unwrap();
        assert!(p.sub(&f).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn dyadic_range_is_clipped() {
        let g = GridSpec::new(2, 64, 2.0 * PI).unwrap();
        assert_eq!(dyadic_range(&g), vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0]);
    }
}
