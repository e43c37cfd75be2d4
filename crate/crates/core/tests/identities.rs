use nlkg::blowup::{mass_derivative_gap, mass_diagnostics};
use nlkg::conslaws::{combined_weighted_source, eval_tensor, mod_dilation_density_expanded, Apex, TensorKind};
use nlkg::grid::{GridSpec, Physics, State};
use nlkg::solver::{evolve, initial_data, InitialData, SolverConfig};
use proptest::prelude::*;

fn gaussian(g: GridSpec, amplitude: f64, width: f64, physics: Physics) -> State {
    let data = InitialData::Gaussian { amplitude, width, center: None };
    initial_data(&g, physics, &data).unwrap()
}

fn conformal(d: usize) -> f64 {
    4.0 / (d as f64 - 1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// At and above the conformal power the dilation source is a sum of
    /// nonnegative terms.
    #[test]
    fn dilation_source_is_nonnegative_above_conformal(
        d in 2usize..=3,
        excess in 0.0f64..2.0,
        amplitude in 0.1f64..2.0,
        width in 0.5f64..3.0,
        mass in 0.0f64..1.0,
        lag in 0.1f64..5.0,
    ) {
        let g = GridSpec::new(d, if d == 2 { 32 } else { 16 }, 12.0).unwrap();
        let s = gaussian(g, amplitude, width, Physics::focusing(mass, conformal(d) + excess));
        for kind in [TensorKind::Dilation, TensorKind::ModDilation] {
            let src = eval_tensor(&s, kind, &Apex::at([0.0; 3], -lag)).unwrap().source;
            prop_assert!(src.values().iter().all(|&v| v >= 0.0), "{}", kind.name());
        }
    }

    /// Below the conformal power the massless dilation source is strictly
    /// negative wherever `u ≠ 0`, so the sign above is not automatic.
    #[test]
    fn dilation_source_turns_negative_below_conformal(amplitude in 0.1f64..2.0, deficit in 0.2f64..1.5) {
        let g = GridSpec::new(2, 32, 12.0).unwrap();
        let s = gaussian(g, amplitude, 1.5, Physics::focusing(0.0, conformal(2) - deficit));
        let src = eval_tensor(&s, TensorKind::Dilation, &Apex::at([0.0; 3], -1.0)).unwrap().source;
        prop_assert!(src.values()[g.len() / 2 + g.n() / 2] < 0.0);
    }

    #[test]
    fn combined_weighted_source_is_nonnegative_below_conformal(
        amplitude in 0.1f64..2.0,
        width in 0.5f64..3.0,
        mass in 0.0f64..1.0,
        p in 1.2f64..1.9,
        lag in 0.1f64..5.0,
    ) {
        let g = GridSpec::new(3, 16, 12.0).unwrap();
        let s = gaussian(g, amplitude, width, Physics::focusing(mass, p));
        let src = combined_weighted_source(&s, &Apex::at([0.0; 3], -lag)).unwrap();
        prop_assert!(src.values().iter().all(|&v| v >= 0.0));
    }

    /// The modified dilation density computed from its expanded formula
    /// agrees with the tensor evaluation.
    #[test]
    fn modified_dilation_density_has_two_consistent_forms(
        d in 2usize..=3,
        amplitude in 0.1f64..2.0,
        mass in 0.0f64..1.0,
        lag in 0.1f64..5.0,
    ) {
        let g = GridSpec::new(d, if d == 2 { 32 } else { 16 }, 12.0).unwrap();
        let s = gaussian(g, amplitude, 1.5, Physics::focusing(mass, 2.0));
        let apex = Apex::at([0.5, -0.25, 0.0], -lag);
        let direct = eval_tensor(&s, TensorKind::ModDilation, &apex).unwrap().density;
        let expanded = mod_dilation_density_expanded(&s, &apex).unwrap();
        prop_assert!(direct.sub(&expanded).unwrap().max_abs() <= 1e-10 * direct.max_abs().max(1.0));
    }
}

/// At `n = 32` the Gaussian is under-resolved and a `dt`-independent floor
/// hides the second-order decay of the `M''` gap.
fn mass_run(dt: f64) -> nlkg::blowup::MassSeries {
    let g = GridSpec::new(2, 64, 16.0).unwrap();
    let s = gaussian(g, 1.2, 1.5, Physics::focusing(0.5, 3.0));
    let mut cfg = SolverConfig::new(dt, 0.8);
    // Keep the step uniform so the difference quotients are the textbook ones.
    cfg.theta = 1e3;
    mass_diagnostics(&evolve(&s, &cfg, &[]).unwrap())
}

/// Centred differences of `M` against the closed-form `M'`: both the
/// difference quotient and the splitting are second order.
#[test]
fn mass_derivative_gap_is_second_order() {
    let gaps: Vec<f64> = [0.02, 0.01, 0.005].iter().map(|&dt| mass_derivative_gap(&mass_run(dt))).collect();
    for w in gaps.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.8, "gaps {gaps:?}");
    }
}

/// Second differences of `M` converge to the closed-form `M''` at second order.
#[test]
fn mass_second_derivative_matches_differences() {
    let gap = |dt: f64| {
        let s = mass_run(dt);
        let scale = s.m_doubleprime.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        (1..s.times.len() - 1)
            .map(|i| {
                let fd = (s.m[i + 1] - 2.0 * s.m[i] + s.m[i - 1]) / (dt * dt);
                (fd - s.m_doubleprime[i]).abs()
            })
            .fold(0.0, f64::max)
            / scale
    };
    let gaps: Vec<f64> = [0.02, 0.01, 0.005].iter().map(|&dt| gap(dt)).collect();
    for w in gaps.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.8, "gaps {gaps:?}");
    }
}
