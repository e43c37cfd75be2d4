use nlkg::grid::{
    dyadic_range, forward_transform, fractional_derivative, gradient, lp_project, Field, GridSpec, LpMode,
};
use nlkg::norms::{lebesgue_norm, lq, sobolev_norm, Region};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noise(g: GridSpec, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Field::new(g, (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn grids() -> impl Strategy<Value = GridSpec> {
    (1usize..=3, 0usize..3, 1.0f64..40.0).prop_map(|(d, k, l)| {
        let n = match d {
            1 => 64 << k,
            2 => 16 << k,
            _ => 8 << k.min(1),
        };
        GridSpec::new(d, n, l).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// `Σ|f_j|² h^d = (h^d / n^d) Σ|F_k|²` for the unnormalized DFT.
    #[test]
    fn plancherel(g in grids(), seed in any::<u64>()) {
        let f = noise(g, seed);
        let physical = f.dot(&f);
        let spectral: f64 = forward_transform(&f).coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>()
            * g.cell_volume() / g.len() as f64;
        prop_assert!((physical - spectral).abs() <= 1e-10 * physical);
    }

    #[test]
    fn low_and_high_projections_sum_to_identity(g in grids(), seed in any::<u64>(), j in 0usize..8) {
        let f = noise(g, seed);
        let scales = dyadic_range(&g);
        let n = scales[j % scales.len()];
        let sum = lp_project(&f, n, LpMode::Leq).unwrap().axpy(1.0, &lp_project(&f, n, LpMode::Gt).unwrap()).unwrap();
        prop_assert!(sum.sub(&f).unwrap().max_abs() <= 1e-12 * f.max_abs().max(1.0));
    }

    /// Band supports `(N/2, 11N/10)` two dyadic steps apart are disjoint.
    #[test]
    fn separated_bands_are_orthogonal(g in grids(), seed in any::<u64>()) {
        let f = noise(g, seed);
        let scales = dyadic_range(&g);
        for (i, &a) in scales.iter().enumerate() {
            for &b in &scales[(i + 2).min(scales.len())..] {
                let both = lp_project(&lp_project(&f, a, LpMode::Band).unwrap(), b, LpMode::Band).unwrap();
                prop_assert!(lq(&both, 2.0) <= 1e-12 * lq(&f, 2.0));
            }
        }
    }

    #[test]
    fn fractional_powers_compose(g in grids(), seed in any::<u64>(), a in -1.5f64..1.5, b in -1.5f64..1.5) {
        let f = noise(g, seed);
        let mean = f.integral() / g.volume();
        let f = f.map(|v| v - mean).unwrap();
        let two = fractional_derivative(&fractional_derivative(&f, a).unwrap(), b).unwrap();
        let one = fractional_derivative(&f, a + b).unwrap();
        prop_assert!(two.sub(&one).unwrap().max_abs() <= 1e-10 * one.max_abs().max(1e-300));
    }

    /// The volume-normalized `(⨍|f|^q)^{1/q}` is nondecreasing in `q`.
    #[test]
    fn normalized_lebesgue_norms_increase_with_q(g in grids(), seed in any::<u64>()) {
        let f = noise(g, seed);
        let mut prev = 0.0;
        for q in [1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 10.0] {
            let v = lebesgue_norm(&f, q, &Region::WholeBox).unwrap().value / g.volume().powf(1.0 / q);
            prop_assert!(v >= prev * (1.0 - 1e-12), "q = {}: {} < {}", q, v, prev);
            prev = v;
        }
        prop_assert!(f.max_abs() >= prev * (1.0 - 1e-12));
    }

    /// Below Nyquist, where the spectral gradient keeps every component.
    #[test]
    fn homogeneous_h1_is_the_spectral_gradient_norm(g in grids(), seed in any::<u64>()) {
        let f = lp_project(&noise(g, seed), 0.5 * g.k_nyquist(), LpMode::Leq).unwrap();
        let grad = gradient(&f).unwrap();
        let sq: f64 = grad.iter().map(|c| c.dot(c)).sum();
        let h1 = sobolev_norm(&f, 1.0, true, 0.0);
        prop_assert!((h1 - sq.sqrt()).abs() <= 1e-10 * h1);
    }
}
