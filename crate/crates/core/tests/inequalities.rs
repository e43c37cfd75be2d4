use nlkg::grid::{Field, GridSpec};
use nlkg::norms::{critical_exponent, gn_ratio, gn_second_ratio};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sums of one to four Gaussians with random signs, widths and centres.
fn corpus(g: GridSpec, seed: u64, count: usize) -> Vec<Field> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = 0.25 * g.box_length();
    (0..count)
        .map(|_| {
            let bumps: Vec<(f64, f64, [f64; 3])> = (0..rng.random_range(1..=4))
                .map(|_| {
                    let mut c = [0.0; 3];
                    for x in c.iter_mut().take(g.dim()) {
                        *x = rng.random_range(-half..half);
                    }
                    (rng.random_range(-1.0..1.0), rng.random_range(0.8..3.0), c)
                })
                .collect();
            let values = (0..g.len())
                .map(|i| bumps.iter().map(|(a, w, c)| a * (-g.distance(i, c).powi(2) / (2.0 * w * w)).exp()).sum())
                .collect();
            Field::new(g, values).unwrap()
        })
        .collect()
}

/// Largest first and second GN ratios over the 60-field corpus (seed 17),
/// measured once and frozen. At `d = 2, p = 2` the second ratio is
/// `‖f‖₂/‖f‖₂ = 1` and a lone Gaussian attains `1/(2π)` in the first.
const FROZEN: [(usize, usize, f64, f64, f64, f64); 4] = [
    (2, 64, 32.0, 4.0, 0.236785115, 0.631618778),
    (2, 64, 32.0, 2.0, 0.159154943, 1.000000000),
    (3, 32, 16.0, 2.0, 0.119556023, 0.554649109),
    (3, 32, 16.0, 3.0, 0.134762406, 0.407276441),
];

#[test]
fn gagliardo_nirenberg_ratios_match_the_frozen_corpus_constants() {
    for (d, n, l, p, first, second) in FROZEN {
        let g = GridSpec::new(d, n, l).unwrap();
        let params = critical_exponent(d, p).unwrap();
        let fields = corpus(g, 17, 60);
        let a = fields.iter().map(|f| gn_ratio(f, &params).unwrap()).fold(0.0, f64::max);
        let b = fields.iter().map(|f| gn_second_ratio(f, &params).unwrap()).fold(0.0, f64::max);
        assert!((a - first).abs() <= 1e-8 * first, "d = {d}, p = {p}: first ratio {a} vs frozen {first}");
        assert!((b - second).abs() <= 1e-8 * second, "d = {d}, p = {p}: second ratio {b} vs frozen {second}");
    }
}

#[test]
fn fresh_fields_respect_the_frozen_constants() {
    for (d, n, l, p, first, second) in FROZEN {
        let g = GridSpec::new(d, n, l).unwrap();
        let params = critical_exponent(d, p).unwrap();
        for f in corpus(g, 1234, 30) {
            let (a, b) = (gn_ratio(&f, &params).unwrap(), gn_second_ratio(&f, &params).unwrap());
            assert!(a <= first * (1.0 + 1e-9) && b <= second * (1.0 + 1e-9), "d = {d}, p = {p}: {a}, {b}");
        }
    }
}
