use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{Field, GridSpec, SpectralField};
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// FFT plans and wavenumber tables for one grid.
///
/// Radial symbols are evaluated once per shell `s = Σ mₐ²` (integer modes), so
/// a radial multiplier costs one symbol evaluation per distinct `|ξ|`.
pub struct Transform {
    grid: GridSpec,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    shell: Vec<u32>,
    mirror: Vec<u32>,
    max_shell: usize,
}

/// Shared transform for `grid`; plans are built once per process.
pub fn transform_for(grid: &GridSpec) -> Arc<Transform> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize, u64), Arc<Transform>>>> = OnceLock::new();
    let key = (grid.dim(), grid.n(), grid.box_length().to_bits());
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
    map.entry(key).or_insert_with(|| Arc::new(Transform::new(*grid))).clone()
}

impl Transform {
    pub fn new(grid: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let n = grid.n();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let len = grid.len();
        let mut shell = Vec::with_capacity(len);
        let mut mirror = Vec::with_capacity(len);
        for i in 0..len {
            let idx = grid.unravel(i);
            let mut s = 0i64;
            let mut m = [0usize; 3];
            for a in 0..grid.dim() {
                let k = grid.mode(idx[a]);
                s += k * k;
                m[a] = (n - idx[a]) % n;
            }
            shell.push(s as u32);
            mirror.push(grid.ravel(m) as u32);
        }
        let max_shell = grid.dim() * (n / 2) * (n / 2);
        Self { grid, fwd, inv, shell, mirror, max_shell }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Flat index of the mode `-ξ`.
    pub fn mirror(&self, i: usize) -> usize {
        self.mirror[i] as usize
    }

    /// `|ξ|` of mode `i`.
    pub fn xi_mag(&self, i: usize) -> f64 {
        self.grid.k0() * (self.shell[i] as f64).sqrt()
    }

    /// Symbol values tabulated per shell.
    pub fn shell_table(&self, symbol: impl Fn(f64) -> f64) -> Vec<f64> {
        let k0 = self.grid.k0();
        (0..=self.max_shell).map(|s| symbol(k0 * (s as f64).sqrt())).collect()
    }

    pub fn shells(&self) -> &[u32] {
        &self.shell
    }

    /// Signed wavenumber of mode `i` along `axis`, with the Nyquist mode mapped
    /// to zero so that odd multipliers keep real fields real.
    pub fn odd_wavenumber(&self, i: usize, axis: usize) -> f64 {
        let j = self.grid.unravel(i)[axis];
        let n = self.grid.n();
        if j == n / 2 {
            0.0
        } else {
            self.grid.k0() * self.grid.mode(j) as f64
        }
    }

    fn fft(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.grid.n();
        let plan = if inverse { &self.inv } else { &self.fwd };
        let mut scratch = vec![ZERO; plan.get_inplace_scratch_len()];
        plan.process_with_scratch(data, &mut scratch);
        match self.grid.dim() {
            1 => {}
            2 => {
                let mut tmp = vec![ZERO; data.len()];
                transpose::transpose(data, &mut tmp, n, n);
                plan.process_with_scratch(&mut tmp, &mut scratch);
                transpose::transpose(&tmp, data, n, n);
            }
            _ => {
                let slab = n * n;
                let mut tmp = vec![ZERO; data.len()];
                for (src, dst) in data.chunks(slab).zip(tmp.chunks_mut(slab)) {
                    transpose::transpose(src, dst, n, n);
                }
                plan.process_with_scratch(&mut tmp, &mut scratch);
                for (src, dst) in tmp.chunks(slab).zip(data.chunks_mut(slab)) {
                    transpose::transpose(src, dst, n, n);
                }
                transpose::transpose(data, &mut tmp, slab, n);
                plan.process_with_scratch(&mut tmp, &mut scratch);
                transpose::transpose(&tmp, data, n, slab);
            }
        }
    }

    pub fn forward_complex(&self, mut data: Vec<Complex64>) -> Vec<Complex64> {
        self.fft(&mut data, false);
        data
    }

    /// Inverse DFT including the `1/n^d` normalization.
    pub fn inverse_complex(&self, mut data: Vec<Complex64>) -> Vec<Complex64> {
        self.fft(&mut data, true);
        let s = 1.0 / data.len() as f64;
        for c in data.iter_mut() {
            *c *= s;
        }
        data
    }

    pub fn forward(&self, f: &Field) -> SpectralField {
        let data = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        SpectralField::from_raw(self.grid, self.forward_complex(data))
    }

    /// Inverse transform keeping the real part; callers pass Hermitian spectra.
    pub fn inverse(&self, spec: &SpectralField) -> Result<Field> {
        let data = self.inverse_complex(spec.coeffs().to_vec());
        Field::new(self.grid, data.into_iter().map(|c| c.re).collect())
    }

    /// Transforms two real fields with a single complex FFT.
    pub fn forward_pair(&self, a: &Field, b: &Field) -> (SpectralField, SpectralField) {
        let data = a.values().iter().zip(b.values()).map(|(&x, &y)| Complex64::new(x, y)).collect();
        let w = self.forward_complex(data);
        let (wa, wb) = self.unpack(&w);
        (SpectralField::from_raw(self.grid, wa), SpectralField::from_raw(self.grid, wb))
    }

    /// Splits `W = Â + iB̂` of two real fields into `Â` and `B̂`.
    pub fn unpack(&self, w: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let mut a = Vec::with_capacity(w.len());
        let mut b = Vec::with_capacity(w.len());
        for (i, &wk) in w.iter().enumerate() {
            let wm = w[self.mirror(i)].conj();
            a.push(0.5 * (wk + wm));
            let diff = 0.5 * (wk - wm);
            b.push(Complex64::new(diff.im, -diff.re));
        }
        (a, b)
    }

    /// Inverse of two Hermitian spectra with a single complex FFT.
    pub fn inverse_pair(&self, a: &[Complex64], b: &[Complex64]) -> Result<(Field, Field)> {
        let w: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x + Complex64::new(-y.im, y.re)).collect();
        let out = self.inverse_complex(w);
        let re = Field::new(self.grid, out.iter().map(|c| c.re).collect())?;
        let im = Field::new(self.grid, out.iter().map(|c| c.im).collect())?;
        Ok((re, im))
    }

    /// Spectral gradient `(∂₁f, …, ∂_d f)`.
    pub fn gradient(&self, f: &Field) -> Result<Vec<Field>> {
        let spec = self.forward(f);
        self.gradient_of(&spec)
    }

    pub fn gradient_of(&self, spec: &SpectralField) -> Result<Vec<Field>> {
        let d = self.grid.dim();
        let deriv = |axis: usize| -> Vec<Complex64> {
            spec.coeffs()
                .iter()
                .enumerate()
                .map(|(i, c)| Complex64::new(0.0, self.odd_wavenumber(i, axis)) * c)
                .collect()
        };
        let mut out = Vec::with_capacity(d);
        let mut axis = 0;
        while axis < d {
            if axis + 1 < d {
                let (a, b) = self.inverse_pair(&deriv(axis), &deriv(axis + 1))?;
                out.push(a);
                out.push(b);
                axis += 2;
            } else {
                let a = self.inverse(&SpectralField::from_raw(self.grid, deriv(axis)))?;
                out.push(a);
                axis += 1;
            }
        }
        Ok(out)
    }

    /// Spectral divergence `Σ ∂ₐ Fₐ`.
    pub fn divergence(&self, flux: &[Field]) -> Result<Field> {
        let d = self.grid.dim();
        if flux.len() != d {
            return Err(Error::Domain(format!("flux has {} components, d = {d}", flux.len())));
        }
        let mut acc = vec![ZERO; self.grid.len()];
        let mut axis = 0;
        while axis < d {
            let specs: Vec<SpectralField> = if axis + 1 < d {
                let (a, b) = self.forward_pair(&flux[axis], &flux[axis + 1]);
                vec![a, b]
            } else {
                vec![self.forward(&flux[axis])]
            };
            for (k, s) in specs.iter().enumerate() {
                for (i, c) in s.coeffs().iter().enumerate() {
                    acc[i] += Complex64::new(0.0, self.odd_wavenumber(i, axis + k)) * c;
                }
            }
            axis += specs.len();
        }
        self.inverse(&SpectralField::from_raw(self.grid, acc))
    }

    /// Applies a radial real symbol; `zero_mode` overrides the value at `ξ = 0`.
    pub fn apply_radial(&self, spec: &SpectralField, symbol: impl Fn(f64) -> f64, zero_mode: Option<f64>) -> Result<SpectralField> {
        let mut table = self.shell_table(symbol);
        if let Some(z) = zero_mode {
            table[0] = z;
        }
        if let Some(s) = table.iter().skip(1).position(|v| !v.is_finite()) {
            let xi = self.grid.k0() * ((s + 1) as f64).sqrt();
            return Err(Error::Domain(format!("symbol not finite at |xi| = {xi}")));
        }
        if !table[0].is_finite() {
            return Err(Error::Domain("symbol not finite at the zero mode; supply an explicit value".into()));
        }
        let coeffs = spec.coeffs().iter().zip(&self.shell).map(|(c, &s)| c * table[s as usize]).collect();
        Ok(SpectralField::from_raw(self.grid, coeffs))
    }
}

pub fn forward_transform(f: &Field) -> SpectralField {
    transform_for(f.grid()).forward(f)
}

pub fn inverse_transform(spec: &SpectralField) -> Result<Field> {
    transform_for(spec.grid()).inverse(spec)
}

/// `⟨ξ⟩_m = √(m² + |ξ|²)`.
pub fn bessel_symbol(xi_mag: f64, m: f64) -> f64 {
    m.hypot(xi_mag)
}

/// Multiplies coefficients by a radial symbol of `|ξ|`. When the symbol is
/// singular at the origin the caller must pass `zero_mode`.
pub fn apply_multiplier(spec: &SpectralField, symbol: impl Fn(f64) -> f64, zero_mode: Option<f64>) -> Result<SpectralField> {
    transform_for(spec.grid()).apply_radial(spec, symbol, zero_mode)
}

/// `|∇|^s f`; the zero mode is annihilated for `s ≤ 0` except `s = 0`.
pub fn fractional_derivative(f: &Field, s: f64) -> Result<Field> {
    if s == 0.0 {
        return Ok(f.clone());
    }
    let t = transform_for(f.grid());
    let spec = t.forward(f);
    let zero = if s < 0.0 { Some(0.0) } else { None };
    t.inverse(&t.apply_radial(&spec, |xi| xi.powf(s), zero)?)
}

/// `⟨∇⟩_m^s f`; with `m = 0` and `s < 0` the zero mode is annihilated.
pub fn bessel_derivative(f: &Field, s: f64, m: f64) -> Result<Field> {
    let t = transform_for(f.grid());
    let spec = t.forward(f);
    let zero = if m == 0.0 && s < 0.0 { Some(0.0) } else { None };
    t.inverse(&t.apply_radial(&spec, |xi| bessel_symbol(xi, m).powf(s), zero)?)
}

pub fn gradient(f: &Field) -> Result<Vec<Field>> {
    transform_for(f.grid()).gradient(f)
}

pub fn divergence(flux: &[Field]) -> Result<Field> {
    match flux.first() {
        Some(f) => transform_for(f.grid()).divergence(flux),
        None => Err(Error::Domain("empty flux".into())),
    }
}
