use crate::error::{Error, Result};

/// Spatially constant solutions `v'' + m²v = |v|^p v`, sampled on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    pub times: Vec<f64>,
    pub v: Vec<f64>,
    pub dv: Vec<f64>,
}

const ODE_RTOL: f64 = 1e-13;
const ODE_ATOL: f64 = 1e-15;

// Dormand–Prince 5(4) tableau; the system is autonomous so the nodes are unused.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B_LOW: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

fn rhs(y: [f64; 2], m: f64, p: f64) -> [f64; 2] {
    [y[1], -m * m * y[0] + y[0].abs().powf(p) * y[0]]
}

fn dopri_step(y: [f64; 2], h: f64, m: f64, p: f64) -> ([f64; 2], f64) {
    let mut k = [[0.0; 2]; 7];
    for s in 0..7 {
        let mut ys = y;
        for (j, kj) in k.iter().enumerate().take(s) {
            ys[0] += h * A[s][j] * kj[0];
            ys[1] += h * A[s][j] * kj[1];
        }
        k[s] = rhs(ys, m, p);
    }
    let mut hi = y;
    let mut lo = y;
    for s in 0..7 {
        hi[0] += h * B[s] * k[s][0];
        hi[1] += h * B[s] * k[s][1];
        lo[0] += h * B_LOW[s] * k[s][0];
        lo[1] += h * B_LOW[s] * k[s][1];
    }
    let mut err: f64 = 0.0;
    for i in 0..2 {
        let scale = ODE_ATOL + ODE_RTOL * y[i].abs().max(hi[i].abs());
        err = err.max(((hi[i] - lo[i]) / scale).abs());
    }
    (hi, err)
}

/// Adaptive Dormand–Prince integration from `(A, B)` at `t = 0` through the
/// increasing times `t_grid`.
pub fn ode_oracle(a: f64, b: f64, m: f64, p: f64, t_grid: &[f64]) -> Result<OdeSolution> {
    if t_grid.windows(2).any(|w| w[1] < w[0]) || t_grid.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::Domain("t_grid must be nonnegative and nondecreasing".into()));
    }
    let mut out = OdeSolution { times: Vec::new(), v: Vec::new(), dv: Vec::new() };
    let mut y = [a, b];
    let mut t = 0.0;
    let mut h: f64 = 1e-3;
    for &target in t_grid {
        while t < target {
            let step = h.min(target - t);
            let (next, err) = dopri_step(y, step, m, p);
            if !next[0].is_finite() || !next[1].is_finite() || !err.is_finite() {
                h = 0.25 * step;
            } else if err <= 1.0 {
                y = next;
                t = if step == target - t { target } else { t + step };
                h = step * (0.9 * err.max(1e-10).powf(-0.2)).min(5.0);
                continue;
            } else {
                h = step * (0.9 * err.powf(-0.2)).max(0.2);
            }
            if h < 1e-15 * target.max(1.0) {
                return Err(Error::Domain(format!("ODE step underflow at t = {t} (likely blowup before {target})")));
            }
        }
        out.times.push(target);
        out.v.push(y[0]);
        out.dv.push(y[1]);
    }
    Ok(out)
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = hw * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * hw, ((kron - gauss) * hw).abs())
}

/// Globally adaptive Gauss–Kronrod (7/15) quadrature on `[a, b]`.
pub fn gauss_kronrod(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    let mut intervals = vec![(a, b, gk15(f, a, b))];
    for _ in 0..2000 {
        let total: f64 = intervals.iter().map(|iv| iv.2 .0).sum();
        let err: f64 = intervals.iter().map(|iv| iv.2 .1).sum();
        if err <= rel_tol * total.abs() || err < 1e-300 {
            return Ok(total);
        }
        let worst = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .map(|(i, _)| i)
            .expect("nonempty");
        let (lo, hi, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        intervals.push((lo, mid, gk15(f, lo, mid)));
        intervals.push((mid, hi, gk15(f, mid, hi)));
    }
    let err: f64 = intervals.iter().map(|iv| iv.2 .1).sum();
    Err(Error::Quadrature(format!("estimated error {err:e} after 2000 subdivisions")))
}

/// `∫_A^∞ [2/(p+2)(u^{p+2} - A^{p+2})]^{-1/2} du`, the lifespan of constant
/// data `(A, 0)` with `m = 0`.
///
/// With `u = A/s` this is `A^{-p/2} √((p+2)/2) ∫₀¹ s^{p/2-1}(1 - s^{p+2})^{-1/2} ds`;
/// the pieces `s < 1/2` and `s > 1/2` are straightened by `s = y^{2/p}` and
/// `s = 1 - w²` so both integrands are smooth.
pub fn lifespan_upper(a: f64, p: f64) -> Result<f64> {
    if !(a > 0.0 && p > 0.0) {
        return Err(Error::Domain(format!("lifespan needs A > 0 and p > 0 (A = {a}, p = {p})")));
    }
    let q = p + 2.0;
    let near_zero = |y: f64| (2.0 / p) / (1.0 - y.powf(2.0 * q / p)).sqrt();
    let near_one = |w: f64| {
        if w == 0.0 {
            return 2.0 / q.sqrt();
        }
        let s = 1.0 - w * w;
        let one_minus = -(q * (-w * w).ln_1p()).exp_m1();
        2.0 * w * s.powf(0.5 * p - 1.0) / one_minus.sqrt()
    };
    let tol = 1e-14;
    let i1 = gauss_kronrod(&near_zero, 0.0, 0.5f64.powf(0.5 * p), tol)?;
    let i2 = gauss_kronrod(&near_one, 0.0, 0.5f64.sqrt(), tol)?;
    Ok(a.powf(-0.5 * p) * (0.5 * q).sqrt() * (i1 + i2))
}
