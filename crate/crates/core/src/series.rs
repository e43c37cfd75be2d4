use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::norms::Regime;

/// A named scalar time series with free-form metadata.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DiagnosticSeries {
    pub name: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub regime: Option<Regime>,
    pub metadata: BTreeMap<String, String>,
}

impl DiagnosticSeries {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), ..Default::default() }
    }

    pub fn push(&mut self, t: f64, v: f64) {
        self.times.push(t);
        self.values.push(v);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `max/min` over the series; infinite if the minimum is not positive.
    pub fn band_ratio(&self) -> f64 {
        let (lo, hi) = (self.min(), self.max());
        if lo > 0.0 {
            hi / lo
        } else {
            f64::INFINITY
        }
    }

    /// Sub-series restricted to `lo <= t <= hi`.
    pub fn window(&self, lo: f64, hi: f64) -> Self {
        let mut out = Self { name: self.name.clone(), regime: self.regime, metadata: self.metadata.clone(), ..Default::default() };
        for (&t, &v) in self.times.iter().zip(&self.values) {
            if t >= lo && t <= hi {
                out.push(t, v);
            }
        }
        out
    }

    /// Largest single-step decrease `values[i-1] - values[i]`, zero if monotone.
    pub fn max_decrease(&self) -> f64 {
        self.values.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
    }
}

/// Ordinary least squares `y ≈ a + b x`; returns `(a, b, rms residual)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|xi| (xi - mx) * (xi - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let rss: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - a - b * xi).powi(2)).sum();
    Some((a, b, (rss / nf).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let (a, b, r) = linear_fit(&x, &y).unwrap();
        assert!((a - 2.0).abs() < 1e-14 && (b + 0.5).abs() < 1e-14 && r < 1e-14);
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }

    #[test]
    fn series_helpers() {
        let mut s = DiagnosticSeries::new("x");
        for (t, v) in [(0.0, 1.0), (1.0, 3.0), (2.0, 2.5), (3.0, 4.0)] {
            s.push(t, v);
        }
        assert_eq!(s.band_ratio(), 4.0);
        assert_eq!(s.max_decrease(), 0.5);
        assert_eq!(s.window(0.5, 2.0).values, vec![3.0, 2.5]);
    }
}
