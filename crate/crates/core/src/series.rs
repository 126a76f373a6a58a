//! (k, error) series with log-log slope fits: the verdict type of every rate claim.

use serde::{Deserialize, Serialize};

/// Errors at or below this level are treated as exact zeros (roundoff).
pub const NOISE_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSeries {
    pub name: String,
    pub ks: Vec<f64>,
    pub errors: Vec<f64>,
    /// Least-squares slope of log error against log k over the top half of the range.
    pub slope: f64,
    pub intercept: f64,
    /// |slope(top half) − slope(bottom half)|.
    pub stability: f64,
}

/// Least-squares line through (log x, log y); (slope, intercept).
pub fn loglog_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return (0.0, pts.first().map_or(0.0, |p| p.1.max(f64::MIN_POSITIVE).ln()));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.max(f64::MIN_POSITIVE).ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return (0.0, my);
    }
    let s = sxy / sxx;
    (s, my - s * mx)
}

impl ConvergenceSeries {
    pub fn new(name: &str, mut pts: Vec<(f64, f64)>) -> Self {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = pts.len();
        let half = n.div_ceil(2).max(2).min(n);
        let (slope, intercept) = loglog_fit(&pts[n - half..]);
        let (bottom, _) = loglog_fit(&pts[..half]);
        ConvergenceSeries {
            name: name.to_string(),
            ks: pts.iter().map(|p| p.0).collect(),
            errors: pts.iter().map(|p| p.1).collect(),
            slope,
            intercept,
            stability: (slope - bottom).abs(),
        }
    }

    pub fn len(&self) -> usize {
        self.ks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ks.is_empty()
    }

    pub fn max_error(&self) -> f64 {
        self.errors.iter().fold(0.0, |a, &e| a.max(e))
    }

    pub fn min_error(&self) -> f64 {
        self.errors.iter().fold(f64::INFINITY, |a, &e| a.min(e))
    }

    /// Every error is at roundoff level.
    pub fn at_noise_floor(&self) -> bool {
        self.errors.iter().all(|e| e.abs() <= NOISE_FLOOR)
    }

    /// max_k k^p · error: the empirical constant of an O(k^{−p}) bound.
    pub fn scaled_max(&self, p: f64) -> f64 {
        self.ks.iter().zip(&self.errors).fold(0.0, |a, (k, e)| a.max(k.powf(p) * e))
    }

    /// Rate verdict: slope ≤ threshold with the given stability, or errors at the noise floor.
    pub fn decays(&self, threshold: f64, max_stability: f64) -> bool {
        self.at_noise_floor() || (self.slope <= threshold && self.stability <= max_stability)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,error\n");
        for (k, e) in self.ks.iter().zip(&self.errors) {
            s.push_str(&format!("{k},{e:e}\n"));
        }
        s
    }
}
