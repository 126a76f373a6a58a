//! Gauss–Legendre rules and area quadratures on the models.

use std::f64::consts::PI;

use crate::geometry::{from_angles, ManifoldModel, ModelKind, ChartPoint, SPHERE_R2};

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    x.iter().zip(&w).map(|(xi, wi)| (m + h * xi, h * wi)).collect()
}

/// Fejér's first rule in x = cos θ on θ_j = (j+½)π/n: weights for ∫_0^π f(θ) sin θ dθ.
pub fn fejer_weights(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let th = PI * (j as f64 + 0.5) / n as f64;
            let s: f64 = (1..=n / 2).map(|m| (2.0 * m as f64 * th).cos() / (4.0 * (m * m) as f64 - 1.0)).sum();
            2.0 / n as f64 * (1.0 - 2.0 * s)
        })
        .collect()
}

/// Clenshaw–Curtis rule on θ_t = tπ/n, t = 0..=n: weights for ∫_0^π f(θ) sin θ dθ (n even).
pub fn clenshaw_curtis_weights(n: usize) -> Vec<f64> {
    (0..=n)
        .map(|t| {
            let th = PI * t as f64 / n as f64;
            let s: f64 = (1..=n / 2)
                .map(|m| {
                    let b = if 2 * m == n { 1.0 } else { 2.0 };
                    b * (2.0 * m as f64 * th).cos() / (4.0 * (m * m) as f64 - 1.0)
                })
                .sum();
            let c = if t == 0 || t == n { 1.0 } else { 2.0 };
            c / n as f64 * (1.0 - s)
        })
        .collect()
}

/// Points with weights integrating against the Riemannian area of g (= ω).
#[derive(Clone, Debug)]
pub struct AreaQuadrature {
    pub points: Vec<ChartPoint>,
    pub weights: Vec<f64>,
}

impl AreaQuadrature {
    /// Sphere: Gauss–Legendre in cos θ times the periodic trapezoid in φ.
    /// Torus: periodic trapezoid.
    pub fn new(m: &ManifoldModel, n_t: usize, n_phi: usize) -> Self {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        match m.kind {
            ModelKind::FlatTorus => {
                let [l1, l2] = m.periods;
                let (h1, h2) = (l1 / n_t as f64, l2 / n_phi as f64);
                let w = m.flux_density() * h1 * h2;
                for i in 0..n_t {
                    for j in 0..n_phi {
                        points.push(m.torus_point((i as f64 + 0.5) * h1, (j as f64 + 0.5) * h2));
                        weights.push(w);
                    }
                }
            }
            _ => {
                let (t, wt) = gauss_legendre(n_t);
                let dphi = 2.0 * PI / n_phi as f64;
                for (ti, wi) in t.iter().zip(&wt) {
                    let theta = ti.clamp(-1.0, 1.0).acos();
                    for j in 0..n_phi {
                        let phi = (j as f64 + 0.5) * dphi;
                        let p = from_angles(theta, phi);
                        let rho = m.conformal_factor(crate::geometry::unit_vector(&p));
                        points.push(p);
                        weights.push(rho * SPHERE_R2 * wi * dphi);
                    }
                }
            }
        }
        AreaQuadrature { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
