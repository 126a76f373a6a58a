//! Surface models: round sphere, conformally perturbed sphere, flat torus.
//!
//! Conventions: total symplectic area 2π, curvature of the prequantum
//! connection −iω, g(u, v) = ω(u, Jv). The sphere has radius² = 1/2 and is
//! covered by two stereographic charts; the torus by one periodic chart.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type Mat2 = [[f64; 2]; 2];
pub type Vec3 = [f64; 3];

/// Radius² of the sphere models (area 4πr² = 2π).
pub const SPHERE_R2: f64 = 0.5;
/// Total symplectic area of every model.
pub const TOTAL_AREA: f64 = 2.0 * PI;
/// Stereographic charts are valid for |w| ≤ this radius.
pub const CHART_RADIUS: f64 = 4.0;
/// Standard complex structure in every chart (J∂x = ∂y).
pub const J_STD: Mat2 = [[0.0, -1.0], [1.0, 0.0]];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    RoundSphere,
    PerturbedSphere,
    FlatTorus,
}

/// Real spherical harmonics of degree 1 and 2, as homogeneous harmonic
/// polynomials on R³ (restricted to the unit sphere).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Harmonic {
    X,
    Y,
    Z,
    Xy,
    Yz,
    Xz,
    X2MinusY2,
    /// 3Z² − 1 on the unit sphere, written as 2Z² − X² − Y².
    Z2,
}

impl Harmonic {
    pub const ALL: [Harmonic; 8] = [
        Harmonic::X,
        Harmonic::Y,
        Harmonic::Z,
        Harmonic::Xy,
        Harmonic::Yz,
        Harmonic::Xz,
        Harmonic::X2MinusY2,
        Harmonic::Z2,
    ];

    pub fn degree(self) -> u32 {
        match self {
            Harmonic::X | Harmonic::Y | Harmonic::Z => 1,
            _ => 2,
        }
    }

    pub fn eval(self, p: Vec3) -> f64 {
        let [x, y, z] = p;
        match self {
            Harmonic::X => x,
            Harmonic::Y => y,
            Harmonic::Z => z,
            Harmonic::Xy => x * y,
            Harmonic::Yz => y * z,
            Harmonic::Xz => x * z,
            Harmonic::X2MinusY2 => x * x - y * y,
            Harmonic::Z2 => 2.0 * z * z - x * x - y * y,
        }
    }

    /// Gradient in R³.
    pub fn grad(self, p: Vec3) -> Vec3 {
        let [x, y, z] = p;
        match self {
            Harmonic::X => [1.0, 0.0, 0.0],
            Harmonic::Y => [0.0, 1.0, 0.0],
            Harmonic::Z => [0.0, 0.0, 1.0],
            Harmonic::Xy => [y, x, 0.0],
            Harmonic::Yz => [0.0, z, y],
            Harmonic::Xz => [z, 0.0, x],
            Harmonic::X2MinusY2 => [2.0 * x, -2.0 * y, 0.0],
            Harmonic::Z2 => [-2.0 * x, -2.0 * y, 4.0 * z],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chart {
    North,
    South,
    Torus,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub chart: Chart,
    pub coords: [f64; 2],
}

impl ChartPoint {
    pub fn new(chart: Chart, x: f64, y: f64) -> Self {
        ChartPoint { chart, coords: [x, y] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tangent {
    pub base: ChartPoint,
    pub components: [f64; 2],
}

/// A compact symplectic surface with compatible complex structure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldModel {
    pub kind: ModelKind,
    /// ε-coefficients of the conformal factor ρ = 1 + Σ ε·Y (perturbed sphere).
    pub perturbation: Vec<(Harmonic, f64)>,
    /// Lattice periods (torus).
    pub periods: [f64; 2],
}

impl ManifoldModel {
    pub fn round_sphere() -> Self {
        ManifoldModel { kind: ModelKind::RoundSphere, perturbation: Vec::new(), periods: [0.0, 0.0] }
    }

    /// Sphere with metric ρ·g_round, ω = ρ·ω_round. ρ must stay positive.
    pub fn perturbed_sphere(terms: Vec<(Harmonic, f64)>) -> Result<Self> {
        let m = ManifoldModel { kind: ModelKind::PerturbedSphere, perturbation: terms, periods: [0.0, 0.0] };
        let mut rho_min = f64::INFINITY;
        let n = 96;
        for i in 0..=n {
            let theta = PI * i as f64 / n as f64;
            for j in 0..2 * n {
                let phi = PI * j as f64 / n as f64;
                let p = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
                rho_min = rho_min.min(m.conformal_factor(p));
            }
        }
        if !(rho_min > 0.05) {
            return Err(Error::InvalidModel(format!("conformal factor not positive (min {rho_min:.3})")));
        }
        Ok(m)
    }

    pub fn flat_torus(l1: f64, l2: f64) -> Result<Self> {
        if !(l1 > 0.0 && l2 > 0.0 && l1.is_finite() && l2.is_finite()) {
            return Err(Error::InvalidModel("torus periods must be positive".into()));
        }
        Ok(ManifoldModel { kind: ModelKind::FlatTorus, perturbation: Vec::new(), periods: [l1, l2] })
    }

    pub fn is_sphere(&self) -> bool {
        self.kind != ModelKind::FlatTorus
    }

    pub fn total_area(&self) -> f64 {
        TOTAL_AREA
    }

    /// Torus flux density c = 2π / (L1·L2).
    pub fn flux_density(&self) -> f64 {
        TOTAL_AREA / (self.periods[0] * self.periods[1])
    }

    /// Conformal factor ρ at a unit vector (1 on the round sphere and torus).
    pub fn conformal_factor(&self, p: Vec3) -> f64 {
        1.0 + self.perturbation.iter().map(|(h, e)| e * h.eval(p)).sum::<f64>()
    }

    pub fn conformal_factor_grad(&self, p: Vec3) -> Vec3 {
        let mut g = [0.0; 3];
        for (h, e) in &self.perturbation {
            let d = h.grad(p);
            for i in 0..3 {
                g[i] += e * d[i];
            }
        }
        g
    }

    /// Kähler potential correction f with Δ_g f = ρ − 1, so ω = ω_round + d⋆df.
    pub fn potential_correction(&self, p: Vec3) -> f64 {
        self.perturbation
            .iter()
            .map(|(h, e)| {
                let l = h.degree() as f64;
                -e * h.eval(p) / (2.0 * l * (l + 1.0))
            })
            .sum()
    }

    pub fn potential_correction_grad(&self, p: Vec3) -> Vec3 {
        let mut g = [0.0; 3];
        for (h, e) in &self.perturbation {
            let l = h.degree() as f64;
            let d = h.grad(p);
            for i in 0..3 {
                g[i] -= e * d[i] / (2.0 * l * (l + 1.0));
            }
        }
        g
    }

    pub fn validate_point(&self, x: &ChartPoint) -> Result<()> {
        let [a, b] = x.coords;
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::OutsideChart(*x));
        }
        match (self.is_sphere(), x.chart) {
            (true, Chart::North | Chart::South) => {
                if a * a + b * b > CHART_RADIUS * CHART_RADIUS {
                    return Err(Error::OutsideChart(*x));
                }
            }
            (false, Chart::Torus) => {
                let [l1, l2] = self.periods;
                if a < 0.0 || a >= l1 || b < 0.0 || b >= l2 {
                    return Err(Error::OutsideChart(*x));
                }
            }
            _ => return Err(Error::OutsideChart(*x)),
        }
        Ok(())
    }

    /// Torus point with coordinates reduced to the fundamental domain.
    pub fn torus_point(&self, x: f64, y: f64) -> ChartPoint {
        let [l1, l2] = self.periods;
        let mut a = x.rem_euclid(l1);
        let mut b = y.rem_euclid(l2);
        if a >= l1 {
            a = 0.0;
        }
        if b >= l2 {
            b = 0.0;
        }
        ChartPoint::new(Chart::Torus, a, b)
    }

    /// Chart density λ with g = λ(dx² + dy²) and ω = λ dx∧dy.
    pub fn density(&self, x: &ChartPoint) -> Result<f64> {
        self.validate_point(x)?;
        Ok(self.density_unchecked(x))
    }

    pub(crate) fn density_unchecked(&self, x: &ChartPoint) -> f64 {
        match x.chart {
            Chart::Torus => self.flux_density(),
            _ => {
                let [a, b] = x.coords;
                let d = 1.0 + a * a + b * b;
                let round = 4.0 * SPHERE_R2 / (d * d);
                round * self.conformal_factor(unit_vector(x))
            }
        }
    }

    pub fn omega_at(&self, x: &ChartPoint) -> Result<Mat2> {
        let l = self.density(x)?;
        Ok([[0.0, l], [-l, 0.0]])
    }

    pub fn j_at(&self, x: &ChartPoint) -> Result<Mat2> {
        self.validate_point(x)?;
        Ok(J_STD)
    }

    /// g = Ω·J as matrices: g(u, v) = ω(u, Jv).
    pub fn metric_at(&self, x: &ChartPoint) -> Result<Mat2> {
        let w = self.omega_at(x)?;
        let j = self.j_at(x)?;
        Ok(mat_mul(&w, &j))
    }

    pub fn norm(&self, v: &Tangent) -> Result<f64> {
        let g = self.metric_at(&v.base)?;
        Ok(bilinear(&g, v.components, v.components).max(0.0).sqrt())
    }

    /// Representation of a point in another chart.
    pub fn to_chart(&self, x: &ChartPoint, target: Chart) -> Result<ChartPoint> {
        self.validate_point(x)?;
        if x.chart == target {
            return Ok(*x);
        }
        match (x.chart, target) {
            (Chart::North, Chart::South) | (Chart::South, Chart::North) => {
                let [a, b] = x.coords;
                let r2 = a * a + b * b;
                if r2 == 0.0 {
                    return Err(Error::OutsideChart(*x));
                }
                let y = ChartPoint::new(target, a / r2, -b / r2);
                self.validate_point(&y)?;
                Ok(y)
            }
            _ => Err(Error::OutsideChart(*x)),
        }
    }

    /// Push a tangent vector through a chart transition.
    pub fn tangent_to_chart(&self, v: &Tangent, target: Chart) -> Result<Tangent> {
        let base = self.to_chart(&v.base, target)?;
        if base.chart == v.base.chart {
            return Ok(*v);
        }
        // w ↦ 1/w has complex derivative −1/w².
        let [a, b] = v.base.coords;
        let r2 = a * a + b * b;
        let (re, im) = (-(a * a - b * b) / (r2 * r2), 2.0 * a * b / (r2 * r2));
        let [u1, u2] = v.components;
        Ok(Tangent { base, components: [re * u1 - im * u2, im * u1 + re * u2] })
    }

    /// Preferred chart representation: north for |w| ≤ 1, south otherwise.
    pub fn canonical(&self, x: &ChartPoint) -> Result<ChartPoint> {
        self.validate_point(x)?;
        match x.chart {
            Chart::Torus => Ok(*x),
            c => {
                let [a, b] = x.coords;
                if a * a + b * b > 1.0 {
                    let other = if c == Chart::North { Chart::South } else { Chart::North };
                    self.to_chart(x, other)
                } else {
                    Ok(*x)
                }
            }
        }
    }

    pub fn compatibility_check(&self, samples: &[ChartPoint]) -> Result<CompatibilityReport> {
        let mut rep = CompatibilityReport::default();
        let basis = [[1.0, 0.0], [0.0, 1.0], [0.6, -0.8], [0.3, 1.7]];
        for x in samples {
            let w = self.omega_at(x)?;
            let j = self.j_at(x)?;
            let g = self.metric_at(x)?;
            let j2 = mat_mul(&j, &j);
            for r in 0..2 {
                for c in 0..2 {
                    let id = if r == c { 1.0 } else { 0.0 };
                    rep.j_squared = rep.j_squared.max((j2[r][c] + id).abs());
                    rep.metric_symmetry = rep.metric_symmetry.max((g[r][c] - g[c][r]).abs());
                }
            }
            let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
            if !(g[0][0] > 0.0 && det > 0.0) {
                rep.positive_definite = false;
            }
            for u in basis {
                for v in basis {
                    let a = bilinear(&w, mat_vec(&j, u), mat_vec(&j, v));
                    let b = bilinear(&w, u, v);
                    rep.j_invariance = rep.j_invariance.max((a - b).abs());
                    let gv = bilinear(&g, u, v);
                    let wj = bilinear(&w, u, mat_vec(&j, v));
                    rep.metric_identity = rep.metric_identity.max((gv - wj).abs());
                }
            }
        }
        Ok(rep)
    }

    pub fn geodesic_distance(&self, x: &ChartPoint, y: &ChartPoint) -> Result<f64> {
        self.validate_point(x)?;
        self.validate_point(y)?;
        match self.kind {
            ModelKind::FlatTorus => Ok(self.torus_distance(x, y)),
            ModelKind::RoundSphere => Ok(SPHERE_R2.sqrt() * angle_between(unit_vector(x), unit_vector(y))),
            ModelKind::PerturbedSphere => {
                if self.perturbation.iter().all(|(_, e)| *e == 0.0) {
                    return Ok(SPHERE_R2.sqrt() * angle_between(unit_vector(x), unit_vector(y)));
                }
                let (p, q) = (unit_vector(x), unit_vector(y));
                match self.shoot_geodesic(p, q) {
                    Some(d) => Ok(d),
                    None => Ok(self.graph_distance(p, q, 160)),
                }
            }
        }
    }

    fn torus_distance(&self, x: &ChartPoint, y: &ChartPoint) -> f64 {
        let [l1, l2] = self.periods;
        let mut best = f64::INFINITY;
        for m in -1..=1 {
            for n in -1..=1 {
                let dx = y.coords[0] - x.coords[0] + m as f64 * l1;
                let dy = y.coords[1] - x.coords[1] + n as f64 * l2;
                best = best.min(dx * dx + dy * dy);
            }
        }
        (self.flux_density() * best).sqrt()
    }

    /// Point at distance `d` along the unit-speed geodesic from x in direction u.
    pub fn geodesic_point(&self, x: &ChartPoint, u: &Tangent, d: f64) -> Result<ChartPoint> {
        let n = self.norm(u)?;
        if n == 0.0 {
            return Err(Error::Degenerate("zero direction".into()));
        }
        match self.kind {
            ModelKind::FlatTorus => {
                let s = d / n;
                Ok(self.torus_point(x.coords[0] + s * u.components[0], x.coords[1] + s * u.components[1]))
            }
            _ => {
                let (p, dp) = embed_jacobian(x);
                let v: Vec3 = std::array::from_fn(|i| dp[0][i] * u.components[0] + dp[1][i] * u.components[1]);
                // Unit speed in g: |v|_R3 scaled by sqrt(ρ r²).
                let vn = norm3(v);
                let speed = (self.conformal_factor(p) * SPHERE_R2).sqrt() * vn;
                let v0: Vec3 = std::array::from_fn(|i| v[i] * d / speed);
                let steps = ((d / 0.002).ceil() as usize).max(16);
                let (q, _) = self.integrate_geodesic(p, v0, steps);
                Ok(from_unit_vector(q))
            }
        }
    }

    /// Geodesic ODE on the unit sphere for the metric ρ·r²·g_unit, t ∈ [0, 1].
    /// Returns the endpoint and the g-length of the curve.
    fn integrate_geodesic(&self, p0: Vec3, v0: Vec3, steps: usize) -> (Vec3, f64) {
        let h = 1.0 / steps as f64;
        let rhs = |p: Vec3, v: Vec3| -> (Vec3, Vec3) {
            let rho = self.conformal_factor(p);
            let gr = self.conformal_factor_grad(p);
            // u = ½ log ρ; tangential gradient.
            let gu: Vec3 = std::array::from_fn(|i| 0.5 * gr[i] / rho);
            let pn = dot3(gu, p);
            let gt: Vec3 = std::array::from_fn(|i| gu[i] - pn * p[i]);
            let vv = dot3(v, v);
            let gv = dot3(gt, v);
            let a: Vec3 = std::array::from_fn(|i| -vv * p[i] - 2.0 * gv * v[i] + vv * gt[i]);
            (v, a)
        };
        let speed = |p: Vec3, v: Vec3| (self.conformal_factor(p) * SPHERE_R2).sqrt() * norm3(v);
        let (mut p, mut v) = (p0, v0);
        let mut len = 0.0;
        let mut s_prev = speed(p, v);
        for _ in 0..steps {
            let (k1p, k1v) = rhs(p, v);
            let (k2p, k2v) = rhs(axpy(p, 0.5 * h, k1p), axpy(v, 0.5 * h, k1v));
            let (k3p, k3v) = rhs(axpy(p, 0.5 * h, k2p), axpy(v, 0.5 * h, k2v));
            let (k4p, k4v) = rhs(axpy(p, h, k3p), axpy(v, h, k3v));
            p = std::array::from_fn(|i| p[i] + h / 6.0 * (k1p[i] + 2.0 * k2p[i] + 2.0 * k3p[i] + k4p[i]));
            v = std::array::from_fn(|i| v[i] + h / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]));
            let n = norm3(p);
            p = p.map(|c| c / n);
            let pv = dot3(p, v);
            v = std::array::from_fn(|i| v[i] - pv * p[i]);
            let s = speed(p, v);
            len += 0.5 * h * (s + s_prev);
            s_prev = s;
        }
        (p, len)
    }

    /// Distance by shooting: Newton on the initial velocity. None on failure.
    fn shoot_geodesic(&self, p: Vec3, q: Vec3) -> Option<f64> {
        let ang = angle_between(p, q);
        if ang < 1e-14 {
            return Some(0.0);
        }
        if ang > PI - 0.05 {
            return None;
        }
        let (e1, e2) = tangent_basis(p);
        // Round log map as the initial guess.
        let qp = dot3(q, p);
        let dir: Vec3 = std::array::from_fn(|i| q[i] - qp * p[i]);
        let dn = norm3(dir);
        let mut c = [dot3(dir, e1) / dn * ang, dot3(dir, e2) / dn * ang];
        let steps = 400;
        let (f1, f2) = tangent_basis(q);
        let residual = |c: [f64; 2]| -> ([f64; 2], f64) {
            let v: Vec3 = std::array::from_fn(|i| c[0] * e1[i] + c[1] * e2[i]);
            let (end, len) = self.integrate_geodesic(p, v, steps);
            let d: Vec3 = std::array::from_fn(|i| end[i] - q[i]);
            ([dot3(d, f1), dot3(d, f2)], len)
        };
        for _ in 0..30 {
            let (r, len) = residual(c);
            let rn = (r[0] * r[0] + r[1] * r[1]).sqrt();
            if rn < 1e-11 {
                return Some(len);
            }
            let eps = 1e-6;
            let (ra, _) = residual([c[0] + eps, c[1]]);
            let (rb, _) = residual([c[0], c[1] + eps]);
            let jac = [[(ra[0] - r[0]) / eps, (rb[0] - r[0]) / eps], [(ra[1] - r[1]) / eps, (rb[1] - r[1]) / eps]];
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            if det.abs() < 1e-14 {
                return None;
            }
            let d0 = (jac[1][1] * r[0] - jac[0][1] * r[1]) / det;
            let d1 = (-jac[1][0] * r[0] + jac[0][0] * r[1]) / det;
            c = [c[0] - d0, c[1] - d1];
        }
        None
    }

    /// Shortest path on a latitude–longitude graph with long-range edges.
    /// Used as the fallback for shooting and as a test oracle.
    pub fn graph_distance(&self, p: Vec3, q: Vec3, n_theta: usize) -> f64 {
        let n_phi = 2 * n_theta;
        let node = |i: usize, j: usize| -> Vec3 {
            let th = PI * (i as f64 + 0.5) / n_theta as f64;
            let ph = 2.0 * PI * j as f64 / n_phi as f64;
            [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]
        };
        let n = n_theta * n_phi + 2;
        let pts: Vec<Vec3> = (0..n)
            .map(|id| {
                if id == n - 2 {
                    p
                } else if id == n - 1 {
                    q
                } else {
                    node(id / n_phi, id % n_phi)
                }
            })
            .collect();
        let edge_len = |a: Vec3, b: Vec3| -> f64 {
            // Simpson rule along the chord-projected great circle.
            let ang = angle_between(a, b);
            let mid: Vec3 = std::array::from_fn(|i| a[i] + b[i]);
            let mn = norm3(mid);
            let mid = mid.map(|c| c / mn);
            let f = |x: Vec3| self.conformal_factor(x).sqrt();
            SPHERE_R2.sqrt() * ang * (f(a) + 4.0 * f(mid) + f(b)) / 6.0
        };
        // All primitive steps with |di|, |dj| ≤ 5: direction quantization costs < 0.5%.
        let mut offsets = Vec::new();
        for di in -5i64..=5 {
            for dj in -5i64..=5 {
                if gcd(di.unsigned_abs(), dj.unsigned_abs()) == 1 {
                    offsets.push((di, dj));
                }
            }
        }
        let neighbours = |id: usize| -> Vec<usize> {
            if id >= n - 2 {
                return Vec::new();
            }
            let (i, j) = ((id / n_phi) as i64, (id % n_phi) as i64);
            let mut out = Vec::with_capacity(offsets.len());
            for &(di, dj) in &offsets {
                let mut ii = i + di;
                let mut jj = j + dj;
                if ii < 0 {
                    ii = -ii - 1;
                    jj += n_phi as i64 / 2;
                } else if ii >= n_theta as i64 {
                    ii = 2 * n_theta as i64 - 1 - ii;
                    jj += n_phi as i64 / 2;
                }
                let jj = jj.rem_euclid(n_phi as i64);
                out.push(ii as usize * n_phi + jj as usize);
            }
            out
        };
        // The endpoints connect to all grid nodes within two cells.
        let reach = 2.5 * PI / n_theta as f64;
        let mut extra: Vec<Vec<usize>> = vec![Vec::new(); n];
        for id in 0..n - 2 {
            for e in [n - 2, n - 1] {
                if angle_between(pts[id], pts[e]) <= reach {
                    extra[id].push(e);
                    extra[e].push(id);
                }
            }
        }
        if angle_between(p, q) <= reach {
            extra[n - 2].push(n - 1);
        }
        let mut dist = vec![f64::INFINITY; n];
        let mut heap = BinaryHeap::new();
        dist[n - 2] = 0.0;
        heap.push(HeapItem(0.0, n - 2));
        while let Some(HeapItem(d, u)) = heap.pop() {
            if u == n - 1 {
                return d;
            }
            if d > dist[u] {
                continue;
            }
            for v in neighbours(u).into_iter().chain(extra[u].iter().copied()) {
                let nd = d + edge_len(pts[u], pts[v]);
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(HeapItem(nd, v));
                }
            }
        }
        dist[n - 1]
    }

    pub fn hamiltonian_vector_field(&self, h: &ObservableField, x: &ChartPoint) -> Result<Tangent> {
        let w = self.omega_at(x)?[0][1];
        let dh = h.differential(self, x)?;
        // ω(ξ, ·) = dH  ⇔  ξ = (H_y, −H_x)/ω₁₂
        Ok(Tangent { base: *x, components: [dh[1] / w, -dh[0] / w] })
    }

    /// Fixed-step RK4 in chart coordinates, switching sphere charts when |w| > 1.5.
    pub fn hamiltonian_flow(&self, h: &ObservableField, x0: &ChartPoint, t: f64, steps: usize) -> Result<ChartPoint> {
        self.validate_point(x0)?;
        if t == 0.0 {
            return Ok(*x0);
        }
        if steps == 0 {
            return Err(Error::Integrator("zero steps".into()));
        }
        let dt = t / steps as f64;
        if !(dt.abs() > 1e-300) {
            return Err(Error::Integrator("step size underflow".into()));
        }
        let mut x = self.canonical(x0)?;
        let field = |p: [f64; 2], chart: Chart| -> Result<[f64; 2]> {
            let pt = ChartPoint { chart, coords: p };
            let pt = if chart == Chart::Torus { self.torus_point(p[0], p[1]) } else { pt };
            Ok(self.hamiltonian_vector_field(h, &pt)?.components)
        };
        for _ in 0..steps {
            let c = x.chart;
            let p = x.coords;
            let k1 = field(p, c)?;
            let k2 = field([p[0] + 0.5 * dt * k1[0], p[1] + 0.5 * dt * k1[1]], c)?;
            let k3 = field([p[0] + 0.5 * dt * k2[0], p[1] + 0.5 * dt * k2[1]], c)?;
            let k4 = field([p[0] + dt * k3[0], p[1] + dt * k3[1]], c)?;
            let np = [
                p[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                p[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            ];
            x = match c {
                Chart::Torus => self.torus_point(np[0], np[1]),
                _ => {
                    let y = ChartPoint { chart: c, coords: np };
                    self.validate_point(&y).map_err(|_| Error::Integrator("step left chart".into()))?;
                    if np[0] * np[0] + np[1] * np[1] > 2.25 {
                        self.canonical(&y)?
                    } else {
                        y
                    }
                }
            };
        }
        Ok(x)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CompatibilityReport {
    /// max |ω(Ju,Jv) − ω(u,v)|
    pub j_invariance: f64,
    /// max |g(u,v) − ω(u,Jv)|
    pub metric_identity: f64,
    pub metric_symmetry: f64,
    pub j_squared: f64,
    pub positive_definite: bool,
}

impl Default for CompatibilityReport {
    fn default() -> Self {
        CompatibilityReport { j_invariance: 0.0, metric_identity: 0.0, metric_symmetry: 0.0, j_squared: 0.0, positive_definite: true }
    }
}

impl CompatibilityReport {
    pub fn max_violation(&self) -> f64 {
        self.j_invariance.max(self.metric_identity).max(self.metric_symmetry).max(self.j_squared)
    }
}

/// Smooth real function on a model with chart derivatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableField {
    pub name: String,
    pub kind: ObservableKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    Constant(f64),
    /// c₀ + Σ c·Y on the sphere.
    Sphere { constant: f64, terms: Vec<(Harmonic, f64)> },
    /// Σ a·cos(2π(m x/L1 + n y/L2)) + b·sin(…) on the torus.
    TorusFourier { modes: Vec<TorusMode> },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusMode {
    pub m: i32,
    pub n: i32,
    pub cos: f64,
    pub sin: f64,
}

impl ObservableField {
    pub fn constant(c: f64) -> Self {
        ObservableField { name: format!("const({c})"), kind: ObservableKind::Constant(c) }
    }

    /// Height Z of the unit-sphere embedding.
    pub fn height() -> Self {
        ObservableField { name: "height".into(), kind: ObservableKind::Sphere { constant: 0.0, terms: vec![(Harmonic::Z, 1.0)] } }
    }

    pub fn sphere(name: &str, constant: f64, terms: Vec<(Harmonic, f64)>) -> Self {
        ObservableField { name: name.into(), kind: ObservableKind::Sphere { constant, terms } }
    }

    pub fn torus(name: &str, modes: Vec<TorusMode>) -> Self {
        ObservableField { name: name.into(), kind: ObservableKind::TorusFourier { modes } }
    }

    pub fn value(&self, m: &ManifoldModel, x: &ChartPoint) -> Result<f64> {
        m.validate_point(x)?;
        Ok(match &self.kind {
            ObservableKind::Constant(c) => *c,
            ObservableKind::Sphere { constant, terms } => {
                check_sphere(m)?;
                let p = unit_vector(x);
                constant + terms.iter().map(|(h, c)| c * h.eval(p)).sum::<f64>()
            }
            ObservableKind::TorusFourier { modes } => {
                check_torus(m)?;
                modes
                    .iter()
                    .map(|md| {
                        let a = torus_phase(m, md, x);
                        md.cos * a.cos() + md.sin * a.sin()
                    })
                    .sum()
            }
        })
    }

    /// Chart partials (∂H/∂x, ∂H/∂y).
    pub fn differential(&self, m: &ManifoldModel, x: &ChartPoint) -> Result<[f64; 2]> {
        m.validate_point(x)?;
        Ok(match &self.kind {
            ObservableKind::Constant(_) => [0.0, 0.0],
            ObservableKind::Sphere { terms, .. } => {
                check_sphere(m)?;
                let (p, dp) = embed_jacobian(x);
                let mut g = [0.0; 3];
                for (h, c) in terms {
                    let d = h.grad(p);
                    for i in 0..3 {
                        g[i] += c * d[i];
                    }
                }
                [dot3(g, dp[0]), dot3(g, dp[1])]
            }
            ObservableKind::TorusFourier { modes } => {
                check_torus(m)?;
                let [l1, l2] = m.periods;
                let mut d = [0.0; 2];
                for md in modes {
                    let a = torus_phase(m, md, x);
                    let da = -md.cos * a.sin() + md.sin * a.cos();
                    d[0] += da * 2.0 * PI * md.m as f64 / l1;
                    d[1] += da * 2.0 * PI * md.n as f64 / l2;
                }
                d
            }
        })
    }

    /// Bounds [min, max] of the field over the model (sampled).
    pub fn range(&self, m: &ManifoldModel) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for x in crate::sampling::uniform_grid(m, 64) {
            if let Ok(v) = self.value(m, &x) {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }
}

fn torus_phase(m: &ManifoldModel, md: &TorusMode, x: &ChartPoint) -> f64 {
    2.0 * PI * (md.m as f64 * x.coords[0] / m.periods[0] + md.n as f64 * x.coords[1] / m.periods[1])
}

fn check_sphere(m: &ManifoldModel) -> Result<()> {
    if m.is_sphere() {
        Ok(())
    } else {
        Err(Error::InvalidModel("sphere observable on a torus".into()))
    }
}

fn check_torus(m: &ManifoldModel) -> Result<()> {
    if m.is_sphere() {
        Err(Error::InvalidModel("torus observable on a sphere".into()))
    } else {
        Ok(())
    }
}

/// Unit vector of a sphere chart point.
pub fn unit_vector(x: &ChartPoint) -> Vec3 {
    embed_jacobian(x).0
}

/// Unit vector and its chart partials (∂/∂x, ∂/∂y).
pub fn embed_jacobian(x: &ChartPoint) -> (Vec3, [Vec3; 2]) {
    let [a, b] = x.coords;
    let d = 1.0 + a * a + b * b;
    let d2 = d * d;
    let p = [2.0 * a / d, 2.0 * b / d, 2.0 / d - 1.0];
    let dx = [2.0 / d - 4.0 * a * a / d2, -4.0 * a * b / d2, -4.0 * a / d2];
    let dy = [-4.0 * a * b / d2, 2.0 / d - 4.0 * b * b / d2, -4.0 * b / d2];
    match x.chart {
        Chart::South => ([p[0], -p[1], -p[2]], [[dx[0], -dx[1], -dx[2]], [dy[0], -dy[1], -dy[2]]]),
        _ => (p, [dx, dy]),
    }
}

/// Chart point for a unit vector: north chart on the upper hemisphere.
pub fn from_unit_vector(p: Vec3) -> ChartPoint {
    let n = norm3(p);
    let [x, y, z] = p.map(|c| c / n);
    if z >= 0.0 {
        ChartPoint::new(Chart::North, x / (1.0 + z), y / (1.0 + z))
    } else {
        ChartPoint::new(Chart::South, x / (1.0 - z), -y / (1.0 - z))
    }
}

/// Spherical angles (θ, φ) of a sphere chart point, φ ∈ [0, 2π).
pub fn spherical_angles(x: &ChartPoint) -> (f64, f64) {
    let [a, b] = x.coords;
    let rho = (a * a + b * b).sqrt();
    match x.chart {
        Chart::South => (PI - 2.0 * rho.atan(), (-b).atan2(a).rem_euclid(2.0 * PI)),
        _ => (2.0 * rho.atan(), b.atan2(a).rem_euclid(2.0 * PI)),
    }
}

/// Chart point from spherical angles, in the chart covering that hemisphere.
pub fn from_angles(theta: f64, phi: f64) -> ChartPoint {
    if theta <= PI / 2.0 {
        let r = (theta / 2.0).tan();
        ChartPoint::new(Chart::North, r * phi.cos(), r * phi.sin())
    } else {
        let r = ((PI - theta) / 2.0).tan();
        ChartPoint::new(Chart::South, r * phi.cos(), -r * phi.sin())
    }
}

pub fn angle_between(a: Vec3, b: Vec3) -> f64 {
    let c = cross3(a, b);
    norm3(c).atan2(dot3(a, b))
}

fn tangent_basis(p: Vec3) -> (Vec3, Vec3) {
    let t = if p[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let tp = dot3(t, p);
    let e1: Vec3 = std::array::from_fn(|i| t[i] - tp * p[i]);
    let n = norm3(e1);
    let e1 = e1.map(|c| c / n);
    (e1, cross3(p, e1))
}

pub fn dot3(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross3(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn norm3(a: Vec3) -> f64 {
    dot3(a, a).sqrt()
}

fn axpy(a: Vec3, s: f64, b: Vec3) -> Vec3 {
    std::array::from_fn(|i| a[i] + s * b[i])
}

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

pub fn mat_vec(a: &Mat2, v: [f64; 2]) -> [f64; 2] {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

pub fn bilinear(a: &Mat2, u: [f64; 2], v: [f64; 2]) -> f64 {
    let av = mat_vec(a, v);
    u[0] * av[0] + u[1] * av[1]
}

#[derive(PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(self.1.cmp(&other.1))
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
