//! Prequantum line bundle L^⊗k: chart potentials, transitions, discrete sections.
//!
//! Gauges: on the sphere the unitary frames of the north and south charts,
//! with ψ_S = e^{−ikφ} ψ_N; on the torus the Landau gauge A = c·x dy on the
//! covering plane with ψ(x + L1, y) = e^{ikcL1y} ψ(x, y). An optional gauge
//! twist χ replaces A by A + dχ and every section value ψ by e^{ikχ} ψ.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{embed_jacobian, spherical_angles, Chart, ChartPoint, ManifoldModel, ObservableField, Tangent, Vec3};
use crate::grid::{GridEvaluator, SectionGrid};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleData {
    pub k: u32,
    pub model: ManifoldModel,
    pub twist: Option<ObservableField>,
}

pub fn build_bundle(m: &ManifoldModel, k: i64) -> Result<BundleData> {
    if k < 0 {
        return Err(Error::InvalidArgument(format!("tensor power must be nonnegative, got {k}")));
    }
    let q = m.total_area() / (2.0 * PI);
    if (q - q.round()).abs() > 1e-12 {
        return Err(Error::InvalidModel("symplectic class is not integral".into()));
    }
    Ok(BundleData { k: k as u32, model: m.clone(), twist: None })
}

impl BundleData {
    pub fn with_twist(mut self, chi: ObservableField) -> Self {
        self.twist = Some(chi);
        self
    }

    pub fn kf(&self) -> f64 {
        self.k as f64
    }

    /// e^{ikχ(x)}; 1 without a twist.
    pub fn twist_factor(&self, x: &ChartPoint) -> C64 {
        match &self.twist {
            None => C64::new(1.0, 0.0),
            Some(chi) => {
                let v = chi.value(&self.model, x).unwrap_or(0.0);
                C64::from_polar(1.0, self.kf() * v)
            }
        }
    }

    /// Connection potential (A_x, A_y) in the frame of the point's chart; ∇ = d − ikA.
    pub fn potential(&self, x: &ChartPoint) -> Result<[f64; 2]> {
        self.model.validate_point(x)?;
        let mut a = match x.chart {
            Chart::Torus => [0.0, self.model.flux_density() * x.coords[0]],
            _ => {
                let [u, v] = x.coords;
                let d = 1.0 + u * u + v * v;
                let (p, dp) = embed_jacobian(x);
                let gf = self.model.potential_correction_grad(p);
                let (fx, fy) = (dot(gf, dp[0]), dot(gf, dp[1]));
                [-v / d - fy, u / d + fx]
            }
        };
        if let Some(chi) = &self.twist {
            let d = chi.differential(&self.model, x)?;
            a[0] += d[0];
            a[1] += d[1];
        }
        Ok(a)
    }

    /// Factor g with ψ_to = g·ψ_from at x (sphere charts).
    pub fn transition(&self, from: Chart, to: Chart, x: &ChartPoint) -> Result<C64> {
        self.model.validate_point(x)?;
        if from == to {
            return Ok(C64::new(1.0, 0.0));
        }
        if !self.model.is_sphere() {
            return Err(Error::InvalidArgument("torus has a single chart".into()));
        }
        let (_, phi) = spherical_angles(x);
        let s = if to == Chart::South { -1.0 } else { 1.0 };
        Ok(C64::from_polar(1.0, s * self.kf() * phi))
    }

    /// Torus clutching: ψ(x + q1·L1, y + q2·L2) = factor · ψ(x, y).
    pub fn clutching(&self, q1: i64, y: f64) -> C64 {
        let c = self.model.flux_density();
        C64::from_polar(1.0, self.kf() * c * self.model.periods[0] * q1 as f64 * y)
    }

    /// Potential components (A_θ, A_φ) in spherical angles, in the given sphere gauge.
    pub(crate) fn potential_angles(&self, gauge: Chart, theta: f64, phi: f64) -> [f64; 2] {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        let p = [st * cp, st * sp, ct];
        let dth = [ct * cp, ct * sp, -st];
        let eph = [-sp, cp, 0.0];
        let gf = self.model.potential_correction_grad(p);
        let mut a_th = -dot(gf, eph);
        let mut a_ph = 0.5 * (1.0 - ct) + st * dot(gf, dth);
        if gauge == Chart::South {
            a_ph -= 1.0;
        }
        if let Some(chi) = &self.twist {
            if let crate::geometry::ObservableKind::Sphere { terms, .. } = &chi.kind {
                let mut g = [0.0; 3];
                for (h, c) in terms {
                    let d = h.grad(p);
                    for i in 0..3 {
                        g[i] += c * d[i];
                    }
                }
                a_th += dot(g, dth);
                a_ph += st * dot(g, eph);
            }
        }
        [a_th, a_ph]
    }

    /// Potential components (A_x, A_y) on the torus covering plane.
    pub(crate) fn potential_plane(&self, x: f64, y: f64) -> [f64; 2] {
        let mut a = [0.0, self.model.flux_density() * x];
        if let Some(chi) = &self.twist {
            let p = self.model.torus_point(x, y);
            if let Ok(d) = chi.differential(&self.model, &p) {
                a[0] += d[0];
                a[1] += d[1];
            }
        }
        a
    }
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Section of L^⊗k sampled on a grid, each node value in the node's storage gauge.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteSection {
    pub k: u32,
    pub grid: SectionGrid,
    pub values: Vec<C64>,
}

impl DiscreteSection {
    pub fn zeros(b: &BundleData, grid: &SectionGrid) -> Self {
        DiscreteSection { k: b.k, grid: grid.clone(), values: vec![C64::new(0.0, 0.0); grid.len()] }
    }

    /// Sample a section given as a function of chart points, valued in the
    /// frame of the point's chart. Each node is presented in its storage chart.
    pub fn from_fn(b: &BundleData, grid: &SectionGrid, f: impl Fn(&ChartPoint) -> C64) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                let p = grid.node_point(&b.model, i);
                f(&b.model.to_chart(&p, grid.node_gauge(i)).unwrap_or(p))
            })
            .collect();
        DiscreteSection { k: b.k, grid: grid.clone(), values }
    }

    fn check(&self, b: &BundleData) -> Result<()> {
        if self.k != b.k {
            return Err(Error::GridMismatch(format!("section has k = {}, bundle k = {}", self.k, b.k)));
        }
        if self.values.len() != self.grid.len() {
            return Err(Error::GridMismatch("value count differs from grid size".into()));
        }
        Ok(())
    }
}

/// (∇_v s)(x) from the transported interpolation stencil of the grid.
pub fn covariant_derivative(b: &BundleData, s: &DiscreteSection, x: &ChartPoint, v: &Tangent) -> Result<C64> {
    s.check(b)?;
    let v = b.model.tangent_to_chart(v, x.chart)?;
    if (v.base.coords[0] - x.coords[0]).abs() > 1e-12 || (v.base.coords[1] - x.coords[1]).abs() > 1e-12 {
        return Err(Error::InvalidArgument("tangent vector is not based at x".into()));
    }
    let ev = GridEvaluator::new(b, &s.grid, x)?;
    let (_, dx, dy) = ev.apply(&s.values);
    Ok(dx * v.components[0] + dy * v.components[1])
}

/// Value of a discrete section at an arbitrary point, in the point's chart frame.
pub fn section_value(b: &BundleData, s: &DiscreteSection, x: &ChartPoint) -> Result<C64> {
    s.check(b)?;
    let ev = GridEvaluator::new(b, &s.grid, x)?;
    Ok(ev.apply(&s.values).0)
}

/// Covariant derivative along a grid axis at every node: (∇_θ, ∇_φ) on the
/// sphere, (∇_x, ∇_y) on the torus. Fourth-order centered differences.
pub fn axis_derivative(b: &BundleData, s: &DiscreteSection, axis: usize) -> Result<DiscreteSection> {
    s.check(b)?;
    if axis > 1 {
        return Err(Error::InvalidArgument("axis must be 0 or 1".into()));
    }
    let values = crate::grid::axis_derivative(b, &s.grid, &s.values, axis);
    Ok(DiscreteSection { k: s.k, grid: s.grid.clone(), values })
}

/// ⟨s1, s2⟩ over X (conjugate-linear in s1), weighted by the area of g.
pub fn l2_inner_product(b: &BundleData, s1: &DiscreteSection, s2: &DiscreteSection) -> Result<C64> {
    s1.check(b)?;
    s2.check(b)?;
    if s1.grid != s2.grid {
        return Err(Error::GridMismatch("sections live on different grids".into()));
    }
    let mass = s1.grid.mass(&b.model);
    Ok(s1.values.iter().zip(&s2.values).zip(&mass).map(|((a, c), w)| a.conj() * c * *w).sum())
}

/// Closed-form monopole section of lowest level: w^a in the unitary north
/// frame (round sphere), evaluated in the frame of the point's chart.
pub fn monopole_section(b: &BundleData, a: u32, x: &ChartPoint) -> C64 {
    let k = b.k as i32;
    let [u, v] = x.coords;
    let w = C64::new(u, v);
    let d = 1.0 + u * u + v * v;
    let amp = d.powf(-(k as f64) / 2.0);
    let val = match x.chart {
        Chart::South => w.powi(k - a as i32) * amp,
        _ => w.powi(a as i32) * amp,
    };
    val * b.twist_factor(x)
}
