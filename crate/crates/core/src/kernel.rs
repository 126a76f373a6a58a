//! Coherent states and the projector kernel of the band.
//!
//! Sections are Z-normalized: e_j = s_j/√(2π), the L²-orthonormal band
//! sections rescaled by the fiber length of the circle bundle, so that
//! ν_k = Σ|e_j|² and (2π)∫ν_k = dim ℋ_k. The coherent state at p has
//! coefficients ψ_j = conj(e_j(p)) and its derivative along v has
//! coefficients conj((∇_v e_j)(p)); then ⟨Ψ(p), f⟩ = f(p) for f in the band.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{bilinear, ChartPoint, ManifoldModel, Tangent};
use crate::linalg::cnorm;
use crate::quadrature::AreaQuadrature;
use crate::spectral::{band_quadrature, SpectralBand};

/// Exponent κ of the off-diagonal profile e^{−κ k d²} under the geometry's
/// normalization (area 2π, curvature −iω).
pub const GAUSS_RATE: f64 = 0.25;

/// Fiber length of the circle bundle.
pub fn fiber_factor() -> f64 {
    (2.0 * PI).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherentJet {
    pub base: ChartPoint,
    pub psi: Vec<C64>,
    /// dΨ along e₁ and e₂.
    pub dpsi: [Vec<C64>; 2],
    /// g-orthonormal frame, e₂ = J e₁.
    pub frame: [Tangent; 2],
}

impl CoherentJet {
    pub fn nu(&self) -> f64 {
        cnorm(&self.psi).powi(2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSample {
    pub p: ChartPoint,
    pub q: ChartPoint,
    pub value: C64,
    pub modulus: f64,
}

/// Gram–Schmidt of the chart coordinate vectors under g.
pub fn horizontal_frame(m: &ManifoldModel, p: &ChartPoint) -> Result<[Tangent; 2]> {
    let g = m.metric_at(p)?;
    let n1 = g[0][0].sqrt();
    let e1 = [1.0 / n1, 0.0];
    let proj = bilinear(&g, e1, [0.0, 1.0]);
    let mut e2 = [-proj * e1[0], 1.0 - proj * e1[1]];
    let n2 = bilinear(&g, e2, e2).sqrt();
    e2 = [e2[0] / n2, e2[1] / n2];
    Ok([Tangent { base: *p, components: e1 }, Tangent { base: *p, components: e2 }])
}

/// Z-normalized section values at p.
pub fn section_values(band: &SpectralBand, p: &ChartPoint) -> Result<Vec<C64>> {
    let s = fiber_factor();
    Ok(band.values(p)?.into_iter().map(|v| v / s).collect())
}

/// Coefficient vector of Ψ_k(p).
pub fn coherent_state(band: &SpectralBand, p: &ChartPoint) -> Result<Vec<C64>> {
    Ok(section_values(band, p)?.into_iter().map(|v| v.conj()).collect())
}

pub fn coherent_jet(band: &SpectralBand, p: &ChartPoint) -> Result<CoherentJet> {
    let jet = band.jet(p)?;
    let frame = horizontal_frame(band.model(), p)?;
    let s = fiber_factor();
    let psi = jet.values.iter().map(|v| v.conj() / s).collect();
    let dir = |t: &Tangent| -> Vec<C64> {
        let [a, b] = t.components;
        jet.dx.iter().zip(&jet.dy).map(|(x, y)| (x * a + y * b).conj() / s).collect()
    };
    let dpsi = [dir(&frame[0]), dir(&frame[1])];
    Ok(CoherentJet { base: *p, psi, dpsi, frame })
}

/// Π_k(p, q) = Σ e_j(p) conj(e_j(q)), values in the frames of the points' charts.
pub fn projector_kernel(band: &SpectralBand, p: &ChartPoint, q: &ChartPoint) -> Result<KernelSample> {
    let a = section_values(band, p)?;
    let b = section_values(band, q)?;
    let value: C64 = a.iter().zip(&b).map(|(x, y)| x * y.conj()).sum();
    Ok(KernelSample { p: *p, q: *q, value, modulus: value.norm() })
}

pub fn nu(band: &SpectralBand, p: &ChartPoint) -> Result<f64> {
    Ok(section_values(band, p)?.iter().map(|v| v.norm_sqr()).sum())
}

/// max over points p and basis elements f = e_j of |f(p) − ⟨Ψ_k(p), f⟩|, the
/// inner product being the L² integral 2π∫ Π_k(p, q) f(q) dA(q) by the band's
/// own quadrature.
pub fn reproducing_defect(band: &SpectralBand, points: &[ChartPoint]) -> Result<f64> {
    let (_, w, vals) = band_quadrature(band)?;
    let n = band.dim();
    let s2 = fiber_factor() * fiber_factor();
    // G_ij = 2π Σ_q w conj(e_i(q)) e_j(q), in Z-normalized values.
    let mut g = vec![C64::new(0.0, 0.0); n * n];
    for (v, wq) in vals.iter().zip(&w) {
        let c = 2.0 * PI * wq / s2;
        for i in 0..n {
            let a = v[i].conj() * c;
            for j in 0..n {
                g[i * n + j] += a * v[j];
            }
        }
    }
    let mut worst: f64 = 0.0;
    for p in points {
        let e = section_values(band, p)?;
        for j in 0..n {
            let inner: C64 = (0..n).map(|i| e[i] * g[i * n + j]).sum();
            worst = worst.max((e[j] - inner).norm());
        }
    }
    Ok(worst)
}

/// (2π)∫_X ν_k dA by tensor quadrature.
pub fn trace_integral(band: &SpectralBand, n_t: usize, n_phi: usize) -> Result<f64> {
    let q = AreaQuadrature::new(band.model(), n_t, n_phi);
    let mut acc = 0.0;
    for (x, w) in q.points.iter().zip(&q.weights) {
        acc += w * nu(band, x)?;
    }
    Ok(2.0 * PI * acc)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub k: u32,
    pub d: f64,
    pub ratio: f64,
    /// e^{−κ k d²}.
    pub gauss: f64,
    pub deviation: f64,
    /// e^{−k d²/2}, the literal rate under the other normalization (audit only).
    pub gauss_literal: f64,
    pub deviation_literal: f64,
}

/// |Π_k(p, q)|/ν_k(p) along the geodesic from p in direction u.
pub fn offdiag_profile(band: &SpectralBand, p: &ChartPoint, u: &Tangent, radii: &[f64]) -> Result<Vec<ProfileRow>> {
    let m = band.model();
    let k = band.k();
    let kf = k as f64;
    let e_p = section_values(band, p)?;
    let nu_p: f64 = e_p.iter().map(|v| v.norm_sqr()).sum();
    radii
        .iter()
        .map(|&d| {
            if d < 0.0 {
                return Err(Error::InvalidArgument("negative radius".into()));
            }
            let q = if d == 0.0 { *p } else { m.geodesic_point(p, u, d)? };
            let e_q = section_values(band, &q)?;
            let pi: C64 = e_p.iter().zip(&e_q).map(|(a, b)| a * b.conj()).sum();
            let ratio = pi.norm() / nu_p;
            let gauss = (-GAUSS_RATE * kf * d * d).exp();
            let gauss_literal = (-0.5 * kf * d * d).exp();
            Ok(ProfileRow {
                k,
                d,
                ratio,
                gauss,
                deviation: (ratio - gauss).abs(),
                gauss_literal,
                deviation_literal: (ratio - gauss_literal).abs(),
            })
        })
        .collect()
}

pub fn profile_csv(rows: &[ProfileRow]) -> String {
    let mut s = String::from("k,d,ratio,gauss,deviation,gauss_literal,deviation_literal\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{:e},{:e},{:e},{:e},{:e}\n",
            r.k, r.d, r.ratio, r.gauss, r.deviation, r.gauss_literal, r.deviation_literal
        ));
    }
    s
}

/// Closed-form Szegő modulus on the round sphere: ν·|⟨z_p, z_q⟩|^k with
/// ν = (k+1)/(4π²) and |⟨z_p, z_q⟩| = cos(angle/2).
pub fn szego_modulus(k: u32, p: &ChartPoint, q: &ChartPoint) -> f64 {
    let a = crate::geometry::angle_between(crate::geometry::unit_vector(p), crate::geometry::unit_vector(q));
    (k as f64 + 1.0) / (4.0 * PI * PI) * (0.5 * a).cos().abs().powi(k as i32)
}

/// Largest gap between the kernel moduli of two bands over all pairs of
/// `points`, relative to √(ν(p)ν(q)) of the reference band `b`.
pub fn kernel_agreement(a: &SpectralBand, b: &SpectralBand, points: &[ChartPoint]) -> Result<f64> {
    let va = points.iter().map(|p| section_values(a, p)).collect::<Result<Vec<_>>>()?;
    let vb = points.iter().map(|p| section_values(b, p)).collect::<Result<Vec<_>>>()?;
    let nub: Vec<f64> = vb.iter().map(|v| v.iter().map(|c| c.norm_sqr()).sum()).collect();
    let modulus = |v: &[Vec<C64>], i: usize, j: usize| -> f64 { v[i].iter().zip(&v[j]).map(|(x, y)| x * y.conj()).sum::<C64>().norm() };
    let mut worst: f64 = 0.0;
    for i in 0..points.len() {
        for j in i..points.len() {
            let d = (modulus(&va, i, j) - modulus(&vb, i, j)).abs() / (nub[i] * nub[j]).sqrt();
            worst = worst.max(d);
        }
    }
    Ok(worst)
}
