//! The coherent-state map into projective space: Fubini–Study pullbacks,
//! holomorphy defects, injectivity and curvature of image curves.
//!
//! Tangent vectors of the map are taken in homogeneous coordinates and
//! projected onto the orthogonal complement of the state, scaled by √2 so
//! that the pulled-back Hermitian form is h = 2·(FS form).

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ChartPoint, ManifoldModel, Tangent};
use crate::kernel::{coherent_jet, coherent_state, section_values, CoherentJet};
use crate::linalg::{cdot, cnorm};
use crate::sampling::random_point;
use crate::series::ConvergenceSeries;
use crate::spectral::SpectralBand;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PullbackResult {
    pub base: ChartPoint,
    /// h(e_i, e_j) in the g-orthonormal frame of the jet.
    pub h: [[C64; 2]; 2],
    pub g_pull: [[f64; 2]; 2],
    pub omega_pull: [[f64; 2]; 2],
    pub nu: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoloSplit {
    pub base: ChartPoint,
    pub norm_del: f64,
    pub norm_delbar: f64,
    /// ‖dF(Je₁) − J⁰dF(e₁)‖².
    pub intertwining: f64,
}

/// h from a coherent jet:
/// ½h(u,v) = ⟨dΨ(v),dΨ(u)⟩/‖Ψ‖² − ⟨dΨ(v),Ψ⟩⟨Ψ,dΨ(u)⟩/‖Ψ‖⁴.
pub fn pullback_from_jet(jet: &CoherentJet) -> PullbackResult {
    let nu = jet.nu();
    let mut h = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let (du, dv) = (&jet.dpsi[i], &jet.dpsi[j]);
            let a = cdot(dv, du) / nu;
            let b = cdot(dv, &jet.psi) * cdot(&jet.psi, du) / (nu * nu);
            h[i][j] = (a - b) * 2.0;
        }
    }
    let g_pull = std::array::from_fn(|i| std::array::from_fn(|j| h[i][j].re));
    let omega_pull = std::array::from_fn(|i| std::array::from_fn(|j| h[i][j].im));
    PullbackResult { base: jet.base, h, g_pull, omega_pull, nu }
}

pub fn pullback_h(band: &SpectralBand, p: &ChartPoint) -> Result<PullbackResult> {
    Ok(pullback_from_jet(&coherent_jet(band, p)?))
}

/// |(1/k)F*Ω − ω|_g at one point (ω(e₁, e₂) = 1 in the frame).
pub fn symplectic_error(r: &PullbackResult, k: u32) -> f64 {
    let k = k as f64;
    (r.omega_pull[0][1] / k - 1.0).abs().max((r.omega_pull[1][0] / k + 1.0).abs())
}

/// |(1/k)F*g⁰ − g|_g at one point (operator norm).
pub fn metric_error(r: &PullbackResult, k: u32) -> f64 {
    let k = k as f64;
    let a = r.g_pull[0][0] / k - 1.0;
    let d = r.g_pull[1][1] / k - 1.0;
    let b = 0.5 * (r.g_pull[0][1] + r.g_pull[1][0]) / k;
    let m = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    (m + rad).abs().max((m - rad).abs())
}

/// Per-band sup errors over a sample set.
pub fn band_sup_errors(band: &SpectralBand, samples: &[ChartPoint]) -> Result<(f64, f64)> {
    let mut es: f64 = 0.0;
    let mut eg: f64 = 0.0;
    for p in samples {
        let r = pullback_h(band, p)?;
        es = es.max(symplectic_error(&r, band.k()));
        eg = eg.max(metric_error(&r, band.k()));
    }
    Ok((es, eg))
}

/// Error series over a k sweep: (symplectic, metric).
pub fn sup_error(bands: &[SpectralBand], samples: &[ChartPoint]) -> Result<(ConvergenceSeries, ConvergenceSeries)> {
    let mut s = Vec::new();
    let mut g = Vec::new();
    for b in bands {
        let (es, eg) = band_sup_errors(b, samples)?;
        s.push((b.k() as f64, es));
        g.push((b.k() as f64, eg));
    }
    Ok((ConvergenceSeries::new("symplectic sup error", s), ConvergenceSeries::new("metric sup error", g)))
}

/// √2·P(∇_u e)/‖e‖ for the frame vectors, with e the unconjugated section vector.
pub fn tangent_images(jet: &CoherentJet) -> [Vec<C64>; 2] {
    let e: Vec<C64> = jet.psi.iter().map(|v| v.conj()).collect();
    let n = cnorm(&e);
    let unit: Vec<C64> = e.iter().map(|v| v / n).collect();
    let img = |d: &Vec<C64>| -> Vec<C64> {
        let de: Vec<C64> = d.iter().map(|v| v.conj()).collect();
        let c = cdot(&unit, &de);
        de.iter().zip(&unit).map(|(x, u)| (x - u * c) * (std::f64::consts::SQRT_2 / n)).collect()
    };
    [img(&jet.dpsi[0]), img(&jet.dpsi[1])]
}

/// A^± e₁ = ½[T₁ ∓ iT₂].
pub fn split_vectors(t: &[Vec<C64>; 2]) -> (Vec<C64>, Vec<C64>) {
    let i = C64::new(0.0, 1.0);
    let plus = t[0].iter().zip(&t[1]).map(|(a, b)| 0.5 * (a - i * b)).collect();
    let minus = t[0].iter().zip(&t[1]).map(|(a, b)| 0.5 * (a + i * b)).collect();
    (plus, minus)
}

/// ∂/∂̄ split of dF at p. A complex-(anti)linear map on the 2-plane has the
/// same norm on every unit vector, so the operator norms are |A^± e₁|.
pub fn dbar_split(band: &SpectralBand, p: &ChartPoint) -> Result<HoloSplit> {
    let jet = coherent_jet(band, p)?;
    let t = tangent_images(&jet);
    let (plus, minus) = split_vectors(&t);
    let i = C64::new(0.0, 1.0);
    let inter: f64 = t[1].iter().zip(&t[0]).map(|(b, a)| (b - i * a).norm_sqr()).sum();
    Ok(HoloSplit { base: *p, norm_del: cnorm(&plus), norm_delbar: cnorm(&minus), intertwining: inter })
}

/// Fubini–Study distance arccos(|⟨Ψ(p),Ψ(q)⟩|/(‖Ψ(p)‖‖Ψ(q)‖)).
pub fn fs_distance(band: &SpectralBand, p: &ChartPoint, q: &ChartPoint) -> Result<f64> {
    let a = coherent_state(band, p)?;
    let b = coherent_state(band, q)?;
    Ok(fs_between(&a, &b))
}

pub fn fs_between(a: &[C64], b: &[C64]) -> f64 {
    let c = cdot(a, b).norm() / (cnorm(a) * cnorm(b));
    c.clamp(0.0, 1.0).acos()
}

/// FS distances below this count as collisions.
pub const COLLISION_FS: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectivityReport {
    pub k: u32,
    pub delta: f64,
    pub pairs_checked: usize,
    pub min_fs: f64,
    /// (pair index, FS distance) of colliding pairs.
    pub collisions: Vec<(usize, f64)>,
}

/// Random pairs at geodesic distance ≥ δ.
pub fn separated_pairs(m: &ManifoldModel, count: usize, delta: f64, seed: u64) -> Result<Vec<(ChartPoint, ChartPoint)>> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument("separation δ must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count {
        tries += 1;
        if tries > 100 * count + 1000 {
            return Err(Error::Degenerate(format!("could not find {count} pairs with separation {delta}")));
        }
        let p = random_point(m, &mut rng);
        let q = random_point(m, &mut rng);
        if m.geodesic_distance(&p, &q)? >= delta {
            out.push((p, q));
        }
    }
    Ok(out)
}

/// FS distances over δ-separated pairs; pairs closer than δ are rejected.
pub fn injectivity_scan(band: &SpectralBand, pairs: &[(ChartPoint, ChartPoint)], delta: f64) -> Result<InjectivityReport> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument("separation δ must be positive".into()));
    }
    let m = band.model();
    let mut min_fs = f64::INFINITY;
    let mut collisions = Vec::new();
    for (i, (p, q)) in pairs.iter().enumerate() {
        if m.geodesic_distance(p, q)? < delta {
            return Err(Error::InvalidArgument(format!("pair {i} is closer than δ = {delta}")));
        }
        let d = fs_distance(band, p, q)?;
        min_fs = min_fs.min(d);
        if d < COLLISION_FS {
            collisions.push((i, d));
        }
    }
    Ok(InjectivityReport { k: band.k(), delta, pairs_checked: pairs.len(), min_fs, collisions })
}

/// Norm, in the metric h, of the covariant acceleration of F∘α at p, α the
/// unit-speed geodesic through p with direction u. Second difference of the
/// horizontal lift of normalized states, projected off the state.
pub fn fs_acceleration(band: &SpectralBand, p: &ChartPoint, u: &Tangent, step: f64) -> Result<f64> {
    let m = band.model();
    let back = Tangent { base: u.base, components: [-u.components[0], -u.components[1]] };
    let qp = m.geodesic_point(p, u, step)?;
    let qm = m.geodesic_point(p, &back, step)?;
    let unit = |x: &ChartPoint| -> Result<Vec<C64>> {
        let e = section_values(band, x)?;
        let n = cnorm(&e);
        Ok(e.into_iter().map(|v| v / n).collect())
    };
    let v0 = unit(p)?;
    let align = |v: Vec<C64>| -> Vec<C64> {
        let c = cdot(&v, &v0);
        let ph = if c.norm() > 0.0 { c / c.norm() } else { C64::new(1.0, 0.0) };
        v.into_iter().map(|x| x * ph).collect()
    };
    let vp = align(unit(&qp)?);
    let vm = align(unit(&qm)?);
    let acc: Vec<C64> = (0..v0.len()).map(|i| (vp[i] - v0[i] * 2.0 + vm[i]) / (step * step)).collect();
    let c = cdot(&v0, &acc);
    let perp: Vec<C64> = acc.iter().zip(&v0).map(|(a, v)| a - v * c).collect();
    Ok(std::f64::consts::SQRT_2 * cnorm(&perp))
}
