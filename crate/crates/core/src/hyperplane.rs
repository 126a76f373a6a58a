//! Hyperplanes through image points of the coherent-state map: the dihedral
//! angle ϑ, the complex-linear/antilinear split of A = ⟨w, dF(·)⟩, and
//! randomized symplecticity checks.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::embedding::{split_vectors, tangent_images};
use crate::error::{Error, Result};
use crate::geometry::ChartPoint;
use crate::kernel::coherent_jet;
use crate::linalg::{cdot, cnorm};
use crate::spectral::SpectralBand;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane {
    pub k: u32,
    /// Unit normal w in the band space.
    pub normal: Vec<C64>,
}

impl Hyperplane {
    pub fn new(k: u32, w: Vec<C64>) -> Result<Self> {
        let n = cnorm(&w);
        if !(n > 0.0) {
            return Err(Error::Degenerate("zero hyperplane normal".into()));
        }
        Ok(Hyperplane { k, normal: w.into_iter().map(|v| v / n).collect() })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleReport {
    pub base: ChartPoint,
    pub vartheta: f64,
    pub a_plus_sq: f64,
    pub a_minus_sq: f64,
    pub symplectic_ok: bool,
    /// Determinant of A as a real 2×2 map in the frame (e₁, Je₁).
    pub det: f64,
}

/// Orthonormal basis of the complex span of the given vectors.
fn orthonormal_span(v: &[Vec<C64>]) -> Result<Vec<Vec<C64>>> {
    let mut out: Vec<Vec<C64>> = Vec::new();
    for x in v {
        let scale = cnorm(x);
        let mut y = x.clone();
        for _ in 0..2 {
            for b in &out {
                let c = cdot(b, &y);
                for (yi, bi) in y.iter_mut().zip(b) {
                    *yi -= bi * c;
                }
            }
        }
        let n = cnorm(&y);
        if !(n > 1e-10 * scale.max(f64::MIN_POSITIVE)) || scale == 0.0 {
            return Err(Error::Degenerate("plane basis is rank deficient".into()));
        }
        out.push(y.into_iter().map(|c| c / n).collect());
    }
    Ok(out)
}

/// ϑ(V, W) = ‖π_V(w)‖² for the complex span V of `basis` and unit normal w.
pub fn vartheta(basis: &[Vec<C64>], w: &[C64]) -> Result<f64> {
    let q = orthonormal_span(basis)?;
    let nw = cnorm(w);
    Ok(q.iter().map(|b| cdot(b, w).norm_sqr()).sum::<f64>() / (nw * nw))
}

/// A^± of u ↦ ⟨w, dF(u)⟩ at x, for a unit normal w.
pub fn a_split(band: &SpectralBand, x: &ChartPoint, w: &[C64]) -> Result<AngleReport> {
    let jet = coherent_jet(band, x)?;
    let t = tangent_images(&jet);
    let (plus, minus) = split_vectors(&t);
    let nw = cnorm(w);
    let w: Vec<C64> = w.iter().map(|v| v / nw).collect();
    let ap = cdot(&w, &plus);
    let am = cdot(&w, &minus);
    let th = vartheta(std::slice::from_ref(&plus), &w)?;
    let a1 = cdot(&w, &t[0]);
    let a2 = cdot(&w, &t[1]);
    let det = a1.re * a2.im - a2.re * a1.im;
    let (a_plus_sq, a_minus_sq) = (ap.norm_sqr(), am.norm_sqr());
    Ok(AngleReport { base: *x, vartheta: th, a_plus_sq, a_minus_sq, symplectic_ok: a_minus_sq < a_plus_sq, det })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub point: usize,
    pub trial: usize,
    pub vartheta: f64,
    pub a_plus_sq: f64,
    pub a_minus_sq: f64,
    pub symplectic_ok: bool,
    pub det: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SectionReport {
    pub k: u32,
    pub floor: f64,
    pub seed: u64,
    pub rows: Vec<TrialRow>,
    pub fraction_ok: f64,
    /// Every trial has det > 0 exactly when symplectic_ok.
    pub det_agrees: bool,
}

impl SectionReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x_id,trial,vartheta,a_plus_sq,a_minus_sq,symplectic_ok\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{:e},{:e},{:e},{}\n", r.point, r.trial, r.vartheta, r.a_plus_sq, r.a_minus_sq, r.symplectic_ok));
        }
        s
    }
}

fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C64::new(re, im)
        })
        .collect()
}

/// Unit normal of a random hyperplane through F(x), uniform on the unit
/// sphere of the complement of the state and conditioned on ϑ ≥ floor.
/// ϑ is drawn from its exact conditional law, 1 − ϑ = (1 − floor)·U^{1/(N−2)},
/// and the remaining direction uniformly. This is the law of rejection
/// sampling, which would need ~(1 − floor)^{−(N−2)} draws per sample.
pub fn conditioned_normal(state: &[C64], plane: &[C64], floor: f64, rng: &mut ChaCha8Rng) -> Result<Vec<C64>> {
    let n = state.len();
    if n < 3 {
        return Err(Error::Degenerate("band too small for a hyperplane complement".into()));
    }
    let q = orthonormal_span(&[state.to_vec(), plane.to_vec()])?;
    let u: f64 = Uniform::new(0.0, 1.0).sample(rng);
    let th = 1.0 - (1.0 - floor) * u.powf(1.0 / (n - 2) as f64);
    let phase: f64 = Uniform::new(0.0, 2.0 * std::f64::consts::PI).sample(rng);
    let mut r = gaussian_vector(rng, n);
    for _ in 0..2 {
        for b in &q {
            let c = cdot(b, &r);
            for (ri, bi) in r.iter_mut().zip(b) {
                *ri -= bi * c;
            }
        }
    }
    let nr = cnorm(&r);
    let ph = C64::from_polar(1.0, phase);
    Ok(q[1].iter().zip(&r).map(|(v, p)| v * ph * th.sqrt() + p * ((1.0 - th).sqrt() / nr)).collect())
}

pub fn sample_sections(band: &SpectralBand, points: &[ChartPoint], trials: usize, floor: f64, seed: u64) -> Result<SectionReport> {
    if !(0.0..1.0).contains(&floor) {
        return Err(Error::InvalidArgument(format!("angle floor must lie in [0, 1), got {floor}")));
    }
    let mut rows = Vec::with_capacity(points.len() * trials);
    for (pi, x) in points.iter().enumerate() {
        let jet = coherent_jet(band, x)?;
        let state: Vec<C64> = jet.psi.iter().map(|v| v.conj()).collect();
        let t = tangent_images(&jet);
        let (plus, _) = split_vectors(&t);
        for trial in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((pi * trials + trial) as u64);
            let w = conditioned_normal(&state, &plus, floor, &mut rng)?;
            let r = a_split(band, x, &w)?;
            rows.push(TrialRow {
                point: pi,
                trial,
                vartheta: r.vartheta,
                a_plus_sq: r.a_plus_sq,
                a_minus_sq: r.a_minus_sq,
                symplectic_ok: r.symplectic_ok,
                det: r.det,
            });
        }
    }
    let ok = rows.iter().filter(|r| r.symplectic_ok).count();
    let det_agrees = rows.iter().all(|r| (r.det > 0.0) == r.symplectic_ok);
    let fraction_ok = if rows.is_empty() { 0.0 } else { ok as f64 / rows.len() as f64 };
    Ok(SectionReport { k: band.k(), floor, seed, rows, fraction_ok, det_agrees })
}
