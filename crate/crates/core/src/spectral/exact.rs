//! Holomorphic sections of L^⊗k on the (perturbed) sphere.
//!
//! In the unitary north frame a holomorphic section is P(w)·e^{−kΦ/2} with
//! Φ = log(1+|w|²) + 2f, f the potential correction of the model. Monomials
//! w^a, a = 0..k, span the space; on the round sphere they are orthogonal
//! with closed-form norms, otherwise they are orthonormalized by quadrature.

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::bundle::BundleData;
use crate::error::{Error, Result};
use crate::geometry::{embed_jacobian, Chart, ChartPoint, ModelKind};
use crate::linalg::{orthonormalizer, CMat};
use crate::quadrature::AreaQuadrature;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolomorphicBasis {
    pub k: u32,
    /// log of the round-sphere L²(X) norm of w^a·e^{−kΦ/2}.
    pub log_norms: Vec<f64>,
    /// Column j holds the monomial coefficients of basis section j (row-major, (k+1)²).
    pub coeffs: Option<Vec<C64>>,
}

pub(crate) fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for i in 1..=n {
        out[i] = out[i - 1] + (i as f64).ln();
    }
    out
}

/// Round-sphere norms: ‖w^a e^{−kΦ/2}‖² = 2π·a!(k−a)!/(k+1)!.
pub fn round_log_norms(k: u32) -> Vec<f64> {
    let lf = ln_factorials(k as usize + 1);
    (0..=k as usize)
        .map(|a| 0.5 * ((2.0 * PI).ln() + lf[a] + lf[k as usize - a] - lf[k as usize + 1]))
        .collect()
}

impl HolomorphicBasis {
    pub fn dim(&self) -> usize {
        self.k as usize + 1
    }

    /// Scaled monomials m_a = w^a e^{−kΦ/2}/N_a and their covariant ∂x-derivatives
    /// in the frame of the point's chart (∇_∂y = i∇_∂x).
    pub(crate) fn monomials(&self, b: &BundleData, x: &ChartPoint) -> (Vec<C64>, Vec<C64>) {
        let k = self.k as i64;
        let n = self.dim();
        let [u, v] = x.coords;
        let w = C64::new(u, v);
        let r2 = u * u + v * v;
        let lr = 0.5 * r2.ln();
        let (p, dp) = embed_jacobian(x);
        let f = b.model.potential_correction(p);
        let gf = b.model.potential_correction_grad(p);
        let fx = gf[0] * dp[0][0] + gf[1] * dp[0][1] + gf[2] * dp[0][2];
        let fy = gf[0] * dp[1][0] + gf[1] * dp[1][1] + gf[2] * dp[1][2];
        // ∂Φ/∂w
        let phi_w = w.conj() / (1.0 + r2) + C64::new(fx, -fy);
        let base = -0.5 * k as f64 * (1.0 + r2).ln() - k as f64 * f;
        let arg = v.atan2(u);
        let twist = b.twist_factor(x);
        // |w|^e e^{base}/N_a, with 0^0 = 1.
        let mono = |e: i64, a: usize| -> C64 {
            if e < 0 {
                return C64::new(0.0, 0.0);
            }
            if r2 == 0.0 {
                return if e == 0 { C64::new((base - self.log_norms[a]).exp(), 0.0) } else { C64::new(0.0, 0.0) };
            }
            C64::from_polar((e as f64 * lr + base - self.log_norms[a]).exp(), e as f64 * arg)
        };
        let mut val = Vec::with_capacity(n);
        let mut dx = Vec::with_capacity(n);
        for a in 0..n {
            let e = if x.chart == Chart::South { k - a as i64 } else { a as i64 };
            let m = mono(e, a);
            let m1 = mono(e - 1, a) * e as f64;
            val.push(m * twist);
            dx.push((m1 - phi_w * k as f64 * m) * twist);
        }
        (val, dx)
    }

    /// Values and covariant chart derivatives of the basis sections (X-normalized).
    pub(crate) fn eval(&self, b: &BundleData, x: &ChartPoint) -> (Vec<C64>, Vec<C64>, Vec<C64>) {
        let (m, mx) = self.monomials(b, x);
        let (val, dx) = match &self.coeffs {
            None => (m, mx),
            Some(c) => {
                let n = self.dim();
                let mut val = vec![C64::new(0.0, 0.0); n];
                let mut dx = vec![C64::new(0.0, 0.0); n];
                for a in 0..n {
                    if m[a] == C64::new(0.0, 0.0) && mx[a] == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for j in 0..n {
                        let cc = c[a * n + j];
                        val[j] += m[a] * cc;
                        dx[j] += mx[a] * cc;
                    }
                }
                (val, dx)
            }
        };
        let i = C64::new(0.0, 1.0);
        let dy = dx.iter().map(|d| d * i).collect();
        (val, dx, dy)
    }
}

/// Quadrature size used to orthonormalize the perturbed monomials.
pub fn gram_quadrature_size(k: u32) -> (usize, usize) {
    (k as usize + 64, 2 * k as usize + 96)
}

/// Orthonormal holomorphic basis of the sphere model of the bundle.
pub fn holomorphic_basis(b: &BundleData) -> Result<HolomorphicBasis> {
    if !b.model.is_sphere() {
        return Err(Error::InvalidModel("holomorphic backend requires a sphere model".into()));
    }
    let k = b.k;
    let mut basis = HolomorphicBasis { k, log_norms: round_log_norms(k), coeffs: None };
    if b.model.kind == ModelKind::RoundSphere || b.model.perturbation.iter().all(|(_, e)| *e == 0.0) {
        return Ok(basis);
    }
    crate::linalg::sequential();
    let (nt, np) = gram_quadrature_size(k);
    let q = AreaQuadrature::new(&b.model, nt, np);
    let n = basis.dim();
    let a = Mat::from_fn(q.len(), n, |_, _| C64::new(0.0, 0.0));
    let mut a: CMat = a;
    for (r, (x, w)) in q.points.iter().zip(&q.weights).enumerate() {
        let (m, _) = basis.monomials(b, x);
        let sw = w.sqrt();
        for c in 0..n {
            a[(r, c)] = m[c] * sw;
        }
    }
    let g = a.adjoint() * &a;
    let c = orthonormalizer(&g)?;
    basis.coeffs = Some((0..n * n).map(|i| c[(i / n, i % n)]).collect());
    Ok(basis)
}
