//! Toeplitz operators on the band, Wick symbols, quantum propagation versus
//! the classical Hamiltonian flow, and the tangential decomposition of the
//! quantum generator.
//!
//! Orientation: ω(ξ_H, ·) = dH. The propagator e^{−iktT} carries coherent
//! states along the flow of −ξ_H, so every comparison with classical
//! dynamics uses the reversed field.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::embedding::fs_between;
use crate::error::{Error, Result};
use crate::geometry::{ChartPoint, ObservableField, Tangent};
use crate::kernel::{coherent_jet, coherent_state};
use crate::linalg::{cdot, cnorm, hermitian_eigen, CMat};
use crate::spectral::{band_quadrature, SpectralBand};

#[derive(Clone, Debug)]
pub struct ToeplitzOperator {
    pub k: u32,
    pub matrix: CMat,
    pub symbol: ObservableField,
    /// max |M − Mᴴ| before symmetrization.
    pub raw_asymmetry: f64,
    eigvals: Vec<f64>,
    eigvecs: CMat,
}

pub fn build_toeplitz(band: &SpectralBand, h: &ObservableField) -> Result<ToeplitzOperator> {
    crate::linalg::sequential();
    let (pts, w, vals) = band_quadrature(band)?;
    let n = band.dim();
    let hw = pts.iter().zip(&w).map(|(x, wi)| Ok(h.value(band.model(), x)? * wi)).collect::<Result<Vec<f64>>>()?;
    let a = CMat::from_fn(pts.len(), n, |r, c| vals[r][c]);
    let ha = CMat::from_fn(pts.len(), n, |r, c| vals[r][c] * hw[r]);
    let m = a.adjoint() * &ha;
    let mut asym: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            asym = asym.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    let sym = CMat::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)].conj()));
    let (eigvals, eigvecs) = hermitian_eigen(&sym)?;
    Ok(ToeplitzOperator { k: band.k(), matrix: sym, symbol: h.clone(), raw_asymmetry: asym, eigvals, eigvecs })
}

impl ToeplitzOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        (0..self.dim()).map(|i| (0..self.dim()).map(|j| self.matrix[(i, j)] * v[j]).sum()).collect()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigvals
    }

    /// e^{−iktT}v through the eigendecomposition.
    pub fn evolve(&self, t: f64, v: &[C64]) -> Vec<C64> {
        let n = self.dim();
        let kf = self.k as f64;
        let u = &self.eigvecs;
        let c: Vec<C64> = (0..n)
            .map(|a| {
                let s: C64 = (0..n).map(|i| u[(i, a)].conj() * v[i]).sum();
                s * C64::from_polar(1.0, -kf * t * self.eigvals[a])
            })
            .collect();
        (0..n).map(|i| (0..n).map(|a| u[(i, a)] * c[a]).sum()).collect()
    }

    /// max |M − c·I|: deviation from a scalar operator.
    pub fn scalar_defect(&self, c: f64) -> f64 {
        let mut e: f64 = 0.0;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                let id = if i == j { c } else { 0.0 };
                e = e.max((self.matrix[(i, j)] - id).norm());
            }
        }
        e
    }
}

/// ⟨Tv, v⟩/‖v‖² (real part; the imaginary part vanishes for Hermitian T).
pub fn expectation(t: &ToeplitzOperator, v: &[C64]) -> f64 {
    cdot(v, &t.apply(v)).re / cnorm(v).powi(2)
}

/// Wick (covariant) symbol at x.
pub fn wick_symbol(band: &SpectralBand, t: &ToeplitzOperator, x: &ChartPoint) -> Result<f64> {
    check(band, t)?;
    Ok(expectation(t, &coherent_state(band, x)?))
}

/// ⟨T²Ψ,Ψ⟩/‖Ψ‖² − (⟨TΨ,Ψ⟩/‖Ψ‖²)².
pub fn variance(band: &SpectralBand, t: &ToeplitzOperator, x: &ChartPoint) -> Result<f64> {
    check(band, t)?;
    let psi = coherent_state(band, x)?;
    let tp = t.apply(&psi);
    let n2 = cnorm(&psi).powi(2);
    let m1 = cdot(&psi, &tp).re / n2;
    let m2 = cnorm(&tp).powi(2) / n2;
    Ok((m2 - m1 * m1).max(0.0))
}

/// |ξ_H|²_g = |dH|²_g at x.
pub fn hamiltonian_speed_sq(band: &SpectralBand, h: &ObservableField, x: &ChartPoint) -> Result<f64> {
    let m = band.model();
    let xi = m.hamiltonian_vector_field(h, x)?;
    Ok(m.norm(&xi)?.powi(2))
}

fn check(band: &SpectralBand, t: &ToeplitzOperator) -> Result<()> {
    if t.k != band.k() || t.dim() != band.dim() {
        return Err(Error::GridMismatch("operator and band differ".into()));
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DynamicsRun {
    pub k: u32,
    pub hamiltonian: String,
    pub start: ChartPoint,
    pub times: Vec<f64>,
    /// FS distance between the propagated state and the coherent state at the flowed point.
    pub gaps: Vec<f64>,
    pub norm_drift: Vec<f64>,
    pub energy_drift: Vec<f64>,
    pub classical: Vec<ChartPoint>,
}

impl DynamicsRun {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,gap,energy_drift,norm_drift\n");
        for i in 0..self.times.len() {
            s.push_str(&format!("{},{:e},{:e},{:e}\n", self.times[i], self.gaps[i], self.energy_drift[i], self.norm_drift[i]));
        }
        s
    }
}

/// RK4 steps per unit time of the classical flow.
pub const FLOW_STEPS_PER_UNIT: f64 = 2000.0;

pub fn equivariance_gap(band: &SpectralBand, t: &ToeplitzOperator, x: &ChartPoint, times: &[f64]) -> Result<DynamicsRun> {
    check(band, t)?;
    let m = band.model();
    let h = &t.symbol;
    let psi0 = coherent_state(band, x)?;
    let n0 = cnorm(&psi0);
    let h0 = h.value(m, x)?;
    let mut run = DynamicsRun {
        k: band.k(),
        hamiltonian: h.name.clone(),
        start: *x,
        times: times.to_vec(),
        gaps: Vec::new(),
        norm_drift: Vec::new(),
        energy_drift: Vec::new(),
        classical: Vec::new(),
    };
    for &tt in times {
        let v = t.evolve(tt, &psi0);
        let steps = ((tt.abs() * FLOW_STEPS_PER_UNIT).ceil() as usize).max(1);
        let y = m.hamiltonian_flow(h, x, -tt, steps)?;
        let c = coherent_state(band, &y)?;
        run.gaps.push(fs_between(&v, &c));
        run.norm_drift.push((cnorm(&v) / n0 - 1.0).abs());
        run.energy_drift.push((h.value(m, &y)? - h0).abs());
        run.classical.push(y);
    }
    Ok(run)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TangentialDecomposition {
    pub base: ChartPoint,
    /// Image of the reversed Hamiltonian field under the coherent-state map.
    pub xi_push: Vec<C64>,
    /// Projective image of −ikTΨ.
    pub xi: Vec<C64>,
    pub xi_par: Vec<C64>,
    pub xi_perp: Vec<C64>,
    pub cos_theta: f64,
    /// ‖xi_push − Ξ^∥‖.
    pub residual: f64,
}

/// Relative size below which a component of Ξ counts as zero.
pub const DEGENERATE_RATIO: f64 = 1e-10;

fn omega(u: &[C64], v: &[C64]) -> f64 {
    cdot(u, v).im
}

pub fn tangential_decomposition(band: &SpectralBand, t: &ToeplitzOperator, x: &ChartPoint) -> Result<TangentialDecomposition> {
    check(band, t)?;
    let m = band.model();
    let jet = coherent_jet(band, x)?;
    let n = cnorm(&jet.psi);
    let unit: Vec<C64> = jet.psi.iter().map(|v| v / n).collect();
    let s2 = std::f64::consts::SQRT_2;
    let proj = |w: &[C64]| -> Vec<C64> {
        let c = cdot(&unit, w);
        w.iter().zip(&unit).map(|(a, u)| (a - u * c) * (s2 / n)).collect()
    };
    let t1 = proj(&jet.dpsi[0]);
    let t2 = proj(&jet.dpsi[1]);
    let kf = band.k() as f64;
    let gen: Vec<C64> = t.apply(&jet.psi).into_iter().map(|v| v * C64::new(0.0, -kf)).collect();
    let xi = proj(&gen);
    let o12 = omega(&t1, &t2);
    if o12.abs() < 1e-12 * cnorm(&t1) * cnorm(&t2) {
        return Err(Error::Degenerate("tangent plane is Ω-degenerate".into()));
    }
    let a = omega(&xi, &t2) / o12;
    let b = omega(&xi, &t1) / -o12;
    let xi_par: Vec<C64> = t1.iter().zip(&t2).map(|(p, q)| p * a + q * b).collect();
    let xi_perp: Vec<C64> = xi.iter().zip(&xi_par).map(|(p, q)| p - q).collect();
    // A component at roundoff level has no direction; its angle is reported as 0.
    let (np, nq) = (cnorm(&xi_par), cnorm(&xi_perp));
    let negligible = DEGENERATE_RATIO * cnorm(&xi);
    let cos_theta = if np > negligible && nq > negligible { cdot(&xi_par, &xi_perp).re / (np * nq) } else { 0.0 };
    // Reversed field in the jet frame.
    let field = m.hamiltonian_vector_field(&t.symbol, x)?;
    let g = m.metric_at(x)?;
    let comp = |e: &Tangent| -> f64 { crate::geometry::bilinear(&g, field.components, e.components) };
    let (c1, c2) = (-comp(&jet.frame[0]), -comp(&jet.frame[1]));
    let xi_push: Vec<C64> = t1.iter().zip(&t2).map(|(p, q)| p * c1 + q * c2).collect();
    let residual = cnorm(&xi_push.iter().zip(&xi_par).map(|(p, q)| p - q).collect::<Vec<_>>());
    Ok(TangentialDecomposition { base: *x, xi_push, xi, xi_par, xi_perp, cos_theta, residual })
}
