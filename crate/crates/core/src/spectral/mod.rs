//! The quantizing band ℋ_k: the eigensections of ℬ_k = Δ_k − nk below the
//! spectral gap. Two backends produce it: closed-form holomorphic sections on
//! the sphere models (exact) and a sparse finite-difference eigensolve on any
//! model (fd).

mod eigen;
mod exact;
mod fd;

pub use eigen::{lowest_eigenpairs, EigenOptions, EigenPairs, EIGEN_SEED};
pub use exact::{gram_quadrature_size, holomorphic_basis, round_log_norms, HolomorphicBasis};
pub use fd::{assemble_laplacian, DiscreteLaplacian, HALF_DIM};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::bundle::{BundleData, DiscreteSection};
use crate::error::{Error, Result};
use crate::geometry::{ChartPoint, ManifoldModel, ModelKind};
use crate::grid::{GridEvaluator, SectionGrid};
use crate::linalg::{orthonormalizer, subspace_angles, CMat};
use crate::quadrature::AreaQuadrature;
use crate::series::ConvergenceSeries;

/// Multiplicative gap required to accept a band.
pub const GAP_RATIO: f64 = 5.0;
pub const TIGHT_TOL: f64 = 1e-9;
pub const LOOSE_TOL: f64 = 1e-4;
/// A gap counts only if the next cluster of ℬ_k starts at or above GAP_FLOOR·nk;
/// a large ratio at a lower level comes from an unresolved grid.
pub const GAP_FLOOR: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Exact,
    Fd,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    /// Largest band eigenvalue of ℬ_k.
    pub top: f64,
    /// Smallest eigenvalue of ℬ_k above the gap, when computed.
    pub next: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum BandBasis {
    Holomorphic(HolomorphicBasis),
    /// Node values of L²-orthonormal sections, one vector per section.
    Grid { grid: SectionGrid, vectors: Vec<Vec<C64>> },
}

/// Values and covariant chart derivatives of all band sections at one point.
#[derive(Clone, Debug)]
pub struct BandJet {
    pub point: ChartPoint,
    pub values: Vec<C64>,
    pub dx: Vec<C64>,
    pub dy: Vec<C64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralBand {
    pub bundle: BundleData,
    /// Sorted eigenvalues of ℬ_k on the band.
    pub eigenvalues: Vec<f64>,
    pub gap: Gap,
    pub basis: BandBasis,
}

impl SpectralBand {
    pub fn k(&self) -> u32 {
        self.bundle.k
    }

    pub fn model(&self) -> &ManifoldModel {
        &self.bundle.model
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn backend(&self) -> Backend {
        match self.basis {
            BandBasis::Holomorphic(_) => Backend::Exact,
            BandBasis::Grid { .. } => Backend::Fd,
        }
    }

    /// Band sections and their covariant derivatives along ∂x, ∂y of the
    /// point's chart, valued in that chart's frame.
    pub fn jet(&self, x: &ChartPoint) -> Result<BandJet> {
        self.bundle.model.validate_point(x)?;
        match &self.basis {
            BandBasis::Holomorphic(h) => {
                let (values, dx, dy) = h.eval(&self.bundle, x);
                Ok(BandJet { point: *x, values, dx, dy })
            }
            BandBasis::Grid { grid, vectors } => {
                let ev = GridEvaluator::new(&self.bundle, grid, x)?;
                let mut out = BandJet { point: *x, values: Vec::new(), dx: Vec::new(), dy: Vec::new() };
                for v in vectors {
                    let (a, b, c) = ev.apply(v);
                    out.values.push(a);
                    out.dx.push(b);
                    out.dy.push(c);
                }
                Ok(out)
            }
        }
    }

    pub fn values(&self, x: &ChartPoint) -> Result<Vec<C64>> {
        Ok(self.jet(x)?.values)
    }

    /// Band sections sampled on a grid.
    pub fn sections_on(&self, grid: &SectionGrid) -> Result<Vec<DiscreteSection>> {
        grid.check_model(&self.bundle.model)?;
        if let BandBasis::Grid { grid: g, vectors } = &self.basis {
            if g == grid {
                return Ok(vectors
                    .iter()
                    .map(|v| DiscreteSection { k: self.k(), grid: g.clone(), values: v.clone() })
                    .collect());
            }
        }
        let mut out: Vec<DiscreteSection> = (0..self.dim()).map(|_| DiscreteSection::zeros(&self.bundle, grid)).collect();
        for i in 0..grid.len() {
            let p = grid.node_point(&self.bundle.model, i);
            let p = self.bundle.model.to_chart(&p, grid.node_gauge(i))?;
            let v = self.values(&p)?;
            for (s, val) in out.iter_mut().zip(v) {
                s.values[i] = val;
            }
        }
        Ok(out)
    }
}

/// Points, weights and band-section values used for integrals over X.
pub fn band_quadrature(band: &SpectralBand) -> Result<(Vec<ChartPoint>, Vec<f64>, Vec<Vec<C64>>)> {
    match &band.basis {
        BandBasis::Holomorphic(_) => {
            let (nt, np) = gram_quadrature_size(band.k());
            let q = AreaQuadrature::new(band.model(), nt, np);
            let vals = q.points.iter().map(|x| band.values(x)).collect::<Result<Vec<_>>>()?;
            Ok((q.points, q.weights, vals))
        }
        BandBasis::Grid { grid, vectors } => {
            let m = band.model();
            let pts: Vec<ChartPoint> = (0..grid.len())
                .map(|i| m.to_chart(&grid.node_point(m, i), grid.node_gauge(i)))
                .collect::<Result<_>>()?;
            let vals = (0..grid.len()).map(|i| vectors.iter().map(|v| v[i]).collect()).collect();
            Ok((pts, grid.mass(m), vals))
        }
    }
}

/// Closed-form band of a sphere model: the holomorphic sections.
pub fn exact_band(b: &BundleData) -> Result<SpectralBand> {
    let basis = holomorphic_basis(b)?;
    let k = b.k as f64;
    let next = if b.model.kind == ModelKind::RoundSphere { Some(2.0 * k + 4.0) } else { None };
    Ok(SpectralBand {
        bundle: b.clone(),
        eigenvalues: vec![0.0; basis.dim()],
        gap: Gap { top: 0.0, next },
        basis: BandBasis::Holomorphic(basis),
    })
}

pub fn exact_sphere_band(k: u32) -> Result<SpectralBand> {
    let b = crate::bundle::build_bundle(&ManifoldModel::round_sphere(), k as i64)?;
    exact_band(&b)
}

/// Weyl estimate of dim ℋ_k used to size the eigensolve.
pub fn dimension_estimate(m: &ManifoldModel, k: u32) -> usize {
    (k as f64 * m.total_area() / (2.0 * std::f64::consts::PI)).ceil() as usize + 1
}

/// Riemann–Roch value of dim ℋ_k.
pub fn riemann_roch(m: &ManifoldModel, k: u32) -> usize {
    if m.is_sphere() {
        k as usize + 1
    } else {
        k as usize
    }
}

/// Index j maximizing λ_{j+1}/max(λ_j, 1), with the ratio.
pub fn largest_gap(vals: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for j in 0..vals.len().saturating_sub(1) {
        let r = vals[j + 1] / vals[j].max(1.0);
        if best.is_none_or(|(_, b)| r > b) {
            best = Some((j, r));
        }
    }
    best
}

/// Band of the discrete Laplacian: all eigenpairs of ℬ_k below the largest
/// multiplicative gap. NoGapFound when no gap of order k appears.
pub fn lowest_band(lap: &DiscreteLaplacian) -> Result<SpectralBand> {
    let k = lap.k();
    let nk = (HALF_DIM * k) as f64;
    let est = dimension_estimate(&lap.bundle.model, k);
    let mut count = est + (est / 4).max(8);
    let shift = 0.5 * nk - 1.0;
    let mut best = (0.0, 0);
    for _ in 0..3 {
        if count >= lap.len() {
            break;
        }
        let opts = EigenOptions { count, tight: count, tight_tol: TIGHT_TOL, loose_tol: LOOSE_TOL, shift };
        // Tight tolerance only on the Weyl-estimated band; the margin is for gap detection.
        let opts = EigenOptions { tight: est.min(count), ..opts };
        let pairs = match lowest_eigenpairs(lap, &opts) {
            // An under-resolved Δ_k can dip below the shift; Δ_k ≥ 0 makes −1 safe.
            Err(Error::LinearAlgebra(_)) => lowest_eigenpairs(lap, &EigenOptions { shift: -1.0, ..opts })?,
            r => r?,
        };
        let b: Vec<f64> = pairs.values.iter().map(|v| v - nk).collect();
        let (j, ratio) = largest_gap(&b).ok_or(Error::NoGapFound { best_ratio: 0.0, index: 0 })?;
        best = (ratio, j);
        if ratio >= GAP_RATIO && j + 2 < count && b[j + 1] >= GAP_FLOOR * nk {
            let dim = j + 1;
            if dim > est {
                let worst = pairs.residuals[..dim].iter().enumerate().any(|(i, r)| *r > TIGHT_TOL * pairs.values[i].abs().max(1.0));
                if worst {
                    count = dim + (dim / 4).max(8);
                    continue;
                }
            }
            let vectors = (0..dim).map(|c| (0..lap.len()).map(|i| pairs.vectors[(i, c)]).collect()).collect();
            return Ok(SpectralBand {
                bundle: lap.bundle.clone(),
                eigenvalues: b[..dim].to_vec(),
                gap: Gap { top: b[dim - 1], next: Some(b[dim]) },
                basis: BandBasis::Grid { grid: lap.grid.clone(), vectors },
            });
        }
        count = count * 3 / 2 + 1;
    }
    Err(Error::NoGapFound { best_ratio: best.0, index: best.1 })
}

/// Band from either backend.
pub fn compute_band(b: &BundleData, backend: Backend, resolution: f64) -> Result<SpectralBand> {
    match backend {
        Backend::Exact => exact_band(b),
        Backend::Fd => {
            let grid = SectionGrid::for_resolution(&b.model, b.k, resolution);
            lowest_band(&assemble_laplacian(b, &grid)?)
        }
    }
}

/// Summary of the gap law over a sequence of bands.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GapReport {
    /// sup |band eigenvalue| per k.
    pub width: ConvergenceSeries,
    /// (next cluster)/k per k.
    pub next_over_k: ConvergenceSeries,
    pub dims: Vec<(u32, usize)>,
    /// Estimated C₁ (max width) and C₂ (min next/k).
    pub c1: f64,
    pub c2: f64,
}

pub fn gap_report(bands: &[SpectralBand]) -> Result<GapReport> {
    if bands.len() < 3 {
        return Err(Error::InvalidArgument("gap report needs at least three values of k".into()));
    }
    let mut width = Vec::new();
    let mut next = Vec::new();
    let mut dims = Vec::new();
    for b in bands {
        let k = b.k() as f64;
        width.push((k, b.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()))));
        if let Some(n) = b.gap.next {
            next.push((k, n / k.max(1.0)));
        }
        dims.push((b.k(), b.dim()));
    }
    let c1 = width.iter().fold(0.0_f64, |a, p| a.max(p.1));
    let c2 = next.iter().fold(f64::INFINITY, |a, p| a.min(p.1));
    Ok(GapReport {
        width: ConvergenceSeries::new("band width", width),
        next_over_k: ConvergenceSeries::new("next cluster / k", next),
        dims,
        c1,
        c2,
    })
}

/// Principal angles between a grid band and another band sampled on the same
/// grid. The samples are orthonormalized under the grid mass first.
pub fn band_angles(grid_band: &SpectralBand, other: &SpectralBand) -> Result<Vec<f64>> {
    let BandBasis::Grid { grid, vectors } = &grid_band.basis else {
        return Err(Error::InvalidArgument("first band must come from the fd backend".into()));
    };
    if grid_band.k() != other.k() || grid_band.model() != other.model() {
        return Err(Error::GridMismatch("bands belong to different bundles".into()));
    }
    let mass = grid.mass(grid_band.model());
    let samples = other.sections_on(grid)?;
    let n = grid.len();
    let s = CMat::from_fn(n, samples.len(), |i, j| samples[j].values[i]);
    let ms = CMat::from_fn(n, samples.len(), |i, j| s[(i, j)] * mass[i]);
    let c = orthonormalizer(&(s.adjoint() * &ms))?;
    let v = CMat::from_fn(n, vectors.len(), |i, j| vectors[j][i]);
    let (wide, narrow) = if v.ncols() >= s.ncols() { (v, &s * &c) } else { (&s * &c, v) };
    subspace_angles(&wide, &narrow, &mass)
}
