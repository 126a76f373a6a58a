//! Finite-difference Bochner Laplacian on a section grid.

use faer::sparse::{SparseColMat, Triplet};
use num_complex::Complex64 as C64;
use std::collections::BTreeMap;

use crate::bundle::{BundleData, DiscreteSection};
use crate::error::{Error, Result};
use crate::grid::{dirichlet_rows, SectionGrid};

/// Real dimension of the manifold divided by two.
pub const HALF_DIM: u32 = 1;

/// Generalized form L x = λ M x of Δ_k: L is the Hermitian Dirichlet-form
/// matrix, M the diagonal area weights of `l2_inner_product`.
#[derive(Clone, Debug)]
pub struct DiscreteLaplacian {
    pub bundle: BundleData,
    pub grid: SectionGrid,
    /// Row-compressed L, sorted column indices.
    pub rows: Vec<Vec<(usize, C64)>>,
    pub mass: Vec<f64>,
    /// max |L − Lᴴ| before symmetrization.
    pub raw_asymmetry: f64,
}

impl DiscreteLaplacian {
    pub fn k(&self) -> u32 {
        self.bundle.k
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(|r| r.len()).sum()
    }

    /// L·x.
    pub fn apply_form(&self, x: &[C64]) -> Vec<C64> {
        self.rows.iter().map(|r| r.iter().map(|(j, v)| v * x[*j]).sum()).collect()
    }

    /// Δ_k x = M⁻¹ L x.
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.apply_form(x).into_iter().zip(&self.mass).map(|(v, m)| v / *m).collect()
    }

    /// ⟨Δs, s⟩ in the weighted inner product, i.e. the discrete ‖∇s‖².
    pub fn dirichlet_energy(&self, s: &DiscreteSection) -> Result<f64> {
        if s.grid != self.grid {
            return Err(Error::GridMismatch("section grid differs from operator grid".into()));
        }
        let lx = self.apply_form(&s.values);
        Ok(s.values.iter().zip(&lx).map(|(a, b)| a.conj() * b).sum::<C64>().re)
    }

    /// max |L_ij − conj(L_ji)| of the stored (symmetrized) matrix.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, v) in r {
                let t = match self.rows[j].binary_search_by_key(&i, |e| e.0) {
                    Ok(p) => self.rows[j][p].1,
                    Err(_) => C64::new(0.0, 0.0),
                };
                worst = worst.max((v - t.conj()).norm());
            }
        }
        worst
    }

    /// Sparse L − σM.
    pub(crate) fn shifted(&self, sigma: f64) -> Result<SparseColMat<usize, C64>> {
        let mut trip = Vec::with_capacity(self.nnz() + self.len());
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, v) in r {
                trip.push(Triplet::new(i, j, v));
            }
            trip.push(Triplet::new(i, i, C64::new(-sigma * self.mass[i], 0.0)));
        }
        SparseColMat::try_new_from_triplets(self.len(), self.len(), &trip)
            .map_err(|e| Error::LinearAlgebra(format!("sparse assembly failed: {e:?}")))
    }
}

pub fn assemble_laplacian(b: &BundleData, grid: &SectionGrid) -> Result<DiscreteLaplacian> {
    grid.check_model(&b.model)?;
    let n = grid.len();
    let mut acc: Vec<BTreeMap<usize, C64>> = vec![BTreeMap::new(); n];
    for (w, entries) in dirichlet_rows(b, grid) {
        for &(a, ca) in &entries {
            for &(c, cc) in &entries {
                *acc[a].entry(c).or_insert(C64::new(0.0, 0.0)) += ca.conj() * cc * w;
            }
        }
    }
    let mut raw_asymmetry: f64 = 0.0;
    let mut rows: Vec<Vec<(usize, C64)>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut r = Vec::with_capacity(acc[i].len());
        for (&j, &v) in &acc[i] {
            let t = acc[j].get(&i).copied().unwrap_or(C64::new(0.0, 0.0));
            raw_asymmetry = raw_asymmetry.max((v - t.conj()).norm());
            r.push((j, 0.5 * (v + t.conj())));
        }
        rows.push(r);
    }
    Ok(DiscreteLaplacian { bundle: b.clone(), grid: grid.clone(), rows, mass: grid.mass(&b.model), raw_asymmetry })
}
