//! Shift-invert block subspace iteration for the bottom of L x = λ M x.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::fd::DiscreteLaplacian;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, orthonormalizer, CMat};

pub const EIGEN_SEED: u64 = 0x5eed_0f_1a9;
const MAX_ITER: usize = 400;

#[derive(Clone, Debug)]
pub struct EigenOptions {
    /// Number of wanted pairs; all must reach `loose_tol`.
    pub count: usize,
    /// Leading pairs held to `tight_tol`.
    pub tight: usize,
    pub tight_tol: f64,
    pub loose_tol: f64,
    pub shift: f64,
}

#[derive(Clone, Debug)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    /// M-orthonormal eigenvectors, one column each.
    pub vectors: CMat,
    /// Residual ‖Lx − λMx‖_{M⁻¹} per pair.
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

fn m_norm_residuals(lap: &DiscreteLaplacian, lx: &CMat, x: &CMat, vals: &[f64], count: usize) -> Vec<f64> {
    (0..count)
        .map(|c| {
            let mut s = 0.0;
            for i in 0..x.nrows() {
                let r = lx[(i, c)] - x[(i, c)] * (vals[c] * lap.mass[i]);
                s += r.norm_sqr() / lap.mass[i];
            }
            s.sqrt()
        })
        .collect()
}

/// Lowest `opts.count` eigenpairs of the discrete Laplacian.
pub fn lowest_eigenpairs(lap: &DiscreteLaplacian, opts: &EigenOptions) -> Result<EigenPairs> {
    let n = lap.len();
    if opts.count == 0 || opts.count >= n {
        return Err(Error::InvalidArgument(format!("cannot request {} pairs of a {n}-dimensional operator", opts.count)));
    }
    crate::linalg::sequential();
    let p = (2 * opts.count + 10).min(n);
    let a = lap.shifted(opts.shift)?;
    let llt = a
        .sp_cholesky(Side::Lower)
        .map_err(|e| Error::LinearAlgebra(format!("shifted operator not positive definite: {e:?}")))?;
    let l = lap.shifted(0.0)?;

    let mut rng = ChaCha8Rng::seed_from_u64(EIGEN_SEED);
    let mut x = Mat::from_fn(n, p, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        C64::new(re, im)
    });
    let mut last = None;
    for it in 1..=MAX_ITER {
        let mx = Mat::from_fn(n, p, |i, j| x[(i, j)] * lap.mass[i]);
        let y = llt.solve(&mx);
        // Rayleigh–Ritz on span(Y).
        let ly = &l * &y;
        let my = Mat::from_fn(n, p, |i, j| y[(i, j)] * lap.mass[i]);
        let bm = y.adjoint() * &my;
        let c = orthonormalizer(&bm)?;
        let am = c.adjoint() * (y.adjoint() * &ly) * &c;
        let (vals, v) = hermitian_eigen(&am)?;
        let q = &c * &v;
        x = &y * &q;
        let lx = &ly * &q;
        let res = m_norm_residuals(lap, &lx, &x, &vals, opts.count);
        let done = res.iter().enumerate().all(|(i, r)| {
            let tol = if i < opts.tight { opts.tight_tol } else { opts.loose_tol };
            *r <= tol * vals[i].abs().max(1.0)
        });
        last = Some((vals, res));
        if done {
            let (vals, res) = last.unwrap();
            let vectors = x.subcols(0, opts.count).to_owned();
            return Ok(EigenPairs { values: vals[..opts.count].to_vec(), vectors, residuals: res, iterations: it });
        }
    }
    let worst = last.map(|(_, r)| r.iter().cloned().fold(0.0, f64::max)).unwrap_or(f64::NAN);
    Err(Error::NotConverged(format!("subspace iteration stalled after {MAX_ITER} steps, residual {worst:.3e}")))
}
