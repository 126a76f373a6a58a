//! Small dense complex linear algebra on top of faer.

use faer::{Mat, Side};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type CMat = Mat<C64>;

/// Run faer kernels on the calling thread: results are then independent of
/// the thread count, and no idle worker pool competes with rayon jobs.
pub fn sequential() {
    faer::set_global_parallelism(faer::Par::Seq);
}

pub fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(h: &CMat) -> Result<(Vec<f64>, CMat)> {
    sequential();
    let n = h.nrows();
    let sym = Mat::from_fn(n, n, |i, j| 0.5 * (h[(i, j)] + h[(j, i)].conj()));
    let e = sym
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::LinearAlgebra(format!("eigendecomposition failed: {e:?}")))?;
    let s = e.S().column_vector();
    let vals = (0..n).map(|i| s[i].re).collect();
    Ok((vals, e.U().to_owned()))
}

/// Lower Cholesky factor of a Hermitian positive definite matrix.
pub fn cholesky(g: &CMat) -> Result<CMat> {
    let n = g.nrows();
    let mut l = CMat::zeros(n, n);
    for j in 0..n {
        let mut d = g[(j, j)].re;
        for p in 0..j {
            d -= l[(j, p)].norm_sqr();
        }
        if !(d > 0.0) {
            return Err(Error::LinearAlgebra(format!("matrix not positive definite at pivot {j}")));
        }
        let d = d.sqrt();
        l[(j, j)] = C64::new(d, 0.0);
        for i in j + 1..n {
            let mut s = g[(i, j)];
            for p in 0..j {
                s -= l[(i, p)] * l[(j, p)].conj();
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Inverse of a lower-triangular matrix.
pub fn invert_lower(l: &CMat) -> CMat {
    let n = l.nrows();
    let mut x = CMat::zeros(n, n);
    for c in 0..n {
        for i in c..n {
            let mut s = if i == c { C64::new(1.0, 0.0) } else { zero() };
            for p in c..i {
                s -= l[(i, p)] * x[(p, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// C with Cᴴ·G·C = I, by two passes of Cholesky orthonormalization with
/// diagonal pre-scaling.
pub fn orthonormalizer(g: &CMat) -> Result<CMat> {
    sequential();
    let n = g.nrows();
    let d: Vec<f64> = (0..n).map(|i| 1.0 / g[(i, i)].re.sqrt()).collect();
    let gs = Mat::from_fn(n, n, |i, j| g[(i, j)] * (d[i] * d[j]));
    let l1 = cholesky(&gs)?;
    let c1 = invert_lower(&l1).adjoint().to_owned();
    let c1 = Mat::from_fn(n, n, |i, j| c1[(i, j)] * d[i]);
    let g2 = c1.adjoint() * g * &c1;
    let l2 = cholesky(&g2)?;
    let c2 = invert_lower(&l2).adjoint().to_owned();
    Ok(&c1 * &c2)
}

/// Largest deviation of a Gram matrix from the identity.
pub fn identity_defect(g: &CMat) -> f64 {
    let mut e: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let id = if i == j { 1.0 } else { 0.0 };
            e = e.max((g[(i, j)] - id).norm());
        }
    }
    e
}

/// Singular values, descending.
pub fn singular_values(a: &CMat) -> Result<Vec<f64>> {
    sequential();
    let s = a.singular_values().map_err(|e| Error::LinearAlgebra(format!("svd failed: {e:?}")))?;
    Ok(s)
}

/// Principal angles (radians, ascending) between the column spans of two
/// orthonormal bases given their cross Gram matrix Q1ᴴQ2.
pub fn principal_angles(cross: &CMat) -> Result<Vec<f64>> {
    let mut s = singular_values(cross)?;
    s.reverse();
    let n = cross.nrows().min(cross.ncols());
    let mut angles: Vec<f64> = s.iter().take(n).map(|c| c.clamp(0.0, 1.0).acos()).collect();
    if cross.nrows() != cross.ncols() {
        angles.push(std::f64::consts::FRAC_PI_2);
    }
    angles.sort_by(|a, b| a.total_cmp(b));
    Ok(angles)
}

/// Principal angles (ascending) between the column spans of `a` and `b`,
/// both orthonormal under the diagonal weight `w` and with b no wider than a.
/// Each extra dimension of a contributes an angle of π/2.
/// Each angle is atan2(sin, cos), so angles near zero keep full precision.
pub fn subspace_angles(a: &CMat, b: &CMat, w: &[f64]) -> Result<Vec<f64>> {
    if a.nrows() != b.nrows() || a.nrows() != w.len() || b.ncols() > a.ncols() {
        return Err(Error::InvalidArgument("subspace shapes do not match".into()));
    }
    let wb = Mat::from_fn(b.nrows(), b.ncols(), |i, j| b[(i, j)] * w[i]);
    let cross = a.adjoint() * &wb;
    let r = b - a * &cross;
    let rw = Mat::from_fn(r.nrows(), r.ncols(), |i, j| r[(i, j)] * w[i].sqrt());
    let cos = singular_values(&cross)?;
    let mut sin = singular_values(&rw)?;
    sin.reverse();
    let mut angles: Vec<f64> = cos.iter().zip(&sin).map(|(c, s)| s.atan2(*c)).collect();
    angles.sort_by(|x, y| x.total_cmp(y));
    angles.extend(std::iter::repeat_n(std::f64::consts::FRAC_PI_2, a.ncols() - b.ncols()));
    Ok(angles)
}

pub fn cdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn cnorm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}
