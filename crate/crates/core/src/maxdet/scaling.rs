//! Nesterov-Todd scaling.
//!
//! For `X, Z` positive definite the NT scaling point is the unique `G` with
//! `G Z G = X`, computed here as `G = L (L^T Z L)^{-1/2} L^T` from the
//! Cholesky factor `X = L L^T`. The symmetrization matrix handed to the
//! scaled Newton equation is `P = G^{-1/2}`, which satisfies
//! `P X P = P^{-1} Z P^{-1}` (both equal the geometric-mean midpoint) and in
//! particular `P^2 X P^2 = Z`. In the scalar case `P = (z/x)^{1/4}`.
//!
//! The eigenvalues of `L^T Z L` are the eigenvalues of `X Z`; they are
//! computed here once and reused by the neighborhood tests.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, sym_eigen_sorted, symmetrize};

/// NT data for one block.
#[derive(Clone, Debug)]
pub struct NtBlock {
    /// Scaling point `G` with `G Z G = X`.
    pub g: DMatrix<f64>,
    /// Smallest eigenvalue of `X Z`.
    pub lambda_min: f64,
}

/// Computes the NT scaling point of a block pair.
pub fn nt_point(x: &DMatrix<f64>, z: &DMatrix<f64>) -> Result<NtBlock> {
    let n = x.nrows();
    let lx = cholesky(x, "NT scaling: primal block")?;
    let l = lx.l();
    let mzz = l.transpose() * z * &l;
    let (vals, q) = sym_eigen_sorted(&mzz);
    let lambda_min = *vals.last().unwrap_or(&f64::NAN);
    if !(lambda_min > 0.0) {
        return Err(Error::Numerical(format!(
            "NT scaling: X Z has non-positive eigenvalue {lambda_min:.3e}"
        )));
    }
    let inv_sqrt = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        vals.iter().map(|v| 1.0 / v.sqrt()),
    ));
    let mut g = &l * &q * inv_sqrt * q.transpose() * l.transpose();
    symmetrize(&mut g);
    Ok(NtBlock { g, lambda_min })
}

/// The symmetrization matrix `P = G^{-1/2}` for one block.
pub fn nt_scaling(x: &DMatrix<f64>, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let nt = nt_point(x, z)?;
    let (vals, q) = sym_eigen_sorted(&nt.g);
    if vals.iter().any(|&v| v <= 0.0) {
        return Err(Error::Numerical("NT scaling point not PD".into()));
    }
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        vals.len(),
        vals.iter().map(|v| 1.0 / v.sqrt()),
    ));
    let mut p = &q * d * q.transpose();
    symmetrize(&mut p);
    Ok(p)
}
