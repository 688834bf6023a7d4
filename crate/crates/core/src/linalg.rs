//! Dense complex helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Singular values below `REL_SV_FLOOR * sigma_max` are treated as zero.
pub const REL_SV_FLOOR: f64 = 1e-10;

/// Moore-Penrose pseudo-inverse through the SVD.
///
/// Returns the pseudo-inverse together with the condition number of the
/// retained spectrum (`inf` if any singular value was floored).
pub fn pinv(a: &CMatrix) -> (CMatrix, f64) {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return (CMatrix::zeros(cols, rows), 1.0);
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let s = &svd.singular_values;
    let s_max = s.max();
    if s_max == 0.0 {
        return (CMatrix::zeros(cols, rows), f64::INFINITY);
    }
    let floor = REL_SV_FLOOR * s_max;
    let mut s_min = s_max;
    let mut floored = false;
    let mut inv = CMatrix::zeros(cols, rows);
    for (i, &sv) in s.iter().enumerate() {
        if sv <= floor {
            floored = true;
            continue;
        }
        s_min = s_min.min(sv);
        let vi = v_t.row(i).adjoint();
        let ui = u.column(i).adjoint();
        inv += (vi * ui) * Complex64::new(1.0 / sv, 0.0);
    }
    let cond = if floored { f64::INFINITY } else { s_max / s_min };
    (inv, cond)
}

/// Orthonormal basis for the column span of `a` (rank decided with [`REL_SV_FLOOR`]).
pub fn column_basis(a: &CMatrix) -> CMatrix {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return CMatrix::zeros(rows, 0);
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("u requested");
    let s_max = svd.singular_values.max();
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &sv)| s_max > 0.0 && sv > REL_SV_FLOOR * s_max)
        .map(|(i, _)| i)
        .collect();
    CMatrix::from_fn(rows, keep.len(), |r, c| u[(r, keep[c])])
}

/// `(I - Q Q^H) y` for an orthonormal basis `q`.
pub fn project_out(q: &CMatrix, y: &CVector) -> CVector {
    if q.ncols() == 0 {
        return y.clone();
    }
    let coeffs = q.ad_mul(y);
    y - q * coeffs
}

/// Solve the Hermitian positive definite system `a x = b`.
pub fn solve_hpd(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    match a.clone().cholesky() {
        Some(ch) => Ok(ch.solve(b)),
        None => a
            .clone()
            .lu()
            .solve(b)
            .ok_or_else(|| Error::Singular("matrix is not invertible".into())),
    }
}

pub fn squared_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}
