//! Dense solves on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solve a square system with partial-pivoting LU.
pub fn lu_solve(a: DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let lu = a.lu();
    lu.solve(b).ok_or(Error::Singular(f64::INFINITY))
}

pub fn lu_solve_vec(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let lu = a.lu();
    lu.solve(b).ok_or(Error::Singular(f64::INFINITY))
}

/// Singular values in decreasing order.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = a
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// 2-norm condition number.
pub fn condition(a: &DMatrix<f64>) -> f64 {
    let s = singular_values(a);
    match (s.first(), s.last()) {
        (Some(hi), Some(lo)) if *lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Least-squares solution of a full-column-rank system; square systems go through LU.
pub fn least_squares(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    max_condition: f64,
) -> Result<DMatrix<f64>> {
    let cond = condition(a);
    if !(cond < max_condition) {
        return Err(Error::Singular(cond));
    }
    if a.nrows() == a.ncols() {
        return lu_solve(a.clone(), b);
    }
    let svd = a.clone().svd(true, true);
    svd.solve(b, 0.0).map_err(|_| Error::Singular(cond))
}

/// Right singular vector of the smallest singular value, with all singular values.
pub fn null_vector(a: &DMatrix<f64>) -> (DVector<f64>, Vec<f64>) {
    let n = a.ncols();
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.expect("requested v_t");
    let sv = &svd.singular_values;
    let k = (0..sv.len())
        .min_by(|&i, &j| sv[i].total_cmp(&sv[j]))
        .unwrap();
    let v = DVector::from_iterator(n, vt.row(k).iter().copied());
    let mut s: Vec<f64> = sv.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    (v, s)
}
