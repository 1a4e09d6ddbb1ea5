//! Small dense helpers on top of `faer`.

use faer::{Mat, MatRef, Side};

use crate::{c64, Error, Result};

pub fn zeros(n: usize, m: usize) -> Mat<c64> {
    Mat::zeros(n, m)
}

pub fn identity(n: usize) -> Mat<c64> {
    Mat::from_fn(n, n, |i, j| {
        if i == j {
            c64::new(1.0, 0.0)
        } else {
            c64::new(0.0, 0.0)
        }
    })
}

pub fn adjoint(m: MatRef<'_, c64>) -> Mat<c64> {
    m.adjoint().to_owned()
}

pub fn max_abs(m: MatRef<'_, c64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

/// `max |A_ij − conj(A_ji)|`.
pub fn hermitian_defect(m: MatRef<'_, c64>) -> f64 {
    let n = m.nrows();
    let mut best = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            best = best.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    best
}

/// Largest singular value, as `√λ_max` of the smaller Gram matrix.
pub fn operator_norm(m: MatRef<'_, c64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let gram = if m.ncols() <= m.nrows() {
        m.adjoint() * m
    } else {
        m * m.adjoint()
    };
    hermitian_norm(gram.as_ref()).sqrt()
}

/// Operator norm of a Hermitian matrix from its eigenvalues; cheaper than an SVD.
pub fn hermitian_norm(m: MatRef<'_, c64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    match m.self_adjoint_eigenvalues(Side::Lower) {
        Ok(ev) => ev.iter().fold(0.0f64, |acc, &x| acc.max(x.abs())),
        Err(_) => f64::NAN,
    }
}

pub fn singular_values(m: MatRef<'_, c64>) -> Result<Vec<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    m.singular_values().map_err(|_| Error::EigenFailure)
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(m: MatRef<'_, c64>) -> Result<(Vec<f64>, Mat<c64>)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::EigenFailure)?;
    let values = (0..n).map(|i| evd.S()[i].re).collect();
    Ok((values, evd.U().to_owned()))
}

pub fn hermitian_eigenvalues(m: MatRef<'_, c64>) -> Result<Vec<f64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::EigenFailure)
}

/// `G^{-1/2}` for a Hermitian positive definite matrix, with its eigenvalues.
pub fn inverse_sqrt(g: MatRef<'_, c64>) -> Result<(Mat<c64>, Vec<f64>)> {
    let (vals, u) = hermitian_eigen(g)?;
    let n = vals.len();
    let mut scaled = u.clone();
    for (j, &lam) in vals.iter().enumerate() {
        let s = 1.0 / lam.sqrt();
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    Ok((&scaled * u.adjoint(), vals))
}

/// `Σ_k col_k col_k*` over the columns of `v`.
pub fn outer_sum(v: MatRef<'_, c64>) -> Mat<c64> {
    v * v.adjoint()
}

pub fn trace(m: MatRef<'_, c64>) -> c64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

pub fn sub(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Mat<c64> {
    a - b
}
