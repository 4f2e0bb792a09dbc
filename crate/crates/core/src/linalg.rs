//! Thin helpers over `faer` dense kernels.
//!
//! Everything here is single-threaded and deterministic: the crate builds
//! `faer` without its rayon feature, so factorization order never depends on
//! the thread pool.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};

use crate::error::{Error, Result};

pub type RMat = Mat<f64>;

/// Largest absolute difference between `m` and its transpose.
pub fn asymmetry(m: &RMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn symmetrize(m: &mut RMat) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Eigenvalues in ascending order and matching orthonormal eigenvectors.
pub fn sym_eig(m: &RMat) -> Result<(Vec<f64>, RMat)> {
    if m.nrows() == 0 {
        return Ok((Vec::new(), RMat::zeros(0, 0)));
    }
    let e = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::Solver("eigendecomposition did not converge".into()))?;
    let s = e.S().column_vector();
    let vals = (0..m.nrows()).map(|i| s[i]).collect();
    Ok((vals, e.U().to_owned()))
}

pub fn sym_eigvals(m: &RMat) -> Result<Vec<f64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::Solver("eigendecomposition did not converge".into()))
}

pub fn min_eig(m: &RMat) -> Result<f64> {
    Ok(sym_eigvals(m)?.first().copied().unwrap_or(f64::INFINITY))
}

/// Lower Cholesky factor, or `None` when `m` is not numerically positive definite.
pub fn cholesky(m: &RMat) -> Option<RMat> {
    let l = m.llt(Side::Lower).ok()?;
    let f = l.L().to_owned();
    let ok = (0..f.nrows()).all(|i| f[(i, i)].is_finite() && f[(i, i)] > 0.0);
    ok.then_some(f)
}

/// Solves `L X = B` in place for lower-triangular `L`.
pub fn lower_solve(l: &RMat, b: &mut RMat) {
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l.as_ref(), b.as_mut(), faer::Par::Seq);
}

/// Solves `Lᵀ X = B` in place for lower-triangular `L`.
pub fn lower_t_solve(l: &RMat, b: &mut RMat) {
    faer::linalg::triangular_solve::solve_upper_triangular_in_place(
        l.transpose(),
        b.as_mut(),
        faer::Par::Seq,
    );
}

/// Inverse of `L` for lower-triangular `L`.
pub fn lower_inverse(l: &RMat) -> RMat {
    let mut x = RMat::identity(l.nrows(), l.nrows());
    lower_solve(l, &mut x);
    x
}

/// Dense LU solve with a finiteness check standing in for a singularity test.
pub fn lu_solve(a: &RMat, b: &RMat) -> Result<RMat> {
    let x = a.partial_piv_lu().solve(b);
    let finite = (0..x.ncols()).all(|j| (0..x.nrows()).all(|i| x[(i, j)].is_finite()));
    if finite {
        Ok(x)
    } else {
        Err(Error::RankDeficient)
    }
}

/// Least-squares solve of `A x = b` through the normal equations with a
/// tiny ridge; used for small, well-scaled systems only.
pub fn lstsq(a: &RMat, b: &[f64]) -> Result<Vec<f64>> {
    let bm = col(b);
    let ata = a.transpose() * a;
    let atb = a.transpose() * &bm;
    let n = ata.nrows();
    let scale = (0..n).map(|i| ata[(i, i)]).fold(0.0f64, f64::max).max(1.0);
    let reg = &ata + RMat::identity(n, n) * (1e-14 * scale);
    Ok(to_vec(&lu_solve(&reg, &atb)?))
}

pub fn col(v: &[f64]) -> RMat {
    RMat::from_fn(v.len(), 1, |i, _| v[i])
}

pub fn to_vec(m: &RMat) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, 0)]).collect()
}

pub fn matvec(a: &RMat, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.ncols(), x.len());
    let mut out = vec![0.0; a.nrows()];
    for j in 0..a.ncols() {
        let xj = x[j];
        if xj == 0.0 {
            continue;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o += a[(i, j)] * xj;
        }
    }
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Frobenius inner product `tr(AᵀB)`.
pub fn frob_dot(a: &RMat, b: &RMat) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)] * b[(i, j)];
        }
    }
    s
}

pub fn frob_norm(a: &RMat) -> f64 {
    frob_dot(a, a).sqrt()
}

pub fn trace(a: &RMat) -> f64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

pub fn hstack(a: &RMat, b: &RMat) -> RMat {
    assert_eq!(a.nrows(), b.nrows());
    let ca = a.ncols();
    RMat::from_fn(a.nrows(), ca + b.ncols(), |i, j| if j < ca { a[(i, j)] } else { b[(i, j - ca)] })
}

/// Symmetric square root and inverse square root of a PSD matrix via its
/// eigendecomposition. Eigenvalues are floored at `floor`.
pub fn sqrt_and_inv_sqrt(m: &RMat, floor: f64) -> Result<(RMat, RMat)> {
    let (vals, u) = sym_eig(m)?;
    let n = m.nrows();
    let mut us = u.clone();
    let mut ui = u.clone();
    for (k, &lam) in vals.iter().enumerate() {
        let l = lam.max(floor);
        let (s, si) = (l.sqrt().sqrt(), 1.0 / l.sqrt().sqrt());
        for i in 0..n {
            us[(i, k)] *= s;
            ui[(i, k)] *= si;
        }
    }
    Ok((&us * us.transpose(), &ui * ui.transpose()))
}
