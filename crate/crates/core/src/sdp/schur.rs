use crate::error::{Error, Result};
use crate::linalg::{self, RMat};

use super::SdpProblem;

/// Solves the Newton system of one interior-point iteration,
///
/// ```text
/// [ M  −Aᵀ ] [Δy]   [rhs_y]
/// [ A   0  ] [Δw] = [rhs_w],      M = Σ_b F_b*(W_b F_b(·) W_b),
/// ```
///
/// where `W_b` is the Nesterov-Todd scaling of block `b` (`W S W = Z`).
/// Problem-specific implementations can exploit structure that the dense
/// default ignores.
pub trait SchurSolver {
    fn solve(
        &mut self,
        problem: &SdpProblem,
        scalings: &[RMat],
        rhs_y: &[f64],
        rhs_w: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>)>;
}

/// Forms `M` densely from the sparse coefficients and solves the bordered
/// system by LU.
#[derive(Debug, Default, Clone)]
pub struct DenseSchur;

impl DenseSchur {
    pub fn schur_matrix(problem: &SdpProblem, scalings: &[RMat]) -> RMat {
        let m = problem.num_vars;
        let mut big = RMat::zeros(m, m);
        for (blk, w) in problem.blocks.iter().zip(scalings) {
            let n = blk.dim;
            for (jpos, (j, fj)) in blk.coeffs.iter().enumerate() {
                // X = W F_j W, accumulated from the triplets.
                let mut x = RMat::zeros(n, n);
                if fj.entries.len() <= n {
                    for &(p, q, v) in &fj.entries {
                        for c in 0..n {
                            let (wpc, wqc) = (w[(p, c)], w[(q, c)]);
                            for r in 0..n {
                                let mut add = w[(r, p)] * wqc;
                                if p != q {
                                    add += w[(r, q)] * wpc;
                                }
                                x[(r, c)] += v * add;
                            }
                        }
                    }
                } else {
                    let f = fj.to_dense(n);
                    x = w * (&f * w);
                }
                for (i, fi) in blk.coeffs[..=jpos].iter() {
                    let v = fi.inner(&x);
                    big[(*i, *j)] += v;
                    if i != j {
                        big[(*j, *i)] += v;
                    }
                }
            }
        }
        big
    }
}

impl SchurSolver for DenseSchur {
    fn solve(
        &mut self,
        problem: &SdpProblem,
        scalings: &[RMat],
        rhs_y: &[f64],
        rhs_w: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let m = problem.num_vars;
        let p = problem.equalities.len();
        let mm = Self::schur_matrix(problem, scalings);
        let diag_max = (0..m).map(|i| mm[(i, i)].abs()).fold(0.0f64, f64::max);
        let reg = if diag_max > 0.0 { 1e-13 * diag_max } else { 1.0 };
        let mut kkt = RMat::zeros(m + p, m + p);
        for j in 0..m {
            for i in 0..m {
                kkt[(i, j)] = mm[(i, j)];
            }
            // A whisper of regularization keeps variables that only enter through
            // equalities from making the system exactly singular.
            kkt[(j, j)] += reg;
        }
        for (k, eq) in problem.equalities.iter().enumerate() {
            for &(i, a) in &eq.coeffs {
                kkt[(m + k, i)] += a;
                kkt[(i, m + k)] -= a;
            }
        }
        let rhs = linalg::col(&rhs_y.iter().chain(rhs_w).copied().collect::<Vec<_>>());
        let sol = linalg::lu_solve(&kkt, &rhs).map_err(|_| Error::Solver("singular Newton system".into()))?;
        let v = linalg::to_vec(&sol);
        Ok((v[..m].to_vec(), v[m..].to_vec()))
    }
}
