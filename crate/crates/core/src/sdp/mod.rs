//! Dense primal-dual interior-point solver for small multi-block LMI problems.
//!
//! Problems are stated in the "y-form"
//!
//! ```text
//! minimize    cᵀy
//! subject to  F_b0 + Σ_i y_i F_bi ⪰ 0   for every block b
//!             a_kᵀ y = f_k              for every equality k
//! ```
//!
//! with dual
//!
//! ```text
//! maximize    −Σ_b ⟨F_b0, Z_b⟩ + fᵀw
//! subject to  Σ_b ⟨F_bi, Z_b⟩ + (Aᵀw)_i = c_i,   Z_b ⪰ 0.
//! ```
//!
//! Block data is dense; the coefficient matrices `F_bi` are kept as
//! lower-triangle triplets because most lifted models touch only a handful
//! of entries per variable.

mod dump;
mod ipm;
mod schur;

pub use dump::{read_problem, write_problem};
pub use ipm::{solve, solve_with, IterationRecord, SolverOptions};
pub use schur::{DenseSchur, SchurSolver};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, RMat};

/// A symmetric matrix given by its lower-triangle entries `(row, col, value)`
/// with `row >= col`. Duplicate positions add up.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SymSparse {
    pub entries: Vec<(usize, usize, f64)>,
}

impl SymSparse {
    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        if v != 0.0 {
            let (r, c) = if i >= j { (i, j) } else { (j, i) };
            self.entries.push((r, c, v));
        }
    }

    pub fn from_dense(m: &RMat) -> Self {
        let mut s = Self::default();
        for j in 0..m.ncols() {
            for i in j..m.nrows() {
                s.push(i, j, m[(i, j)]);
            }
        }
        s
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Adds `alpha` times this matrix to `out`.
    pub fn add_to(&self, out: &mut RMat, alpha: f64) {
        for &(i, j, v) in &self.entries {
            out[(i, j)] += alpha * v;
            if i != j {
                out[(j, i)] += alpha * v;
            }
        }
    }

    pub fn to_dense(&self, n: usize) -> RMat {
        let mut m = RMat::zeros(n, n);
        self.add_to(&mut m, 1.0);
        m
    }

    /// `⟨F, X⟩` for symmetric `X`.
    pub fn inner(&self, x: &RMat) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| if i == j { v * x[(i, i)] } else { v * (x[(i, j)] + x[(j, i)]) })
            .sum()
    }
}

/// One LMI `F_0 + Σ y_i F_i ⪰ 0`. Variables that do not appear have no entry
/// in `coeffs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiBlock {
    pub dim: usize,
    pub constant: RMat,
    pub coeffs: Vec<(usize, SymSparse)>,
}

impl LmiBlock {
    pub fn new(dim: usize) -> Self {
        Self { dim, constant: RMat::zeros(dim, dim), coeffs: Vec::new() }
    }

    /// Builds a block from dense matrices `[F_1, …, F_m]`.
    pub fn from_dense(constant: RMat, coeffs: &[RMat]) -> Self {
        let dim = constant.nrows();
        let coeffs = coeffs
            .iter()
            .enumerate()
            .map(|(i, f)| (i, SymSparse::from_dense(f)))
            .filter(|(_, s)| !s.is_empty())
            .collect();
        Self { dim, constant, coeffs }
    }

    /// Adds `v` at symmetric position `(i, j)` of the coefficient of `var`.
    pub fn add(&mut self, var: usize, i: usize, j: usize, v: f64) {
        match self.coeffs.binary_search_by_key(&var, |(k, _)| *k) {
            Ok(pos) => self.coeffs[pos].1.push(i, j, v),
            Err(pos) => {
                let mut s = SymSparse::default();
                s.push(i, j, v);
                self.coeffs.insert(pos, (var, s));
            }
        }
    }

    pub fn add_constant(&mut self, i: usize, j: usize, v: f64) {
        self.constant[(i, j)] += v;
        if i != j {
            self.constant[(j, i)] += v;
        }
    }

    /// `F_0 + Σ y_i F_i`.
    pub fn eval(&self, y: &[f64]) -> RMat {
        let mut s = self.constant.clone();
        self.add_linear(y, &mut s);
        s
    }

    /// Adds `Σ y_i F_i` (no constant) to `out`.
    pub fn add_linear(&self, y: &[f64], out: &mut RMat) {
        for (var, f) in &self.coeffs {
            if y[*var] != 0.0 {
                f.add_to(out, y[*var]);
            }
        }
    }

    /// Accumulates the adjoint `⟨F_i, X⟩` into `out[i]`.
    pub fn adjoint_into(&self, x: &RMat, out: &mut [f64]) {
        for (var, f) in &self.coeffs {
            out[*var] += f.inner(x);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equality {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl Equality {
    pub fn eval(&self, y: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(i, a)| a * y[i]).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub blocks: Vec<LmiBlock>,
    pub equalities: Vec<Equality>,
}

impl SdpProblem {
    pub fn new(objective: Vec<f64>) -> Self {
        Self { num_vars: objective.len(), objective, blocks: Vec::new(), equalities: Vec::new() }
    }

    pub fn add_equality(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        self.equalities.push(Equality { coeffs, rhs });
    }

    /// Checks dimensions, variable indices and symmetry of the constants.
    pub fn validate(&self) -> Result<()> {
        if self.objective.len() != self.num_vars {
            return Err(Error::Shape(format!(
                "objective has {} entries for {} variables",
                self.objective.len(),
                self.num_vars
            )));
        }
        for (b, blk) in self.blocks.iter().enumerate() {
            if blk.constant.nrows() != blk.dim || blk.constant.ncols() != blk.dim {
                return Err(Error::Shape(format!("block {b}: constant is not {0}x{0}", blk.dim)));
            }
            let asym = linalg::asymmetry(&blk.constant);
            if asym > 1e-12 {
                return Err(Error::NotSymmetric(asym));
            }
            for (var, f) in &blk.coeffs {
                if *var >= self.num_vars {
                    return Err(Error::Shape(format!("block {b}: variable {var} out of range")));
                }
                if f.entries.iter().any(|&(i, j, _)| i >= blk.dim || j > i) {
                    return Err(Error::Shape(format!("block {b}: coefficient of variable {var} out of range")));
                }
            }
        }
        for (k, eq) in self.equalities.iter().enumerate() {
            if eq.coeffs.iter().any(|&(i, _)| i >= self.num_vars) {
                return Err(Error::Shape(format!("equality {k}: variable out of range")));
            }
        }
        Ok(())
    }

    pub fn objective_at(&self, y: &[f64]) -> f64 {
        linalg::dot(&self.objective, y)
    }

    pub fn slacks(&self, y: &[f64]) -> Vec<RMat> {
        self.blocks.iter().map(|b| b.eval(y)).collect()
    }

    /// `Σ_b F_b*(Z_b)`, the variable-space image of the dual blocks.
    pub fn adjoint(&self, z: &[RMat]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_vars];
        for (blk, zb) in self.blocks.iter().zip(z) {
            blk.adjoint_into(zb, &mut out);
        }
        out
    }

    /// `Aᵀ w`.
    pub fn eq_adjoint(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_vars];
        for (eq, &wk) in self.equalities.iter().zip(w) {
            for &(i, a) in &eq.coeffs {
                out[i] += a * wk;
            }
        }
        out
    }

    /// Dense equality matrix `A` (rows are constraints).
    pub fn eq_matrix(&self) -> RMat {
        let mut a = RMat::zeros(self.equalities.len(), self.num_vars);
        for (k, eq) in self.equalities.iter().enumerate() {
            for &(i, v) in &eq.coeffs {
                a[(k, i)] += v;
            }
        }
        a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpStatus {
    Optimal,
    MaxIters,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct SdpResult {
    pub y_star: Vec<f64>,
    pub status: SdpStatus,
    pub objective_value: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    pub max_kkt_residual: f64,
    pub dual_blocks: Vec<RMat>,
    pub eq_multipliers: Vec<f64>,
    pub trace: Vec<IterationRecord>,
}

/// True iff `λ_min(M) ≥ −tol`.
pub fn check_psd(m: &RMat, tol: f64) -> Result<bool> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape(format!("{}x{} matrix is not square", m.nrows(), m.ncols())));
    }
    let asym = linalg::asymmetry(m);
    if asym > 1e-10 {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(linalg::min_eig(m)? >= -tol)
}

/// Largest of: primal infeasibility (negative eigenvalues and equality
/// residuals), dual infeasibility `‖c − F*(Z) − Aᵀw‖` with `w` fitted by
/// least squares, and the complementarity norms `‖Z_b S_b‖_F`.
pub fn kkt_residuals(problem: &SdpProblem, y: &[f64], dual_blocks: &[RMat]) -> Result<f64> {
    if y.len() != problem.num_vars || dual_blocks.len() != problem.blocks.len() {
        return Err(Error::Shape("y or dual blocks do not match the problem".into()));
    }
    let mut worst = 0.0f64;
    let mut slacks = Vec::with_capacity(problem.blocks.len());
    for (blk, z) in problem.blocks.iter().zip(dual_blocks) {
        if z.nrows() != blk.dim || z.ncols() != blk.dim {
            return Err(Error::Shape(format!("dual block is {}x{}, expected {}", z.nrows(), z.ncols(), blk.dim)));
        }
        let s = blk.eval(y);
        worst = worst.max(-linalg::min_eig(&s)?).max(-linalg::min_eig(z)?);
        slacks.push(s);
    }
    for eq in &problem.equalities {
        worst = worst.max((eq.eval(y) - eq.rhs).abs());
    }
    let fz = problem.adjoint(dual_blocks);
    let mut rd: Vec<f64> = problem.objective.iter().zip(&fz).map(|(c, f)| c - f).collect();
    if !problem.equalities.is_empty() {
        let at = problem.eq_matrix().transpose().to_owned();
        let w = linalg::lstsq(&at, &rd)?;
        let aw = problem.eq_adjoint(&w);
        rd.iter_mut().zip(&aw).for_each(|(r, a)| *r -= a);
    }
    worst = worst.max(linalg::norm_sq(&rd).sqrt());
    for (s, z) in slacks.iter().zip(dual_blocks) {
        worst = worst.max(linalg::frob_norm(&(z * s)));
    }
    Ok(worst)
}
