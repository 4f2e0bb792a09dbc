//! Infeasible primal-dual path following with Nesterov-Todd scaling.
//!
//! The primal iterate `y` always keeps every slack `S_b` strictly positive
//! definite; a big-M phase 1 (`S_b + sI ⪰ 0`, minimize `s`) finds such a
//! point when none is supplied. The dual `(Z, w)` may start infeasible.
//! The centering parameter is fixed at `σ = 0.2` and both step lengths use a
//! 0.98 fraction-to-the-boundary rule.

use serde::{Deserialize, Serialize};

use super::schur::{DenseSchur, SchurSolver};
use super::{kkt_residuals, LmiBlock, SdpProblem, SdpResult, SdpStatus};
use crate::error::{Error, Result};
use crate::linalg::{self, RMat};

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Relative tolerance on the duality gap and both residuals.
    pub tol: f64,
    pub max_iters: usize,
    pub sigma: f64,
    pub step_factor: f64,
    /// A point with every slack strictly positive definite. Skips phase 1.
    pub initial_y: Option<Vec<f64>>,
    /// Stop as soon as `y[var] < bound` (used by phase 1).
    pub stop_below: Option<(usize, f64)>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-7, max_iters: 100, sigma: 0.2, step_factor: 0.98, initial_y: None, stop_below: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `Σ_b ⟨Z_b, S_b⟩`.
    pub complementarity: f64,
    /// `r_dᵀ y`; together with the gap it closes `pobj − dobj` exactly when the
    /// equalities hold.
    pub dual_residual_dot_y: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub alpha_primal: f64,
    pub alpha_dual: f64,
}

/// Solves with the dense Schur complement and default options otherwise.
pub fn solve(problem: &SdpProblem, tol: f64, max_iters: usize) -> Result<SdpResult> {
    let opts = SolverOptions { tol, max_iters, ..SolverOptions::default() };
    solve_with(problem, &opts, &mut DenseSchur)
}

pub fn solve_with(problem: &SdpProblem, opts: &SolverOptions, schur: &mut dyn SchurSolver) -> Result<SdpResult> {
    problem.validate()?;
    if has_free_descent(problem) {
        let mut r = infeasible_result(problem);
        r.status = SdpStatus::Unbounded;
        return Ok(r);
    }
    if !equalities_consistent(problem)? {
        return Ok(infeasible_result(problem));
    }
    let start = match &opts.initial_y {
        Some(y) => {
            if y.len() != problem.num_vars {
                return Err(Error::Shape(format!("initial point has {} entries", y.len())));
            }
            if !strictly_feasible(problem, y) {
                return Err(Error::Solver("initial point is not strictly feasible".into()));
            }
            y.clone()
        }
        None => match phase_one(problem, opts)? {
            Some(y) => y,
            None => return Ok(infeasible_result(problem)),
        },
    };
    iterate(problem, opts, schur, start)
}

/// A variable touched by no block and no equality with a nonzero cost.
fn has_free_descent(problem: &SdpProblem) -> bool {
    let mut used = vec![false; problem.num_vars];
    for b in &problem.blocks {
        for (v, _) in &b.coeffs {
            used[*v] = true;
        }
    }
    for e in &problem.equalities {
        for (v, _) in &e.coeffs {
            used[*v] = true;
        }
    }
    used.iter().zip(&problem.objective).any(|(u, c)| !u && *c != 0.0)
}

fn strictly_feasible(problem: &SdpProblem, y: &[f64]) -> bool {
    problem.blocks.iter().all(|b| linalg::cholesky(&b.eval(y)).is_some())
}

fn infeasible_result(problem: &SdpProblem) -> SdpResult {
    SdpResult {
        y_star: vec![0.0; problem.num_vars],
        status: SdpStatus::Infeasible,
        objective_value: f64::NAN,
        dual_objective: f64::NAN,
        iterations: 0,
        max_kkt_residual: f64::INFINITY,
        dual_blocks: problem.blocks.iter().map(|b| RMat::zeros(b.dim, b.dim)).collect(),
        eq_multipliers: vec![0.0; problem.equalities.len()],
        trace: Vec::new(),
    }
}

/// Minimum-norm solution of `A y = f` with its residual norm.
fn min_norm_point(problem: &SdpProblem) -> Result<(Vec<f64>, f64)> {
    let m = problem.num_vars;
    if problem.equalities.is_empty() {
        return Ok((vec![0.0; m], 0.0));
    }
    let f: Vec<f64> = problem.equalities.iter().map(|e| e.rhs).collect();
    let a = problem.eq_matrix();
    let aat = &a * a.transpose();
    let u = linalg::lstsq(&aat, &f)?;
    let y0 = linalg::to_vec(&(a.transpose() * linalg::col(&u)));
    let res: f64 = problem.equalities.iter().map(|e| (e.eval(&y0) - e.rhs).powi(2)).sum::<f64>().sqrt();
    Ok((y0, res / (1.0 + linalg::norm_sq(&f).sqrt())))
}

fn equalities_consistent(problem: &SdpProblem) -> Result<bool> {
    Ok(min_norm_point(problem)?.1 <= 1e-9)
}

/// Returns a strictly feasible point, or `None` when the problem has none.
fn phase_one(problem: &SdpProblem, opts: &SolverOptions) -> Result<Option<Vec<f64>>> {
    let m = problem.num_vars;
    let (y0, _) = min_norm_point(problem)?;
    if strictly_feasible(problem, &y0) {
        return Ok(Some(y0));
    }
    let mut worst = 0.0f64;
    for b in &problem.blocks {
        worst = worst.max(-linalg::min_eig(&b.eval(&y0))?);
    }
    let s_var = m;
    let mut aux = SdpProblem::new({
        let mut c = vec![0.0; m + 1];
        c[s_var] = 1.0;
        c
    });
    for b in &problem.blocks {
        let mut nb = LmiBlock { dim: b.dim, constant: b.constant.clone(), coeffs: b.coeffs.clone() };
        for i in 0..b.dim {
            nb.add(s_var, i, i, 1.0);
        }
        aux.blocks.push(nb);
    }
    let mut floor = LmiBlock::new(1);
    floor.add_constant(0, 0, 1.0);
    floor.add(s_var, 0, 0, 1.0);
    aux.blocks.push(floor);
    aux.equalities = problem.equalities.clone();

    let mut start = y0;
    start.push(worst + 1.0);
    let margin = 1e-8 * (1.0 + worst);
    let aux_opts = SolverOptions {
        initial_y: Some(start),
        stop_below: Some((s_var, -margin)),
        max_iters: opts.max_iters,
        ..opts.clone()
    };
    let res = iterate(&aux, &aux_opts, &mut DenseSchur, aux_opts.initial_y.clone().unwrap())?;
    let y = &res.y_star;
    if y[s_var] < 0.0 && strictly_feasible(problem, &y[..m]) {
        Ok(Some(y[..m].to_vec()))
    } else {
        Ok(None)
    }
}

struct BlockState {
    l: RMat,
    l_inv: RMat,
}

fn factor_all(problem: &SdpProblem, y: &[f64]) -> Option<(Vec<RMat>, Vec<BlockState>)> {
    let mut slacks = Vec::with_capacity(problem.blocks.len());
    let mut states = Vec::with_capacity(problem.blocks.len());
    for b in &problem.blocks {
        let s = b.eval(y);
        let l = linalg::cholesky(&s)?;
        let l_inv = linalg::lower_inverse(&l);
        slacks.push(s);
        states.push(BlockState { l, l_inv });
    }
    Some((slacks, states))
}

/// Largest step `α ≤ 1` keeping `X + αΔ ⪰ 0`, shortened by `factor`, given
/// the inverse Cholesky factor of `X`.
fn max_step(l_inv: &RMat, delta: &RMat, factor: f64) -> Result<f64> {
    let mut t = l_inv * delta * l_inv.transpose();
    linalg::symmetrize(&mut t);
    let lam = linalg::min_eig(&t)?;
    Ok(if lam < 0.0 { (factor * (-1.0 / lam)).min(1.0) } else { 1.0 })
}

/// `max(10, √n, n·max_k (1+|c_k|)/(1+‖F_k‖_F))`, the usual dual start for
/// a block of order `n` with coefficients `F_k`.
fn initial_dual_scale(block: &LmiBlock, c: &[f64]) -> f64 {
    let n = block.dim as f64;
    let ratio = block
        .coeffs
        .iter()
        .map(|(k, f)| {
            let norm = f.entries.iter().map(|&(i, j, v)| if i == j { v * v } else { 2.0 * v * v }).sum::<f64>().sqrt();
            (1.0 + c[*k].abs()) / (1.0 + norm)
        })
        .fold(0.0f64, f64::max);
    10f64.max(n.sqrt()).max(n * ratio)
}

const STALL_STEP: f64 = 1e-2;
const STALL_COUNT: usize = 5;
const STALL_UNBOUNDED: f64 = 1e6;

fn iterate(problem: &SdpProblem, opts: &SolverOptions, schur: &mut dyn SchurSolver, y0: Vec<f64>) -> Result<SdpResult> {
    let m = problem.num_vars;
    // Work with a unit-norm objective so that the iterates for y do not depend
    // on the scale of c; duals and objectives are scaled back at the end.
    let c_scale = {
        let n = linalg::norm_sq(&problem.objective).sqrt();
        if n > 0.0 { n } else { 1.0 }
    };
    let c_owned: Vec<f64> = problem.objective.iter().map(|v| v / c_scale).collect();
    let c = &c_owned;
    let f: Vec<f64> = problem.equalities.iter().map(|e| e.rhs).collect();
    let c_norm = linalg::norm_sq(c).sqrt();
    let f_norm = linalg::norm_sq(&f).sqrt();
    let total_dim: usize = problem.blocks.iter().map(|b| b.dim).sum::<usize>().max(1);

    let mut y = y0;
    let mut w = vec![0.0; problem.equalities.len()];
    let mut z: Vec<RMat> = problem.blocks.iter().map(|b| RMat::identity(b.dim, b.dim) * initial_dual_scale(b, c)).collect();

    let mut trace = Vec::new();
    let mut status = SdpStatus::MaxIters;
    let mut iterations = 0;
    let initial_obj = linalg::dot(c, &y).abs();
    let mut short_steps = 0usize;
    // (merit, y, Z, w, trace index) of the most accurate iterate so far.
    let mut best: Option<(f64, Vec<f64>, Vec<RMat>, Vec<f64>, usize)> = None;

    for iter in 0..=opts.max_iters {
        let Some((slacks, states)) = factor_all(problem, &y) else {
            return Err(Error::Solver("lost strict feasibility".into()));
        };
        let pobj = linalg::dot(c, &y);
        let fz = problem.adjoint(&z);
        let aw = problem.eq_adjoint(&w);
        let rd: Vec<f64> = (0..m).map(|i| c[i] - fz[i] - aw[i]).collect();
        let rp: Vec<f64> = problem.equalities.iter().map(|e| e.rhs - e.eval(&y)).collect();
        let dobj = -problem.blocks.iter().zip(&z).map(|(b, zb)| linalg::frob_dot(&b.constant, zb)).sum::<f64>()
            + linalg::dot(&f, &w);
        let gap: f64 = slacks.iter().zip(&z).map(|(s, zb)| linalg::frob_dot(s, zb)).sum();
        let mu = gap / total_dim as f64;
        let rd_norm = linalg::norm_sq(&rd).sqrt();
        let rp_norm = linalg::norm_sq(&rp).sqrt();
        let record = IterationRecord {
            iteration: iter,
            primal_objective: pobj * c_scale,
            dual_objective: dobj * c_scale,
            complementarity: gap * c_scale,
            dual_residual_dot_y: linalg::dot(&rd, &y) * c_scale,
            primal_residual: rp_norm,
            dual_residual: rd_norm * c_scale,
            alpha_primal: 0.0,
            alpha_dual: 0.0,
        };
        trace.push(record);
        iterations = iter;

        if let Some((var, bound)) = opts.stop_below {
            if y[var] < bound {
                status = SdpStatus::Optimal;
                break;
            }
        }
        let scale = 1.0 + pobj.abs().max(dobj.abs());
        let merit = (gap / scale).max(rd_norm / (1.0 + c_norm)).max(rp_norm / (1.0 + f_norm));
        if best.as_ref().is_none_or(|b| merit < b.0) {
            best = Some((merit, y.clone(), z.clone(), w.clone(), trace.len() - 1));
        }
        if gap <= opts.tol * scale && rd_norm <= opts.tol * (1.0 + c_norm) && rp_norm <= opts.tol * (1.0 + f_norm) {
            status = SdpStatus::Optimal;
            break;
        }
        if !pobj.is_finite() || pobj < -1e10 * (1.0 + initial_obj) {
            status = SdpStatus::Unbounded;
            break;
        }
        if iter == opts.max_iters {
            break;
        }

        let step = newton_step(problem, opts, schur, &y, &z, &states, c, &aw, &rp, mu);
        let (y_new, z_new, dw, alpha_p, alpha_d) = match step {
            Ok(v) => v,
            // Late breakdowns come from rounding near the boundary; the best
            // iterate so far is returned below.
            Err(_) if iter > 0 => break,
            Err(e) => return Err(e),
        };
        if alpha_p < 1e-12 && alpha_d < 1e-12 {
            break;
        }
        y = y_new;
        z = z_new;
        for (wk, d) in w.iter_mut().zip(&dw) {
            *wk += alpha_d * d;
        }
        if let Some(last) = trace.last_mut() {
            last.alpha_primal = alpha_p;
            last.alpha_dual = alpha_d;
        }
        // Rounding has taken over once steps stay tiny; stop instead of
        // burning the remaining iterations.
        short_steps = if alpha_p.max(alpha_d) < STALL_STEP { short_steps + 1 } else { 0 };
        if short_steps >= STALL_COUNT {
            break;
        }
    }

    let mut last = trace.last().copied().expect("at least one record");
    // A run that stalls after driving the objective far below its start is
    // chasing a ray, not converging slowly.
    if status == SdpStatus::MaxIters && last.primal_objective < -STALL_UNBOUNDED * (1.0 + initial_obj) * c_scale {
        status = SdpStatus::Unbounded;
    }
    if status == SdpStatus::MaxIters {
        if let Some((_, by, bz, bw, idx)) = best {
            (y, z, w, last) = (by, bz, bw, trace[idx]);
        }
    }
    for zb in z.iter_mut() {
        *zb = &*zb * c_scale;
    }
    for wk in w.iter_mut() {
        *wk *= c_scale;
    }
    let max_kkt_residual = kkt_residuals(problem, &y, &z)?;
    Ok(SdpResult {
        y_star: y,
        status,
        objective_value: last.primal_objective,
        dual_objective: last.dual_objective,
        iterations,
        max_kkt_residual,
        dual_blocks: z,
        eq_multipliers: w,
        trace,
    })
}

type Step = (Vec<f64>, Vec<RMat>, Vec<f64>, f64, f64);

/// One damped Newton step: the new `y` and `Z`, the multiplier update and
/// the primal and dual step lengths.
#[allow(clippy::too_many_arguments)]
fn newton_step(
    problem: &SdpProblem,
    opts: &SolverOptions,
    schur: &mut dyn SchurSolver,
    y: &[f64],
    z: &[RMat],
    states: &[BlockState],
    c: &[f64],
    aw: &[f64],
    rp: &[f64],
    mu: f64,
) -> Result<Step> {
    let m = problem.num_vars;
    // Nesterov-Todd scaling W with W S W = Z, and S⁻¹.
    let mut scalings = Vec::with_capacity(states.len());
    let mut s_invs = Vec::with_capacity(states.len());
    for (st, zb) in states.iter().zip(z) {
        let mut inner = st.l.transpose() * zb * &st.l;
        linalg::symmetrize(&mut inner);
        let (root, _) = linalg::sqrt_and_inv_sqrt(&inner, 0.0)?;
        let mut wb = st.l_inv.transpose() * &root * &st.l_inv;
        linalg::symmetrize(&mut wb);
        scalings.push(wb);
        let mut si = st.l_inv.transpose() * &st.l_inv;
        linalg::symmetrize(&mut si);
        s_invs.push(si);
    }
    let target = opts.sigma * mu;
    let centered: Vec<RMat> = s_invs.iter().map(|si| si * target).collect();
    let fs = problem.adjoint(&centered);
    let rhs_y: Vec<f64> = (0..m).map(|i| fs[i] - c[i] + aw[i]).collect();
    let (dy, dw) = schur.solve(problem, &scalings, &rhs_y, rp)?;
    if dy.iter().chain(&dw).any(|v| !v.is_finite()) {
        return Err(Error::Solver("non-finite Newton direction".into()));
    }

    let mut alpha_p = 1.0f64;
    let mut alpha_d = 1.0f64;
    let mut dzs = Vec::with_capacity(z.len());
    for (b, blk) in problem.blocks.iter().enumerate() {
        let mut ds = RMat::zeros(blk.dim, blk.dim);
        blk.add_linear(&dy, &mut ds);
        let mut dz = &centered[b] - &z[b] - &scalings[b] * &ds * &scalings[b];
        linalg::symmetrize(&mut dz);
        alpha_p = alpha_p.min(max_step(&states[b].l_inv, &ds, opts.step_factor)?);
        let lz = linalg::cholesky(&z[b]).ok_or_else(|| Error::Solver("dual iterate lost definiteness".into()))?;
        alpha_d = alpha_d.min(max_step(&linalg::lower_inverse(&lz), &dz, opts.step_factor)?);
        dzs.push(dz);
    }

    // Guard against rounding pushing an iterate onto the boundary.
    let mut y_new: Vec<f64>;
    loop {
        y_new = y.iter().zip(&dy).map(|(a, d)| a + alpha_p * d).collect();
        if strictly_feasible(problem, &y_new) || alpha_p < 1e-12 {
            break;
        }
        alpha_p *= 0.5;
    }
    let mut z_new: Vec<RMat>;
    loop {
        z_new = z.iter().zip(&dzs).map(|(a, d)| a + d * alpha_d).collect();
        if z_new.iter().all(|zb| linalg::cholesky(zb).is_some()) || alpha_d < 1e-12 {
            break;
        }
        alpha_d *= 0.5;
    }
    Ok((y_new, z_new, dw, alpha_p, alpha_d))
}
