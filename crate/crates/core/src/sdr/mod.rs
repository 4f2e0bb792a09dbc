//! Semidefinite relaxation of the quantized precoding problem.
//!
//! A transmit vector with B-bit DAC outputs is written as `x = C v` with a
//! sign vector `v ∈ {±Δ/2}^d`, `d = 2NB`. Absorbing the precoding factor into
//! `ṽ = βv` and appending a unit entry, the residual becomes a quadratic form,
//!
//! ```text
//! ‖s̃ − H̃Cṽ‖² = tr(T V),   V = [ṽ; 1][ṽ; 1]ᵀ,   T = H_mᵀ H_m,   H_m = [H̃C, −s̃].
//! ```
//!
//! Dropping `rank V = 1` gives the nominal SDR. The robust variant bounds the
//! residual over every channel error in the uncertainty ball through an
//! S-procedure LMI with multiplier `κ`:
//!
//! ```text
//! minimize ε  s.t.  tr((V+W)T) ≤ ε − 2κη²,  [κI−V  V; V  W] ⪰ 0,  V ⪰ 0,  κ ≥ 0,
//!                   V_11 = … = V_dd,  V_nn = 1.
//! ```
//!
//! Three formulations are available. The direct one has exactly the
//! variables above and suits small `d`. At desk scale `W` is eliminated by a
//! Schur complement, leaving `V`, `κ` and a `2K × 2K` matrix `Σ`, and the
//! Newton systems are solved with a structured reduction; the nominal SDR
//! gets a similar closed-form Newton solver. Its dual, with only `d`
//! variables, is available as an independent check on small instances.

mod structured;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::RealExpansion;
use crate::error::{Error, Result};
use crate::linalg::{self, RMat};
use crate::quantizer::{self, QuantizerSpec};
use crate::sdp::{self, LmiBlock, SdpProblem, SdpStatus, SolverOptions};

pub use structured::{NominalSchur, StructuredSchur};

/// Default number of Gaussian rounding samples.
pub const DEFAULT_RANDOM_ROUNDS: usize = 50;

/// Largest nominal model (number of scalar unknowns) solved with the dense
/// Newton system under [`Backend::Auto`].
const DENSE_VAR_LIMIT: usize = 400;

#[derive(Debug, Clone, PartialEq)]
pub struct LiftInstance {
    pub h_tilde: RMat,
    pub s_tilde: Vec<f64>,
    pub c_matrix: RMat,
    pub eta: f64,
    pub dim: usize,
    /// `[H̃C, s̃]`.
    pub h_breve: RMat,
}

impl LiftInstance {
    pub fn new(h_tilde: RMat, s_tilde: Vec<f64>, c_matrix: RMat, eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::Domain(format!("eta must lie in [0,1], got {eta}")));
        }
        let h_breve = build_h_breve(&h_tilde, &s_tilde, &c_matrix)?;
        let dim = c_matrix.ncols();
        Ok(Self { h_tilde, s_tilde, c_matrix, eta, dim, h_breve })
    }

    pub fn from_expansion(re: &RealExpansion, spec: &QuantizerSpec, eta: f64) -> Result<Self> {
        let c = quantizer::build_c(re.h_tilde.ncols() / 2, spec)?;
        Self::new(re.h_tilde.clone(), re.s_tilde.clone(), c, eta)
    }

    /// `H̃C`.
    pub fn effective(&self) -> RMat {
        self.h_breve.subcols(0, self.dim).to_owned()
    }

    /// `H_m = [H̃C, −s̃]`, so that `T = H_mᵀ H_m`.
    pub fn h_m(&self) -> RMat {
        let r = self.h_breve.nrows();
        RMat::from_fn(r, self.dim + 1, |i, j| if j < self.dim { self.h_breve[(i, j)] } else { -self.h_breve[(i, j)] })
    }

    /// Residual `‖s̃ − H̃Cṽ‖²` of a lifted vector.
    pub fn residual_sq(&self, v_tilde: &[f64]) -> f64 {
        let hv = linalg::matvec(&self.effective(), v_tilde);
        self.s_tilde.iter().zip(&hv).map(|(s, h)| (s - h).powi(2)).sum()
    }
}

fn check_shapes(h: &RMat, s: &[f64], c: &RMat) -> Result<()> {
    if h.nrows() != s.len() || h.ncols() != c.nrows() {
        return Err(Error::Shape(format!(
            "H̃ is {}×{}, s̃ has {} entries, C is {}×{}",
            h.nrows(),
            h.ncols(),
            s.len(),
            c.nrows(),
            c.ncols()
        )));
    }
    Ok(())
}

/// `T = [[CᵀH̃ᵀH̃C, −CᵀH̃ᵀs̃], [−s̃ᵀH̃C, s̃ᵀs̃]]`.
pub fn build_t(h_tilde: &RMat, s_tilde: &[f64], c_matrix: &RMat) -> Result<RMat> {
    check_shapes(h_tilde, s_tilde, c_matrix)?;
    let a = h_tilde * c_matrix;
    let d = a.ncols();
    let hm = RMat::from_fn(a.nrows(), d + 1, |i, j| if j < d { a[(i, j)] } else { -s_tilde[i] });
    let mut t = hm.transpose() * &hm;
    linalg::symmetrize(&mut t);
    Ok(t)
}

/// `Ȟ = [H̃C, s̃]`.
pub fn build_h_breve(h_tilde: &RMat, s_tilde: &[f64], c_matrix: &RMat) -> Result<RMat> {
    check_shapes(h_tilde, s_tilde, c_matrix)?;
    let a = h_tilde * c_matrix;
    let d = a.ncols();
    Ok(RMat::from_fn(a.nrows(), d + 1, |i, j| if j < d { a[(i, j)] } else { s_tilde[i] }))
}

/// Orientation of the S-procedure block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LmiSign {
    /// `[κI−V, V; V, W] ⪰ 0`.
    #[default]
    Corrected,
    /// `[V−κI, V; V, −W] ⪰ 0`, kept for comparison; it leaves `W` unbounded
    /// below and the model unbounded.
    AsPrinted,
}

impl std::str::FromStr for LmiSign {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "corrected" => Ok(Self::Corrected),
            "as-printed" => Ok(Self::AsPrinted),
            other => Err(Error::Config(format!("unknown lmi sign '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelForm {
    /// Variables `vech V, ε`; the robust model at `η = 0`.
    Nominal,
    /// Variables `vech V, vech W, κ, ε`.
    Direct,
    /// Variables `vech V, κ, vech Σ`, with `W` eliminated.
    Structured,
    /// Dual of the nominal SDR; variables are the `d` equality multipliers.
    NominalDual,
}

/// Index of `(i, j)` in the column-major lower-triangle ordering.
pub fn tri_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i >= j { (i, j) } else { (j, i) };
    j * n - j * j.saturating_sub(1) / 2 + (i - j)
}

pub fn tri_len(n: usize) -> usize {
    n * (n + 1) / 2
}

fn vech(m: &RMat) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(tri_len(n));
    for j in 0..n {
        for i in j..n {
            out.push(m[(i, j)]);
        }
    }
    out
}

fn unvech(y: &[f64], n: usize) -> RMat {
    let mut m = RMat::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        for i in j..n {
            m[(i, j)] = y[k];
            m[(j, i)] = y[k];
            k += 1;
        }
    }
    m
}

#[derive(Debug, Clone)]
pub struct RobustSdpModel {
    pub problem: SdpProblem,
    pub form: ModelForm,
    pub eta: f64,
    /// Length `d` of the sign vector; the lifted matrix is `(d+1) × (d+1)`.
    pub dim: usize,
    pub lmi_sign: LmiSign,
    h_m: RMat,
    initial_y: Option<Vec<f64>>,
}

impl RobustSdpModel {
    pub fn num_vars(&self) -> usize {
        self.problem.num_vars
    }

    pub fn h_m(&self) -> &RMat {
        &self.h_m
    }

    /// The strictly feasible start the assembler chose, if any.
    pub fn initial_point(&self) -> Option<Vec<f64>> {
        self.initial_y.clone()
    }

    fn n(&self) -> usize {
        self.dim + 1
    }
}

/// Trace-form coefficients: `tr(X T) = Σ_k coeff_k · vech(X)_k`.
fn trace_coeffs(t: &RMat) -> Vec<f64> {
    let n = t.nrows();
    let mut out = Vec::with_capacity(tri_len(n));
    for j in 0..n {
        for i in j..n {
            out.push(if i == j { t[(i, i)] } else { 2.0 * t[(i, j)] });
        }
    }
    out
}

fn add_diag_equalities(p: &mut SdpProblem, n: usize, v_off: usize) {
    let d = n - 1;
    for i in 0..d.saturating_sub(1) {
        p.add_equality(vec![(v_off + tri_index(n, i, i), 1.0), (v_off + tri_index(n, i + 1, i + 1), -1.0)], 0.0);
    }
    p.add_equality(vec![(v_off + tri_index(n, d, d), 1.0)], 1.0);
}

/// Block `V ⪰ 0` with `V` stored at `v_off`.
fn psd_block(n: usize, v_off: usize) -> LmiBlock {
    let mut b = LmiBlock::new(n);
    for j in 0..n {
        for i in j..n {
            b.add(v_off + tri_index(n, i, j), i, j, 1.0);
        }
    }
    b
}

/// The nominal SDR: minimize `ε` s.t. `ε − tr(TV) ≥ 0`, `V ⪰ 0`, equal
/// diagonal, `V_nn = 1`.
pub fn assemble_nominal_model(inst: &LiftInstance) -> RobustSdpModel {
    let h_m = inst.h_m();
    let t = h_m.transpose() * &h_m;
    let n = inst.dim + 1;
    let nv = tri_len(n);
    let eps = nv;
    let mut c = vec![0.0; nv + 1];
    c[eps] = 1.0;
    let mut p = SdpProblem::new(c);

    let mut slack = LmiBlock::new(1);
    slack.add(eps, 0, 0, 1.0);
    for (k, tk) in trace_coeffs(&t).into_iter().enumerate() {
        if tk != 0.0 {
            slack.add(k, 0, 0, -tk);
        }
    }
    p.blocks.push(slack);
    p.blocks.push(psd_block(n, 0));
    add_diag_equalities(&mut p, n, 0);
    // V = I, ε = tr T + 1 is strictly feasible.
    let mut y0 = vech(&RMat::identity(n, n));
    y0.push(linalg::trace(&t) + 1.0);
    RobustSdpModel { problem: p, form: ModelForm::Nominal, eta: 0.0, dim: inst.dim, lmi_sign: LmiSign::Corrected, h_m, initial_y: Some(y0) }
}

/// The robust model with the S-procedure block. At `η = 0` the uncertainty
/// set is a point and the result is the nominal model.
pub fn assemble_robust_model(inst: &LiftInstance, sign: LmiSign) -> RobustSdpModel {
    if inst.eta == 0.0 {
        return assemble_nominal_model(inst);
    }
    let h_m = inst.h_m();
    let t = h_m.transpose() * &h_m;
    let n = inst.dim + 1;
    let nv = tri_len(n);
    let (v_off, w_off, kappa, eps) = (0, nv, 2 * nv, 2 * nv + 1);
    let mut c = vec![0.0; 2 * nv + 2];
    c[eps] = 1.0;
    let mut p = SdpProblem::new(c);

    // ε − 2κη² − tr((V+W)T) ≥ 0
    let mut slack = LmiBlock::new(1);
    for (k, tk) in trace_coeffs(&t).into_iter().enumerate() {
        if tk != 0.0 {
            slack.add(v_off + k, 0, 0, -tk);
            slack.add(w_off + k, 0, 0, -tk);
        }
    }
    slack.add(kappa, 0, 0, -2.0 * inst.eta * inst.eta);
    slack.add(eps, 0, 0, 1.0);
    p.blocks.push(slack);

    let s = match sign {
        LmiSign::Corrected => 1.0,
        LmiSign::AsPrinted => -1.0,
    };
    let mut lmi = LmiBlock::new(2 * n);
    for j in 0..n {
        for i in j..n {
            let k = tri_index(n, i, j);
            lmi.add(v_off + k, i, j, -s);
            lmi.add(v_off + k, n + i, j, 1.0);
            if i != j {
                lmi.add(v_off + k, n + j, i, 1.0);
            }
            lmi.add(w_off + k, n + i, n + j, s);
        }
    }
    for i in 0..n {
        lmi.add(kappa, i, i, s);
    }
    p.blocks.push(lmi);
    p.blocks.push(psd_block(n, v_off));
    let mut kb = LmiBlock::new(1);
    kb.add(kappa, 0, 0, 1.0);
    p.blocks.push(kb);
    add_diag_equalities(&mut p, n, v_off);

    RobustSdpModel { problem: p, form: ModelForm::Direct, eta: inst.eta, dim: inst.dim, lmi_sign: sign, h_m, initial_y: None }
}

/// The robust model with `W` eliminated:
///
/// ```text
/// minimize tr Σ − κ(‖H_m‖²_F − 2η²)  s.t.  V ⪰ 0,  [κI−V, κH_mᵀ; κH_m, Σ] ⪰ 0,
/// ```
///
/// plus the diagonal equalities. For fixed `(V, κ)` the optimal `Σ` is
/// `κ²H_m(κI−V)⁻¹H_mᵀ`, and the objective then equals the direct model's
/// `ε` at its optimal `W = V(κI−V)⁻¹V`.
pub fn assemble_structured_model(inst: &LiftInstance) -> RobustSdpModel {
    let h_m = inst.h_m();
    let r = h_m.nrows();
    let n = inst.dim + 1;
    let nv = tri_len(n);
    let kappa = nv;
    let s_off = nv + 1;
    let ns = tri_len(r);
    let c0 = linalg::frob_norm(&h_m).powi(2);
    let mut c = vec![0.0; nv + 1 + ns];
    c[kappa] = -(c0 - 2.0 * inst.eta * inst.eta);
    for p in 0..r {
        c[s_off + tri_index(r, p, p)] = 1.0;
    }
    let mut p = SdpProblem::new(c);
    p.blocks.push(psd_block(n, 0));

    let mut lmi = LmiBlock::new(n + r);
    for j in 0..n {
        for i in j..n {
            lmi.add(tri_index(n, i, j), i, j, -1.0);
        }
    }
    for i in 0..n {
        lmi.add(kappa, i, i, 1.0);
    }
    for a in 0..r {
        for j in 0..n {
            lmi.add(kappa, n + a, j, h_m[(a, j)]);
        }
    }
    for q in 0..r {
        for pp in q..r {
            lmi.add(s_off + tri_index(r, pp, q), n + pp, n + q, 1.0);
        }
    }
    p.blocks.push(lmi);
    add_diag_equalities(&mut p, n, 0);

    // V = I, κ = 2, Σ = 4H_mH_mᵀ + I is strictly feasible.
    let mut y0 = vech(&RMat::identity(n, n));
    y0.push(2.0);
    let mut sig = &h_m * h_m.transpose() * 4.0;
    for a in 0..r {
        sig[(a, a)] += 1.0;
    }
    y0.extend(vech(&sig));
    RobustSdpModel {
        problem: p,
        form: ModelForm::Structured,
        eta: inst.eta,
        dim: inst.dim,
        lmi_sign: LmiSign::Corrected,
        h_m,
        initial_y: Some(y0),
    }
}

/// Dual of the nominal SDR:
///
/// ```text
/// minimize −u_d  s.t.  T − Σ_{k<d−1} u_k (E_kk − E_{k+1,k+1}) − u_d E_nn ⪰ 0,
/// ```
///
/// with `u_d` stored last. Its dual block is the primal `V` and `ε* = u_d*`.
pub fn assemble_nominal_dual(inst: &LiftInstance) -> RobustSdpModel {
    let h_m = inst.h_m();
    let mut t = h_m.transpose() * &h_m;
    linalg::symmetrize(&mut t);
    let n = inst.dim + 1;
    let d = inst.dim;
    let last = d - 1;
    let mut c = vec![0.0; d];
    c[last] = -1.0;
    let mut p = SdpProblem::new(c);
    let mut b = LmiBlock::new(n);
    b.constant = t;
    for k in 0..last {
        b.add(k, k, k, -1.0);
        b.add(k, k + 1, k + 1, 1.0);
    }
    b.add(last, n - 1, n - 1, -1.0);
    p.blocks.push(b);
    RobustSdpModel { problem: p, form: ModelForm::NominalDual, eta: 0.0, dim: d, lmi_sign: LmiSign::Corrected, h_m, initial_y: None }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Solve the assembled model as is with the dense Newton system.
    Dense,
    /// Reformulate to the structured or dual form before solving.
    Structured,
    /// Structured for robust models with the corrected sign; nominal models
    /// are dense while small.
    #[default]
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub backend: Backend,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        Self { tol: 1e-7, max_iters: 100, backend: Backend::Auto }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftedSolution {
    pub v_star: RMat,
    pub w_star: RMat,
    pub kappa: f64,
    pub epsilon: f64,
    pub solver_status: SdpStatus,
    pub iterations: usize,
    pub form: ModelForm,
}

/// Solves the relaxation. Under [`Backend::Structured`] (or `Auto` with a
/// large model) a direct model is re-expressed in the structured form, which
/// has the same optimal `V` and `ε`, and a nominal model keeps its variables
/// but gets a closed-form Newton solver.
pub fn solve_relaxation(model: &RobustSdpModel, opts: &RelaxOptions) -> Result<LiftedSolution> {
    let reformulate = match opts.backend {
        Backend::Dense => false,
        Backend::Structured => true,
        // The direct robust model's Newton system degrades as κI − V
        // approaches singularity at the optimum, which stalls the dual
        // residual; the structured form avoids forming W.
        Backend::Auto => match model.form {
            ModelForm::Direct => model.lmi_sign == LmiSign::Corrected,
            _ => model.num_vars() > DENSE_VAR_LIMIT,
        },
    };
    let target = if reformulate {
        match model.form {
            ModelForm::Direct => {
                if model.lmi_sign == LmiSign::AsPrinted {
                    return Err(Error::Config("the as-printed LMI sign is only available with the dense backend".into()));
                }
                Some(structured_from(model))
            }
            ModelForm::Nominal | ModelForm::Structured | ModelForm::NominalDual => None,
        }
    } else {
        None
    };
    let m = target.as_ref().unwrap_or(model);
    let sopts = SolverOptions { tol: opts.tol, max_iters: opts.max_iters, initial_y: m.initial_y.clone(), ..SolverOptions::default() };
    let res = match m.form {
        ModelForm::Structured => sdp::solve_with(&m.problem, &sopts, &mut StructuredSchur::new(m.h_m.clone()))?,
        ModelForm::Nominal if reformulate => {
            let mut t = m.h_m.transpose() * &m.h_m;
            linalg::symmetrize(&mut t);
            sdp::solve_with(&m.problem, &sopts, &mut NominalSchur::new(t))?
        }
        _ => sdp::solve_with(&m.problem, &sopts, &mut sdp::DenseSchur)?,
    };
    Ok(extract(m, &res))
}

fn rebuild_instance(model: &RobustSdpModel) -> LiftInstance {
    // Only H_m and η are needed by the assemblers; C is the identity on the
    // effective matrix.
    let h = &model.h_m;
    let d = model.dim;
    let a = h.subcols(0, d).to_owned();
    let s: Vec<f64> = (0..h.nrows()).map(|i| -h[(i, d)]).collect();
    let c = RMat::identity(d, d);
    LiftInstance::new(a, s, c, model.eta).expect("model data is consistent")
}

fn structured_from(model: &RobustSdpModel) -> RobustSdpModel {
    assemble_structured_model(&rebuild_instance(model))
}

fn extract(m: &RobustSdpModel, res: &sdp::SdpResult) -> LiftedSolution {
    let n = m.n();
    let nv = tri_len(n);
    let y = &res.y_star;
    let (v_star, w_star, kappa, epsilon) = match m.form {
        ModelForm::Nominal => (unvech(&y[..nv], n), RMat::zeros(n, n), 0.0, y[nv]),
        ModelForm::Direct => (unvech(&y[..nv], n), unvech(&y[nv..2 * nv], n), y[2 * nv], y[2 * nv + 1]),
        ModelForm::Structured => {
            let v = unvech(&y[..nv], n);
            let kappa = y[nv];
            let mut gap = RMat::identity(n, n) * kappa - &v;
            linalg::symmetrize(&mut gap);
            // W = V(κI−V)⁻¹V
            let w = match linalg::cholesky(&gap) {
                Some(l) => {
                    let mut x = v.clone();
                    linalg::lower_solve(&l, &mut x);
                    let mut w = x.transpose() * &x;
                    linalg::symmetrize(&mut w);
                    w
                }
                None => RMat::zeros(n, n),
            };
            (v, w, kappa, res.objective_value)
        }
        ModelForm::NominalDual => {
            let mut v = res.dual_blocks[0].clone();
            linalg::symmetrize(&mut v);
            (v, RMat::zeros(n, n), 0.0, -res.objective_value)
        }
    };
    LiftedSolution { v_star, w_star, kappa, epsilon, solver_status: res.status, iterations: res.iterations, form: m.form }
}

/// `min_{β ≥ 0} ‖s̃ − β r‖²` for `r = H̃C(Δ/2)v`.
pub fn folded_objective(inst: &LiftInstance, x_r: &[f64]) -> f64 {
    let r = linalg::matvec(&inst.h_tilde, x_r);
    folded_residual(&inst.s_tilde, &r)
}

pub(crate) fn folded_residual(s: &[f64], r: &[f64]) -> f64 {
    let ss = linalg::norm_sq(s);
    let rr = linalg::norm_sq(r);
    let sr = linalg::dot(s, r);
    if rr == 0.0 || sr <= 0.0 {
        ss
    } else {
        (ss - sr * sr / rr).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundedSolution {
    /// `(Δ/2) C v̂`.
    pub x_r: Vec<f64>,
    pub v_hat: Vec<f64>,
    /// β-folded residual of `x_r`.
    pub objective: f64,
}

fn signs(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| if x >= 0.0 { 1.0 } else { -1.0 }).collect()
}

/// Sign rounding of the last column of `V*` plus `n_random` Gaussian draws
/// with covariance equal to its leading `d × d` block; the candidate with the
/// smallest β-folded residual wins (earliest on ties).
///
/// With more than one bit plane the pool also holds label-quantized
/// candidates: the soft transmit vector `C·u` of each draw is loaded at a few
/// levels and mapped to the nearest reachable label. Plain signs give every
/// plane the same sign whenever the relaxation repeats its solution across
/// planes, which would waste the extra DAC bits.
pub fn round_solution<R: Rng + ?Sized>(
    inst: &LiftInstance,
    v_star: &RMat,
    step: f64,
    n_random: usize,
    rng: &mut R,
) -> Result<RoundedSolution> {
    let d = inst.dim;
    if v_star.nrows() != d + 1 || v_star.ncols() != d + 1 {
        return Err(Error::Shape(format!("V is {}×{}, expected {}", v_star.nrows(), v_star.ncols(), d + 1)));
    }
    if v_star.col_iter().flat_map(|c| c.iter().copied().collect::<Vec<_>>()).any(f64::is_nan) {
        return Err(Error::NotANumber);
    }
    let column: Vec<f64> = (0..d).map(|i| v_star[(i, d)]).collect();
    if n_random == 0 && column.iter().all(|&x| x == 0.0) {
        return Err(Error::Degenerate("last column of V is zero; enable randomized rounding".into()));
    }
    let half = step / 2.0;
    let effective = inst.effective();
    let score = |v: &[f64]| {
        let r: Vec<f64> = linalg::matvec(&effective, v).into_iter().map(|x| x * half).collect();
        folded_residual(&inst.s_tilde, &r)
    };
    let planes = PlaneLayout::of(&inst.c_matrix);
    let mut best = signs(&column);
    let mut best_obj = score(&best);
    let mut consider = |cand: Vec<f64>| {
        let obj = score(&cand);
        if obj < best_obj {
            best_obj = obj;
            best = cand;
        }
    };
    if let Some(pl) = &planes {
        pl.quantized_candidates(&column, &mut consider);
    }
    if n_random > 0 {
        let mut lead = v_star.submatrix(0, 0, d, d).to_owned();
        linalg::symmetrize(&mut lead);
        let (vals, vecs) = linalg::sym_eig(&lead)?;
        let factor = RMat::from_fn(d, d, |i, j| vecs[(i, j)] * vals[j].max(0.0).sqrt());
        for _ in 0..n_random {
            let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let u = linalg::matvec(&factor, &g);
            consider(signs(&u));
            if let Some(pl) = &planes {
                pl.quantized_candidates(&u, &mut consider);
            }
        }
    }
    let x_r: Vec<f64> = linalg::matvec(&inst.c_matrix, &best).into_iter().map(|x| x * half).collect();
    Ok(RoundedSolution { x_r, v_hat: best, objective: best_obj })
}

/// Loadings of the soft vector, as fractions of full scale in RMS terms.
const LOADINGS: [f64; 8] = [0.25, 0.32, 0.4, 0.5, 0.6, 0.72, 0.86, 1.0];

/// Bit-plane structure of `C = [ω₁I, …, ω_M I]` when `M > 1`.
struct PlaneLayout {
    width: usize,
    /// `(plane, ω)` in decreasing weight.
    order: Vec<(usize, f64)>,
    full_scale: f64,
}

impl PlaneLayout {
    fn of(c: &RMat) -> Option<Self> {
        let width = c.nrows();
        if width == 0 || !c.ncols().is_multiple_of(width) || c.ncols() == width {
            return None;
        }
        let planes = c.ncols() / width;
        let mut order: Vec<(usize, f64)> = (0..planes).map(|m| (m, c[(0, m * width)])).collect();
        order.sort_by(|a, b| b.1.total_cmp(&a.1));
        let full_scale = order.iter().map(|p| p.1).sum();
        Some(Self { width, order, full_scale })
    }

    /// Greedy successive approximation of each coordinate of `C·u`, which
    /// finds the nearest reachable level for binary weights.
    fn quantized_candidates(&self, u: &[f64], consider: &mut impl FnMut(Vec<f64>)) {
        let planes = self.order.len();
        let soft: Vec<f64> = (0..self.width)
            .map(|i| self.order.iter().map(|&(m, w)| w * u[m * self.width + i]).sum())
            .collect();
        let rms = (linalg::norm_sq(&soft) / self.width as f64).sqrt();
        if rms == 0.0 || !rms.is_finite() {
            return;
        }
        for load in LOADINGS {
            let g = load * self.full_scale / rms;
            let mut v = vec![0.0; planes * self.width];
            for (i, &t) in soft.iter().enumerate() {
                let mut rest = t * g;
                for &(m, w) in &self.order {
                    let b = if rest >= 0.0 { 1.0 } else { -1.0 };
                    v[m * self.width + i] = b;
                    rest -= w * b;
                }
            }
            consider(v);
        }
    }
}

/// Least-squares `β` for `s̃ ≈ β H̃ x`.
pub fn recover_precoding_factor(x_r: &[f64], h_tilde: &RMat, s_tilde: &[f64]) -> Result<f64> {
    if x_r.iter().all(|&x| x == 0.0) {
        return Err(Error::Domain("x is zero".into()));
    }
    if h_tilde.ncols() != x_r.len() || h_tilde.nrows() != s_tilde.len() {
        return Err(Error::Shape("H̃, x and s̃ do not conform".into()));
    }
    let r = linalg::matvec(h_tilde, x_r);
    let rr = linalg::norm_sq(&r);
    let sr = linalg::dot(s_tilde, &r);
    if rr == 0.0 || sr <= 0.0 {
        return Err(Error::NonPositiveBeta(if rr == 0.0 { 0.0 } else { sr / rr }));
    }
    Ok(sr / rr)
}

/// `x = x_R[..N] + i·x_R[N..]`.
pub fn complexify(x_r: &[f64]) -> Result<Vec<num_complex::Complex64>> {
    if !x_r.len().is_multiple_of(2) {
        return Err(Error::Shape(format!("odd length {}", x_r.len())));
    }
    let n = x_r.len() / 2;
    Ok((0..n).map(|i| num_complex::Complex64::new(x_r[i], x_r[n + i])).collect())
}
