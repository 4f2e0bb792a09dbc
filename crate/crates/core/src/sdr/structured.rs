//! Newton systems of the structured robust model in `O(n³)` per iteration.
//!
//! The model (see [`super::assemble_structured_model`]) has the blocks
//! `S₁ = V` and `S₂ = [κI−V, κH_mᵀ; κH_m, Σ]`. With NT scalings `W₁` and
//! `W₂ = [A, B; Bᵀ, D]`, the `V` part of the Newton system reads
//!
//! ```text
//! W₁ΔVW₁ + AΔVA − ΔκQ − BΔΣBᵀ − Diag(μ) = G_V,    Q = A² + AH_mᵀBᵀ + BH_mA,
//! ```
//!
//! where `μ` collects the equality multipliers. The operator
//! `K(X) = W₁XW₁ + AXA` is inverted in closed form after simultaneous
//! diagonalization (`PᵀW₁P = I`, `PᵀAP = Λ`):
//! `K⁻¹(X) = P((PᵀXP) ∘ F)Pᵀ` with `F_kl = 1/(1 + λ_k λ_l)`. Substituting
//! `ΔV` into the equality, `κ` and `Σ` rows leaves a dense system in the
//! multipliers, `Δκ` and `vech ΔΣ`, of size `d + 1 + r(r+1)/2`.

use crate::error::{Error, Result};
use crate::linalg::{self, RMat};
use crate::sdp::{SchurSolver, SdpProblem};

use super::{tri_index, tri_len};

pub struct StructuredSchur {
    h_m: RMat,
}

impl StructuredSchur {
    pub fn new(h_m: RMat) -> Self {
        Self { h_m }
    }
}

/// Symmetric matrix from adjoint coordinates: `vech` entries with off-diagonal
/// terms counted twice.
fn from_adjoint(y: &[f64], n: usize) -> RMat {
    let mut m = RMat::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        for i in j..n {
            if i == j {
                m[(i, i)] = y[k];
            } else {
                m[(i, j)] = y[k] / 2.0;
                m[(j, i)] = y[k] / 2.0;
            }
            k += 1;
        }
    }
    m
}

struct KInverse {
    p: RMat,
    f: RMat,
}

impl KInverse {
    fn apply(&self, x: &RMat) -> RMat {
        let mut y = self.p.transpose() * x * &self.p;
        hadamard_in_place(&mut y, &self.f);
        let mut out = &self.p * y * self.p.transpose();
        linalg::symmetrize(&mut out);
        out
    }
}

fn hadamard_in_place(y: &mut RMat, f: &RMat) {
    for j in 0..y.ncols() {
        for i in 0..y.nrows() {
            y[(i, j)] *= f[(i, j)];
        }
    }
}

impl SchurSolver for StructuredSchur {
    fn solve(
        &mut self,
        problem: &SdpProblem,
        scalings: &[RMat],
        rhs_y: &[f64],
        rhs_w: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let h = &self.h_m;
        let r = h.nrows();
        let n = h.ncols();
        let nv = tri_len(n);
        let ns = tri_len(r);
        if scalings.len() != 2 || scalings[0].nrows() != n || scalings[1].nrows() != n + r || rhs_y.len() != nv + 1 + ns {
            return Err(Error::Shape("structured Newton system does not match the model layout".into()));
        }
        let ne = rhs_w.len();
        let diag = |m: &RMat| (0..n).map(|i| m[(i, i)]).collect::<Vec<f64>>();

        let m_w = diagonal_equalities(problem, n)?;

        let w1 = &scalings[0];
        let w2 = &scalings[1];
        let a = w2.submatrix(0, 0, n, n).to_owned();
        let b = w2.submatrix(0, n, n, r).to_owned();
        let dm = w2.submatrix(n, n, r, r).to_owned();

        // Simultaneous diagonalization of W₁ and A.
        let l = linalg::cholesky(w1).ok_or_else(|| Error::Solver("scaling W₁ is not positive definite".into()))?;
        let mut abar = a.clone();
        linalg::lower_solve(&l, &mut abar);
        let mut abar = abar.transpose().to_owned();
        linalg::lower_solve(&l, &mut abar);
        linalg::symmetrize(&mut abar);
        let (lam, u) = linalg::sym_eig(&abar)?;
        let mut p = u;
        linalg::lower_t_solve(&l, &mut p);
        let f = RMat::from_fn(n, n, |k, q| 1.0 / (1.0 + lam[k] * lam[q]));
        let kinv = KInverse { p: p.clone(), f: f.clone() };

        let ht = h.transpose().to_owned();
        let mut q = &a * &a + &a * &ht * b.transpose() + &b * h * &a;
        linalg::symmetrize(&mut q);
        let bhat = p.transpose() * &b; // n × r

        // N_ij = [K⁻¹(E_jj)]_ii = (p_i ∘ p_j)ᵀ F (p_i ∘ p_j), p_i the i-th row of P.
        let npairs = tri_len(n);
        let rowprod = RMat::from_fn(npairs, n, |_, _| 0.0);
        let mut rowprod = rowprod;
        for j in 0..n {
            for i in j..n {
                let k = tri_index(n, i, j);
                for c in 0..n {
                    rowprod[(k, c)] = p[(i, c)] * p[(j, c)];
                }
            }
        }
        let rf = &rowprod * &f;
        let mut nmat = RMat::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                let k = tri_index(n, i, j);
                let mut acc = 0.0;
                for c in 0..n {
                    acc += rowprod[(k, c)] * rf[(k, c)];
                }
                nmat[(i, j)] = acc;
                nmat[(j, i)] = acc;
            }
        }

        // Φ_i = Z_iᵀ F Z_i with Z_i = diag(p_i) B̂; gives both diag K⁻¹(B E_pq Bᵀ)
        // and Bᵀ K⁻¹(E_ii) B.
        let mut phi = Vec::with_capacity(n);
        for i in 0..n {
            let z = RMat::from_fn(n, r, |c, s| p[(i, c)] * bhat[(c, s)]);
            let mut ph = z.transpose() * &f * &z;
            linalg::symmetrize(&mut ph);
            phi.push(ph);
        }

        // Γ[(a,p),(q,b)] = (b̂_a ∘ b̂_p)ᵀ F (b̂_q ∘ b̂_b).
        let chat = RMat::from_fn(n, r * r, |c, col| bhat[(c, col / r)] * bhat[(c, col % r)]);
        let gamma = chat.transpose() * &f * &chat;
        let gm = |a1: usize, p1: usize, q1: usize, b1: usize| gamma[(a1 * r + p1, q1 * r + b1)];

        // κ row ingredients: G_κ = W₂ F_κ W₂ with F_κ = [I, H_mᵀ; H_m, 0].
        let fk = RMat::from_fn(n + r, n + r, |i, j| {
            if i < n && j < n {
                if i == j { 1.0 } else { 0.0 }
            } else if i >= n && j < n {
                h[(i - n, j)]
            } else if i < n && j >= n {
                h[(j - n, i)]
            } else {
                0.0
            }
        });
        let gk = w2 * &fk * w2;
        let gk11 = gk.submatrix(0, 0, n, n).to_owned();
        let gk21 = gk.submatrix(n, 0, r, n).to_owned();
        let gk22 = gk.submatrix(n, n, r, r).to_owned();
        let mut gk11s = gk11.clone();
        linalg::symmetrize(&mut gk11s);
        let kg = kinv.apply(&gk11s);

        let vq = kinv.apply(&q);
        let dvq = diag(&vq);
        let btvqb = b.transpose() * &vq * &b;
        let btkgb = b.transpose() * &kg * &b;

        // Unknown layout: [w (ne) | Δκ | vech ΔΣ (ns)].
        let dim = ne + 1 + ns;
        let ik = ne;
        let is = ne + 1;
        let mut sys = RMat::zeros(dim, dim);
        let pairs: Vec<(usize, usize)> = (0..r).flat_map(|q1| (q1..r).map(move |p1| (p1, q1))).collect();
        let mult = |p1: usize, q1: usize| if p1 == q1 { 1.0 } else { 2.0 };

        // diag ΔV = dv0 + N μ + Δκ dvq + Σ σ_pq φ^{pq}, μ = M_w w.
        let nmw = &nmat * &m_w; // n × ne
        let mwt_nmw = m_w.transpose() * &nmw;
        for k in 0..ne {
            for k2 in 0..ne {
                sys[(k, k2)] = mwt_nmw[(k, k2)];
            }
            let mut cq = 0.0;
            for i in 0..n {
                cq += m_w[(i, k)] * dvq[i];
            }
            sys[(k, ik)] = cq;
            for (t, &(p1, q1)) in pairs.iter().enumerate() {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += m_w[(i, k)] * phi[i][(p1, q1)];
                }
                sys[(k, is + t)] = mult(p1, q1) * acc;
            }
        }

        // κ row: Δκ[tr G_κ11 + 2⟨G_κ21, H_m⟩ − ⟨K⁻¹G_κ11, Q⟩] − ⟨diag K⁻¹G_κ11, μ⟩
        //        + Σ σ_pq ⟨G_κ22 − BᵀK⁻¹(G_κ11)B, E_pq⟩ = r_κ + ⟨K⁻¹G_κ11, G_V⟩.
        {
            let dkg = diag(&kg);
            for k in 0..ne {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += dkg[i] * m_w[(i, k)];
                }
                sys[(ik, k)] = -acc;
            }
            sys[(ik, ik)] = linalg::trace(&gk11) + 2.0 * linalg::frob_dot(&gk21, h) - linalg::frob_dot(&kg, &q);
            for (t, &(p1, q1)) in pairs.iter().enumerate() {
                let g22 = if p1 == q1 { gk22[(p1, p1)] } else { gk22[(p1, q1)] + gk22[(q1, p1)] };
                sys[(ik, is + t)] = g22 - mult(p1, q1) * btkgb[(p1, q1)];
            }
        }

        // Σ rows: [−BᵀΔVB + Δκ(BᵀB + BᵀH_mᵀD + DH_mB) + DΔΣD]_pq = G_Σ,pq.
        {
            let mut kcoef = b.transpose() * &b + b.transpose() * &ht * &dm + &dm * h * &b;
            linalg::symmetrize(&mut kcoef);
            for (row_t, &(pp, qq)) in pairs.iter().enumerate() {
                let row = is + row_t;
                for k in 0..ne {
                    let mut acc = 0.0;
                    for i in 0..n {
                        acc += m_w[(i, k)] * phi[i][(pp, qq)];
                    }
                    sys[(row, k)] = -acc;
                }
                sys[(row, ik)] = kcoef[(pp, qq)] - btvqb[(pp, qq)];
                for (t, &(p1, q1)) in pairs.iter().enumerate() {
                    let (g, dd) = if p1 == q1 {
                        (gm(pp, p1, p1, qq), dm[(pp, p1)] * dm[(p1, qq)])
                    } else {
                        (
                            gm(pp, p1, q1, qq) + gm(pp, q1, p1, qq),
                            dm[(pp, p1)] * dm[(q1, qq)] + dm[(pp, q1)] * dm[(p1, qq)],
                        )
                    };
                    sys[(row, is + t)] = dd - g;
                }
            }
        }

        let fac = Factored { n, r, ne, m_w, b, q, kinv, kg, sys, pairs };
        refine(problem, scalings, rhs_y, rhs_w, |ry, rw| fac.solve(ry, rw))
    }
}

/// Iterative refinement against the exact Newton operator. The reductions
/// lose accuracy as the scalings become ill-conditioned near the optimum; a
/// few sweeps recover it.
fn refine(
    problem: &SdpProblem,
    scalings: &[RMat],
    rhs_y: &[f64],
    rhs_w: &[f64],
    solve: impl Fn(&[f64], &[f64]) -> Result<(Vec<f64>, Vec<f64>)>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut x = solve(rhs_y, rhs_w)?;
    let scale = 1.0 + rhs_y.iter().chain(rhs_w).fold(0.0f64, |m, v| m.max(v.abs()));
    for _ in 0..REFINE_SWEEPS {
        let (ry, rw) = newton_residual(problem, scalings, &x.0, &x.1, rhs_y, rhs_w);
        let err = ry.iter().chain(&rw).fold(0.0f64, |m, v| m.max(v.abs()));
        if err <= 1e-14 * scale {
            break;
        }
        let (cy, cw) = solve(&ry, &rw)?;
        for (a, c) in x.0.iter_mut().zip(&cy) {
            *a += c;
        }
        for (a, c) in x.1.iter_mut().zip(&cw) {
            *a += c;
        }
    }
    Ok(x)
}

/// Equality `k` touches only diagonal entries of `V` (stored at offset 0):
/// returns `M_w` with `M_w[(i, k)]` the coefficient of `V_ii`.
fn diagonal_equalities(problem: &SdpProblem, n: usize) -> Result<RMat> {
    let mut m_w = RMat::zeros(n, problem.equalities.len());
    for (k, eq) in problem.equalities.iter().enumerate() {
        for &(var, a) in &eq.coeffs {
            let i = (0..n)
                .find(|&i| tri_index(n, i, i) == var)
                .ok_or_else(|| Error::Solver("structured solver expects equalities on diag(V) only".into()))?;
            m_w[(i, k)] += a;
        }
    }
    Ok(m_w)
}

/// Newton systems of the nominal model (`vech V, ε`; blocks `ε − ⟨T,V⟩ ≥ 0`
/// and `V ⪰ 0`). With slack scaling `ω` the `ε` row fixes
/// `δ = Δε − ⟨T,ΔV⟩ = r_ε/ω²`, after which `W₁ΔVW₁ = G_V + r_ε T + Diag(μ)`
/// and the equality rows involve `W₁⁻¹ ∘ W₁⁻¹` only.
pub struct NominalSchur {
    t: RMat,
}

impl NominalSchur {
    pub fn new(t: RMat) -> Self {
        Self { t }
    }
}

impl SchurSolver for NominalSchur {
    fn solve(
        &mut self,
        problem: &SdpProblem,
        scalings: &[RMat],
        rhs_y: &[f64],
        rhs_w: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.t.nrows();
        let nv = tri_len(n);
        if scalings.len() != 2 || scalings[0].nrows() != 1 || scalings[1].nrows() != n || rhs_y.len() != nv + 1 {
            return Err(Error::Shape("nominal Newton system does not match the model layout".into()));
        }
        let m_w = diagonal_equalities(problem, n)?;
        let omega2 = scalings[0][(0, 0)].powi(2);
        let l = linalg::cholesky(&scalings[1]).ok_or_else(|| Error::Solver("scaling W₁ is not positive definite".into()))?;
        let li = linalg::lower_inverse(&l);
        let mut wi = li.transpose() * &li;
        linalg::symmetrize(&mut wi);
        let nmat = RMat::from_fn(n, n, |i, j| wi[(i, j)] * wi[(i, j)]);
        let mut sys = m_w.transpose() * &nmat * &m_w;
        linalg::symmetrize(&mut sys);
        let t = &self.t;
        let solve = |ry: &[f64], rw: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
            let r_eps = ry[nv];
            let g = from_adjoint(&ry[..nv], n) + t * r_eps;
            let v0 = &wi * &g * &wi;
            let rhs: Vec<f64> = (0..rw.len())
                .map(|k| rw[k] - (0..n).map(|i| m_w[(i, k)] * v0[(i, i)]).sum::<f64>())
                .collect();
            let w = linalg::to_vec(
                &linalg::lu_solve(&sys, &linalg::col(&rhs))
                    .map_err(|_| Error::Solver("singular nominal Newton system".into()))?,
            );
            let mu = linalg::matvec(&m_w, &w);
            let wm = RMat::from_fn(n, n, |i, k| wi[(i, k)] * mu[k]);
            let mut dv = v0 + wm * &wi;
            linalg::symmetrize(&mut dv);
            let mut dy = Vec::with_capacity(nv + 1);
            for j in 0..n {
                for i in j..n {
                    dy.push(dv[(i, j)]);
                }
            }
            dy.push(r_eps / omega2 + linalg::frob_dot(t, &dv));
            Ok((dy, w))
        };
        refine(problem, scalings, rhs_y, rhs_w, solve)
    }
}

const REFINE_SWEEPS: usize = 3;

/// `rhs − [M Δy − AᵀΔw; AΔy]`, evaluated block by block.
fn newton_residual(
    problem: &SdpProblem,
    scalings: &[RMat],
    dy: &[f64],
    dw: &[f64],
    rhs_y: &[f64],
    rhs_w: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let mut my = vec![0.0; problem.num_vars];
    for (blk, w) in problem.blocks.iter().zip(scalings) {
        let mut ds = RMat::zeros(blk.dim, blk.dim);
        blk.add_linear(dy, &mut ds);
        let x = w * &ds * w;
        blk.adjoint_into(&x, &mut my);
    }
    let aw = problem.eq_adjoint(dw);
    let ry = (0..problem.num_vars).map(|i| rhs_y[i] - (my[i] - aw[i])).collect();
    let rw = problem.equalities.iter().zip(rhs_w).map(|(e, r)| r - e.eval(dy)).collect();
    (ry, rw)
}

struct Factored {
    n: usize,
    r: usize,
    ne: usize,
    m_w: RMat,
    b: RMat,
    q: RMat,
    kinv: KInverse,
    kg: RMat,
    sys: RMat,
    pairs: Vec<(usize, usize)>,
}

impl Factored {
    fn solve(&self, rhs_y: &[f64], rhs_w: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (n, r, ne) = (self.n, self.r, self.ne);
        let nv = tri_len(n);
        let ns = tri_len(r);
        let (m_w, b, q, kinv, pairs) = (&self.m_w, &self.b, &self.q, &self.kinv, &self.pairs);
        let ik = ne;
        let is = ne + 1;
        let g_v = from_adjoint(&rhs_y[..nv], n);
        let r_kappa = rhs_y[nv];
        let g_s = from_adjoint(&rhs_y[nv + 1..], r);
        let v0 = kinv.apply(&g_v);
        let btv0b = b.transpose() * &v0 * b;
        let mut rhs = vec![0.0; self.sys.nrows()];
        for k in 0..ne {
            let mut c0 = 0.0;
            for i in 0..n {
                c0 += m_w[(i, k)] * v0[(i, i)];
            }
            rhs[k] = rhs_w[k] - c0;
        }
        rhs[ik] = r_kappa + linalg::frob_dot(&self.kg, &g_v);
        for (t, &(pp, qq)) in pairs.iter().enumerate() {
            rhs[is + t] = g_s[(pp, qq)] + btv0b[(pp, qq)];
        }
        let sol = linalg::lu_solve(&self.sys, &linalg::col(&rhs)).map_err(|_| Error::Solver("singular structured Newton system".into()))?;
        let z = linalg::to_vec(&sol);
        let w = z[..ne].to_vec();
        let dk = z[ik];
        let mu = linalg::matvec(m_w, &w);
        let mut dsig = RMat::zeros(r, r);
        for (t, &(p1, q1)) in pairs.iter().enumerate() {
            dsig[(p1, q1)] = z[is + t];
            dsig[(q1, p1)] = z[is + t];
        }
        let mut rhs_v = &g_v + q * dk + b * &dsig * b.transpose();
        for i in 0..n {
            rhs_v[(i, i)] += mu[i];
        }
        linalg::symmetrize(&mut rhs_v);
        let dv = kinv.apply(&rhs_v);

        let mut dy = Vec::with_capacity(nv + 1 + ns);
        for j in 0..n {
            for i in j..n {
                dy.push(dv[(i, j)]);
            }
        }
        dy.push(dk);
        for q1 in 0..r {
            for p1 in q1..r {
                dy.push(dsig[(p1, q1)]);
            }
        }
        let _ = ns;
        Ok((dy, w))
    }
}
