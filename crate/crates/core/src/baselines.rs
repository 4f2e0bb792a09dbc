//! Reference precoders: infinite-resolution zero-forcing, quantized
//! zero-forcing and the exhaustive search over the lifted sign vectors.
//!
//! Every precoder returns `x` normalized to `‖x‖² = P` together with the
//! precoding factor `β` for which `s ≈ β·H x` on the channel it was given.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{realify, realify_vec, CMat};
use crate::error::{Error, Result};
use crate::linalg;
use crate::quantizer::{self, QuantizerSpec};
use crate::sdr::{self, LiftInstance};

/// Largest lifted dimension the exhaustive search accepts.
pub const EXHAUSTIVE_DIM_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecoderId {
    ZfInf,
    ZfQuantized,
    Rsdr,
    /// The non-robust relaxation, i.e. the robust model with `η = 0`.
    Sdr,
    Exhaustive,
}

impl PrecoderId {
    pub fn as_str(self) -> &'static str {
        match self {
            PrecoderId::ZfInf => "zf_inf",
            PrecoderId::ZfQuantized => "zf_quantized",
            PrecoderId::Rsdr => "rsdr",
            PrecoderId::Sdr => "sdr",
            PrecoderId::Exhaustive => "exhaustive",
        }
    }
}

impl std::fmt::Display for PrecoderId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PrecoderId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [PrecoderId::ZfInf, PrecoderId::ZfQuantized, PrecoderId::Rsdr, PrecoderId::Sdr, PrecoderId::Exhaustive]
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown precoder `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderOutput {
    pub x: Vec<Complex64>,
    pub beta: f64,
    pub label: PrecoderId,
}

impl PrecoderOutput {
    /// Rescales `x` to `‖x‖² = power` and fits `β` on `h`.
    pub fn normalized(x: Vec<Complex64>, h: &CMat, s: &[Complex64], power: f64, label: PrecoderId) -> Result<Self> {
        let x = scale_to_power(x, power)?;
        let beta = fit_beta(h, s, &x)?;
        Ok(Self { x, beta, label })
    }
}

fn scale_to_power(x: Vec<Complex64>, power: f64) -> Result<Vec<Complex64>> {
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::Domain(format!("power must be positive, got {power}")));
    }
    let norm_sq: f64 = x.iter().map(|z| z.norm_sqr()).sum();
    if norm_sq == 0.0 {
        return Err(Error::Domain("x is zero".into()));
    }
    let g = (power / norm_sq).sqrt();
    Ok(x.into_iter().map(|z| z * g).collect())
}

/// Least-squares `β` for `s ≈ β H x`.
pub fn fit_beta(h: &CMat, s: &[Complex64], x: &[Complex64]) -> Result<f64> {
    sdr::recover_precoding_factor(&realify_vec(x), &realify(h, 1.0)?, &realify_vec(s))
}

fn check_dims(h: &CMat, s: &[Complex64]) -> Result<()> {
    if h.nrows() > h.ncols() {
        return Err(Error::Dimension(format!("{} users exceed {} antennas", h.nrows(), h.ncols())));
    }
    if s.len() != h.nrows() {
        return Err(Error::Shape(format!("symbol vector has {} entries, expected {}", s.len(), h.nrows())));
    }
    Ok(())
}

/// `Hᴴ(HHᴴ)⁻¹s`, computed on the real expansion.
fn zf_direction(h: &CMat, s: &[Complex64]) -> Result<Vec<Complex64>> {
    check_dims(h, s)?;
    let hr = realify(h, 1.0)?;
    let mut gram = &hr * hr.transpose();
    linalg::symmetrize(&mut gram);
    let scale = linalg::trace(&gram) / gram.nrows() as f64;
    let l = linalg::cholesky(&gram).ok_or(Error::RankDeficient)?;
    let pivot = (0..l.nrows()).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
    if !(pivot > 1e-12 * scale) {
        return Err(Error::RankDeficient);
    }
    let mut u = linalg::col(&realify_vec(s));
    linalg::lower_solve(&l, &mut u);
    linalg::lower_t_solve(&l, &mut u);
    sdr::complexify(&linalg::to_vec(&(hr.transpose() * &u)))
}

/// Infinite-resolution zero-forcing: `x = γ·Hᴴ(HHᴴ)⁻¹s` with `‖x‖² = power`,
/// so `Hx = γ s` and `β = 1/γ`.
pub fn zf_precoder(h: &CMat, s: &[Complex64], power: f64) -> Result<PrecoderOutput> {
    let z = zf_direction(h, s)?;
    let x = scale_to_power(z.clone(), power)?;
    let gamma = (power / z.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt();
    Ok(PrecoderOutput { x, beta: 1.0 / gamma, label: PrecoderId::ZfInf })
}

/// Zero-forcing followed by the DAC. The input is loaded so that each real
/// component has standard deviation `Δ·2^{B−1}/2`.
pub fn quantized_zf(h: &CMat, s: &[Complex64], spec: &QuantizerSpec, power: f64) -> Result<PrecoderOutput> {
    let z = zf_direction(h, s)?;
    let rms = (z.iter().map(|v| v.norm_sqr()).sum::<f64>() / (2 * z.len()) as f64).sqrt();
    if rms == 0.0 {
        return Err(Error::Domain("zero-forcing output is zero".into()));
    }
    let target = spec.step * (1u64 << (spec.bits - 1)) as f64 / 2.0;
    let loaded: Vec<Complex64> = z.iter().map(|v| v * (target / rms)).collect();
    let q = quantizer::quantize(&loaded, spec)?;
    PrecoderOutput::normalized(q, h, s, power, PrecoderId::ZfQuantized)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustiveSolution {
    /// Optimal sign vector in `{±1}^d`.
    pub v_opt: Vec<f64>,
    /// `(Δ/2)·C·v_opt`.
    pub x_r: Vec<f64>,
    /// `min_β ‖s̃ − β H̃C(Δ/2)v_opt‖²`.
    pub objective: f64,
}

/// Enumerates all `2^d` sign vectors in Gray-code order, folding the optimal
/// `β ≥ 0` into each candidate. Ties go to the lexicographically smallest
/// vector (with −1 < +1).
pub fn exhaustive_precoder(inst: &LiftInstance, step: f64) -> Result<ExhaustiveSolution> {
    let d = inst.dim;
    if d > EXHAUSTIVE_DIM_LIMIT {
        return Err(Error::SizeGuard(format!("2^{d} sign vectors exceed the limit of 2^{EXHAUSTIVE_DIM_LIMIT}")));
    }
    if !(step > 0.0) {
        return Err(Error::Domain(format!("step must be positive, got {step}")));
    }
    let half = step / 2.0;
    let a = inst.effective();
    let rows = a.nrows();
    let cols: Vec<Vec<f64>> = (0..d).map(|j| (0..rows).map(|i| a[(i, j)] * half).collect()).collect();

    // Start from v = (−1, …, −1).
    let mut v = vec![-1.0; d];
    let mut r: Vec<f64> = vec![0.0; rows];
    for c in &cols {
        for (ri, ci) in r.iter_mut().zip(c) {
            *ri -= ci;
        }
    }
    let mut best_v = v.clone();
    let mut best = sdr::folded_residual(&inst.s_tilde, &r);
    let total = 1u64 << d;
    for k in 1..total {
        let j = k.trailing_zeros() as usize;
        let sign = -v[j];
        v[j] = sign;
        for (ri, ci) in r.iter_mut().zip(&cols[j]) {
            *ri += 2.0 * sign * ci;
        }
        let obj = sdr::folded_residual(&inst.s_tilde, &r);
        if obj < best || (obj == best && lex_less(&v, &best_v)) {
            best = obj;
            best_v.clone_from(&v);
        }
    }
    // Report the objective of the winner recomputed from scratch, free of the
    // drift accumulated by the incremental updates.
    let x_r: Vec<f64> = linalg::matvec(&inst.c_matrix, &best_v).into_iter().map(|x| x * half).collect();
    let objective = sdr::folded_objective(inst, &x_r);
    Ok(ExhaustiveSolution { v_opt: best_v, x_r, objective })
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).find(|(x, y)| x != y).is_some_and(|(x, y)| x < y)
}

/// The exhaustive optimum as a transmit vector.
pub fn exhaustive_output(inst: &LiftInstance, h: &CMat, s: &[Complex64], step: f64, power: f64) -> Result<PrecoderOutput> {
    let sol = exhaustive_precoder(inst, step)?;
    PrecoderOutput::normalized(sdr::complexify(&sol.x_r)?, h, s, power, PrecoderId::Exhaustive)
}
