//! Gauss-Markov channel uncertainty and the complex-to-real expansion.
//!
//! The base station sees an estimate `Ĥ`; the true channel is
//! `H = sqrt(1-η)·Ĥ + sqrt(η)·E`. The error `E` is either drawn from the
//! Frobenius ball `tr(EEᴴ) ≤ η` (`bounded`, the set the robust design covers)
//! or left as raw i.i.d. CN(0,1) entries (`gaussian`, the simulation setup).

use faer::Mat;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::RMat;

pub type CMat = Mat<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ErrorMode {
    #[default]
    Bounded,
    Gaussian,
}

impl std::str::FromStr for ErrorMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bounded" => Ok(ErrorMode::Bounded),
            "gaussian" => Ok(ErrorMode::Gaussian),
            other => Err(Error::Config(format!("unknown error mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub n_tx: usize,
    pub n_users: usize,
    pub estimate: CMat,
    pub error: CMat,
    pub eta: f64,
    pub true_channel: CMat,
}

impl ChannelRealization {
    /// Draws `Ĥ`, then `E`, then composes `H`, all from one rng stream.
    pub fn draw<R: Rng + ?Sized>(
        n_users: usize,
        n_tx: usize,
        eta: f64,
        mode: ErrorMode,
        rng: &mut R,
    ) -> Result<Self> {
        let estimate = generate_estimate(n_users, n_tx, rng)?;
        let error = sample_error(n_users, n_tx, eta, mode, rng)?;
        let true_channel = compose_channel(&estimate, &error, eta)?;
        Ok(Self { n_tx, n_users, estimate, error, eta, true_channel })
    }

    /// The channel the base station believes in: `sqrt(1-η)·Ĥ`.
    pub fn believed(&self) -> CMat {
        scale(&self.estimate, (1.0 - self.eta).sqrt())
    }
}

/// One CN(0,1) draw: real and imaginary parts each N(0, 1/2).
pub fn cn01<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn cn_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    // Explicit loop so the draw order (row-major) is fixed independently of faer internals.
    let mut m = CMat::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = cn01(rng);
        }
    }
    m
}

pub fn generate_estimate<R: Rng + ?Sized>(n_users: usize, n_tx: usize, rng: &mut R) -> Result<CMat> {
    if n_users == 0 || n_tx < n_users {
        return Err(Error::Dimension(format!(
            "need 1 <= n_users <= n_tx, got n_users={n_users}, n_tx={n_tx}"
        )));
    }
    Ok(cn_matrix(n_users, n_tx, rng))
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Domain(format!("eta must lie in [0,1], got {eta}")));
    }
    Ok(())
}

pub fn sample_error<R: Rng + ?Sized>(
    n_users: usize,
    n_tx: usize,
    eta: f64,
    mode: ErrorMode,
    rng: &mut R,
) -> Result<CMat> {
    check_eta(eta)?;
    let mut e = cn_matrix(n_users, n_tx, rng);
    if mode == ErrorMode::Bounded {
        let energy = frob_sq(&e);
        if energy > eta {
            let s = if energy > 0.0 { (eta / energy).sqrt() } else { 0.0 };
            e = scale(&e, s);
        }
    }
    Ok(e)
}

pub fn compose_channel(estimate: &CMat, error: &CMat, eta: f64) -> Result<CMat> {
    check_eta(eta)?;
    if estimate.nrows() != error.nrows() || estimate.ncols() != error.ncols() {
        return Err(Error::Shape(format!(
            "estimate is {}x{}, error is {}x{}",
            estimate.nrows(),
            estimate.ncols(),
            error.nrows(),
            error.ncols()
        )));
    }
    // The endpoints are returned verbatim so that η=0 and η=1 are exact.
    if eta == 0.0 {
        return Ok(estimate.clone());
    }
    if eta == 1.0 {
        return Ok(error.clone());
    }
    let (a, b) = ((1.0 - eta).sqrt(), eta.sqrt());
    Ok(CMat::from_fn(estimate.nrows(), estimate.ncols(), |i, j| {
        estimate[(i, j)] * a + error[(i, j)] * b
    }))
}

pub fn scale(m: &CMat, s: f64) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s)
}

/// `tr(MMᴴ)`, the squared Frobenius norm.
pub fn frob_sq(m: &CMat) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += m[(i, j)].norm_sqr();
        }
    }
    s
}

pub fn cmatvec(a: &CMat, x: &[Complex64]) -> Vec<Complex64> {
    assert_eq!(a.ncols(), x.len());
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)] * x[j]).sum())
        .collect()
}

/// `scale·[[Re A, −Im A], [Im A, Re A]]`.
pub fn realify(a: &CMat, scale: f64) -> Result<RMat> {
    if scale < 0.0 || !scale.is_finite() {
        return Err(Error::Domain(format!("scale must be finite and >= 0, got {scale}")));
    }
    let (r, c) = (a.nrows(), a.ncols());
    Ok(RMat::from_fn(2 * r, 2 * c, |i, j| {
        let z = a[(i % r, j % c)];
        let v = match (i < r, j < c) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        };
        scale * v
    }))
}

/// `[Re s; Im s]`.
pub fn realify_vec(s: &[Complex64]) -> Vec<f64> {
    s.iter().map(|z| z.re).chain(s.iter().map(|z| z.im)).collect()
}

/// The real-valued pieces the optimizer consumes.
#[derive(Debug, Clone)]
pub struct RealExpansion {
    pub h_tilde: RMat,
    pub e_tilde: RMat,
    pub s_tilde: Vec<f64>,
}

impl RealExpansion {
    pub fn new(ch: &ChannelRealization, s: &[Complex64]) -> Result<Self> {
        if s.len() != ch.n_users {
            return Err(Error::Shape(format!("symbol vector has {} entries, expected {}", s.len(), ch.n_users)));
        }
        Ok(Self {
            h_tilde: realify(&ch.estimate, (1.0 - ch.eta).sqrt())?,
            e_tilde: realify(&ch.error, ch.eta.sqrt())?,
            s_tilde: realify_vec(s),
        })
    }
}
