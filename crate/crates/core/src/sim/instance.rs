//! Single-instance problems read from JSON, for the `solve` and `oracle`
//! commands.
//!
//! An instance either lists its channel and symbols explicitly or leaves
//! them out and draws them from `seed` with the same streams as trial 0 of a
//! sweep. Complex numbers are `[re, im]` pairs.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{full_scale_step, modulate, purpose, trial_rng, ConstellationSpec, Scheme};
use crate::baselines;
use crate::channel::{self, realify, realify_vec, CMat};
use crate::error::{Error, Result};
use crate::quantizer::{self, QuantizerSpec};
use crate::sdp::SdpStatus;
use crate::sdr::{self, LiftInstance, LmiSign, RelaxOptions, DEFAULT_RANDOM_ROUNDS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    /// Required unless `channel` is given.
    #[serde(default)]
    pub n_tx: Option<usize>,
    #[serde(default)]
    pub n_users: Option<usize>,
    pub bits: u32,
    #[serde(default)]
    pub eta: f64,
    #[serde(default = "super::default_power")]
    pub power: f64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub seed: u64,
    /// `K` rows of `N` entries.
    #[serde(default)]
    pub channel: Option<Vec<Vec<[f64; 2]>>>,
    /// `K` symbols.
    #[serde(default)]
    pub symbols: Option<Vec<[f64; 2]>>,
}

/// A resolved instance. `h` is the channel the precoder believes.
#[derive(Debug, Clone)]
pub struct Instance {
    pub h: CMat,
    pub s: Vec<Complex64>,
    pub spec: QuantizerSpec,
    pub eta: f64,
    pub power: f64,
    pub seed: u64,
}

fn pair(v: Complex64) -> [f64; 2] {
    [v.re, v.im]
}

impl InstanceFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn resolve(&self) -> Result<Instance> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::Config(format!("eta must lie in [0,1], got {}", self.eta)));
        }
        if !(self.power > 0.0 && self.power.is_finite()) {
            return Err(Error::Config(format!("power must be positive, got {}", self.power)));
        }
        let h = match &self.channel {
            Some(rows) => {
                let k = rows.len();
                let n = rows.first().map_or(0, Vec::len);
                if k == 0 || n == 0 || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Shape("channel rows must be nonempty and of equal length".into()));
                }
                for (what, given, actual) in [("n_tx", self.n_tx, n), ("n_users", self.n_users, k)] {
                    if given.is_some_and(|g| g != actual) {
                        return Err(Error::Shape(format!("{what} disagrees with the channel matrix")));
                    }
                }
                CMat::from_fn(k, n, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1]))
            }
            None => {
                let (Some(n), Some(k)) = (self.n_tx, self.n_users) else {
                    return Err(Error::Config("give either `channel` or both `n_tx` and `n_users`".into()));
                };
                channel::generate_estimate(k, n, &mut trial_rng(self.seed, 0, purpose::ESTIMATE))?
            }
        };
        let (k, n) = (h.nrows(), h.ncols());
        if k > n {
            return Err(Error::Dimension(format!("K={k} users exceed N={n} antennas")));
        }
        let s = match &self.symbols {
            Some(s) if s.len() != k => return Err(Error::Shape(format!("{} symbols for {k} users", s.len()))),
            Some(s) => s.iter().map(|&[re, im]| Complex64::new(re, im)).collect(),
            None => {
                let cons = ConstellationSpec::new(self.scheme);
                let mut rng = trial_rng(self.seed, 0, purpose::BITS);
                let bits: Vec<u8> = (0..k * cons.bits_per_symbol()).map(|_| rng.random_range(0..2u8)).collect();
                modulate(&bits, &cons)?
            }
        };
        if h.col_iter().flat_map(|c| c.iter().copied().collect::<Vec<_>>()).chain(s.iter().copied()).any(|v| v.is_nan()) {
            return Err(Error::NotANumber);
        }
        let spec = quantizer::build_uniform_quantizer(self.bits, full_scale_step(n, self.bits, self.power))?;
        Ok(Instance { h, s, spec, eta: self.eta, power: self.power, seed: self.seed })
    }
}

impl Instance {
    fn lift(&self) -> Result<LiftInstance> {
        let c = quantizer::build_c(self.h.ncols(), &self.spec)?;
        LiftInstance::new(realify(&self.h, 1.0)?, realify_vec(&self.s), c, self.eta)
    }

    fn transmit(&self, x_r: &[f64]) -> Result<(Vec<[f64; 2]>, f64)> {
        let beta = sdr::recover_precoding_factor(x_r, &realify(&self.h, 1.0)?, &realify_vec(&self.s))?;
        Ok((sdr::complexify(x_r)?.into_iter().map(pair).collect(), beta))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SdpStatus,
    pub iterations: usize,
    /// Optimal worst-case residual bound of the relaxation.
    pub epsilon: f64,
    pub kappa: f64,
    /// β-folded residual of the rounded transmit vector.
    pub rounding_objective: f64,
    pub beta: f64,
    /// Unnormalized transmit vector on the quantizer grid.
    pub x: Vec<[f64; 2]>,
}

/// Robust relaxation at the instance's `η`, followed by rounding.
pub fn solve_instance(inst: &Instance, sign: LmiSign, relax: &RelaxOptions) -> Result<SolveReport> {
    let lift = inst.lift()?;
    let model = sdr::assemble_robust_model(&lift, sign);
    let sol = sdr::solve_relaxation(&model, relax)?;
    if matches!(sol.solver_status, SdpStatus::Infeasible | SdpStatus::Unbounded) {
        return Err(Error::Solver(format!("relaxation ended {:?}", sol.solver_status)));
    }
    let mut rng = trial_rng(inst.seed, 0, purpose::PRECODER);
    let rounded = sdr::round_solution(&lift, &sol.v_star, inst.spec.step, DEFAULT_RANDOM_ROUNDS, &mut rng)?;
    let (x, beta) = inst.transmit(&rounded.x_r)?;
    Ok(SolveReport {
        status: sol.solver_status,
        iterations: sol.iterations,
        epsilon: sol.epsilon,
        kappa: sol.kappa,
        rounding_objective: rounded.objective,
        beta,
        x,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    /// Smallest β-folded residual over the output alphabet.
    pub objective: f64,
    pub v_opt: Vec<i8>,
    pub beta: f64,
    pub x: Vec<[f64; 2]>,
}

pub fn oracle_instance(inst: &Instance) -> Result<OracleReport> {
    let sol = baselines::exhaustive_precoder(&inst.lift()?, inst.spec.step)?;
    let (x, beta) = inst.transmit(&sol.x_r)?;
    Ok(OracleReport { objective: sol.objective, v_opt: sol.v_opt.iter().map(|&v| v as i8).collect(), beta, x })
}
