//! Monte Carlo BER harness: draw channels and symbols, precode, transmit
//! through `y = Hx + n`, detect, count bit errors.
//!
//! Every trial draws its randomness from dedicated ChaCha8 streams keyed by
//! `(master_seed, trial, purpose)`, so a sweep is a pure function of its
//! configuration and its records do not depend on how trials are scheduled.
//! The precoder does not see the noise, so each trial solves once and reuses
//! the transmit vector for every SNR point; the unit-variance noise draw is
//! scaled per SNR.

pub mod constellation;
pub mod instance;
pub mod output;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, PrecoderId, PrecoderOutput};
use crate::channel::{self, cmatvec, realify, realify_vec, CMat, ErrorMode};
use crate::error::{Error, Result};
use crate::quantizer::{self, QuantizerSpec};
use crate::sdr::{self, LiftInstance, LmiSign, RelaxOptions, DEFAULT_RANDOM_ROUNDS};

pub use constellation::{demodulate, modulate, ConstellationSpec, Scheme};
pub use instance::{oracle_instance, solve_instance, InstanceFile, OracleReport, SolveReport};
pub use output::{emit_csv, parse_csv, to_csv_string, write_sidecar, BerRecord};

/// Rng stream purposes within a trial.
mod purpose {
    pub const ESTIMATE: u64 = 0;
    pub const ERROR: u64 = 1;
    pub const BITS: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const PRECODER: u64 = 4;
    pub const FALLBACK: u64 = 5;
}

/// The stream for one purpose of one trial.
pub fn trial_rng(master_seed: u64, trial: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((trial << 8) | purpose);
    rng
}

/// Knobs of the relaxation-based precoders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrecoderSettings {
    pub lmi_sign: LmiSign,
    /// Smallest `η` handed to the robust model (see [`precode`]).
    pub eta_floor: f64,
    pub random_rounds: usize,
    pub relax: RelaxOptions,
}

impl Default for PrecoderSettings {
    fn default() -> Self {
        // Rounding only needs the relaxation to a few digits; a gap of 1e-3
        // halves the solve time without a measurable BER change.
        let relax = RelaxOptions { tol: 1e-3, ..RelaxOptions::default() };
        Self { lmi_sign: LmiSign::Corrected, eta_floor: 0.05, random_rounds: DEFAULT_RANDOM_ROUNDS, relax }
    }
}

fn default_power() -> f64 {
    1.0
}

/// One `(precoder, B, η)` point with its SNR list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_tx: usize,
    pub n_users: usize,
    pub bits: u32,
    pub eta: f64,
    pub snr_db: Vec<f64>,
    pub scheme: Scheme,
    pub trials: u64,
    pub master_seed: u64,
    pub precoder: PrecoderId,
    #[serde(default = "default_power")]
    pub power: f64,
    #[serde(default)]
    pub error_mode: ErrorMode,
    #[serde(default)]
    pub settings: PrecoderSettings,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.snr_db.is_empty() {
            return Err(Error::Config("the SNR list is empty".into()));
        }
        if !(1..=3).contains(&self.bits) {
            return Err(Error::Config(format!("bits must lie in 1..=3, got {}", self.bits)));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::Config(format!("eta must lie in [0,1], got {}", self.eta)));
        }
        if self.n_users == 0 || self.n_tx < self.n_users {
            return Err(Error::Config(format!("need 1 ≤ K ≤ N, got K={} N={}", self.n_users, self.n_tx)));
        }
        if !(self.power > 0.0 && self.power.is_finite()) {
            return Err(Error::Config(format!("power must be positive, got {}", self.power)));
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("SNR values must be finite".into()));
        }
        if self.trials >= 1 << 56 {
            return Err(Error::Config("too many trials for the stream layout".into()));
        }
        Ok(())
    }
}

/// A full sweep over precoders, bit depths and uncertainty levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n_tx: usize,
    pub n_users: usize,
    pub bits: Vec<u32>,
    pub etas: Vec<f64>,
    pub snr_db: Vec<f64>,
    #[serde(default)]
    pub scheme: Scheme,
    pub trials: u64,
    pub master_seed: u64,
    pub precoders: Vec<PrecoderId>,
    #[serde(default = "default_power")]
    pub power: f64,
    #[serde(default)]
    pub error_mode: ErrorMode,
    #[serde(default)]
    pub settings: PrecoderSettings,
}

impl SweepConfig {
    /// The per-point configurations in output order.
    pub fn points(&self) -> Vec<SimConfig> {
        let mut out = Vec::new();
        for &precoder in &self.precoders {
            for &bits in &self.bits {
                for &eta in &self.etas {
                    out.push(SimConfig {
                        n_tx: self.n_tx,
                        n_users: self.n_users,
                        bits,
                        eta,
                        snr_db: self.snr_db.clone(),
                        scheme: self.scheme,
                        trials: self.trials,
                        master_seed: self.master_seed,
                        precoder,
                        power: self.power,
                        error_mode: self.error_mode,
                        settings: self.settings,
                    });
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.precoders.is_empty() || self.bits.is_empty() || self.etas.is_empty() {
            return Err(Error::Config("precoder, bits and eta lists must be nonempty".into()));
        }
        self.points().iter().try_for_each(SimConfig::validate)
    }
}

/// `Δ` such that the all-max-label vector has `‖x‖² = P`:
/// `2N·((2^B−1)Δ/2)² = P`.
pub fn full_scale_step(n_tx: usize, bits: u32, power: f64) -> f64 {
    2.0 * (power / (2 * n_tx) as f64).sqrt() / ((1u64 << bits) - 1) as f64
}

/// Runs the configured precoder on the believed channel `sqrt(1−η)·Ĥ`.
///
/// The robust model is built with `max(η, eta_floor)`: at `η = 0` the
/// relaxation has a whole face of optimal points once `N > K`, and the floor
/// selects its `η → 0⁺` limit. `sdr` always uses the nominal model.
pub fn precode<R: Rng + ?Sized>(
    id: PrecoderId,
    h: &CMat,
    s: &[Complex64],
    spec: &QuantizerSpec,
    eta: f64,
    power: f64,
    settings: &PrecoderSettings,
    rng: &mut R,
) -> Result<PrecoderOutput> {
    let lift = |eta_model: f64| -> Result<LiftInstance> {
        let c = quantizer::build_c(h.ncols(), spec)?;
        LiftInstance::new(realify(h, 1.0)?, realify_vec(s), c, eta_model)
    };
    match id {
        PrecoderId::ZfInf => baselines::zf_precoder(h, s, power),
        PrecoderId::ZfQuantized => baselines::quantized_zf(h, s, spec, power),
        PrecoderId::Exhaustive => baselines::exhaustive_output(&lift(0.0)?, h, s, spec.step, power),
        PrecoderId::Rsdr | PrecoderId::Sdr => {
            let (inst, model) = if id == PrecoderId::Rsdr {
                let inst = lift(eta.max(settings.eta_floor))?;
                let model = sdr::assemble_robust_model(&inst, settings.lmi_sign);
                (inst, model)
            } else {
                let inst = lift(0.0)?;
                let model = sdr::assemble_nominal_model(&inst);
                (inst, model)
            };
            let sol = sdr::solve_relaxation(&model, &settings.relax)?;
            match sol.solver_status {
                crate::sdp::SdpStatus::Optimal | crate::sdp::SdpStatus::MaxIters => {}
                other => return Err(Error::Solver(format!("relaxation ended {other:?}"))),
            }
            let rounded = sdr::round_solution(&inst, &sol.v_star, spec.step, settings.random_rounds, rng)?;
            PrecoderOutput::normalized(sdr::complexify(&rounded.x_r)?, h, s, power, id)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialOutcome {
    /// Bit errors per SNR point, in configuration order.
    pub bit_errors: Vec<u64>,
    pub symbols: u64,
    /// The precoder failed and the receivers guessed.
    pub fallback: bool,
}

pub fn run_trial(cfg: &SimConfig, trial: u64) -> Result<TrialOutcome> {
    let (k, n) = (cfg.n_users, cfg.n_tx);
    let cons = ConstellationSpec::new(cfg.scheme);
    let q = cons.bits_per_symbol();

    let estimate = channel::generate_estimate(k, n, &mut trial_rng(cfg.master_seed, trial, purpose::ESTIMATE))?;
    let error = channel::sample_error(k, n, cfg.eta, cfg.error_mode, &mut trial_rng(cfg.master_seed, trial, purpose::ERROR))?;
    let h_true = channel::compose_channel(&estimate, &error, cfg.eta)?;
    let believed = channel::scale(&estimate, (1.0 - cfg.eta).sqrt());

    let mut bit_rng = trial_rng(cfg.master_seed, trial, purpose::BITS);
    let bits: Vec<u8> = (0..k * q).map(|_| bit_rng.random_range(0..2u8)).collect();
    let s = modulate(&bits, &cons)?;

    let mut noise_rng = trial_rng(cfg.master_seed, trial, purpose::NOISE);
    let noise: Vec<Complex64> = (0..k).map(|_| channel::cn01(&mut noise_rng)).collect();

    let spec = quantizer::build_uniform_quantizer(cfg.bits, full_scale_step(n, cfg.bits, cfg.power))?;
    let mut pre_rng = trial_rng(cfg.master_seed, trial, purpose::PRECODER);
    let out = precode(cfg.precoder, &believed, &s, &spec, cfg.eta, cfg.power, &cfg.settings, &mut pre_rng);

    let mut bit_errors = Vec::with_capacity(cfg.snr_db.len());
    let fallback = out.is_err();
    match out {
        Ok(out) => {
            let hx = cmatvec(&h_true, &out.x);
            for &snr_db in &cfg.snr_db {
                let sigma = (cfg.power / 10f64.powf(snr_db / 10.0)).sqrt();
                let y: Vec<Complex64> = hx.iter().zip(&noise).map(|(a, w)| a + w * sigma).collect();
                bit_errors.push(count_errors(&bits, &demodulate(&y, out.beta, &cons)));
            }
        }
        Err(_) => {
            let mut guess_rng = trial_rng(cfg.master_seed, trial, purpose::FALLBACK);
            let guess: Vec<u8> = (0..bits.len()).map(|_| guess_rng.random_range(0..2u8)).collect();
            bit_errors.resize(cfg.snr_db.len(), count_errors(&bits, &guess));
        }
    }
    Ok(TrialOutcome { bit_errors, symbols: k as u64, fallback })
}

fn count_errors(a: &[u8], b: &[u8]) -> u64 {
    a.iter().zip(b).filter(|(x, y)| x != y).count() as u64
}

/// How trials are scheduled. Results are identical either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    /// Rayon data parallelism; sequential when built without `parallel`.
    #[default]
    Parallel,
    Sequential,
}

/// Sizes the global worker pool. Without the `parallel` feature this only
/// validates `n`.
pub fn configure_threads(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Config("thread count must be at least 1".into()));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Error::Config(e.to_string()))?;
    Ok(())
}

fn run_trials(cfg: &SimConfig, exec: Execution) -> Result<Vec<TrialOutcome>> {
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, t)).collect()
        }
        _ => (0..cfg.trials).map(|t| run_trial(cfg, t)).collect(),
    }
}

/// Aggregated records of one point plus its fallback count.
pub fn simulate(cfg: &SimConfig, exec: Execution) -> Result<(Vec<BerRecord>, u64)> {
    cfg.validate()?;
    let outcomes = run_trials(cfg, exec)?;
    let q = cfg.scheme.bits_per_symbol() as u64;
    let symbols: u64 = outcomes.iter().map(|o| o.symbols).sum();
    let fallbacks = outcomes.iter().filter(|o| o.fallback).count() as u64;
    let records = cfg
        .snr_db
        .iter()
        .enumerate()
        .map(|(i, &snr_db)| {
            let bit_errors: u64 = outcomes.iter().map(|o| o.bit_errors[i]).sum();
            BerRecord {
                precoder: cfg.precoder,
                bits: cfg.bits,
                eta: cfg.eta,
                snr_db,
                trials: cfg.trials,
                symbols,
                bit_errors,
                ber: bit_errors as f64 / (symbols * q) as f64,
            }
        })
        .collect();
    Ok((records, fallbacks))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FallbackCount {
    pub precoder: PrecoderId,
    pub bits: u32,
    pub eta: f64,
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    /// Sorted by precoder, bits, η and SNR.
    pub records: Vec<BerRecord>,
    /// Points where some trials fell back to guessing.
    pub fallbacks: Vec<FallbackCount>,
}

pub fn sweep(cfg: &SweepConfig) -> Result<SweepOutput> {
    sweep_with(cfg, Execution::default())
}

pub fn sweep_with(cfg: &SweepConfig, exec: Execution) -> Result<SweepOutput> {
    cfg.validate()?;
    run_points(&cfg.points(), exec)
}

/// Simulates an arbitrary list of points, for sweeps that are not a full
/// grid.
pub fn run_points(points: &[SimConfig], exec: Execution) -> Result<SweepOutput> {
    let mut records = Vec::new();
    let mut fallbacks = Vec::new();
    for point in points {
        let (recs, fb) = simulate(point, exec)?;
        records.extend(recs);
        if fb > 0 {
            fallbacks.push(FallbackCount { precoder: point.precoder, bits: point.bits, eta: point.eta, trials: fb });
        }
    }
    output::sort_records(&mut records);
    Ok(SweepOutput { records, fallbacks })
}

#[cfg(test)]
mod tests;
