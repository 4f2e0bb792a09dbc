//! Robust semidefinite-relaxation precoding for MU-MIMO downlinks with
//! low-resolution DACs, plus the baselines and Monte Carlo harness used to
//! evaluate it.

pub mod baselines;
pub mod channel;
pub mod error;
pub mod linalg;
pub mod quantizer;
pub mod sdp;
pub mod sdr;
pub mod sim;

pub use error::{Error, Result};
