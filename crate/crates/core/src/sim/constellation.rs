//! Gray-mapped constellations with unit average energy.
//!
//! Conventions (bits listed most significant first):
//! - QPSK: `(b0, b1) ↦ ((1−2b0) + i(1−2b1))/√2`.
//! - 8PSK: point `k` sits at angle `2πk/8` and carries the Gray label
//!   `k ⊕ (k≫1)` on three bits.
//! - 16QAM: `(b0, b1)` picks the in-phase level and `(b2, b3)` the
//!   quadrature level; per axis `00, 01, 11, 10 ↦ −3, −1, +1, +3`, scaled
//!   by `1/√10`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
pub enum Scheme {
    #[default]
    #[serde(rename = "qpsk")]
    Qpsk,
    #[serde(rename = "8psk")]
    Psk8,
    #[serde(rename = "16qam")]
    Qam16,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Qpsk => "qpsk",
            Scheme::Psk8 => "8psk",
            Scheme::Qam16 => "16qam",
        }
    }

    pub fn bits_per_symbol(self) -> usize {
        match self {
            Scheme::Qpsk => 2,
            Scheme::Psk8 => 3,
            Scheme::Qam16 => 4,
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qpsk" => Ok(Scheme::Qpsk),
            "8psk" => Ok(Scheme::Psk8),
            "16qam" => Ok(Scheme::Qam16),
            other => Err(Error::Config(format!("unknown modulation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstellationSpec {
    pub scheme: Scheme,
    pub points: Vec<Complex64>,
    /// `bit_map[p]` is the label of `points[p]`, most significant bit first.
    pub bit_map: Vec<u32>,
}

fn gray(k: u32) -> u32 {
    k ^ (k >> 1)
}

impl ConstellationSpec {
    pub fn new(scheme: Scheme) -> Self {
        let (points, bit_map) = match scheme {
            Scheme::Qpsk => {
                let a = std::f64::consts::FRAC_1_SQRT_2;
                (0..4u32)
                    .map(|l| {
                        let re = if l & 0b10 == 0 { a } else { -a };
                        let im = if l & 0b01 == 0 { a } else { -a };
                        (Complex64::new(re, im), l)
                    })
                    .unzip()
            }
            Scheme::Psk8 => (0..8u32)
                .map(|k| (Complex64::from_polar(1.0, std::f64::consts::TAU * k as f64 / 8.0), gray(k)))
                .unzip(),
            Scheme::Qam16 => {
                let level = |g: u32| -> f64 {
                    // Inverse Gray on two bits: 00→0, 01→1, 11→2, 10→3.
                    let idx = g ^ (g >> 1);
                    (2.0 * idx as f64 - 3.0) / 10f64.sqrt()
                };
                (0..16u32).map(|l| (Complex64::new(level(l >> 2), level(l & 0b11)), l)).unzip()
            }
        };
        Self { scheme, points, bit_map }
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.scheme.bits_per_symbol()
    }

    fn point_of(&self, label: u32) -> Complex64 {
        let p = self.bit_map.iter().position(|&l| l == label).expect("labels form a bijection");
        self.points[p]
    }
}

/// Maps consecutive groups of bits to symbols.
pub fn modulate(bits: &[u8], spec: &ConstellationSpec) -> Result<Vec<Complex64>> {
    let q = spec.bits_per_symbol();
    if !bits.len().is_multiple_of(q) {
        return Err(Error::Shape(format!("{} bits is not a multiple of {q}", bits.len())));
    }
    if bits.iter().any(|&b| b > 1) {
        return Err(Error::Domain("bits must be 0 or 1".into()));
    }
    Ok(bits
        .chunks(q)
        .map(|chunk| spec.point_of(chunk.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32)))
        .collect())
}

/// Nearest-neighbour detection of `β·y` per user. The precoder fixes
/// `s ≈ β·Hx`, so `β·y` is the receiver's estimate of `s`. Equidistant
/// points resolve to the smallest label.
pub fn demodulate(y: &[Complex64], beta: f64, spec: &ConstellationSpec) -> Vec<u8> {
    let q = spec.bits_per_symbol();
    let mut out = Vec::with_capacity(y.len() * q);
    for &yi in y {
        let est = yi * beta;
        let mut best = (f64::INFINITY, u32::MAX);
        for (p, &l) in spec.points.iter().zip(&spec.bit_map) {
            let d = (est - p).norm_sqr();
            if d < best.0 || (d == best.0 && l < best.1) {
                best = (d, l);
            }
        }
        out.extend((0..q).rev().map(|k| (best.1 >> k & 1) as u8));
    }
    out
}
