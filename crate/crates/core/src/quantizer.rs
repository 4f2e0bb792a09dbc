//! B-bit symmetric mid-rise DAC quantizer and its single-bit decomposition.
//!
//! Outputs per real dimension are the odd multiples of `Δ/2` up to
//! `(2^B−1)Δ/2`. Any such level is a weighted sum of `B` single-bit outputs,
//! `Σ ω_m v_m` with `v_m ∈ {±Δ/2}`, up to one global scale; stacking the
//! weights as `C = [ω_1 I, …, ω_B I]` turns a multi-bit vector into a binary
//! one.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::RMat;

pub const MAX_BITS: u32 = 8;
const ENUM_LIMIT: usize = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizerSpec {
    pub bits: u32,
    pub step: f64,
    /// Decision boundaries `τ_1 < … < τ_{2^B−1}`; values beyond clip.
    pub thresholds: Vec<f64>,
    pub labels: Vec<f64>,
    pub weights: Vec<f64>,
    pub lift_dim: usize,
}

fn check_bits(bits: u32) -> Result<()> {
    if !(1..=MAX_BITS).contains(&bits) {
        return Err(Error::Domain(format!("bits must lie in [1,{MAX_BITS}], got {bits}")));
    }
    Ok(())
}

pub fn build_uniform_quantizer(bits: u32, step: f64) -> Result<QuantizerSpec> {
    check_bits(bits)?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Domain(format!("step must be positive and finite, got {step}")));
    }
    let levels = 1usize << bits;
    let half = (levels / 2) as f64;
    let thresholds: Vec<f64> = (1..levels).map(|b| step * (b as f64 - half)).collect();
    // l_b = τ_b − Δ/2 and l_{2^B} = (2^B−1)Δ/2, written as odd multiples of
    // Δ/2 so that the set is exactly symmetric in floating point.
    let labels: Vec<f64> = (1..=levels).map(|b| (2.0 * b as f64 - 1.0 - levels as f64) * (step / 2.0)).collect();
    Ok(QuantizerSpec {
        bits,
        step,
        thresholds,
        labels,
        weights: decomposition_weights(bits)?,
        lift_dim: bits as usize,
    })
}

impl QuantizerSpec {
    /// Label of the cell containing `x`; a value sitting exactly on a
    /// threshold belongs to the cell above it.
    pub fn quantize_real(&self, x: f64) -> Result<f64> {
        if x.is_nan() {
            return Err(Error::NotANumber);
        }
        let cell = self.thresholds.partition_point(|&t| t <= x);
        Ok(self.labels[cell])
    }

    /// Largest output magnitude, `(2^B−1)Δ/2`.
    pub fn max_label(&self) -> f64 {
        *self.labels.last().expect("labels are never empty")
    }
}

/// Quantizes real and imaginary parts independently.
pub fn quantize(z: &[Complex64], spec: &QuantizerSpec) -> Result<Vec<Complex64>> {
    z.iter()
        .map(|v| Ok(Complex64::new(spec.quantize_real(v.re)?, spec.quantize_real(v.im)?)))
        .collect()
}

/// `ω_m = 2^{m−1} / sqrt(Σ_j 4^{j−1})`.
pub fn decomposition_weights(bits: u32) -> Result<Vec<f64>> {
    check_bits(bits)?;
    let norm = (0..bits).map(|j| 4f64.powi(j as i32)).sum::<f64>().sqrt();
    Ok((0..bits).map(|m| 2f64.powi(m as i32) / norm).collect())
}

/// `C = [ω_1 I_{2N}, …, ω_B I_{2N}]`, of size `2N × 2NB`.
pub fn build_c(n_tx: usize, spec: &QuantizerSpec) -> Result<RMat> {
    if n_tx == 0 {
        return Err(Error::Dimension("n_tx must be at least 1".into()));
    }
    let dim = 2 * n_tx;
    Ok(RMat::from_fn(dim, dim * spec.lift_dim, |i, j| {
        if j % dim == i {
            spec.weights[j / dim]
        } else {
            0.0
        }
    }))
}

/// Per-coordinate value set of `{C v : v ∈ {±Δ/2}^{2NB}}`, sorted ascending.
pub fn reachable_labels(spec: &QuantizerSpec, n_tx: usize) -> Result<Vec<f64>> {
    let d = 2 * n_tx * spec.lift_dim;
    if d > ENUM_LIMIT {
        return Err(Error::SizeGuard(format!("2NB = {d} exceeds {ENUM_LIMIT}")));
    }
    let c = build_c(n_tx, spec)?;
    let h = spec.step / 2.0;
    let mut values = Vec::new();
    let mut v = vec![0.0; d];
    for pattern in 0u32..(1u32 << d) {
        for (k, vk) in v.iter_mut().enumerate() {
            *vk = if pattern >> k & 1 == 1 { h } else { -h };
        }
        values.extend(crate::linalg::matvec(&c, &v));
    }
    values.sort_by(f64::total_cmp);
    values.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_bit_labels() {
        let q = build_uniform_quantizer(1, 1.0).unwrap();
        assert_eq!(q.labels, vec![-0.5, 0.5]);
        assert_eq!(q.thresholds, vec![0.0]);
    }

    #[test]
    fn two_bit_grid() {
        let q = build_uniform_quantizer(2, 1.0).unwrap();
        assert_eq!(q.thresholds, vec![-1.0, 0.0, 1.0]);
        assert_eq!(q.labels, vec![-1.5, -0.5, 0.5, 1.5]);
    }

    #[test]
    fn three_bit_grid_with_step_two() {
        let q = build_uniform_quantizer(3, 2.0).unwrap();
        assert_eq!(q.labels, vec![-7.0, -5.0, -3.0, -1.0, 1.0, 3.0, 5.0, 7.0]);
        for w in q.labels.windows(2) {
            assert_eq!(w[1] - w[0], 2.0);
        }
    }

    #[test]
    fn domain_errors() {
        assert!(build_uniform_quantizer(0, 1.0).is_err());
        assert!(build_uniform_quantizer(9, 1.0).is_err());
        assert!(build_uniform_quantizer(2, 0.0).is_err());
        assert!(build_uniform_quantizer(2, f64::NAN).is_err());
        assert!(decomposition_weights(0).is_err());
    }

    #[test]
    fn quantize_examples() {
        let q = build_uniform_quantizer(2, 1.0).unwrap();
        assert_eq!(q.quantize_real(0.3).unwrap(), 0.5);
        assert_eq!(q.quantize_real(-10.0).unwrap(), -1.5);
        assert_eq!(q.quantize_real(1.0).unwrap(), 1.5);
        assert_eq!(q.quantize_real(0.0).unwrap(), 0.5);
        let z = quantize(&[Complex64::new(0.3, -0.7)], &q).unwrap();
        assert_eq!(z[0], Complex64::new(0.5, -0.5));
        assert_eq!(q.quantize_real(f64::NAN), Err(Error::NotANumber));
    }

    #[test]
    fn weights_match_published_values() {
        let w2 = decomposition_weights(2).unwrap();
        assert!((w2[0] - 1.0 / 5f64.sqrt()).abs() < 1e-15);
        assert!((w2[1] - 2.0 / 5f64.sqrt()).abs() < 1e-15);
        let w3 = decomposition_weights(3).unwrap();
        for (m, w) in w3.iter().enumerate() {
            assert!((w - (1 << m) as f64 / 21f64.sqrt()).abs() < 1e-15);
        }
        assert_eq!(decomposition_weights(1).unwrap(), vec![1.0]);
    }

    #[test]
    fn c_matrix_layout() {
        let q1 = build_uniform_quantizer(1, 1.0).unwrap();
        let c = build_c(2, &q1).unwrap();
        assert_eq!(c, RMat::identity(4, 4));

        let q2 = build_uniform_quantizer(2, 1.0).unwrap();
        let c = build_c(1, &q2).unwrap();
        let (w1, w2) = (q2.weights[0], q2.weights[1]);
        let want = [[w1, 0.0, w2, 0.0], [0.0, w1, 0.0, w2]];
        for i in 0..2 {
            for j in 0..4 {
                assert_eq!(c[(i, j)], want[i][j]);
            }
        }
        let cv = crate::linalg::matvec(&c, &[0.5; 4]);
        for x in cv {
            assert!((x - 3.0 / (2.0 * 5f64.sqrt())).abs() < 1e-15);
        }
    }

    #[test]
    fn reachable_sets() {
        let q2 = build_uniform_quantizer(2, 1.0).unwrap();
        let r = reachable_labels(&q2, 1).unwrap();
        let s5 = 2.0 * 5f64.sqrt();
        let want = [-3.0 / s5, -1.0 / s5, 1.0 / s5, 3.0 / s5];
        assert_eq!(r.len(), 4);
        for (a, b) in r.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }

        let q3 = build_uniform_quantizer(3, 1.0).unwrap();
        let r = reachable_labels(&q3, 1).unwrap();
        let s21 = 2.0 * 21f64.sqrt();
        assert_eq!(r.len(), 8);
        for (k, a) in r.iter().enumerate() {
            let want = (2.0 * k as f64 - 7.0) / s21;
            assert!((a - want).abs() < 1e-12);
        }

        let q1 = build_uniform_quantizer(1, 3.0).unwrap();
        assert_eq!(reachable_labels(&q1, 2).unwrap(), vec![-1.5, 1.5]);
        assert!(matches!(reachable_labels(&q3, 5), Err(Error::SizeGuard(_))));
    }

    fn off_threshold(q: &QuantizerSpec, x: f64) -> bool {
        q.thresholds.iter().all(|t| (x - t).abs() > 1e-9)
    }

    proptest! {
        #[test]
        fn quantize_is_idempotent(bits in 1u32..=8, step in 0.01f64..10.0, x in -100.0f64..100.0) {
            let q = build_uniform_quantizer(bits, step).unwrap();
            let once = q.quantize_real(x).unwrap();
            prop_assert_eq!(q.quantize_real(once).unwrap(), once);
        }

        #[test]
        fn quantize_is_monotone(bits in 1u32..=8, step in 0.01f64..10.0, a in -100.0f64..100.0, b in -100.0f64..100.0) {
            let q = build_uniform_quantizer(bits, step).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(q.quantize_real(lo).unwrap() <= q.quantize_real(hi).unwrap());
        }

        #[test]
        fn quantize_is_odd(bits in 1u32..=8, step in 0.01f64..10.0, x in -100.0f64..100.0) {
            let q = build_uniform_quantizer(bits, step).unwrap();
            prop_assume!(off_threshold(&q, x));
            prop_assert_eq!(q.quantize_real(-x).unwrap(), -q.quantize_real(x).unwrap());
        }

        #[test]
        fn labels_are_symmetric_and_evenly_spaced(bits in 1u32..=8, step in 0.01f64..10.0) {
            let q = build_uniform_quantizer(bits, step).unwrap();
            let n = q.labels.len();
            for k in 0..n {
                prop_assert!((q.labels[k] + q.labels[n - 1 - k]).abs() <= 1e-12 * step * n as f64);
            }
            for w in q.labels.windows(2) {
                prop_assert!((w[1] - w[0] - step).abs() <= 1e-12 * step * n as f64);
            }
            for w in q.thresholds.windows(2) {
                prop_assert!(w[1] > w[0]);
            }
        }

        #[test]
        fn weights_have_unit_energy(bits in 1u32..=8) {
            let w = decomposition_weights(bits).unwrap();
            prop_assert!(w.iter().all(|&x| x > 0.0));
            prop_assert!((w.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn decomposition_matches_grid_up_to_scale(bits in 1u32..=3, step in 0.1f64..4.0) {
            let q = build_uniform_quantizer(bits, step).unwrap();
            let reach = reachable_labels(&q, 1).unwrap();
            let (rmax, lmax) = (reach[reach.len() - 1], q.max_label());
            prop_assert_eq!(reach.len(), q.labels.len());
            for (r, l) in reach.iter().zip(&q.labels) {
                prop_assert!((r / rmax - l / lmax).abs() <= 1e-12);
            }
        }
    }
}
