//! Weight quantizers: symmetric uniform levels, LSQ fake quantization and
//! INQ partition-quantize-freeze.
//!
//! Both LSQ and INQ use the same linear level set (INQ's original
//! powers-of-two grid is not used).

mod inq;
pub mod levels;
mod lsq;
mod state;

pub use inq::{frozen_target, inq_advance, inq_apply, inq_partition, PartitionStrategy};
pub use levels::{uniform_levels, LevelRange, MAX_BITS};
pub use lsq::{fake_quant_lsq, grad_scale, quantize_tensor};
pub use state::{inq_init_scale, lsq_init_scale, QuantKind, QuantizerState, MIN_STEP};

/// `‖Q(W) − W‖²` for a given level range and step.
pub fn quant_error(weights: &[f32], range: LevelRange, step: f32) -> f64 {
    weights
        .iter()
        .map(|&w| (range.quantize(w, step) as f64 - w as f64).powi(2))
        .sum()
}

/// Candidate steps shared by every bit width: `max|w|·2^(-j/16)` for
/// `j = 0..=256`.
///
/// Sharing the candidates makes the fitted error non-increasing in bits: a
/// wider range with the same step is a superset of the narrower level set.
fn candidate_steps(weights: &[f32]) -> Vec<f32> {
    let max = weights.iter().fold(0f32, |m, w| m.max(w.abs()));
    if max == 0.0 {
        return vec![1.0];
    }
    (0..=256)
        .map(|j| ((max as f64) * (-(j as f64) / 16.0).exp2()) as f32)
        .filter(|s| *s > 0.0)
        .collect()
}

/// Step minimizing `‖Q(W) − W‖²` over the shared candidate grid, with the
/// resulting error.
pub fn fit_step(weights: &[f32], range: LevelRange) -> (f32, f64) {
    let mut best = (1.0f32, f64::INFINITY);
    for s in candidate_steps(weights) {
        let err = quant_error(weights, range, s);
        if err < best.1 {
            best = (s, err);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quant_error_hand_value() {
        let r = LevelRange::new(2).unwrap();
        let e = quant_error(&[0.4, -0.6], r, 1.0);
        assert!((e - 0.32).abs() < 1e-7, "{e}");
    }

    #[test]
    fn on_grid_weights_have_zero_error() {
        let r = LevelRange::new(4).unwrap();
        let w: Vec<f32> = [-3, 0, 5, 7].iter().map(|&k| k as f32 * 0.125).collect();
        assert_eq!(quant_error(&w, r, 0.125), 0.0);
    }

    #[test]
    fn fitted_error_non_increasing_in_bits() {
        let w: Vec<f32> = (0..200)
            .map(|i| ((i * 7919) % 1000) as f32 / 1000.0 - 0.5)
            .collect();
        let errs: Vec<f64> = [1u8, 2, 3, 4, 8]
            .iter()
            .map(|&b| fit_step(&w, LevelRange::new(b).unwrap()).1)
            .collect();
        assert!(errs.windows(2).all(|p| p[1] <= p[0]), "{errs:?}");
    }
}
