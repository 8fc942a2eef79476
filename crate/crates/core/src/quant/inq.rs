//! Incremental network quantization: partition, snap to grid, freeze.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::state::{QuantKind, QuantizerState};
use crate::autodiff::Parameter;
use crate::error::{MqatError, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionStrategy {
    /// Largest magnitudes first (ties by index).
    #[default]
    Magnitude,
    Random,
}

/// Number of weights frozen at cumulative `fraction` of `n`.
pub fn frozen_target(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).round() as usize).min(n)
}

/// Indices of weights to freeze so that `round(target_fraction·N)` weights
/// are frozen in total. Already-frozen weights (mask `false`) are kept.
pub fn inq_partition<R: Rng + ?Sized>(
    weights: &[f32],
    trainable_mask: &[bool],
    target_fraction: f64,
    strategy: PartitionStrategy,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&target_fraction) {
        return Err(MqatError::invalid(format!(
            "INQ fraction {target_fraction} outside [0, 1]"
        )));
    }
    if weights.len() != trainable_mask.len() {
        return Err(MqatError::shape(
            "inq_partition",
            "weights and mask lengths differ",
        ));
    }
    let frozen = trainable_mask.iter().filter(|&&t| !t).count();
    let target = frozen_target(weights.len(), target_fraction);
    if target < frozen {
        return Err(MqatError::invalid(format!(
            "INQ target {target} below {frozen} already frozen weights"
        )));
    }
    let mut free: Vec<usize> = (0..weights.len()).filter(|&i| trainable_mask[i]).collect();
    match strategy {
        PartitionStrategy::Magnitude => free.sort_by(|&a, &b| {
            weights[b]
                .abs()
                .total_cmp(&weights[a].abs())
                .then(a.cmp(&b))
        }),
        PartitionStrategy::Random => free.shuffle(rng),
    }
    free.truncate(target - frozen);
    free.sort_unstable();
    Ok(free)
}

/// Snaps `indices` to the nearest level and freezes them. Other weights are
/// untouched.
pub fn inq_apply(param: &mut Parameter, state: &QuantizerState, indices: &[usize]) -> Result<()> {
    if state.kind != QuantKind::Inq {
        return Err(MqatError::invalid("inq_apply on a non-INQ layer"));
    }
    let range = state.range()?;
    let values = param.value.data_mut();
    for &i in indices {
        if i >= values.len() {
            return Err(MqatError::invalid(format!("INQ index {i} out of range")));
        }
        values[i] = range.quantize(values[i], state.scale);
        param.trainable_mask[i] = false;
    }
    Ok(())
}

/// Partitions and freezes in one step, recording the new cumulative fraction.
pub fn inq_advance<R: Rng + ?Sized>(
    param: &mut Parameter,
    state: &mut QuantizerState,
    target_fraction: f64,
    strategy: PartitionStrategy,
    rng: &mut R,
) -> Result<usize> {
    if target_fraction < state.inq_fraction_done {
        return Err(MqatError::invalid(format!(
            "INQ fraction must not decrease ({} → {target_fraction})",
            state.inq_fraction_done
        )));
    }
    let idx = inq_partition(
        param.value.data(),
        &param.trainable_mask,
        target_fraction,
        strategy,
        rng,
    )?;
    inq_apply(param, state, &idx)?;
    state.inq_fraction_done = target_fraction;
    Ok(idx.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{LayerId, ModuleId, Tensor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn param(w: &[f32]) -> Parameter {
        Parameter::new(
            Tensor::new([w.len()], w.to_vec()).unwrap(),
            LayerId(0),
            ModuleId(0),
        )
    }

    #[test]
    fn magnitude_partition_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let idx = inq_partition(
            &[0.9, 0.1, 0.5, 0.4],
            &[true; 4],
            0.5,
            PartitionStrategy::Magnitude,
            &mut rng,
        )
        .unwrap();
        assert_eq!(idx, vec![0, 2]);
    }

    #[test]
    fn fractions_accumulate_as_supersets() {
        let w: Vec<f32> = (0..10).map(|i| (i as f32 * 0.37).sin()).collect();
        let mut p = param(&w);
        let mut st = QuantizerState::inq(&p.value, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        inq_advance(&mut p, &mut st, 0.2, PartitionStrategy::Random, &mut rng).unwrap();
        let first: Vec<bool> = p.trainable_mask.clone();
        assert_eq!(p.frozen_count(), 2);
        inq_advance(&mut p, &mut st, 0.4, PartitionStrategy::Random, &mut rng).unwrap();
        assert_eq!(p.frozen_count(), 4);
        assert!(first.iter().zip(&p.trainable_mask).all(|(a, b)| *a || !*b));
    }

    #[test]
    fn full_fraction_freezes_everything_on_grid() {
        let mut p = param(&[0.8, -0.33, 0.05, -0.61, 0.2]);
        let mut st = QuantizerState::inq(&p.value, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        inq_advance(&mut p, &mut st, 1.0, PartitionStrategy::Magnitude, &mut rng).unwrap();
        assert_eq!(p.frozen_count(), 5);
        for &v in p.value.data() {
            assert!([-st.scale, 0.0, st.scale].contains(&v), "{v}");
        }
    }

    #[test]
    fn zero_fraction_is_identity() {
        let w = [0.8, -0.33, 0.05];
        let mut p = param(&w);
        let before = p.clone();
        let mut st = QuantizerState::inq(&p.value, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        inq_advance(&mut p, &mut st, 0.0, PartitionStrategy::Magnitude, &mut rng).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn invalid_fractions_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = [true; 2];
        for f in [-0.1, 1.5] {
            assert!(
                inq_partition(&[1.0, 2.0], &m, f, PartitionStrategy::Magnitude, &mut rng).is_err()
            );
        }
        let mut p = param(&[1.0, 2.0]);
        let mut st = QuantizerState::inq(&p.value, 2).unwrap();
        inq_advance(&mut p, &mut st, 1.0, PartitionStrategy::Magnitude, &mut rng).unwrap();
        assert!(inq_advance(&mut p, &mut st, 0.5, PartitionStrategy::Magnitude, &mut rng).is_err());
    }
}
