use std::collections::BTreeMap;

use super::param::Parameter;
use crate::error::{MqatError, Result};

/// SGD with heavy-ball momentum: `v ← μ·v + g; w ← w − lr·v`.
///
/// Velocity buffers are keyed by slot so that parameters and auxiliary
/// scalars (learned step sizes) can share one optimizer.
#[derive(Clone, Debug, Default)]
pub struct Sgd {
    momentum: f32,
    velocity: BTreeMap<usize, Vec<f32>>,
}

impl Sgd {
    pub fn new(momentum: f32) -> Result<Self> {
        if !(0.0..1.0).contains(&momentum) {
            return Err(MqatError::invalid(format!(
                "momentum {momentum} outside [0, 1)"
            )));
        }
        Ok(Self {
            momentum,
            velocity: BTreeMap::new(),
        })
    }

    /// Updates one slot. Masked-out entries keep their value and have their
    /// velocity cleared.
    pub fn update(
        &mut self,
        slot: usize,
        value: &mut [f32],
        grad: &[f32],
        mask: Option<&[bool]>,
        lr: f32,
    ) -> Result<()> {
        if !(lr > 0.0) {
            return Err(MqatError::invalid(format!(
                "learning rate {lr} must be positive"
            )));
        }
        if grad.len() != value.len() || mask.is_some_and(|m| m.len() != value.len()) {
            return Err(MqatError::shape(
                "sgd_step",
                "value/grad/mask lengths differ",
            ));
        }
        let mu = self.momentum;
        let vel = self
            .velocity
            .entry(slot)
            .or_insert_with(|| vec![0.0; value.len()]);
        for i in 0..value.len() {
            if mask.is_some_and(|m| !m[i]) {
                vel[i] = 0.0;
                continue;
            }
            vel[i] = mu * vel[i] + grad[i];
            value[i] -= lr * vel[i];
        }
        Ok(())
    }

    /// One step over `params`, slot `i` for `params[i]`.
    pub fn step(&mut self, params: &mut [&mut Parameter], lr: f32) -> Result<()> {
        for (slot, p) in params.iter_mut().enumerate() {
            let Parameter {
                value,
                grad,
                trainable_mask,
                ..
            } = &mut **p;
            self.update(
                slot,
                value.data_mut(),
                grad.data(),
                Some(trainable_mask),
                lr,
            )?;
        }
        Ok(())
    }
}

/// Single optimizer step with a fresh momentum buffer.
pub fn sgd_step(params: &mut [&mut Parameter], lr: f32, momentum: f32) -> Result<()> {
    Sgd::new(momentum)?.step(params, lr)
}
