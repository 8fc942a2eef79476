use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{MqatError, Result};

/// Index of a layer in forward order; unique within a model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LayerId(pub usize);

/// Index of a module (B_k) in declaration order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModuleId(pub usize);

/// Trainable weight block of one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub value: Tensor,
    pub grad: Tensor,
    /// `false` entries are frozen: their gradient is forced to zero and the
    /// optimizer never touches them.
    pub trainable_mask: Vec<bool>,
    pub layer_id: LayerId,
    pub module_id: ModuleId,
}

impl Parameter {
    pub fn new(value: Tensor, layer_id: LayerId, module_id: ModuleId) -> Self {
        let grad = Tensor::zeros(value.shape().to_vec());
        let trainable_mask = vec![true; value.len()];
        Self {
            value,
            grad,
            trainable_mask,
            layer_id,
            module_id,
        }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    /// Stores `grad`, zeroed wherever the parameter is frozen.
    pub fn set_grad(&mut self, grad: &Tensor) -> Result<()> {
        if grad.shape() != self.value.shape() {
            return Err(MqatError::shape(
                "set_grad",
                format!("param {:?} grad {:?}", self.value.shape(), grad.shape()),
            ));
        }
        for ((dst, &src), &trainable) in self
            .grad
            .data_mut()
            .iter_mut()
            .zip(grad.data())
            .zip(&self.trainable_mask)
        {
            *dst = if trainable { src } else { 0.0 };
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.grad.data_mut().iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn frozen_count(&self) -> usize {
        self.trainable_mask.iter().filter(|&&t| !t).count()
    }

    pub fn freeze_all(&mut self) {
        self.trainable_mask.iter_mut().for_each(|t| *t = false);
    }
}
