//! Minimal dense-tensor engine: reverse-mode tape, SGD, and finite-difference
//! Hessian-vector products.

mod hvp;
mod optim;
mod param;
mod tape;
mod tensor;

pub use hvp::{default_eps, hvp_fd};
pub use optim::{sgd_step, Sgd};
pub use param::{LayerId, ModuleId, Parameter};
pub use tape::{Gradients, Primitive, Tape, Var};
pub use tensor::Tensor;
