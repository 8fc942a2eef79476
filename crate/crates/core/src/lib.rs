//! Modular quantization-aware training (MQAT) on a miniature autodiff engine.
//!
//! The crate covers the whole pipeline: a synthetic 6D pose task with a
//! three-module network, Hessian-trace sensitivities, exact bit allocation
//! under a compression budget, flow planning, and sequential
//! quantize-and-retrain with INQ or LSQ.

pub mod autodiff;
pub mod error;
pub mod io;
pub mod metrics;
pub mod planner;
pub mod pose;
pub mod quant;
pub mod sensitivity;
pub mod trainer;

pub use error::{MqatError, Result};
