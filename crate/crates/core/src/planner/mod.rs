//! Planning: module sizes, exact bit allocation, flow derivation, probes.

mod accounting;
mod alloc;
mod flow;

pub use accounting::{bops_estimate, budget_limit_bits, compression_factor, ModuleSizes};
pub use alloc::{
    ilp_allocate, layerwise_allocate, normalize_bits, Allocation, EXACT_LAYER_LIMIT,
    MAX_ENUMERATION,
};
pub use flow::{
    baseline_probe, derive_flow, flow_search_exhaustive, ProbeOutcome, ProbeResult, QuantPlan,
    SearchRow, MAX_SEARCH_MODULES, PROBE_BITS,
};
