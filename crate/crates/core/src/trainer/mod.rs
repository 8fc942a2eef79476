//! Training loops, schedules and the end-to-end MQAT run.

mod config;
mod run;
mod schedule;
mod train;

pub use config::{DatasetConfig, Datasets, RunConfig};
pub use run::{
    accuracy, bit_sweep, compare, flow_search, layer_bits, layerwise_lsq, mqat_run, pretrain,
    probe_step, profile_model, quantize_and_retrain, retrain_layers, run_epochs,
    uniform_bits_for_budget, uniform_lsq, CompareRow, ProbeStep, ProgressRecord, RunOutput,
    StageReport, StageResult, SweepRow,
};
pub use schedule::{
    fraction_at, gamma_at, inq_schedule, lsq_schedule, scale_schedule, ScheduleEntry, TABLE_EPOCHS,
};
pub use train::{derive_seed, name_tag, train_epoch, Optimizer};
