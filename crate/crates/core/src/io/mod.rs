//! Files: checkpoints, datasets, configs and reports.

mod bitpack;
mod checkpoint;
mod config;
mod dataset;
mod report;

use std::io::Write;
use std::path::Path;

use crate::error::Result;

pub use bitpack::{packed_len, BitReader, BitWriter};
pub use checkpoint::{
    checkpoint_compression, decode_checkpoint, encode_checkpoint, load_checkpoint, payload_bits,
    save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use config::{config_hash, config_to_toml, parse_config, parse_config_str};
pub use dataset::{
    decode_dataset, encode_dataset, load_dataset, save_dataset, DATASET_MAGIC, DATASET_VERSION,
};
pub use report::{
    emit_report, module_rows, progress_jsonl, val_add01, ModuleRow, PlanSummary, ProbeRow, Report,
    ReportBody, Schedules, SubsetRow,
};

/// Writes to a temporary file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
