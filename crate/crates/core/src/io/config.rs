//! Strict TOML run configuration.
//!
//! Top-level keys set scalar options; `[backbone]`, `[aggregator]` and
//! `[head]` each hold `widths`, and `[dataset]` sizes the splits. `seed` and
//! `budget` are required; everything else has a default.

use std::path::Path;

use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::error::{MqatError, Result};
use crate::quant::{PartitionStrategy, QuantKind};
use crate::trainer::RunConfig;

const TOP_KEYS: &[&str] = &[
    "seed",
    "budget",
    "quantizer",
    "bits",
    "epochs_per_module",
    "probe_epochs",
    "pretrain_epochs",
    "learning_rate",
    "pretrain_learning_rate",
    "momentum",
    "batch_size",
    "hutchinson_samples",
    "partition",
    "backbone",
    "aggregator",
    "head",
    "dataset",
];
const MODULE_KEYS: &[&str] = &["widths"];
const DATASET_KEYS: &[&str] = &["train", "val", "calibration", "noise_std"];

fn unknown_key(key: &str, allowed: &[&str]) -> MqatError {
    let best = allowed
        .iter()
        .map(|k| (strsim::jaro_winkler(key, k), *k))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .filter(|(score, _)| *score >= 0.7);
    let msg = match best {
        Some((_, k)) => format!("unknown key (did you mean `{k}`?)"),
        None => "unknown key".to_string(),
    };
    MqatError::config(key, msg)
}

fn check_keys(table: &Table, prefix: &str, allowed: &[&str]) -> Result<()> {
    for key in table.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(unknown_key(&format!("{prefix}{key}"), allowed));
        }
    }
    Ok(())
}

fn as_u64(key: &str, v: &Value) -> Result<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        _ => Err(MqatError::config(
            key,
            format!("expected a non-negative integer, got {v}"),
        )),
    }
}

fn as_usize(key: &str, v: &Value) -> Result<usize> {
    usize::try_from(as_u64(key, v)?).map_err(|_| MqatError::config(key, "value too large"))
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(MqatError::config(
            key,
            format!("expected a number, got {v}"),
        )),
    }
}

fn as_str<'a>(key: &str, v: &'a Value) -> Result<&'a str> {
    v.as_str()
        .ok_or_else(|| MqatError::config(key, format!("expected a string, got {v}")))
}

fn as_list(key: &str, v: &Value) -> Result<Vec<usize>> {
    let arr = v
        .as_array()
        .ok_or_else(|| MqatError::config(key, format!("expected an array, got {v}")))?;
    arr.iter().map(|x| as_usize(key, x)).collect()
}

fn as_table<'a>(key: &str, v: &'a Value) -> Result<&'a Table> {
    v.as_table()
        .ok_or_else(|| MqatError::config(key, "expected a table"))
}

/// Parses and validates a configuration document.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| {
        MqatError::config("<file>", e.to_string().trim_end().to_string())
    })?;
    check_keys(&table, "", TOP_KEYS)?;
    let seed = as_u64(
        "seed",
        table
            .get("seed")
            .ok_or_else(|| MqatError::config("seed", "required key missing"))?,
    )?;
    let budget = as_f64(
        "budget",
        table
            .get("budget")
            .ok_or_else(|| MqatError::config("budget", "required key missing"))?,
    )?;
    let mut c = RunConfig::new(seed, budget);
    for (key, v) in &table {
        let k = key.as_str();
        match k {
            "seed" | "budget" => {}
            "quantizer" => {
                c.quantizer = as_str(k, v)?
                    .parse::<QuantKind>()
                    .map_err(|e| MqatError::config(k, e.to_string()))?
            }
            "bits" => {
                c.bits = as_list(k, v)?
                    .into_iter()
                    .map(|b| {
                        u8::try_from(b)
                            .map_err(|_| MqatError::config(k, format!("bit width {b} too large")))
                    })
                    .collect::<Result<_>>()?
            }
            "epochs_per_module" => c.epochs_per_module = as_usize(k, v)?,
            "probe_epochs" => c.probe_epochs = as_usize(k, v)?,
            "pretrain_epochs" => c.pretrain_epochs = as_usize(k, v)?,
            "learning_rate" => c.lr = as_f64(k, v)? as f32,
            "pretrain_learning_rate" => c.pretrain_lr = as_f64(k, v)? as f32,
            "momentum" => c.momentum = as_f64(k, v)? as f32,
            "batch_size" => c.batch_size = as_usize(k, v)?,
            "hutchinson_samples" => c.hutchinson_samples = as_usize(k, v)?,
            "partition" => {
                c.partition = match as_str(k, v)? {
                    "magnitude" => PartitionStrategy::Magnitude,
                    "random" => PartitionStrategy::Random,
                    other => {
                        return Err(MqatError::config(
                            k,
                            format!("`{other}` is not magnitude or random"),
                        ))
                    }
                }
            }
            "backbone" | "aggregator" | "head" => {
                let t = as_table(k, v)?;
                check_keys(t, &format!("{k}."), MODULE_KEYS)?;
                if let Some(w) = t.get("widths") {
                    let widths = as_list(&format!("{k}.widths"), w)?;
                    match k {
                        "backbone" => c.arch.backbone = widths,
                        "aggregator" => c.arch.aggregator = widths,
                        _ => c.arch.head = widths,
                    }
                }
            }
            "dataset" => {
                let t = as_table(k, v)?;
                check_keys(t, "dataset.", DATASET_KEYS)?;
                for (dk, dv) in t {
                    let full = format!("dataset.{dk}");
                    match dk.as_str() {
                        "train" => c.dataset.train = as_usize(&full, dv)?,
                        "val" => c.dataset.val = as_usize(&full, dv)?,
                        "calibration" => c.dataset.calibration = as_usize(&full, dv)?,
                        _ => c.dataset.noise_std = as_f64(&full, dv)?,
                    }
                }
            }
            _ => unreachable!("keys checked above"),
        }
    }
    c.validate()?;
    Ok(c)
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| MqatError::config("<file>", format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

/// Canonical text form; parses back to the same config.
pub fn config_to_toml(c: &RunConfig) -> String {
    let list = |v: &[usize]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    };
    let bits: Vec<usize> = c.bits.iter().map(|&b| b as usize).collect();
    let partition = match c.partition {
        PartitionStrategy::Magnitude => "magnitude",
        PartitionStrategy::Random => "random",
    };
    format!(
        "seed = {}\nbudget = {:?}\nquantizer = \"{}\"\nbits = [{}]\nepochs_per_module = {}\nprobe_epochs = {}\n\
         pretrain_epochs = {}\nlearning_rate = {:?}\npretrain_learning_rate = {:?}\nmomentum = {:?}\n\
         batch_size = {}\nhutchinson_samples = {}\npartition = \"{partition}\"\n\n\
         [backbone]\nwidths = [{}]\n\n[aggregator]\nwidths = [{}]\n\n[head]\nwidths = [{}]\n\n\
         [dataset]\ntrain = {}\nval = {}\ncalibration = {}\nnoise_std = {:?}\n",
        c.seed,
        c.budget,
        c.quantizer.as_str(),
        list(&bits),
        c.epochs_per_module,
        c.probe_epochs,
        c.pretrain_epochs,
        c.lr as f64,
        c.pretrain_lr as f64,
        c.momentum as f64,
        c.batch_size,
        c.hutchinson_samples,
        list(&c.arch.backbone),
        list(&c.arch.aggregator),
        list(&c.arch.head),
        c.dataset.train,
        c.dataset.val,
        c.dataset.calibration,
        c.dataset.noise_std,
    )
}

/// SHA-256 (hex) of the canonical text form.
pub fn config_hash(c: &RunConfig) -> String {
    hex::encode(Sha256::digest(config_to_toml(c).as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config_str("seed = 3\nbudget = 4\n").unwrap();
        assert_eq!(c.lr, 1e-2);
        assert_eq!(c.batch_size, 8);
        assert_eq!(c.epochs_per_module, 30);
        assert_eq!(c, RunConfig::new(3, 4.0));
    }

    #[test]
    fn small_budget_names_key() {
        let e = parse_config_str("seed = 3\nbudget = 0.5\n").unwrap_err();
        assert!(
            matches!(e, MqatError::Config { ref key, .. } if key == "budget"),
            "{e}"
        );
    }

    #[test]
    fn misspelled_key_gets_suggestion() {
        let e = parse_config_str("seed = 3\nbudget = 4\nlerning_rate = 0.1\n").unwrap_err();
        let msg = e.to_string();
        assert!(
            msg.contains("lerning_rate") && msg.contains("learning_rate"),
            "{msg}"
        );
        let e = parse_config_str("seed = 3\nbudget = 4\n[dataset]\ntrian = 5\n").unwrap_err();
        assert!(e.to_string().contains("dataset.trian"), "{e}");
    }

    #[test]
    fn missing_required_key() {
        let e = parse_config_str("budget = 4\n").unwrap_err();
        assert!(matches!(e, MqatError::Config { ref key, .. } if key == "seed"));
    }

    #[test]
    fn canonical_form_round_trips() {
        let mut c = RunConfig::new(11, 6.5);
        c.quantizer = QuantKind::Lsq;
        c.lr = 3e-4;
        c.arch.head = vec![5, 7];
        c.dataset.noise_std = 0.25;
        let back = parse_config_str(&config_to_toml(&c)).unwrap();
        assert_eq!(back, c);
        assert_eq!(config_hash(&back), config_hash(&c));
        assert_ne!(config_hash(&c), config_hash(&RunConfig::new(11, 6.5)));
    }
}
