//! Module sizes, compression factors and BOPs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::autodiff::ModuleId;
use crate::error::{MqatError, Result};

/// Parameter count S_k of every module, in declaration order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleSizes {
    entries: Vec<(ModuleId, String, u64)>,
}

impl ModuleSizes {
    pub fn new(entries: Vec<(ModuleId, String, u64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(MqatError::invalid("no modules"));
        }
        if let Some((_, name, _)) = entries.iter().find(|e| e.2 == 0) {
            return Err(MqatError::invalid(format!(
                "module `{name}` has zero parameters"
            )));
        }
        Ok(Self { entries })
    }

    /// Sizes with generated names `m0, m1, …`.
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        Self::new(
            counts
                .iter()
                .enumerate()
                .map(|(k, &s)| (ModuleId(k), format!("m{k}"), s))
                .collect(),
        )
    }

    pub fn iter(&self) -> impl Iterator<Item = (ModuleId, &str, u64)> + '_ {
        self.entries.iter().map(|(k, n, s)| (*k, n.as_str(), *s))
    }

    pub fn ids(&self) -> Vec<ModuleId> {
        self.entries.iter().map(|e| e.0).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn size(&self, k: ModuleId) -> u64 {
        self.entries.iter().find(|e| e.0 == k).map_or(0, |e| e.2)
    }

    pub fn name(&self, k: ModuleId) -> &str {
        self.entries
            .iter()
            .find(|e| e.0 == k)
            .map_or("?", |e| e.1.as_str())
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|e| e.2).sum()
    }

    /// `32·ΣS_k`
    pub fn full_precision_bits(&self) -> u64 {
        32 * self.total()
    }

    /// `Σ ρ_k·S_k` for the given assignment; unassigned modules count 32 bits.
    pub fn size_bits(&self, bits: &BTreeMap<ModuleId, u8>) -> u64 {
        self.entries
            .iter()
            .map(|(k, _, s)| s * bits.get(k).copied().unwrap_or(32) as u64)
            .sum()
    }
}

/// Size limit in bits implied by a compression budget.
pub fn budget_limit_bits(full_precision_bits: u64, budget: f64) -> f64 {
    full_precision_bits as f64 / budget
}

/// `32·ΣS_k / Σρ_k·S_k` over weight payload only.
pub fn compression_factor(sizes: &ModuleSizes, bits: &BTreeMap<ModuleId, u8>) -> Result<f64> {
    for k in sizes.ids() {
        if !bits.contains_key(&k) {
            return Err(MqatError::invalid(format!(
                "no bit width assigned to module `{}`",
                sizes.name(k)
            )));
        }
    }
    Ok(sizes.full_precision_bits() as f64 / sizes.size_bits(bits) as f64)
}

/// `Σ_layers MACs·b_w·b_a`.
pub fn bops_estimate(layer_macs: &[u64], weight_bits: &[u8], activation_bits: u8) -> Result<u64> {
    if layer_macs.len() != weight_bits.len() {
        return Err(MqatError::invalid(
            "one weight bit width per layer is required",
        ));
    }
    Ok(layer_macs
        .iter()
        .zip(weight_bits)
        .map(|(&m, &b)| m * b as u64 * activation_bits as u64)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assign(bits: &[u8]) -> BTreeMap<ModuleId, u8> {
        bits.iter()
            .enumerate()
            .map(|(k, &b)| (ModuleId(k), b))
            .collect()
    }

    #[test]
    fn full_precision_is_unit_factor() {
        let s = ModuleSizes::from_counts(&[10, 20, 30]).unwrap();
        assert_eq!(compression_factor(&s, &assign(&[32, 32, 32])).unwrap(), 1.0);
    }

    #[test]
    fn equal_modules_at_eight_bits() {
        let s = ModuleSizes::from_counts(&[7, 7, 7]).unwrap();
        assert_eq!(compression_factor(&s, &assign(&[8, 8, 8])).unwrap(), 4.0);
    }

    #[test]
    fn mixed_eight_two_eight() {
        let s = ModuleSizes::from_counts(&[3_000_000, 1_000_000, 1_000_000]).unwrap();
        let c = compression_factor(&s, &assign(&[8, 2, 8])).unwrap();
        assert!((c - 160.0 / 34.0).abs() < 1e-12);
        assert!((c - 4.71).abs() < 0.005);
    }

    #[test]
    fn missing_assignment_is_error() {
        let s = ModuleSizes::from_counts(&[1, 2]).unwrap();
        assert!(compression_factor(&s, &assign(&[8])).is_err());
    }

    #[test]
    fn bops_formula_and_linearity() {
        let macs = [100, 250];
        assert_eq!(bops_estimate(&macs, &[32, 32], 32).unwrap(), 350 * 1024);
        let full = bops_estimate(&macs, &[8, 8], 32).unwrap();
        assert_eq!(bops_estimate(&macs, &[4, 4], 32).unwrap() * 2, full);
    }

    #[test]
    fn zero_sized_module_rejected() {
        assert!(ModuleSizes::from_counts(&[3, 0]).is_err());
    }
}
