//! Baseline probe, flow order, the exhaustive subset search and the plan.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::ModuleId;
use crate::error::{MqatError, Result};

use super::accounting::{compression_factor, ModuleSizes};
use super::alloc::ilp_allocate;

/// Width of the baseline probe and of the module it selects.
pub const PROBE_BITS: u8 = 2;

/// Largest module count [`flow_search_exhaustive`] accepts.
pub const MAX_SEARCH_MODULES: usize = 4;

/// Modules sorted ascending by size (declaration order on ties), without
/// `k_best`.
pub fn derive_flow(sizes: &ModuleSizes, k_best: Option<ModuleId>) -> Vec<ModuleId> {
    let mut flow: Vec<(ModuleId, u64)> = sizes.iter().map(|(k, _, s)| (k, s)).collect();
    flow.sort_by_key(|&(_, s)| s);
    flow.into_iter()
        .map(|(k, _)| k)
        .filter(|&k| Some(k) != k_best)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub module: ModuleId,
    /// `None` when the probe failed.
    pub accuracy: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug)]
pub struct ProbeResult<M> {
    pub baseline: f64,
    pub outcomes: Vec<ProbeOutcome>,
    /// Winner with its retrained model.
    pub best: Option<(ModuleId, M)>,
}

impl<M> ProbeResult<M> {
    pub fn k_best(&self) -> Option<ModuleId> {
        self.best.as_ref().map(|b| b.0)
    }
}

/// Runs `probe(k)` for every module (in parallel) and keeps the most
/// accurate one that strictly beats `baseline`; ties go to the earlier
/// module. A diverged probe is recorded as failed; other errors abort.
pub fn baseline_probe<M, F>(modules: &[ModuleId], baseline: f64, probe: F) -> Result<ProbeResult<M>>
where
    M: Send,
    F: Fn(ModuleId) -> Result<(f64, M)> + Sync,
{
    if modules.is_empty() {
        return Err(MqatError::invalid("no modules to probe"));
    }
    let runs: Vec<Result<(f64, M)>> = modules.par_iter().map(|&k| probe(k)).collect();
    let mut outcomes = Vec::with_capacity(modules.len());
    let mut best: Option<(ModuleId, f64, M)> = None;
    for (&k, run) in modules.iter().zip(runs) {
        match run {
            Ok((acc, model)) => {
                outcomes.push(ProbeOutcome {
                    module: k,
                    accuracy: Some(acc),
                    failure: None,
                });
                let wins = acc > baseline && best.as_ref().is_none_or(|b| acc > b.1);
                if wins {
                    best = Some((k, acc, model));
                }
            }
            Err(e @ MqatError::Divergence { .. }) => outcomes.push(ProbeOutcome {
                module: k,
                accuracy: None,
                failure: Some(e.to_string()),
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(ProbeResult {
        baseline,
        outcomes,
        best: best.map(|(k, _, m)| (k, m)),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchRow {
    pub subset: Vec<ModuleId>,
    pub accuracy: f64,
}

/// Accuracy for every subset of `modules` quantized together (subsets in
/// bitmask order). The empty subset reports `baseline` without calling
/// `eval`.
pub fn flow_search_exhaustive<F>(
    modules: &[ModuleId],
    baseline: f64,
    eval: F,
) -> Result<Vec<SearchRow>>
where
    F: Fn(&[ModuleId]) -> Result<f64> + Sync,
{
    if modules.len() > MAX_SEARCH_MODULES {
        return Err(MqatError::invalid(format!(
            "flow search over {} modules exceeds the limit of {MAX_SEARCH_MODULES}",
            modules.len()
        )));
    }
    let subsets: Vec<Vec<ModuleId>> = (0u32..1 << modules.len())
        .map(|mask| {
            modules
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, &k)| k)
                .collect()
        })
        .collect();
    let accs: Vec<Result<f64>> = subsets
        .par_iter()
        .map(|s| if s.is_empty() { Ok(baseline) } else { eval(s) })
        .collect();
    subsets
        .into_iter()
        .zip(accs)
        .map(|(subset, a)| a.map(|accuracy| SearchRow { subset, accuracy }))
        .collect()
}

/// Flow order, per-module widths and the size they reach.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantPlan {
    pub flow: Vec<ModuleId>,
    pub bits: BTreeMap<ModuleId, u8>,
    pub k_best: Option<ModuleId>,
    pub budget: f64,
    pub objective: f64,
    pub achieved_size_bits: u64,
    pub achieved_compression: f64,
}

impl QuantPlan {
    /// Fixes `k_best` at [`PROBE_BITS`], allocates the rest and orders the
    /// flow.
    pub fn build(
        sizes: &ModuleSizes,
        omega: &BTreeMap<(ModuleId, u8), f64>,
        q: &[u8],
        budget: f64,
        k_best: Option<ModuleId>,
    ) -> Result<Self> {
        let fixed: BTreeMap<ModuleId, u8> = k_best.map(|k| (k, PROBE_BITS)).into_iter().collect();
        let alloc = ilp_allocate(omega, sizes, q, budget, &fixed)?;
        Ok(Self {
            flow: derive_flow(sizes, k_best),
            achieved_compression: compression_factor(sizes, &alloc.bits)?,
            achieved_size_bits: alloc.size_bits,
            objective: alloc.objective,
            bits: alloc.bits,
            k_best,
            budget,
        })
    }

    /// Size in bits after each flow stage, starting from the size with only
    /// `k_best` quantized.
    pub fn stage_sizes(&self, sizes: &ModuleSizes) -> Vec<u64> {
        let mut cur: BTreeMap<ModuleId, u8> = self
            .k_best
            .map(|k| (k, self.bits[&k]))
            .into_iter()
            .collect();
        let mut out = vec![sizes.size_bits(&cur)];
        for k in &self.flow {
            cur.insert(*k, self.bits[k]);
            out.push(sizes.size_bits(&cur));
        }
        out
    }

    pub fn to_toml(&self, sizes: &ModuleSizes, bops: Option<u64>) -> Result<String> {
        #[derive(Serialize)]
        struct Entry<'a> {
            module_id: usize,
            name: &'a str,
            params: u64,
            bits: u8,
        }
        #[derive(Serialize)]
        struct File<'a> {
            budget: f64,
            achieved_compression: f64,
            achieved_size_bits: u64,
            objective: f64,
            #[serde(skip_serializing_if = "Option::is_none")]
            bops: Option<u64>,
            #[serde(skip_serializing_if = "Option::is_none")]
            k_best: Option<&'a str>,
            flow: Vec<&'a str>,
            module: Vec<Entry<'a>>,
        }
        let file = File {
            budget: self.budget,
            achieved_compression: self.achieved_compression,
            achieved_size_bits: self.achieved_size_bits,
            objective: self.objective,
            bops,
            k_best: self.k_best.map(|k| sizes.name(k)),
            flow: self.flow.iter().map(|&k| sizes.name(k)).collect(),
            module: sizes
                .iter()
                .map(|(k, name, s)| Entry {
                    module_id: k.0,
                    name,
                    params: s,
                    bits: self.bits.get(&k).copied().unwrap_or(32),
                })
                .collect(),
        };
        toml::to_string(&file).map_err(|e| MqatError::Format(format!("plan: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bfh() -> ModuleSizes {
        ModuleSizes::new(vec![
            (ModuleId(0), "B".into(), 100),
            (ModuleId(1), "F".into(), 10),
            (ModuleId(2), "H".into(), 30),
        ])
        .unwrap()
    }

    #[test]
    fn flow_ascending_by_size() {
        assert_eq!(
            derive_flow(&bfh(), None),
            vec![ModuleId(1), ModuleId(2), ModuleId(0)]
        );
        assert_eq!(
            derive_flow(&bfh(), Some(ModuleId(1))),
            vec![ModuleId(2), ModuleId(0)]
        );
    }

    #[test]
    fn flow_ties_keep_declaration_order() {
        let s = ModuleSizes::from_counts(&[5, 3, 5, 3]).unwrap();
        let f = derive_flow(&s, None);
        assert_eq!(f, vec![ModuleId(1), ModuleId(3), ModuleId(0), ModuleId(2)]);
    }

    #[test]
    fn probe_requires_strict_improvement() {
        let mods = [ModuleId(0), ModuleId(1)];
        let r =
            baseline_probe(&mods, 0.5, |k| Ok((if k.0 == 0 { 0.5 } else { 0.4 }, k.0))).unwrap();
        assert!(r.best.is_none());
        let r =
            baseline_probe(&mods, 0.5, |k| Ok((if k.0 == 0 { 0.6 } else { 0.7 }, k.0))).unwrap();
        assert_eq!(r.k_best(), Some(ModuleId(1)));
    }

    #[test]
    fn diverged_probe_is_recorded() {
        let mods = [ModuleId(0), ModuleId(1)];
        let r = baseline_probe(&mods, 0.5, |k| {
            if k.0 == 0 {
                Err(MqatError::Divergence {
                    stage: "probe".into(),
                    epoch: 3,
                })
            } else {
                Ok((0.9, ()))
            }
        })
        .unwrap();
        assert!(r.outcomes[0].failure.is_some());
        assert_eq!(r.k_best(), Some(ModuleId(1)));
    }

    #[test]
    fn search_emits_all_subsets() {
        let mods = [ModuleId(0), ModuleId(1), ModuleId(2)];
        let rows = flow_search_exhaustive(&mods, 0.75, |s| Ok(0.1 * s.len() as f64)).unwrap();
        assert_eq!(rows.len(), 8);
        assert!(rows[0].subset.is_empty());
        assert_eq!(rows[0].accuracy, 0.75);
        let five: Vec<ModuleId> = (0..5).map(ModuleId).collect();
        assert!(flow_search_exhaustive(&five, 0.0, |_| Ok(0.0)).is_err());
    }

    #[test]
    fn plan_stage_sizes_shrink() {
        let s = bfh();
        let mut om = BTreeMap::new();
        for k in 0..3 {
            for (j, b) in [2u8, 4, 8].into_iter().enumerate() {
                om.insert((ModuleId(k), b), (3 - j) as f64);
            }
        }
        let p = QuantPlan::build(&s, &om, &[2, 4, 8], 4.0, Some(ModuleId(1))).unwrap();
        assert_eq!(p.bits[&ModuleId(1)], 2);
        assert!(p.achieved_compression >= 4.0);
        let st = p.stage_sizes(&s);
        assert!(st.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(*st.last().unwrap(), p.achieved_size_bits);
        assert!(p
            .to_toml(&s, Some(10))
            .unwrap()
            .contains("flow = [\"H\", \"B\"]"));
    }
}
