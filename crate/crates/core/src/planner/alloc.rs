//! Exact bit allocation under a compression budget.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::autodiff::{LayerId, ModuleId};
use crate::error::{MqatError, Result};
use crate::quant::MAX_BITS;

use super::accounting::{budget_limit_bits, ModuleSizes};

/// Largest assignment space the enumerating solver will walk.
pub const MAX_ENUMERATION: u64 = 50_000_000;

/// Layer count up to which the layer-wise allocator is exact.
pub const EXACT_LAYER_LIMIT: usize = 24;

/// Size units for the dynamic-programming fallback.
const DP_UNITS: u64 = 20_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Allocation<K: Ord> {
    pub bits: BTreeMap<K, u8>,
    pub objective: f64,
    pub size_bits: u64,
}

/// Sorted, deduplicated candidate widths; rejects widths outside 1..=16.
pub fn normalize_bits(q: &[u8]) -> Result<Vec<u8>> {
    if q.is_empty() {
        return Err(MqatError::invalid("no candidate bit widths"));
    }
    if let Some(b) = q.iter().find(|&&b| b == 0 || b > MAX_BITS) {
        return Err(MqatError::invalid(format!(
            "bit width {b} outside 1..={MAX_BITS}"
        )));
    }
    let mut q = q.to_vec();
    q.sort_unstable();
    q.dedup();
    Ok(q)
}

fn check_budget(budget: f64) -> Result<()> {
    if !(budget.is_finite() && budget >= 1.0) {
        return Err(MqatError::invalid(format!(
            "budget {budget} must be a finite factor >= 1"
        )));
    }
    Ok(())
}

/// Candidate order: lower objective, then smaller size, then
/// lexicographically smaller bits.
fn better(a: (f64, u64, &[u8]), b: (f64, u64, &[u8])) -> bool {
    match a.0.partial_cmp(&b.0) {
        Some(Ordering::Less) => true,
        Some(Ordering::Greater) => false,
        _ => match a.1.cmp(&b.1) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => a.2 < b.2,
        },
    }
}

/// One free variable of the enumeration: its size and Ω per candidate.
struct Item {
    size: u64,
    omega: Vec<f64>,
}

/// Walks every assignment in lexicographic order and keeps the best
/// feasible one. Returns the chosen candidate indices.
fn enumerate(
    items: &[Item],
    q: &[u8],
    fixed_size: u64,
    limit: f64,
) -> Option<(Vec<usize>, f64, u64)> {
    let k = items.len();
    let mut idx = vec![0usize; k];
    let mut best: Option<(Vec<usize>, f64, u64, Vec<u8>)> = None;
    loop {
        let mut obj = 0f64;
        let mut size = fixed_size;
        for (it, &i) in items.iter().zip(&idx) {
            obj += it.omega[i];
            size += it.size * q[i] as u64;
        }
        if size as f64 <= limit {
            let bits: Vec<u8> = idx.iter().map(|&i| q[i]).collect();
            let replace = match &best {
                None => true,
                Some((_, bo, bs, bb)) => better((obj, size, &bits), (*bo, *bs, bb)),
            };
            if replace {
                best = Some((idx.clone(), obj, size, bits));
            }
        }
        // odometer, last position fastest
        let mut pos = k;
        loop {
            if pos == 0 {
                return best.map(|(i, o, s, _)| (i, o, s));
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < q.len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Minimizes `Σ Ω_k^(ρ_k)` subject to `Σ ρ_k·S_k ≤ 32·ΣS_k / budget` by
/// exhaustive enumeration. `fixed` modules keep their width, count toward
/// the size and add nothing to the objective.
pub fn ilp_allocate(
    omega: &BTreeMap<(ModuleId, u8), f64>,
    sizes: &ModuleSizes,
    q: &[u8],
    budget: f64,
    fixed: &BTreeMap<ModuleId, u8>,
) -> Result<Allocation<ModuleId>> {
    let q = normalize_bits(q)?;
    check_budget(budget)?;
    let limit = budget_limit_bits(sizes.full_precision_bits(), budget);
    let mut fixed_size = 0u64;
    for (k, &b) in fixed {
        if sizes.size(*k) == 0 {
            return Err(MqatError::invalid(format!(
                "fixed module {} is unknown",
                k.0
            )));
        }
        fixed_size += sizes.size(*k) * b as u64;
    }
    let free: Vec<ModuleId> = sizes
        .ids()
        .into_iter()
        .filter(|k| !fixed.contains_key(k))
        .collect();
    let mut items = Vec::with_capacity(free.len());
    for &k in &free {
        let mut om = Vec::with_capacity(q.len());
        for &b in &q {
            let v = omega.get(&(k, b)).copied().ok_or_else(|| {
                MqatError::invalid(format!(
                    "no importance for module `{}` at {b} bits",
                    sizes.name(k)
                ))
            })?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(MqatError::invalid(format!(
                    "importance for module `{}` is {v}",
                    sizes.name(k)
                )));
            }
            om.push(v);
        }
        items.push(Item {
            size: sizes.size(k),
            omega: om,
        });
    }
    let space = (q.len() as u64)
        .checked_pow(free.len() as u32)
        .unwrap_or(u64::MAX);
    if space > MAX_ENUMERATION {
        return Err(MqatError::invalid(format!(
            "{space} assignments exceed the enumeration limit"
        )));
    }
    let min_size = fixed_size + items.iter().map(|it| it.size * q[0] as u64).sum::<u64>();
    let (idx, objective, size_bits) =
        enumerate(&items, &q, fixed_size, limit).ok_or(MqatError::Infeasible {
            budget,
            min_size_bits: min_size,
            limit_bits: limit,
        })?;
    let mut bits: BTreeMap<ModuleId, u8> = fixed.clone();
    for (k, i) in free.into_iter().zip(idx) {
        bits.insert(k, q[i]);
    }
    Ok(Allocation {
        bits,
        objective,
        size_bits,
    })
}

/// Same problem at layer granularity. Exact branch-and-bound up to
/// [`EXACT_LAYER_LIMIT`] layers, otherwise a knapsack over sizes rounded up
/// to `DP_UNITS` buckets (always feasible, possibly suboptimal).
pub fn layerwise_allocate(
    omega: &BTreeMap<(LayerId, u8), f64>,
    sizes: &BTreeMap<LayerId, u64>,
    q: &[u8],
    budget: f64,
) -> Result<Allocation<LayerId>> {
    let q = normalize_bits(q)?;
    check_budget(budget)?;
    if sizes.is_empty() {
        return Err(MqatError::invalid("no layers"));
    }
    let total: u64 = sizes.values().sum();
    let limit = budget_limit_bits(32 * total, budget);
    let ids: Vec<LayerId> = sizes.keys().copied().collect();
    let mut items = Vec::with_capacity(ids.len());
    for &l in &ids {
        if sizes[&l] == 0 {
            return Err(MqatError::invalid(format!(
                "layer {} has zero parameters",
                l.0
            )));
        }
        let mut om = Vec::with_capacity(q.len());
        for &b in &q {
            let v = omega.get(&(l, b)).copied().ok_or_else(|| {
                MqatError::invalid(format!("no importance for layer {} at {b} bits", l.0))
            })?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(MqatError::invalid(format!(
                    "importance for layer {} is {v}",
                    l.0
                )));
            }
            om.push(v);
        }
        items.push(Item {
            size: sizes[&l],
            omega: om,
        });
    }
    let min_size: u64 = items.iter().map(|it| it.size * q[0] as u64).sum();
    if min_size as f64 > limit {
        return Err(MqatError::Infeasible {
            budget,
            min_size_bits: min_size,
            limit_bits: limit,
        });
    }
    let idx = if items.len() <= EXACT_LAYER_LIMIT {
        branch_and_bound(&items, &q, limit)
    } else {
        knapsack_dp(&items, &q, limit)
    }
    .ok_or(MqatError::Infeasible {
        budget,
        min_size_bits: min_size,
        limit_bits: limit,
    })?;
    let mut objective = 0f64;
    let mut size_bits = 0u64;
    let mut bits = BTreeMap::new();
    for ((l, it), i) in ids.into_iter().zip(&items).zip(idx) {
        objective += it.omega[i];
        size_bits += it.size * q[i] as u64;
        bits.insert(l, q[i]);
    }
    Ok(Allocation {
        bits,
        objective,
        size_bits,
    })
}

struct Search<'a> {
    items: &'a [Item],
    q: &'a [u8],
    limit: f64,
    /// Smallest remaining objective and size from position i on.
    min_obj_tail: Vec<f64>,
    min_size_tail: Vec<u64>,
    cur: Vec<usize>,
    best: Option<(Vec<usize>, f64, u64, Vec<u8>)>,
}

impl Search<'_> {
    fn visit(&mut self, pos: usize, obj: f64, size: u64) {
        if (size + self.min_size_tail[pos]) as f64 > self.limit {
            return;
        }
        if let Some((_, bo, _, _)) = &self.best {
            let bound = obj + self.min_obj_tail[pos];
            if bound > *bo + 1e-12 * bo.abs().max(f64::MIN_POSITIVE) {
                return;
            }
        }
        if pos == self.items.len() {
            let bits: Vec<u8> = self.cur.iter().map(|&i| self.q[i]).collect();
            let replace = match &self.best {
                None => true,
                Some((_, bo, bs, bb)) => better((obj, size, &bits), (*bo, *bs, bb)),
            };
            if replace {
                self.best = Some((self.cur.clone(), obj, size, bits));
            }
            return;
        }
        let it = &self.items[pos];
        for i in 0..self.q.len() {
            self.cur.push(i);
            self.visit(
                pos + 1,
                obj + it.omega[i],
                size + it.size * self.q[i] as u64,
            );
            self.cur.pop();
        }
    }
}

fn branch_and_bound(items: &[Item], q: &[u8], limit: f64) -> Option<Vec<usize>> {
    let n = items.len();
    let mut min_obj_tail = vec![0f64; n + 1];
    let mut min_size_tail = vec![0u64; n + 1];
    for i in (0..n).rev() {
        let mo = items[i].omega.iter().copied().fold(f64::INFINITY, f64::min);
        min_obj_tail[i] = min_obj_tail[i + 1] + mo;
        min_size_tail[i] = min_size_tail[i + 1] + items[i].size * q[0] as u64;
    }
    let mut s = Search {
        items,
        q,
        limit,
        min_obj_tail,
        min_size_tail,
        cur: Vec::with_capacity(n),
        best: None,
    };
    s.visit(0, 0.0, 0);
    s.best.map(|b| b.0)
}

fn knapsack_dp(items: &[Item], q: &[u8], limit: f64) -> Option<Vec<usize>> {
    let max_total: u64 = items
        .iter()
        .map(|it| it.size * *q.last().unwrap() as u64)
        .sum();
    let unit = max_total.div_ceil(DP_UNITS).max(1);
    let cap = (limit / unit as f64).floor() as usize;
    let n = items.len();
    // best[c]: minimal objective using exactly c units so far
    let mut best = vec![f64::INFINITY; cap + 1];
    best[0] = 0.0;
    let mut choice = vec![vec![u8::MAX; cap + 1]; n];
    for (li, it) in items.iter().enumerate() {
        let mut next = vec![f64::INFINITY; cap + 1];
        for c in 0..=cap {
            if !best[c].is_finite() {
                continue;
            }
            for (i, &b) in q.iter().enumerate() {
                let w = (it.size * b as u64).div_ceil(unit) as usize;
                let nc = c + w;
                if nc > cap {
                    continue;
                }
                let v = best[c] + it.omega[i];
                if v < next[nc] {
                    next[nc] = v;
                    choice[li][nc] = i as u8;
                }
            }
        }
        best = next;
    }
    let (mut c, _) = best
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(a.0.cmp(&b.0)))?;
    let mut idx = vec![0usize; n];
    for li in (0..n).rev() {
        let i = choice[li][c] as usize;
        idx[li] = i;
        c -= (items[li].size * q[i] as u64).div_ceil(unit) as usize;
    }
    Some(idx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn omega(table: &[[f64; 3]]) -> BTreeMap<(ModuleId, u8), f64> {
        let mut m = BTreeMap::new();
        for (k, row) in table.iter().enumerate() {
            for (j, &b) in [2u8, 4, 8].iter().enumerate() {
                m.insert((ModuleId(k), b), row[j]);
            }
        }
        m
    }

    #[test]
    fn slack_budget_picks_widest() {
        let s = ModuleSizes::from_counts(&[10, 20, 30]).unwrap();
        let o = omega(&[[3.0, 2.0, 1.0], [3.0, 2.0, 1.0], [3.0, 2.0, 1.0]]);
        let a = ilp_allocate(&o, &s, &[2, 4, 8], 1.0, &BTreeMap::new()).unwrap();
        assert!(a.bits.values().all(|&b| b == 8));
    }

    #[test]
    fn zero_importance_prefers_smallest_model() {
        let s = ModuleSizes::from_counts(&[10, 20, 30]).unwrap();
        let o = omega(&[[0.0; 3]; 3]);
        let a = ilp_allocate(&o, &s, &[2, 4, 8], 1.0, &BTreeMap::new()).unwrap();
        assert!(a.bits.values().all(|&b| b == 2));
    }

    #[test]
    fn infeasible_budget() {
        let s = ModuleSizes::from_counts(&[10, 20, 30]).unwrap();
        let o = omega(&[[0.0; 3]; 3]);
        let e = ilp_allocate(&o, &s, &[2, 4, 8], 17.0, &BTreeMap::new()).unwrap_err();
        assert!(matches!(e, MqatError::Infeasible { .. }));
        assert!(ilp_allocate(&o, &s, &[2, 4, 8], 16.0, &BTreeMap::new()).is_ok());
    }

    #[test]
    fn fixed_module_counts_toward_size() {
        let s = ModuleSizes::from_counts(&[100, 100]).unwrap();
        let o = omega(&[[5.0, 1.0, 0.0], [5.0, 1.0, 0.0]]);
        let fixed = BTreeMap::from([(ModuleId(0), 2u8)]);
        // limit 6400/6.4 = 1000 bits; 200 fixed leaves 800 → module 1 at 8
        let a = ilp_allocate(&o, &s, &[2, 4, 8], 6.4, &fixed).unwrap();
        assert_eq!(a.bits[&ModuleId(0)], 2);
        assert_eq!(a.bits[&ModuleId(1)], 8);
        assert_eq!(a.objective, 0.0);
    }

    #[test]
    fn single_layer_matches_module_solver() {
        let s = ModuleSizes::from_counts(&[50]).unwrap();
        let o = omega(&[[4.0, 2.0, 1.0]]);
        let m = ilp_allocate(&o, &s, &[2, 4, 8], 5.0, &BTreeMap::new()).unwrap();
        let lo: BTreeMap<(LayerId, u8), f64> = o
            .iter()
            .map(|(&(k, b), &v)| ((LayerId(k.0), b), v))
            .collect();
        let l =
            layerwise_allocate(&lo, &BTreeMap::from([(LayerId(0), 50)]), &[2, 4, 8], 5.0).unwrap();
        assert_eq!(m.bits[&ModuleId(0)], l.bits[&LayerId(0)]);
        assert_eq!(m.objective, l.objective);
    }

    #[test]
    fn dp_fallback_respects_budget() {
        let n = 30;
        let sizes: BTreeMap<LayerId, u64> =
            (0..n).map(|i| (LayerId(i), 100 + 7 * i as u64)).collect();
        let mut om = BTreeMap::new();
        for i in 0..n {
            for (j, &b) in [2u8, 4, 8].iter().enumerate() {
                om.insert((LayerId(i), b), (3 - j) as f64 * (1.0 + i as f64));
            }
        }
        let a = layerwise_allocate(&om, &sizes, &[2, 4, 8], 6.0).unwrap();
        let total: u64 = sizes.values().sum();
        assert!(a.size_bits as f64 <= 32.0 * total as f64 / 6.0);
        assert!(a.bits.values().any(|&b| b > 2));
    }
}
