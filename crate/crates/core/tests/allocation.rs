//! Allocators against brute-force enumeration.

use std::collections::BTreeMap;

use mqat::autodiff::{LayerId, ModuleId};
use mqat::planner::{ilp_allocate, layerwise_allocate, ModuleSizes};
use mqat::MqatError;
use proptest::prelude::*;

/// Lowest objective over every feasible assignment in `q^n`.
fn brute_force(omega: &[Vec<f64>], sizes: &[u64], q: &[u8], limit: f64) -> Option<f64> {
    let n = sizes.len();
    let mut best: Option<f64> = None;
    let total = q.len().pow(n as u32);
    for code in 0..total {
        let mut c = code;
        let (mut obj, mut size) = (0f64, 0u64);
        for i in 0..n {
            let j = c % q.len();
            c /= q.len();
            obj += omega[i][j];
            size += sizes[i] * q[j] as u64;
        }
        if size as f64 <= limit && best.is_none_or(|b| obj < b) {
            best = Some(obj);
        }
    }
    best
}

fn sorted_bits() -> impl Strategy<Value = Vec<u8>> {
    proptest::sample::subsequence(vec![1u8, 2, 3, 4, 5, 6, 8, 16], 1..=4)
}

/// Ω non-increasing in bits, as produced by the importance table.
fn monotone_omega(n: usize, q: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    proptest::collection::vec(proptest::collection::vec(0.0f64..10.0, q), n).prop_map(|rows| {
        rows.into_iter()
            .map(|mut r| {
                r.sort_by(|a, b| b.total_cmp(a));
                r
            })
            .collect()
    })
}

fn instance() -> impl Strategy<Value = (Vec<u8>, Vec<u64>, Vec<Vec<f64>>, f64)> {
    (sorted_bits(), 1usize..=4).prop_flat_map(|(q, k)| {
        let nq = q.len();
        (
            Just(q),
            proptest::collection::vec(1u64..5000, k),
            monotone_omega(k, nq),
            1.0f64..40.0,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn ilp_matches_brute_force((q, sizes, omega, budget) in instance()) {
        let ms = ModuleSizes::from_counts(&sizes).unwrap();
        let mut om = BTreeMap::new();
        for (k, row) in omega.iter().enumerate() {
            for (j, &b) in q.iter().enumerate() {
                om.insert((ModuleId(k), b), row[j]);
            }
        }
        let limit = 32.0 * sizes.iter().sum::<u64>() as f64 / budget;
        let oracle = brute_force(&omega, &sizes, &q, limit);
        match ilp_allocate(&om, &ms, &q, budget, &BTreeMap::new()) {
            Ok(a) => {
                let best = oracle.expect("solver found a solution the oracle did not");
                prop_assert!((a.objective - best).abs() <= 1e-9 * (1.0 + best));
                prop_assert!(a.size_bits as f64 <= limit);
                prop_assert_eq!(a.size_bits, ms.size_bits(&a.bits));
            }
            Err(MqatError::Infeasible { .. }) => prop_assert!(oracle.is_none()),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn layerwise_matches_brute_force_and_dominates(
        q in sorted_bits(),
        parts in proptest::collection::vec(1usize..=3, 1..=3)
            .prop_filter("at most 8 layers", |p| p.iter().sum::<usize>() <= 8),
        seed_sizes in proptest::collection::vec(1u64..3000, 8),
        seed_omega in proptest::collection::vec(proptest::collection::vec(0.0f64..5.0, 8), 8),
        budget in 1.0f64..30.0,
    ) {
        // layers grouped into modules by `parts`
        let n_layers: usize = parts.iter().sum();
        let sizes: Vec<u64> = seed_sizes[..n_layers].to_vec();
        let omega: Vec<Vec<f64>> = seed_omega[..n_layers]
            .iter()
            .map(|r| {
                let mut r = r[..q.len()].to_vec();
                r.sort_by(|a, b| b.total_cmp(a));
                r
            })
            .collect();
        let mut lom = BTreeMap::new();
        let mut lsz = BTreeMap::new();
        for l in 0..n_layers {
            lsz.insert(LayerId(l), sizes[l]);
            for (j, &b) in q.iter().enumerate() {
                lom.insert((LayerId(l), b), omega[l][j]);
            }
        }
        let limit = 32.0 * sizes.iter().sum::<u64>() as f64 / budget;
        let oracle = brute_force(&omega, &sizes, &q, limit);
        let layer = layerwise_allocate(&lom, &lsz, &q, budget);
        match (&layer, oracle) {
            (Ok(a), Some(best)) => prop_assert!((a.objective - best).abs() <= 1e-9 * (1.0 + best)),
            (Err(MqatError::Infeasible { .. }), None) => {}
            (r, o) => prop_assert!(false, "solver {r:?} oracle {o:?}"),
        }

        // module-wise problem on the same layers
        let mut msizes = Vec::new();
        let mut mom = BTreeMap::new();
        let mut start = 0;
        for (k, &p) in parts.iter().enumerate() {
            msizes.push(sizes[start..start + p].iter().sum());
            for (j, &b) in q.iter().enumerate() {
                let v: f64 = omega[start..start + p].iter().map(|r| r[j]).sum();
                mom.insert((ModuleId(k), b), v);
            }
            start += p;
        }
        let ms = ModuleSizes::from_counts(&msizes).unwrap();
        if let Ok(m) = ilp_allocate(&mom, &ms, &q, budget, &BTreeMap::new()) {
            let l = layer.expect("module-wise feasible implies layer-wise feasible");
            prop_assert!(l.objective <= m.objective + 1e-9 * (1.0 + m.objective));
        }
    }
}

#[test]
fn fixed_module_is_respected_and_excluded_from_objective() {
    let ms = ModuleSizes::from_counts(&[100, 10, 30]).unwrap();
    let q = [2u8, 4, 8];
    let mut om = BTreeMap::new();
    for k in 0..3 {
        for (j, &b) in q.iter().enumerate() {
            om.insert((ModuleId(k), b), (10 * (k + 1)) as f64 / (j + 1) as f64);
        }
    }
    let fixed = BTreeMap::from([(ModuleId(1), 2u8)]);
    let a = ilp_allocate(&om, &ms, &q, 4.0, &fixed).unwrap();
    assert_eq!(a.bits[&ModuleId(1)], 2);
    let expect: f64 = [0usize, 2]
        .iter()
        .map(|&k| om[&(ModuleId(k), a.bits[&ModuleId(k)])])
        .sum();
    assert!((a.objective - expect).abs() < 1e-12);
}
