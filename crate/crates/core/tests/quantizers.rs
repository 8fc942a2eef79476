use mqat::autodiff::Tensor;
use mqat::quant::{fake_quant_lsq, quantize_tensor, uniform_levels, LevelRange, QuantizerState};
use proptest::prelude::*;

#[test]
fn level_sets_are_exact() {
    assert_eq!(uniform_levels(1).unwrap(), vec![-1, 1]);
    assert_eq!(uniform_levels(2).unwrap(), vec![-1, 0, 1]);
    assert_eq!(uniform_levels(3).unwrap(), (-3..=3).collect::<Vec<_>>());
    assert_eq!(uniform_levels(8).unwrap().len(), 255);
    assert!(uniform_levels(0).is_err());
    assert!(uniform_levels(17).is_err());
    let s = 0.25f32;
    let r = LevelRange::new(2).unwrap();
    for w in [-3.0f32, -0.2, -0.1, 0.0, 0.1, 0.2, 3.0] {
        let q = r.quantize(w, s);
        assert!([-s, 0.0, s].contains(&q), "{w} -> {q}");
    }
    let r = LevelRange::new(1).unwrap();
    for w in [-3.0f32, -1e-6, 0.0, 1e-6, 3.0] {
        let q = r.quantize(w, s);
        assert!(q == s || q == -s, "{w} -> {q}");
    }
}

fn bits() -> impl Strategy<Value = u8> {
    prop_oneof![Just(1u8), Just(2), Just(3), Just(4), Just(8), 5u8..=16]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Q(Q(w)) = Q(w); Q(w) lies on the grid; |Q(w) − w| ≤ s/2 inside the
    /// clamp range (10⁴ weights per case).
    #[test]
    fn quantizer_properties(
        b in bits(),
        s in 1e-3f32..2.0,
        ws in proptest::collection::vec(-5.0f32..5.0, 10_000),
    ) {
        let r = LevelRange::new(b).unwrap();
        let levels = r.levels();
        for &w in &ws {
            let q = r.quantize(w, s);
            prop_assert_eq!(r.quantize(q, s).to_bits(), q.to_bits());
            let level = r.level(w, s);
            prop_assert!(levels.contains(&level));
            prop_assert_eq!(q.to_bits(), (level as f32 * s).to_bits());
            let v = w / s;
            let inside = if r.is_binary() {
                v.abs() <= 1.0
            } else {
                v >= -(r.neg as f32) && v <= r.pos as f32
            };
            if inside {
                // binary has no zero level: the bound is s there
                let bound = if r.is_binary() { s } else { s / 2.0 };
                prop_assert!((q - w).abs() <= bound * (1.0 + 1e-6), "b={} w={} q={}", b, w, q);
            }
            prop_assert_eq!(r.decode(r.encode(level)).unwrap(), level);
            prop_assert!(r.encode(level) < (1u32 << b));
        }
    }

    #[test]
    fn lsq_fake_quant_matches_elementwise(
        b in bits(),
        ws in proptest::collection::vec(-2.0f32..2.0, 1..200),
    ) {
        let w = Tensor::new([ws.len()], ws.clone()).unwrap();
        let st = QuantizerState::lsq(&w, b).unwrap();
        let fq = fake_quant_lsq(&w, &st).unwrap();
        let qt = quantize_tensor(&w, st.range().unwrap(), st.scale).unwrap();
        prop_assert_eq!(&fq, &qt);
        let again = quantize_tensor(&fq, st.range().unwrap(), st.scale).unwrap();
        prop_assert_eq!(again, fq);
    }
}
