use std::collections::BTreeSet;

use dmdsc_core::data::{
    class_count_profile, generate_for_split, generate_synthetic, make_trial_splits, SynthConfig, BACKGROUND_LABEL,
};
use proptest::prelude::*;

#[test]
fn long_tail_profile() {
    let p = class_count_profile(500, 100.0, 6);
    assert_eq!(p[0], 500);
    assert_eq!(p[5], 5);
    assert_eq!(p.iter().max().unwrap() / p.iter().min().unwrap(), 100);
    assert!(p.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn default_benchmark_structure() {
    let cfg = SynthConfig::default();
    let d = generate_synthetic(&cfg).unwrap();
    let train_labels: BTreeSet<u32> = d.train.labels().iter().copied().collect();
    let test_labels: BTreeSet<u32> = d.test_known.labels().iter().copied().collect();
    let unknown_labels: BTreeSet<u32> = d.test_unknown.labels().iter().copied().collect();
    assert_eq!(train_labels, (1..=6).collect());
    assert_eq!(test_labels, train_labels);
    assert_eq!(unknown_labels, [7, 8].into_iter().collect());
    assert!(d.background.labels().iter().all(|&l| l == BACKGROUND_LABEL));
    assert_eq!(d.background.len(), cfg.bg_samples);
    assert_eq!(d.train.dim(), 16);
    assert_eq!(generate_synthetic(&cfg).unwrap(), d);
}

#[test]
fn trial_splits() {
    let s = make_trial_splits(8, 6, 5, 3).unwrap();
    assert_eq!(s.len(), 5);
    assert_eq!(s, make_trial_splits(8, 6, 5, 3).unwrap());
    let distinct: BTreeSet<_> = s.iter().map(|t| t.known_class_ids.clone()).collect();
    assert_eq!(distinct.len(), 5);
    for t in &s {
        assert_eq!((t.known_class_ids.len(), t.unknown_class_ids.len()), (6, 2));
        let all: BTreeSet<usize> = t.known_class_ids.iter().chain(&t.unknown_class_ids).copied().collect();
        assert_eq!(all, (0..8).collect());
    }

    let s = make_trial_splits(4, 3, 3, 0).unwrap();
    assert!(s.iter().all(|t| t.known_class_ids.len() == 3 && t.unknown_class_ids.len() == 1));
    assert_eq!(s.iter().map(|t| t.known_class_ids.clone()).collect::<BTreeSet<_>>().len(), 3);

    let s = make_trial_splits(2, 1, 1, 9).unwrap();
    assert_eq!(s[0].known_class_ids.len() + s[0].unknown_class_ids.len(), 2);
    assert!(make_trial_splits(3, 3, 1, 0).is_err());
    assert!(make_trial_splits(3, 2, 0, 0).is_err());
}

#[test]
fn invalid_configs() {
    let bad = [
        SynthConfig { imbalance_ratio: 0.5, ..Default::default() },
        SynthConfig { num_known: 1, ..Default::default() },
        SynthConfig { num_unknown: 0, ..Default::default() },
        SynthConfig { majority: 5, imbalance_ratio: 10.0, ..Default::default() },
    ];
    for cfg in bad {
        assert!(generate_synthetic(&cfg).is_err(), "{cfg:?}");
    }
    // 3 std apart is impossible for many clusters packed on a tiny sphere
    let tight = SynthConfig { num_known: 30, num_unknown: 5, input_dim: 2, center_separation: 1.0, ..Default::default() };
    assert!(matches!(generate_synthetic(&tight), Err(dmdsc_core::Error::InfeasibleSeparation { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn generated_data_keeps_its_promises(
        ir in 1.0f64..50.0,
        known in 2usize..6,
        seed in 0u64..1000,
        trial in 0usize..3,
    ) {
        let cfg = SynthConfig { num_known: known, imbalance_ratio: ir, majority: 100, bg_samples: 50, input_dim: 8, seed, ..Default::default() };
        let split = make_trial_splits(known + 2, known, 3, seed).unwrap()[trial].clone();
        let d = generate_for_split(&cfg, &split).unwrap();

        let profile = class_count_profile(100, ir, known);
        let tr = d.train.class_counts();
        let te = d.test_known.class_counts();
        for (c, &n) in profile.iter().enumerate() {
            let label = c as u32 + 1;
            let (a, b) = (tr.get(&label).copied().unwrap_or(0), te.get(&label).copied().unwrap_or(0));
            prop_assert_eq!(a + b, n);
            if n >= 2 {
                prop_assert!(a >= 1 && b >= 1);
                prop_assert!((a as f64 - 0.8 * n as f64).abs() <= 1.0);
            }
        }
        // the smallest class is majority / IR up to rounding
        let smallest = *profile.last().unwrap() as f64;
        prop_assert_eq!(profile[0], 100);
        prop_assert!((smallest - 100.0 / ir).abs() <= 0.5 || smallest == 1.0);

        let known_labels: BTreeSet<u32> = d.train.labels().iter().copied().collect();
        prop_assert!(d.test_unknown.labels().iter().all(|l| !known_labels.contains(l)));
        prop_assert!(d.train.features().is_finite() && d.background.features().is_finite());
    }
}
