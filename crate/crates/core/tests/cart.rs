mod oracle;

use std::time::Instant;

use oracle::{as_ref_tree, cart_dataset as dataset, reference_tree, rows_to_features as to_features, trees_match, N_BITS};
use proptest::prelude::*;
use rulemine::tree::{fit_tree, r2_score, TreeConfig, TreeMode};

#[test]
fn depth_two_trees_match_exhaustive_reference() {
    let start = Instant::now();
    for i in 0..50u64 {
        let classification = i % 5 == 4;
        let rows = dataset(1000 + i, classification);
        let cfg = TreeConfig {
            max_depth: 1 + (i as usize % 2),
            min_samples_split: 10,
            min_samples_leaf: 5,
            mode: if classification { TreeMode::Classification } else { TreeMode::Regression },
            on_fraction: 0.1,
        };
        let (feats, ys) = to_features(&rows);
        let tree = fit_tree(&feats, &ys, &cfg).unwrap();
        let want = reference_tree(&rows, &cfg, 0);
        let got = as_ref_tree(&tree, 0);
        assert!(trees_match(&got, &want, 1e-9), "dataset {i}:\n got {got:?}\nwant {want:?}");
        tree.check_invariants().unwrap();
    }
    assert!(start.elapsed().as_secs_f64() < 5.0, "took {:?}", start.elapsed());
}

#[test]
fn perfect_split_recovers_step_function() {
    let rows: Vec<(Vec<bool>, f64)> =
        (0..200).map(|i| ((0..N_BITS).map(|b| (i >> (b % 8)) & 1 == 1).collect(), ((i >> 3) & 1) as f64)).collect();
    let (feats, ys) = to_features(&rows);
    let tree = fit_tree(&feats, &ys, &TreeConfig { min_samples_leaf: 5, min_samples_split: 10, ..TreeConfig::default() })
        .unwrap();
    let preds: Vec<f64> = feats.iter().map(|f| tree.predict(f)).collect();
    assert_eq!(r2_score(&preds, &ys).unwrap(), 1.0);
    assert_eq!(tree.depth(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn tree_invariants_hold(seed in any::<u64>(), depth in 1usize..5, leaf in 1usize..20) {
        let rows = dataset(seed, false);
        let (feats, ys) = to_features(&rows);
        let cfg = TreeConfig { max_depth: depth, min_samples_split: 2 * leaf, min_samples_leaf: leaf, ..TreeConfig::default() };
        let tree = fit_tree(&feats, &ys, &cfg).unwrap();
        prop_assert!(tree.check_invariants().is_ok());
        prop_assert!(tree.depth() <= depth);
        // Leaf values are means of their rows, so training predictions sum to the target sum.
        let total: f64 = feats.iter().map(|f| tree.predict(f)).sum();
        prop_assert!((total - ys.iter().sum::<f64>()).abs() < 1e-6);
    }
}
