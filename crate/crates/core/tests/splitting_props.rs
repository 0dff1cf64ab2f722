use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cdeforest::basis::BasisSpec;
use cdeforest::splitting::{best_split, node_score_cde, split_targets, sweep_profile, Criterion, SweepScratch};

/// Independent re-evaluation of every boundary from scratch.
fn brute_scores(x: &[f64], targets: &Array2<f64>, min_node_size: usize) -> Vec<(f64, f64)> {
    let mut distinct = x.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let score = |rows: Vec<usize>| {
        let sums: Vec<f64> = (0..targets.ncols())
            .map(|j| rows.iter().map(|&i| targets[[i, j]]).sum())
            .collect();
        (rows.len(), node_score_cde(&sums, rows.len()).unwrap())
    };
    distinct
        .windows(2)
        .filter_map(|w| {
            let (nl, sl) = score((0..x.len()).filter(|&i| x[i] <= w[0]).collect());
            let (nr, sr) = score((0..x.len()).filter(|&i| x[i] > w[0]).collect());
            (nl >= min_node_size && nr >= min_node_size).then_some((w[0], sl + sr))
        })
        .collect()
}

fn node(ys: &[f64], n_basis: usize, criterion: Criterion) -> Array2<f64> {
    let y = Array2::from_shape_vec((ys.len(), 1), ys.to_vec()).unwrap();
    split_targets(criterion, y.view(), BasisSpec::cosine(n_basis, 1).unwrap()).unwrap()
}

fn data() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..80).prop_flat_map(|n| {
        (
            prop::collection::vec(prop_oneof![0.0f64..1.0, (0u8..6).prop_map(|k| k as f64 / 5.0)], n),
            prop::collection::vec(0.0f64..=1.0, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn sweep_matches_brute_force((x, ys) in data(), n_basis in 1usize..16, min_node_size in 1usize..6) {
        let targets = node(&ys, n_basis, Criterion::Cde);
        let profile = sweep_profile(&x, targets.view(), min_node_size);
        let oracle = brute_scores(&x, &targets, min_node_size);
        prop_assert_eq!(profile.len(), oracle.len());
        for (b, (lower, score)) in profile.iter().zip(&oracle) {
            prop_assert!(b.threshold >= *lower);
            prop_assert!(x.iter().all(|v| (*v <= *lower) == (*v <= b.threshold)));
            prop_assert!((b.score - score).abs() < 1e-10);
        }
    }

    #[test]
    fn split_gain_is_non_negative((x, ys) in data(), n_basis in 1usize..16, mse in any::<bool>()) {
        let criterion = if mse { Criterion::Mse } else { Criterion::Cde };
        let targets = node(&ys, n_basis, criterion);
        let totals: Vec<f64> = targets.columns().into_iter().map(|c| c.sum()).collect();
        let parent = node_score_cde(&totals, x.len()).unwrap();
        for b in sweep_profile(&x, targets.view(), 1) {
            prop_assert!(b.score - parent >= -1e-10 * parent.abs().max(1.0));
        }
    }

    #[test]
    fn monotone_feature_transform_preserves_the_partition((x, ys) in data(), n_basis in 2usize..10) {
        let targets = node(&ys, n_basis, Criterion::Cde);
        let features = Array2::from_shape_vec((1, x.len()), x.clone()).unwrap();
        let warped = features.mapv(|v| (3.0 * v).exp() - 7.0);
        let rows: Vec<usize> = (0..x.len()).collect();
        let pick = |f: &Array2<f64>| {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            best_split(&rows, f.view(), targets.view(), 1, 2, &mut rng, &mut SweepScratch::default())
        };
        match (pick(&features), pick(&warped)) {
            (None, None) => {}
            (Some(a), Some(b)) => {
                prop_assert_eq!(a.left_count, b.left_count);
                let left_a: Vec<bool> = features.row(0).iter().map(|v| *v <= a.threshold).collect();
                let left_b: Vec<bool> = warped.row(0).iter().map(|v| *v <= b.threshold).collect();
                prop_assert_eq!(left_a, left_b);
            }
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
        }
    }
}
