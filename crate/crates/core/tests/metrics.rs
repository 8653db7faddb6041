//! Null-distribution and invariance checks for the scoring functions.

use ndarray::{Array2, Axis};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semalign::metrics::*;
use semalign::RngConfig;

fn uniform(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| rng.random::<f64>())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn shuffled_labels_transfer_at_chance() {
    let scores: Vec<f64> = (0..20)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let refs = uniform(200, 2, &mut rng);
            let queries = uniform(200, 2, &mut rng);
            let ref_labels: Vec<usize> = (0..200).map(|_| rng.random_range(0..2)).collect();
            let q_labels: Vec<usize> = (0..200).map(|_| rng.random_range(0..2)).collect();
            label_transfer_accuracy(refs.view(), &ref_labels, queries.view(), &q_labels, 5).unwrap()
        })
        .collect();
    assert!((mean(&scores) - 0.5).abs() <= 0.05);
}

#[test]
fn separated_aligned_classes_transfer_perfectly() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let centers = [[0.0, 0.0], [50.0, 0.0], [0.0, 50.0]];
    let cloud = |rng: &mut ChaCha8Rng| Array2::from_shape_fn((90, 2), |(i, j)| centers[i % 3][j] + rng.random::<f64>());
    let (a, b) = (cloud(&mut rng), cloud(&mut rng));
    let labels: Vec<usize> = (0..90).map(|i| i % 3).collect();
    assert_eq!(label_transfer_accuracy(a.view(), &labels, b.view(), &labels, 5).unwrap(), 1.0);
}

#[test]
fn random_embeddings_have_half_foscttm() {
    let scores: Vec<f64> = (0..10)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = uniform(150, 2, &mut rng);
            let b = uniform(150, 2, &mut rng);
            foscttm(a.view(), b.view()).unwrap()
        })
        .collect();
    assert!((mean(&scores) - 0.5).abs() <= 0.03);
}

#[test]
fn interleaved_domains_score_near_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = uniform(300, 2, &mut rng);
    let mut x = Array2::zeros((600, 2));
    for i in 0..300 {
        x.row_mut(2 * i).assign(&a.row(i));
        let jitter = ndarray::array![1e-6, 0.0];
        x.row_mut(2 * i + 1).assign(&(&a.row(i) + &jitter));
    }
    let domain: Vec<usize> = (0..600).map(|i| i % 2).collect();
    let score = alignment_score(x.view(), &domain, 5).unwrap();
    assert!((score - 1.0).abs() <= 0.25, "{score}");
}

#[test]
fn random_partitions_have_zero_ari() {
    let scores: Vec<f64> = (0..30)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let l: Vec<usize> = (0..300).map(|_| rng.random_range(0..4)).collect();
            let c: Vec<usize> = (0..300).map(|_| rng.random_range(0..3)).collect();
            ari(&l, &c).unwrap()
        })
        .collect();
    assert!(mean(&scores).abs() <= 0.01);
}

#[test]
fn random_labels_on_one_blob_have_half_silhouette() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = uniform(400, 2, &mut rng);
    let labels: Vec<usize> = (0..400).map(|_| rng.random_range(0..3)).collect();
    let s = silhouette_label(x.view(), &labels).unwrap();
    assert!((s - 0.5).abs() <= 0.05, "{s}");
}

#[test]
fn isolated_label_mixed_into_others_scores_half() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = uniform(400, 2, &mut rng);
    let labels: Vec<usize> = (0..400).map(|i| i % 4).collect();
    // label 3 only in batch 0, spatially mixed with the rest
    let batches: Vec<usize> = (0..400).map(|i| if i % 4 == 3 { 0 } else { rng.random_range(0..2) }).collect();
    let s = isolated_labels(x.view(), &labels, &batches).unwrap();
    assert!((s - 0.5).abs() <= 0.05, "{s}");
}

#[test]
fn null_batches_pass_kbet_at_the_nominal_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let x = uniform(1000, 2, &mut rng);
    let batches: Vec<usize> = (0..1000).map(|_| rng.random_range(0..2)).collect();
    let labels: Vec<usize> = (0..1000).map(|i| i % 2).collect();
    let s = kbet(x.view(), &batches, &labels, &KbetParams::default(), &mut rng).unwrap();
    assert!(s >= 0.85, "{s}");
}

#[test]
fn separated_batches_fail_every_batch_metric() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 400;
    let x = Array2::from_shape_fn((n, 2), |(i, j)| (i % 2) as f64 * 1e3 + (j + 1) as f64 * rng.random::<f64>());
    let batches: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let labels: Vec<usize> = (0..n).map(|i| (i / 2) % 2).collect();
    assert!(ilisi(x.view(), &batches, DEFAULT_PERPLEXITY).unwrap() <= 0.02);
    assert!(bras(x.view(), &batches, &labels).unwrap() <= 0.02);
    assert!(kbet(x.view(), &batches, &labels, &KbetParams::default(), &mut rng).unwrap() <= 0.02);
    // each label is split in two far halves of equal size
    assert!((graph_connectivity(x.view(), &labels, 15).unwrap() - 0.5).abs() <= 0.02);
}

#[test]
fn perfect_integration_scores_near_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 600;
    let centers = [[0.0, 0.0], [100.0, 0.0], [0.0, 100.0]];
    let x = Array2::from_shape_fn((n, 2), |(i, j)| centers[i % 3][j] + rng.random::<f64>());
    let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
    let batches: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
    let input = IntegrationInput { embedding: x.view(), labels: &labels, batches: &batches, raw: None };
    let scores = integration_scores(&input, &parse_selection("bio").unwrap(), &RngConfig::new(0)).unwrap();
    for (m, v) in &scores {
        if *m != Metric::IsolatedLabels {
            assert!(*v >= 0.98, "{m}: {v}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn foscttm_ignores_isometries(seed in 0u64..1000, angle in 0.0f64..6.28, shift in -5.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = uniform(30, 2, &mut rng);
        let b = uniform(30, 2, &mut rng);
        let (c, s) = (angle.cos(), angle.sin());
        let rot = ndarray::array![[c, -s], [s, c]];
        let move_ = |m: &Array2<f64>| m.dot(&rot) + shift;
        let before = foscttm(a.view(), b.view()).unwrap();
        let after = foscttm(move_(&a).view(), move_(&b).view()).unwrap();
        // strict comparisons can flip only for exact distance ties
        prop_assert!((before - after).abs() <= 2.0 / 1800.0);
    }

    #[test]
    fn scores_stay_in_the_unit_interval(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 80;
        let x = uniform(n, 2, &mut rng);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let batches: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let raw = uniform(n, 4, &mut rng);
        let input = IntegrationInput { embedding: x.view(), labels: &labels, batches: &batches, raw: Some(raw.view()) };
        let scores = integration_scores(&input, &Metric::ALL, &RngConfig::new(seed)).unwrap();
        prop_assert_eq!(scores.len(), 10);
        for (m, v) in scores {
            prop_assert!((0.0..=1.0).contains(&v), "{} = {}", m, v);
        }
        let (a, b) = x.view().split_at(Axis(0), n / 2);
        let f = foscttm(a, b).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
    }

    #[test]
    fn knn_lists_are_sorted_with_index_tie_breaks(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // integer grid points force many exact distance ties
        let x = Array2::from_shape_fn((40, 2), |_| rng.random_range(0..4) as f64);
        let g1 = KnnGraph::build(x.view(), 6).unwrap();
        let g2 = KnnGraph::build(x.view(), 6).unwrap();
        prop_assert_eq!(&g1, &g2);
        for i in 0..40 {
            let d = g1.distances(i);
            let nb = g1.neighbors(i);
            for w in 0..5 {
                prop_assert!(d[w] < d[w + 1] || (d[w] == d[w + 1] && nb[w] < nb[w + 1]));
            }
        }
    }
}
