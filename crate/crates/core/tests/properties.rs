mod common;

use ccl_core::datagen::ConceptDataset;
use ccl_core::nnet::{make_concept_head, split_at, train_concept_head, Activation, FeedforwardNet, ProbeConfig, TrainConfig};
use ccl_core::quantify::{implication_curve, implication_surface, relation_scores, ProbVector};
use common::{gradient_check, naive_counts, random_inputs, smooth_net};
use ndarray::Array2;
use proptest::prelude::*;

fn probs(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..max).prop_flat_map(|n| {
        let cell = prop_oneof![0.0f64..=1.0, (0u32..=20).prop_map(|k| k as f64 / 20.0)];
        (prop::collection::vec(cell.clone(), n), prop::collection::vec(cell, n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quadrants_partition_the_samples((a, b) in probs(300), grid in 2usize..120) {
        let curve = implication_curve(&ProbVector::new(a.clone()).unwrap(), &ProbVector::new(b.clone()).unwrap(), grid).unwrap();
        for q in &curve.counts {
            prop_assert_eq!(q.total(), a.len());
        }
        prop_assert_eq!(curve.counts, naive_counts(&a, &b, grid));
    }

    #[test]
    fn relations_are_dual((a, b) in probs(300)) {
        let (t, c) = (ProbVector::new(a).unwrap(), ProbVector::new(b).unwrap());
        let s = relation_scores(&t, &c, 101).unwrap();
        let swapped = relation_scores(&c, &t, 101).unwrap();
        let negated = relation_scores(&t, &c.complement(), 101).unwrap();
        prop_assert_eq!(&s.sufficient, &swapped.necessary);
        prop_assert_eq!(&s.negative_necessary, &negated.necessary);
        prop_assert_eq!(&s.negative_sufficient, &negated.sufficient);
    }

    #[test]
    fn scores_stay_in_unit_range((a, b) in probs(200), gt in 2usize..30, gc in 2usize..30) {
        let (t, c) = (ProbVector::new(a).unwrap(), ProbVector::new(b).unwrap());
        let s = relation_scores(&t, &c, 101).unwrap();
        for r in ccl_core::Relation::ALL {
            let curve = s.curve(r);
            prop_assert!((0.0..=1.0).contains(&curve.auc));
            prop_assert!(curve.f1.iter().all(|f| (0.0..=1.0).contains(f)));
        }
        let surf = implication_surface(&t, &c, gt, gc).unwrap();
        prop_assert!((0.0..=1.0).contains(&surf.volume));
        prop_assert!(surf.f1.iter().flatten().all(|f| (0.0..=1.0).contains(f)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn split_recomposes_bitwise(seed in 0u64..1000, hidden in 2usize..9, rows in 1usize..30) {
        let net = FeedforwardNet::classifier(5, 5, &[hidden, hidden], 3, seed).unwrap();
        let x = random_inputs(rows, 5, seed + 1);
        let full = net.forward(&x).unwrap();
        for layer in 1..net.n_layers() {
            let split = split_at(&net, layer).unwrap();
            prop_assert_eq!(split.head.forward(&split.activations(&x).unwrap()).unwrap(), full.clone());
        }
    }

    #[test]
    fn concept_head_transfers_and_front_stays_frozen(seed in 0u64..1000, layer in 1usize..4) {
        let net = FeedforwardNet::classifier(4, 4, &[6, 5], 3, seed).unwrap();
        let split = split_at(&net, layer).unwrap();
        let head = make_concept_head(&split, seed);
        let kept = split.head.n_layers() - 1;
        prop_assert_eq!(&head.net.layers()[..kept], &split.head.layers()[..kept]);
        prop_assert_eq!(head.net.output_width(), 1);
        let x = random_inputs(20, 4, seed + 2);
        let before = split.activations(&x).unwrap();
        let front = split.front.clone();
        let data = ConceptDataset::new("c", random_inputs(20, 4, seed + 3) + 0.5, random_inputs(20, 4, seed + 4) - 0.5).unwrap();
        let config = ProbeConfig { train: TrainConfig { epochs: 4, seed, ..TrainConfig::default() }, ..ProbeConfig::default() };
        let trained = train_concept_head(&head, &split, &data, &config).unwrap();
        prop_assert!(trained.trained);
        prop_assert_eq!(&split.front, &front);
        prop_assert_eq!(split.activations(&x).unwrap(), before);
    }

    #[test]
    fn gradients_match_finite_differences(seed in 0u64..1000, hidden in 2usize..7) {
        let x = random_inputs(10, 3, seed);
        let multi = smooth_net(&[3, hidden, 4], Activation::Softmax, seed);
        let y = Array2::from_shape_fn((10, 4), |(i, j)| f64::from(u8::from(i % 4 == j)));
        prop_assert!(gradient_check(&multi, &x, &y) <= 1e-4);
        let binary = smooth_net(&[3, hidden, hidden, 1], Activation::Sigmoid, seed);
        let yb = Array2::from_shape_fn((10, 1), |(i, _)| (i % 2) as f64);
        prop_assert!(gradient_check(&binary, &x, &yb) <= 1e-4);
        let regress = smooth_net(&[3, hidden, 2], Activation::Identity, seed);
        let yr = random_inputs(10, 2, seed + 9);
        prop_assert!(gradient_check(&regress, &x, &yr) <= 1e-4);
    }
}
