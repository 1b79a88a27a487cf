//! Ensemble rules against independent per-sample scans, plus invariants.

use hqcnn_core::ensemble::{
    argmax_label, average_probability, compute_weights, majority_vote, weighted_average,
    WeightVector,
};
use proptest::prelude::*;

fn prob() -> impl Strategy<Value = [f64; 2]> {
    prop_oneof![
        (0.0f64..=1.0).prop_map(|p| [1.0 - p, p]),
        Just([0.5, 0.5]),
        Just([1.0, 0.0]),
    ]
}

fn prediction_matrix(models: usize, samples: usize) -> impl Strategy<Value = Vec<Vec<[f64; 2]>>> {
    prop::collection::vec(prop::collection::vec(prob(), samples), models)
}

fn labels_of(probs: &[Vec<[f64; 2]>]) -> Vec<Vec<usize>> {
    probs
        .iter()
        .map(|m| m.iter().map(|&p| argmax_label(p)).collect())
        .collect()
}

proptest! {
    #[test]
    fn permuting_models_keeps_vote_and_average(probs in prediction_matrix(3, 12), rot in 0usize..3) {
        let mut rotated = probs.clone();
        rotated.rotate_left(rot);
        let labels = labels_of(&probs);
        let rlabels = labels_of(&rotated);
        prop_assert_eq!(majority_vote(&labels, &probs).unwrap(), majority_vote(&rlabels, &rotated).unwrap());
        let a = average_probability(&probs).unwrap();
        let b = average_probability(&rotated).unwrap();
        for (x, y) in a.probs.iter().zip(&b.probs) {
            prop_assert!((x[0] - y[0]).abs() < 1e-12 && (x[1] - y[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn fused_vectors_are_convex(probs in prediction_matrix(3, 12), e in prop::collection::vec(0usize..20, 3)) {
        let w = compute_weights(&e);
        prop_assert!((w.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(w.weights.iter().all(|&x| x > 0.0));
        for fused in [average_probability(&probs).unwrap(), weighted_average(&probs, &w).unwrap()] {
            for (s, p) in fused.probs.iter().enumerate() {
                prop_assert!((p[0] + p[1] - 1.0).abs() < 1e-9);
                let lo = probs.iter().map(|m| m[s][1]).fold(f64::MAX, f64::min);
                let hi = probs.iter().map(|m| m[s][1]).fold(f64::MIN, f64::max);
                prop_assert!(p[1] >= lo - 1e-12 && p[1] <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn weighted_is_invariant_under_consistent_permutation(
        probs in prediction_matrix(3, 8),
        e in prop::collection::vec(0usize..9, 3),
    ) {
        let w = compute_weights(&e);
        let mut rp = probs.clone();
        rp.swap(0, 2);
        let mut rw = w.weights.clone();
        rw.swap(0, 2);
        let a = weighted_average(&probs, &w).unwrap();
        let b = weighted_average(&rp, &WeightVector { weights: rw, misclassifications: e.clone() }).unwrap();
        for (x, y) in a.probs.iter().zip(&b.probs) {
            prop_assert!((x[1] - y[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_models_are_reproduced(row in prop::collection::vec(prob(), 10), e in prop::collection::vec(0usize..9, 3)) {
        let probs = vec![row.clone(); 3];
        let labels = labels_of(&probs);
        let expected: Vec<usize> = row.iter().map(|&p| argmax_label(p)).collect();
        prop_assert_eq!(majority_vote(&labels, &probs).unwrap(), expected.clone());
        let avg = average_probability(&probs).unwrap();
        prop_assert_eq!(&avg.probs, &row);
        let weighted = weighted_average(&probs, &compute_weights(&e)).unwrap();
        prop_assert_eq!(&weighted.probs, &row);
        prop_assert_eq!(weighted.labels, expected);
    }

    #[test]
    fn uniform_weights_equal_average_exactly(probs in prediction_matrix(3, 10), e in 0usize..5) {
        let w = compute_weights(&[e, e, e]);
        prop_assert_eq!(weighted_average(&probs, &w).unwrap(), average_probability(&probs).unwrap());
    }
}
