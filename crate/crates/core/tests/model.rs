use catclust_core::model::{
    loglik_series, mixture_density, transition_counts, CategoricalPanel, CountMatrix, MixtureSummary, TransitionMatrix,
};
use proptest::prelude::*;

fn double_loop(seq: &[u32], k: usize) -> Vec<Vec<u32>> {
    let mut m = vec![vec![0u32; k]; k];
    for s in 1..=k {
        for t in 1..=k {
            for r in 1..seq.len() {
                if seq[r - 1] as usize == s && seq[r] as usize == t {
                    m[s - 1][t - 1] += 1;
                }
            }
        }
    }
    m
}

proptest! {
    #[test]
    fn counts_match_pair_oracle(seq in prop::collection::vec(1u32..=3, 1..50)) {
        let c = transition_counts(&seq, 3).unwrap();
        prop_assert_eq!(c.to_rows(), double_loop(&seq, 3));
        prop_assert_eq!(c.total() as usize, seq.len() - 1);
    }

    #[test]
    fn counts_are_permutation_equivariant(seq in prop::collection::vec(1u32..=3, 1..40), perm in Just([2u32, 3, 1]).prop_shuffle()) {
        let mapped: Vec<u32> = seq.iter().map(|&x| perm[x as usize - 1]).collect();
        let a = transition_counts(&seq, 3).unwrap();
        let b = transition_counts(&mapped, 3).unwrap();
        for s in 0..3 {
            for t in 0..3 {
                prop_assert_eq!(a.get(s, t), b.get(perm[s] as usize - 1, perm[t] as usize - 1));
            }
        }
    }

    #[test]
    fn identical_components_ignore_weights(seq in prop::collection::vec(1u32..=2, 2..20), p in 0.05f64..0.95) {
        let counts = transition_counts(&seq, 2).unwrap();
        let theta = TransitionMatrix::from_rows(&[vec![p, 1.0 - p], vec![1.0 - p, p]]).unwrap();
        let single = loglik_series(&counts, &theta).exp();
        for s in [vec![1, 1, 2], vec![1, 2, 3], vec![1, 1, 1]] {
            let summary = MixtureSummary::from_configuration(&s);
            let phi = vec![theta.clone(); summary.p()];
            let v = mixture_density(&counts, &summary, &phi);
            prop_assert!((v - single).abs() <= 1e-12 * single.max(1e-300));
        }
    }
}

#[test]
fn length_one_series_contribute_nothing() {
    let c = transition_counts(&[3], 3).unwrap();
    assert_eq!(c, CountMatrix::zeros(3));
    let panel = CategoricalPanel::new(vec![vec![1, 2, 2, 1], vec![2, 1]], 2).unwrap();
    assert_eq!(panel.n(), 2);
    assert_eq!(panel.counts(0).to_rows(), vec![vec![0, 1], vec![1, 1]]);
}

#[test]
fn out_of_range_state_names_the_series() {
    let err = CategoricalPanel::new(vec![vec![1, 2], vec![1, 5]], 3).unwrap_err();
    assert!(err.to_string().contains("series 2"), "{err}");
}
