mod common;

use aglsec_core::diarization::{frame_der, permutation_free_loss, FramePosteriorMatrix, SpeakerActivityLabels};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};

fn cases() -> Config {
    Config {
        cases: 1000,
        rng_seed: RngSeed::Fixed(0xd1a7),
        ..Config::default()
    }
}

/// Labels and posteriors of matching shape, S ≤ 4, T ≤ 16.
fn instance() -> impl Strategy<Value = (Vec<Vec<bool>>, Vec<Vec<f64>>, Vec<usize>)> {
    (1usize..=4, 1usize..=16).prop_flat_map(|(s, t)| {
        (
            prop::collection::vec(prop::collection::vec(any::<bool>(), s), t),
            prop::collection::vec(prop::collection::vec(0.01f64..0.99, s), t),
            Just((0..s).collect::<Vec<_>>()).prop_shuffle(),
        )
    })
}

fn labels(rows: &[Vec<bool>]) -> SpeakerActivityLabels {
    let s = rows[0].len();
    SpeakerActivityLabels::new(rows.len(), s, rows.concat()).unwrap()
}

fn posteriors(rows: &[Vec<f64>]) -> FramePosteriorMatrix {
    FramePosteriorMatrix::from_rows(rows, 0.1).unwrap()
}

fn permute<T: Clone>(rows: &[Vec<T>], order: &[usize]) -> Vec<Vec<T>> {
    rows.iter().map(|r| order.iter().map(|&c| r[c].clone()).collect()).collect()
}

fn identity_bce(l: &[Vec<bool>], p: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for (lr, pr) in l.iter().zip(p) {
        for (&y, &q) in lr.iter().zip(pr) {
            total -= if y { q.ln() } else { (1.0 - q).ln() };
        }
    }
    total / (l.len() * l[0].len()) as f64
}

proptest! {
    #![proptest_config(cases())]

    #[test]
    fn loss_matches_brute_force_oracle((l, p, _) in instance()) {
        let got = permutation_free_loss(&labels(&l), &posteriors(&p)).unwrap().loss;
        let want = common::pit_oracle(&l, &p);
        prop_assert!((got - want).abs() <= 1e-10, "{got} vs {want}");
    }

    #[test]
    fn loss_ignores_label_column_order((l, p, order) in instance()) {
        let a = permutation_free_loss(&labels(&l), &posteriors(&p)).unwrap().loss;
        let b = permutation_free_loss(&labels(&permute(&l, &order)), &posteriors(&p)).unwrap().loss;
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn loss_ignores_posterior_column_order((l, p, order) in instance()) {
        let a = permutation_free_loss(&labels(&l), &posteriors(&p)).unwrap().loss;
        let b = permutation_free_loss(&labels(&l), &posteriors(&permute(&p, &order))).unwrap().loss;
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn loss_never_exceeds_identity_assignment((l, p, _) in instance()) {
        let got = permutation_free_loss(&labels(&l), &posteriors(&p)).unwrap().loss;
        prop_assert!(got <= identity_bce(&l, &p) + 1e-12);
    }

    #[test]
    fn der_ignores_hypothesis_column_order((l, p, order) in instance()) {
        prop_assume!(l.iter().flatten().any(|&b| b));
        let reference = labels(&l);
        let hyp = posteriors(&p).binarize();
        let a = frame_der(&reference, &hyp).unwrap();
        let b = frame_der(&reference, &hyp.permute_columns(&order)).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }
}
