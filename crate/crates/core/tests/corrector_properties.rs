mod common;

use aglsec_core::corrector::{
    binarize_rows, init_from_lsec, word_loss, Corrector, CorrectorConfig, CorrectorModel, ModelKind, WindowFeatures,
    WindowInput,
};
use aglsec_core::tokenizer::tokenize;
use aglsec_nn::Tape;
use common::models::{vocab, WORDS};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};

fn cases() -> Config {
    Config {
        cases: 1000,
        rng_seed: RngSeed::Fixed(0xc0 << 8),
        ..Config::default()
    }
}

fn window() -> impl Strategy<Value = WindowInput> {
    (1usize..=30).prop_flat_map(|n| {
        (
            prop::collection::vec(0..WORDS.len(), n),
            prop::collection::vec(0usize..2, n),
            prop::collection::vec(0.0f64..=1.0, n),
        )
            .prop_map(|(w, b, a)| WindowInput {
                words: w.into_iter().map(|i| WORDS[i].to_string()).collect(),
                baseline: b,
                scores: a.into_iter().map(|x| [x, 1.0 - x]).collect(),
            })
    })
}

fn desk_model(kind: ModelKind, seed: u64) -> CorrectorModel {
    let v = vocab();
    CorrectorModel::random(kind, CorrectorConfig::desk(v.len()), v, seed).unwrap()
}

proptest! {
    #![proptest_config(cases())]

    #[test]
    fn lsec_initialized_fusion_matches_lsec_on_binarized_scores(w in window(), seed in 0u64..20) {
        let lsec = desk_model(ModelKind::Lsec, seed);
        let early = CorrectorModel {
            kind: ModelKind::EarlyFusion,
            params: init_from_lsec(&lsec.params, &lsec.config).unwrap(),
            ..lsec.clone()
        };
        let hard = binarize_rows(&w.scores);
        let fused = early
            .correct_window(&WindowInput { scores: hard.clone(), ..w.clone() })
            .unwrap();
        let labels = hard.iter().map(|r| usize::from(r[1] > r[0])).collect();
        let lexical = lsec.correct_window(&WindowInput { baseline: labels, ..w }).unwrap();
        for (a, b) in fused.rows.iter().zip(&lexical.rows) {
            prop_assert!((a[0] - b[0]).abs() <= 1e-9 && (a[1] - b[1]).abs() <= 1e-9);
        }
    }

    #[test]
    fn one_normalized_row_per_word(w in window(), seed in 0u64..20, k in 0usize..4) {
        let kind = ModelKind::ALL[k];
        let model = desk_model(kind, seed);
        let out = model.correct_window(&w).unwrap();
        prop_assert_eq!(out.len(), w.words.len());
        for r in &out.rows {
            prop_assert!((r[0] + r[1] - 1.0).abs() <= 1e-9);
            prop_assert!(r.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn continuation_tokens_get_no_gradient(
        w in window(),
        seed in 0u64..20,
        targets in prop::collection::vec(prop::option::weighted(0.8, 0usize..2), 30),
    ) {
        let model = desk_model(ModelKind::EarlyFusion, seed);
        let tokens = tokenize(&w.words, &model.vocab).unwrap();
        let features = WindowFeatures::from_scores(tokens, &w.scores).unwrap();
        let net = model.sequence_model().unwrap();
        let mut tape = Tape::new();
        let logits = net.logits(&mut tape, &model.params, &features).unwrap();
        let t = &targets[..w.words.len()];
        prop_assume!(t.iter().any(Option::is_some));
        let loss = word_loss(&mut tape, logits, &features.tokens, t).unwrap();
        let grads = tape.backward(loss).unwrap();
        let g = grads.wrt(logits).unwrap();
        let owners = features.tokens.token_words();
        for (tok, &first) in features.tokens.is_first_subword.iter().enumerate() {
            let exempt = !first || t[owners[tok]].is_none();
            if exempt {
                prop_assert_eq!(g.get(tok, 0), 0.0);
                prop_assert_eq!(g.get(tok, 1), 0.0);
            }
        }
    }
}
