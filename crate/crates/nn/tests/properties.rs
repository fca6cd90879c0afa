use aglsec_nn::loss::softmax;
use aglsec_nn::{encoder_forward, Adam, Encoder, EncoderConfig, ParameterStore, Tape, Tensor};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cases() -> Config {
    Config {
        cases: 1000,
        rng_seed: RngSeed::Fixed(0x5eed),
        ..Config::default()
    }
}

fn tiny_encoder(seed: u64) -> (Encoder, ParameterStore) {
    let cfg = EncoderConfig {
        num_layers: 2,
        model_dim: 8,
        num_heads: 2,
        ff_dim: 16,
        vocab_size: 11,
        max_positions: 12,
    };
    let enc = Encoder::new("e", cfg, 0).unwrap();
    let mut store = ParameterStore::new();
    enc.init(&mut store, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    (enc, store)
}

proptest! {
    #![proptest_config(cases())]

    #[test]
    fn softmax_rows_sum_to_one(row in prop::collection::vec(-50.0f64..50.0, 1..8)) {
        let p = softmax(&row);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn forward_is_deterministic(seed in 0u64..50, ids in prop::collection::vec(0usize..11, 1..12)) {
        let (enc, store) = tiny_encoder(seed);
        let a = encoder_forward(&enc, &store, &ids, None).unwrap();
        let b = encoder_forward(&enc, &store, &ids, None).unwrap();
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&a), bits(&b));
        prop_assert_eq!(a.shape(), &[ids.len(), 8]);
    }

    #[test]
    fn attention_rows_sum_to_one(seed in 0u64..50, ids in prop::collection::vec(0usize..11, 1..12)) {
        let (enc, store) = tiny_encoder(seed);
        let mut tape = Tape::new();
        let out = enc.forward(&mut tape, &store, &ids, None).unwrap();
        prop_assert_eq!(out.attention.len(), 4);
        for w in out.attention {
            let t = tape.value(w);
            for r in 0..t.rows() {
                prop_assert!((t.row(r).iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn adam_trajectories_are_reproducible(grads in prop::collection::vec(-5.0f64..5.0, 1..6), lr in 1e-4f64..0.5) {
        let run = || {
            let mut s = ParameterStore::new();
            s.insert("w", Tensor::zeros(&[grads.len()])).unwrap();
            let mut adam = Adam::new(lr);
            for step in 0..3 {
                s.zero_grad();
                let g: Vec<f64> = grads.iter().map(|g| g * (step as f64 + 1.0)).collect();
                s.accumulate_grad("w", &Tensor::new(vec![g.len()], g).unwrap()).unwrap();
                adam.step(&mut s).unwrap();
            }
            s.get("w").unwrap().data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        };
        prop_assert_eq!(run(), run());
    }
}
