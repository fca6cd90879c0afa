use std::path::Path;

use aglsec_cli::formats::*;
use aglsec_core::scores::SpeakerScoreVector;
use aglsec_core::{LabeledTranscript, LabeledWord, SpeakerId};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};

fn config(seed: u64) -> Config {
    Config {
        cases: 1000,
        rng_seed: RngSeed::Fixed(seed),
        ..Config::default()
    }
}

fn p() -> &'static Path {
    Path::new("prop")
}

fn token() -> impl Strategy<Value = String> {
    "[A-Za-z<][A-Za-z0-9_'<>.-]{0,9}"
}

/// Non-negative finite times, mixing awkward decimals and wide magnitudes.
fn time() -> impl Strategy<Value = f64> {
    prop_oneof![
        (0u32..100_000).prop_map(|f| f as f64 / 10.0),
        0.0f64..1e4,
        (0.0f64..1.0).prop_map(|x| x * 1e-9),
        Just(0.0),
    ]
}

fn unit() -> impl Strategy<Value = f64> {
    prop_oneof![0.0f64..=1.0, Just(0.0), Just(1.0), (0u32..=10).prop_map(|k| k as f64 / 10.0)]
}

fn ctm_entry() -> impl Strategy<Value = CtmEntry> {
    (token(), token(), time(), time(), token(), proptest::option::of(unit())).prop_map(
        |(recording, channel, start, duration, word, confidence)| CtmEntry {
            recording,
            channel,
            start,
            duration,
            word,
            confidence,
        },
    )
}

fn rttm_segment() -> impl Strategy<Value = RttmSegment> {
    (token(), token(), time(), time(), token(), token(), token(), token(), token()).prop_map(
        |(file, channel, start, duration, ortho, subtype, speaker, confidence, lookahead)| RttmSegment {
            file,
            channel,
            start,
            duration,
            ortho,
            subtype,
            speaker,
            confidence,
            lookahead,
        },
    )
}

fn score_file() -> impl Strategy<Value = ScoreFile> {
    (1usize..5, 0usize..12).prop_flat_map(|(s, n)| {
        (
            proptest::collection::vec(token(), n),
            proptest::collection::vec((proptest::collection::vec(unit(), s), any::<bool>()), n),
        )
            .prop_map(move |(words, rows)| ScoreFile {
                num_speakers: s,
                words,
                scores: rows
                    .into_iter()
                    .map(|(scores, low_confidence)| SpeakerScoreVector { scores, low_confidence })
                    .collect(),
            })
    })
}

fn frame_rate() -> impl Strategy<Value = f64> {
    prop_oneof![(1u32..1000).prop_map(f64::from), 1e-3f64..1e4]
}

fn posterior_file() -> impl Strategy<Value = PosteriorFile> {
    (1usize..20, 1usize..5, frame_rate()).prop_flat_map(|(t, s, rate)| {
        proptest::collection::vec(unit(), t * s)
            .prop_map(move |values| PosteriorFile::new(rate, t, s, values).expect("valid posteriors"))
    })
}

proptest! {
    #![proptest_config(config(11))]
    #[test]
    fn ctm_round_trips(entries in proptest::collection::vec(ctm_entry(), 0..10)) {
        let text = write_ctm(&entries).unwrap();
        prop_assert_eq!(parse_ctm(&text, p()).unwrap(), entries);
    }
}

proptest! {
    #![proptest_config(config(12))]
    #[test]
    fn rttm_round_trips(segments in proptest::collection::vec(rttm_segment(), 0..10)) {
        let text = write_rttm(&segments).unwrap();
        prop_assert_eq!(parse_rttm(&text, p()).unwrap(), segments);
    }
}

proptest! {
    #![proptest_config(config(13))]
    #[test]
    fn transcript_round_trips(words in proptest::collection::vec((token(), any::<usize>()), 0..20)) {
        let t = LabeledTranscript::new(
            words.into_iter().map(|(text, s)| LabeledWord { text, speaker: SpeakerId(s) }).collect(),
        );
        let text = write_transcript(&t).unwrap();
        prop_assert_eq!(parse_transcript(&text, p()).unwrap(), t);
    }
}

proptest! {
    #![proptest_config(config(14))]
    #[test]
    fn scores_round_trip(file in score_file()) {
        let text = write_scores(&file).unwrap();
        prop_assert_eq!(parse_scores(&text, p()).unwrap(), file);
    }
}

proptest! {
    #![proptest_config(config(15))]
    #[test]
    fn posteriors_round_trip(file in posterior_file()) {
        let text = write_posteriors(&file);
        prop_assert_eq!(parse_posteriors(&text, p()).unwrap(), file);
    }
}

proptest! {
    #![proptest_config(config(16))]
    /// Frame spans written as seconds come back as the same frames.
    #[test]
    fn ctm_frames_round_trip(rate in 1u32..1000, start in 0usize..100_000, len in 1usize..500) {
        let rate = f64::from(rate);
        let e = CtmEntry {
            recording: "r".into(),
            channel: "1".into(),
            start: start as f64 / rate,
            duration: len as f64 / rate,
            word: "w".into(),
            confidence: None,
        };
        let back = parse_ctm(&write_ctm(std::slice::from_ref(&e)).unwrap(), p()).unwrap();
        prop_assert_eq!(back[0].frames(rate), (start, start + len));
    }
}
