use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use aglsec_cli::commands::{self, EvaluateArgs, SimulateConfig, TrainArgs};
use aglsec_cli::corpus_io::{load_split, write_corpus, CORPUS_FILE};
use aglsec_cli::formats::{parse_scores, parse_transcript, read_text};
use aglsec_core::corrector::{ModelKind, TrainConfig};
use aglsec_core::synth::{corpus, SimulatorConfig, Zone};
use aglsec_core::windowing::WindowParams;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aglsec"))
}

fn small_config(seed: u64, n: usize) -> SimulateConfig {
    SimulateConfig {
        num_conversations: n,
        simulator: SimulatorConfig {
            seed,
            ..SimulatorConfig::default()
        },
    }
}

/// Every file under `dir` with its bytes, by relative path.
fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(root: &Path, d: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for e in fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}

#[test]
fn simulate_writes_the_documented_tree() {
    let root = tempfile::tempdir().unwrap();
    let out = root.path().join("nested/missing/corpus");
    commands::simulate(&small_config(1, 10), None, &out).unwrap();
    assert!(out.join(CORPUS_FILE).is_file());
    let counts: Vec<usize> = ["train", "validation", "test"]
        .iter()
        .map(|s| fs::read_dir(out.join(s)).unwrap().count())
        .collect();
    assert_eq!(counts, vec![8, 1, 1]);
    let conv = out.join("test/conv_00009");
    for f in ["posteriors.txt", "words.ctm", "reference.txt", "baseline.txt", "reference.rttm"] {
        assert!(conv.join(f).is_file(), "{f}");
    }
    let loaded = load_split(&out, "train").unwrap();
    assert_eq!(loaded.len(), 8);
    assert_eq!(loaded[0].name, "conv_00000");
}

#[test]
fn simulate_is_deterministic_and_seed_flag_overrides() {
    let root = tempfile::tempdir().unwrap();
    let (a, b, c) = (root.path().join("a"), root.path().join("b"), root.path().join("c"));
    let cfg = small_config(5, 6);
    commands::simulate(&cfg, None, &a).unwrap();
    commands::simulate(&cfg, None, &b).unwrap();
    assert_eq!(snapshot(&a), snapshot(&b));
    commands::simulate(&cfg, Some(6), &c).unwrap();
    assert_ne!(snapshot(&a), snapshot(&c));
    // Rerunning onto an existing corpus replaces it with identical bytes.
    commands::simulate(&cfg, None, &a).unwrap();
    assert_eq!(snapshot(&a), snapshot(&b));
}

#[test]
fn disk_corpus_matches_memory() {
    let root = tempfile::tempdir().unwrap();
    let sim = SimulatorConfig {
        seed: 9,
        ..SimulatorConfig::default()
    };
    let mem = corpus(&sim, 5).unwrap();
    write_corpus(root.path().join("c").as_path(), &mem).unwrap();
    let disk = load_split(&root.path().join("c"), "train").unwrap();
    for (d, m) in disk.iter().zip(&mem.train) {
        assert_eq!(d.reference, m.reference);
        assert_eq!(d.baseline, m.baseline);
        assert_eq!(d.words, m.words);
        assert_eq!(d.posteriors.matrix, m.posteriors);
        assert_eq!(d.scores(11).unwrap(), m.word_scores(11).unwrap());
    }
}

#[test]
fn extract_scores_hand_computed_row() {
    let d = tempfile::tempdir().unwrap();
    let post = d.path().join("p.txt");
    let ctm = d.path().join("w.ctm");
    fs::write(&post, "3 2 10\n0.75 0.25\n0.5 1\n0.25 0.5\n").unwrap();
    fs::write(&ctm, "rec 1 0 0.3 hello\n").unwrap();
    let out = d.path().join("s.txt");
    let f = commands::extract_scores(&post, &ctm, 3, &out).unwrap();
    // Smoothed columns: [0.75, 0.5, 0.25] and [0.25, 0.5, 0.5]; means 1.5/3
    // and 1.25/3; normalized 6/11 and 5/11.
    let row = &f.scores[0].scores;
    assert!((row[0] - 6.0 / 11.0).abs() < 1e-12, "{row:?}");
    assert!((row[1] - 5.0 / 11.0).abs() < 1e-12, "{row:?}");
    assert_eq!(parse_scores(&read_text(&out).unwrap(), &out).unwrap(), f);
}

#[test]
fn extract_scores_one_row_per_ctm_word_and_noiseless_one_hot() {
    let root = tempfile::tempdir().unwrap();
    let sim = SimulatorConfig {
        seed: 21,
        posterior_noise: 0.0,
        ..SimulatorConfig::default()
    };
    let mem = corpus(&sim, 3).unwrap();
    let dir = root.path().join("c");
    write_corpus(&dir, &mem).unwrap();
    for c in mem.all() {
        let split = if mem.train.contains(c) {
            "train"
        } else if mem.validation.contains(c) {
            "validation"
        } else {
            "test"
        };
        let cd = dir.join(split).join(format!("conv_{:05}", c.id));
        let out = root.path().join(format!("s{}.txt", c.id));
        let f = commands::extract_scores(&cd.join("posteriors.txt"), &cd.join("words.ctm"), 11, &out).unwrap();
        let ctm_lines = read_text(&cd.join("words.ctm")).unwrap().lines().count();
        assert_eq!(f.scores.len(), ctm_lines);
        let mut checked = 0;
        for (i, info) in c.info.iter().enumerate() {
            if info.zone == Zone::Interior && !info.overlapped && info.turn_len >= 5 {
                let row = &f.scores[i].scores;
                let s = c.reference.words[i].speaker.index();
                assert_eq!(row[s], 1.0, "conv {} word {i}: {row:?}", c.id);
                checked += 1;
            }
        }
        assert!(checked > 0);
    }
}

#[test]
fn score_of_reference_against_itself_is_zero() {
    let root = tempfile::tempdir().unwrap();
    let dir = root.path().join("c");
    commands::simulate(&small_config(2, 4), None, &dir).unwrap();
    let r = dir.join("train/conv_00000/reference.txt");
    let rep = commands::score(&r, &r, &r, &root.path().join("s")).unwrap();
    assert_eq!(rep.aggregate.wder, 0.0);
    assert!(read_text(&root.path().join("s/report.toml")).unwrap().contains("wder = 0.0"));

    // Directory mode pairs files by relative path.
    let refs = root.path().join("refs");
    for i in 0..2 {
        let d = refs.join(format!("conv_{i:05}"));
        fs::create_dir_all(&d).unwrap();
        fs::copy(dir.join(format!("train/conv_{i:05}/reference.txt")), d.join("t.txt")).unwrap();
    }
    let rep = commands::score(&refs, &refs, &refs, &root.path().join("d")).unwrap();
    assert_eq!(rep.conversations.len(), 2);
    assert!(rep.conversations.contains_key("conv_00001/t.txt"));
}

fn write_manifest(dir: &Path, conv: &Path, model: Option<&Path>, out: &str) -> PathBuf {
    let mut text = format!(
        "posteriors = {:?}\nwords = {:?}\nbaseline = {:?}\nreference = {:?}\noutput_dir = {out:?}\n",
        conv.join("posteriors.txt"),
        conv.join("words.ctm"),
        conv.join("baseline.txt"),
        conv.join("reference.txt"),
    );
    if let Some(m) = model {
        text.push_str(&format!("model = {m:?}\n"));
    }
    let p = dir.join(format!("{out}.toml"));
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn correct_with_identity_returns_the_baseline() {
    let root = tempfile::tempdir().unwrap();
    let dir = root.path().join("c");
    commands::simulate(&small_config(4, 3), None, &dir).unwrap();
    let conv = dir.join("test/conv_00002");
    let m = write_manifest(root.path(), &conv, None, "out");
    let res = commands::correct(&m).unwrap();
    let corrected = root.path().join("out/corrected.txt");
    assert_eq!(fs::read(&corrected).unwrap(), fs::read(conv.join("baseline.txt")).unwrap());
    let report = res.report.unwrap();
    assert_eq!(report.aggregate.fixed, 0);
    assert_eq!(report.aggregate.broken, 0);
    let baseline = parse_transcript(&read_text(&conv.join("baseline.txt")).unwrap(), &conv).unwrap();
    assert_eq!(res.corrected, baseline);
}

#[test]
fn train_correct_evaluate_are_idempotent() {
    let root = tempfile::tempdir().unwrap();
    let dir = root.path().join("c");
    commands::simulate(&small_config(8, 12), None, &dir).unwrap();
    let tc = TrainConfig {
        epochs: 1,
        seed: 3,
        ..TrainConfig::default()
    };
    let args = |kind, init: Option<PathBuf>, out: &str| TrainArgs {
        corpus: dir.clone(),
        kind,
        init,
        train: tc,
        median_frames: 11,
        window: WindowParams::default(),
        max_vocab: 512,
        out: root.path().join(out),
    };
    commands::train_model(&args(ModelKind::Lsec, None, "l1.bin")).unwrap();
    commands::train_model(&args(ModelKind::Lsec, None, "l2.bin")).unwrap();
    let l1 = fs::read(root.path().join("l1.bin")).unwrap();
    assert_eq!(l1, fs::read(root.path().join("l2.bin")).unwrap());
    let lsec = root.path().join("l1.bin");
    for (kind, name) in [(ModelKind::EarlyFusion, "e"), (ModelKind::LateFusion, "f")] {
        let a = format!("{name}1.bin");
        let b = format!("{name}2.bin");
        commands::train_model(&args(kind, Some(lsec.clone()), &a)).unwrap();
        commands::train_model(&args(kind, Some(lsec.clone()), &b)).unwrap();
        assert_eq!(fs::read(root.path().join(a)).unwrap(), fs::read(root.path().join(b)).unwrap());
    }
    let ef = root.path().join("e1.bin");

    let conv = dir.join("test/conv_00011");
    let m1 = write_manifest(root.path(), &conv, Some(&ef), "o1");
    let m2 = write_manifest(root.path(), &conv, Some(&ef), "o2");
    commands::correct(&m1).unwrap();
    commands::correct(&m2).unwrap();
    assert_eq!(snapshot(&root.path().join("o1")), snapshot(&root.path().join("o2")));

    let ev = |out: &str| EvaluateArgs {
        corpus: dir.clone(),
        split: "test".into(),
        model: Some(ef.clone()),
        median_frames: 11,
        window: WindowParams::default(),
        out: root.path().join(out),
    };
    let r1 = commands::evaluate(&ev("ev1")).unwrap();
    let r2 = commands::evaluate(&ev("ev2")).unwrap();
    assert_eq!(r1, r2);
    assert_eq!(snapshot(&root.path().join("ev1")), snapshot(&root.path().join("ev2")));
    commands::evaluate(&ev("ev1")).unwrap();
    assert_eq!(snapshot(&root.path().join("ev1")), snapshot(&root.path().join("ev2")));
}

#[test]
fn exit_codes() {
    let root = tempfile::tempdir().unwrap();
    let cfg = root.path().join("sim.toml");
    fs::write(&cfg, "num_conversations = 3\n[simulator]\nseed = 1\n").unwrap();

    let ok = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(root.path().join("c"))
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));

    let usage = bin().args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(usage.status.code(), Some(1));
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
    let bad_kind = bin()
        .args(["train", "--kind", "nope", "--out", "x", "--corpus"])
        .arg(root.path().join("c"))
        .output()
        .unwrap();
    assert_eq!(bad_kind.status.code(), Some(1));

    // A regular file where a directory is needed: unwritable output.
    let blocker = root.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let unwritable = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(blocker.join("corpus"))
        .output()
        .unwrap();
    assert_eq!(unwritable.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&unwritable.stderr).is_empty());

    let post = root.path().join("p.txt");
    let ctm = root.path().join("w.ctm");
    fs::write(&post, "2 1 10\n0.5\n0.5\n").unwrap();
    fs::write(&ctm, "r 1 0 0.1 fine\nr 1 0.1 0.5 toolong\n").unwrap();
    let beyond = bin()
        .args(["extract-scores", "--posteriors"])
        .arg(&post)
        .arg("--ctm")
        .arg(&ctm)
        .arg("--out")
        .arg(root.path().join("s.txt"))
        .output()
        .unwrap();
    assert_eq!(beyond.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&beyond.stderr);
    assert!(msg.contains("toolong") && msg.contains("w.ctm:2"), "{msg}");
    assert!(!root.path().join("s.txt").exists());

    let bad_cfg = root.path().join("bad.toml");
    fs::write(&bad_cfg, "num_conversations = 3\n[simulator]\nnum_speakers = 9\n").unwrap();
    let invalid = bin()
        .args(["simulate", "--config"])
        .arg(&bad_cfg)
        .arg("--out")
        .arg(root.path().join("c2"))
        .output()
        .unwrap();
    assert_eq!(invalid.status.code(), Some(1));
    assert!(!root.path().join("c2").exists());
}

#[test]
fn shipped_simulate_config_parses_to_the_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/simulate.toml");
    let cfg = commands::load_simulate_config(&path).unwrap();
    assert_eq!(cfg, SimulateConfig {
        num_conversations: 2000,
        simulator: SimulatorConfig::default(),
    });
}
