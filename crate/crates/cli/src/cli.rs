//! Argument parsing and dispatch.

use std::path::PathBuf;

use aglsec_core::corrector::{ModelKind, TrainConfig};
use aglsec_core::experiment::ExperimentConfig;
use aglsec_core::scores::DEFAULT_MEDIAN_FRAMES;
use aglsec_core::windowing::WindowParams;
use clap::{Args, Parser, Subcommand};

use crate::commands::{self, EvaluateArgs, TrainArgs};
use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "aglsec", version, about = "Speaker error correction with acoustic scores")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Copy)]
pub struct WindowOpts {
    /// Median filter length in frames (odd).
    #[arg(long, default_value_t = DEFAULT_MEDIAN_FRAMES)]
    pub median_frames: usize,
    /// Words per correction window.
    #[arg(long, default_value_t = WindowParams::default().window_size)]
    pub window_size: usize,
    /// Words between window starts.
    #[arg(long, default_value_t = WindowParams::default().stride)]
    pub stride: usize,
}

impl WindowOpts {
    fn params(&self) -> WindowParams {
        WindowParams {
            window_size: self.window_size,
            stride: self.stride,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus with train/validation/test splits.
    Simulate {
        /// TOML file with `num_conversations` and a `[simulator]` table.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (created; replaced if it holds an earlier corpus).
        #[arg(long)]
        out: PathBuf,
        /// Overrides `simulator.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Turn frame posteriors and a CTM into per-word speaker scores.
    ExtractScores {
        #[arg(long)]
        posteriors: PathBuf,
        #[arg(long)]
        ctm: PathBuf,
        /// Median filter length in frames (odd).
        #[arg(long, default_value_t = DEFAULT_MEDIAN_FRAMES)]
        median_frames: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a corrector on the training split of a corpus.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        /// identity, lsec, early-fusion or late-fusion.
        #[arg(long)]
        kind: String,
        /// Checkpoint to start from (an LSEC model for the fusion kinds).
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long, default_value_t = 12)]
        epochs: usize,
        #[arg(long, default_value_t = TrainConfig::default().batch_size)]
        batch_size: usize,
        #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
        lr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Vocabulary size cap, including the unknown token.
        #[arg(long, default_value_t = 512)]
        max_vocab: usize,
        #[command(flatten)]
        window: WindowOpts,
        /// Checkpoint path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Correct one transcript described by a TOML manifest.
    Correct {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Score hypothesis transcripts (files or directories) against references.
    Score {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        hypothesis: PathBuf,
        /// Directory for report.txt and report.toml.
        #[arg(long)]
        out: PathBuf,
    },
    /// Correct and score every conversation of a corpus split.
    Evaluate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        /// Checkpoint; the identity corrector when absent.
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        window: WindowOpts,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full synthetic comparison in memory and print the table.
    Experiment {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = ExperimentConfig::default().num_conversations)]
        conversations: usize,
        #[arg(long, default_value_t = ExperimentConfig::default().train.epochs)]
        epochs: usize,
        /// Also write the table here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_kind(s: &str) -> Result<ModelKind> {
    s.parse().map_err(|_| {
        let names: Vec<&str> = ModelKind::ALL.iter().map(|k| k.name()).collect();
        CliError::Usage(format!("unknown model kind `{s}`; expected one of {}", names.join(", ")))
    })
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out, seed } => {
            let cfg = commands::load_simulate_config(&config)?;
            commands::simulate(&cfg, seed, &out)?;
            println!("wrote {} conversations to {}", cfg.num_conversations, out.display());
        }
        Command::ExtractScores {
            posteriors,
            ctm,
            median_frames,
            out,
        } => {
            let f = commands::extract_scores(&posteriors, &ctm, median_frames, &out)?;
            println!("wrote {} score rows to {}", f.words.len(), out.display());
        }
        Command::Train {
            corpus,
            kind,
            init,
            epochs,
            batch_size,
            lr,
            seed,
            max_vocab,
            window,
            out,
        } => {
            let args = TrainArgs {
                corpus,
                kind: parse_kind(&kind)?,
                init,
                train: TrainConfig {
                    epochs,
                    batch_size,
                    learning_rate: lr,
                    seed,
                },
                median_frames: window.median_frames,
                window: window.params(),
                max_vocab,
                out,
            };
            let (_, log) = commands::train_model(&args)?;
            for e in log {
                println!("epoch {} loss {:.6}", e.epoch, e.mean_loss);
            }
            println!("wrote {}", args.out.display());
        }
        Command::Correct { manifest } => {
            let out = commands::correct(&manifest)?;
            if let Some(r) = out.report {
                print!("{}", r.text());
            }
        }
        Command::Score {
            reference,
            baseline,
            hypothesis,
            out,
        } => {
            let r = commands::score(&reference, &baseline, &hypothesis, &out)?;
            print!("{}", r.text());
        }
        Command::Evaluate {
            corpus,
            split,
            model,
            window,
            out,
        } => {
            let r = commands::evaluate(&EvaluateArgs {
                corpus,
                split,
                model,
                median_frames: window.median_frames,
                window: window.params(),
                out,
            })?;
            print!("{}", r.text());
        }
        Command::Experiment {
            seed,
            conversations,
            epochs,
            out,
        } => {
            let mut cfg = ExperimentConfig::default();
            cfg.simulator.seed = seed;
            cfg.num_conversations = conversations;
            cfg.train.epochs = epochs;
            cfg.train.seed = seed;
            let report = commands::experiment(&cfg, out.as_deref())?;
            print!("{report}");
        }
    }
    Ok(())
}
