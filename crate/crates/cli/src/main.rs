use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use igrl::objectives::Mode;
use igrl_cli::{Pipeline, Stage, StageError};

#[derive(Parser)]
#[command(name = "igrl", version, about = "Information-guided RL experiments for stylistic dialogue generation")]
struct Cli {
    /// Experiment manifest (JSON).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Overrides the manifest's global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory for artifacts; defaults to the manifest's directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic corpus and its ground-truth lexicon.
    Synth,
    /// Build the vocabulary and the PMI style lexicon.
    BuildLexicon,
    /// Train the reward classifier.
    TrainClassifier,
    /// MLE pretraining of the generator.
    Pretrain,
    /// RL training from the pretrained generator.
    Train {
        #[arg(long, value_parser = parse_mode)]
        mode: Mode,
    },
    /// Sample responses for queries read one per line.
    Generate {
        #[arg(long)]
        queries: PathBuf,
        /// Trained generator to use; the pretrained one when omitted.
        #[arg(long, value_parser = parse_mode)]
        mode: Option<Mode>,
    },
    /// Evaluate a generator on the held-out split.
    Evaluate {
        #[arg(long, value_parser = parse_mode)]
        mode: Option<Mode>,
    },
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    Mode::from_flag(s).map_err(|e| e.to_string())
}

impl Command {
    fn stage(&self) -> Stage {
        match self {
            Command::Synth => Stage::Synth,
            Command::BuildLexicon => Stage::BuildLexicon,
            Command::TrainClassifier => Stage::TrainClassifier,
            Command::Pretrain => Stage::Pretrain,
            Command::Train { .. } => Stage::Train,
            Command::Generate { .. } => Stage::Generate,
            Command::Evaluate { .. } => Stage::Evaluate,
        }
    }
}

fn run(cli: Cli) -> Result<(), StageError> {
    let stage = cli.command.stage();
    let manifest = cli.manifest.ok_or_else(|| StageError {
        stage,
        source: anyhow::anyhow!("--manifest is required"),
    })?;
    let pipeline = Pipeline::open(&manifest, cli.seed, cli.out).map_err(|source| StageError { stage, source })?;
    match cli.command {
        Command::Synth => pipeline.synth(),
        Command::BuildLexicon => pipeline.build_lexicon(),
        Command::TrainClassifier => pipeline.train_classifier(),
        Command::Pretrain => pipeline.pretrain().map(drop),
        Command::Train { mode } => pipeline.train(mode).map(drop),
        Command::Generate { queries, mode } => pipeline.generate(mode, &queries).map(drop),
        Command::Evaluate { mode } => pipeline.evaluate(mode).map(drop),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::FAILURE
        }
    }
}
