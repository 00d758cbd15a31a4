use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde_json::json;

use kirelex::pipeline::stages::{EvalInputs, StageError};
use kirelex::pipeline::{run_stage, PipelineConfig, Stage};
use kirelex::synthetic::{generate, SyntheticConfig};

#[derive(Parser)]
#[command(name = "kirelex", version, about = "Cannabis/depression relation extraction from tweets")]
struct Cli {
    /// Pipeline config (JSON).
    #[arg(short, long, global = true, default_value = "kirelex.json")]
    config: PathBuf,
    /// Override a config value, e.g. `--set train.epochs=10`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Match cannabis and depression phrases in every tweet.
    Match,
    /// Train the metric head on matched labeled tweets.
    Train,
    /// Weak-label unlabeled and held-out tweets with the trained head.
    Label,
    /// Score predictions against gold labels.
    Eval {
        /// Predictions JSONL (`id`, `label`); defaults to the label stage output.
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Gold JSONL (`id`, `label`); defaults to the tweet corpus.
        #[arg(long)]
        gold: Option<PathBuf>,
    },
    /// Run the component ablation grid.
    Ablate,
    /// Project learned representations to 2-D and write CSV and SVG plots.
    Project,
    /// Run every stage in order.
    Pipeline,
    /// Write a synthetic corpus and lexicon (no config needed).
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 300)]
        tweets: usize,
        #[arg(long, default_value_t = 0)]
        unlabeled: usize,
    },
}

fn fail(stage: &str, message: &str) -> ExitCode {
    eprintln!("{}", json!({"error": {"stage": stage, "message": message}}));
    ExitCode::FAILURE
}

fn synth(out: PathBuf, seed: u64, tweets: usize, unlabeled: usize) -> anyhow::Result<()> {
    let corpus = generate(&SyntheticConfig {
        n_tweets: tweets,
        n_unlabeled: unlabeled,
        seed,
        ..SyntheticConfig::default()
    });
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    corpus.tweets.write(&out.join("tweets.jsonl"))?;
    std::fs::write(out.join("lexicon.jsonl"), corpus.lexicon.to_jsonl())
        .with_context(|| format!("writing lexicon to {}", out.display()))?;
    println!("{}", out.join("tweets.jsonl").display());
    println!("{}", out.join("lexicon.jsonl").display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (stage, eval) = match cli.command {
        Command::Synth {
            out,
            seed,
            tweets,
            unlabeled,
        } => {
            return match synth(out, seed, tweets, unlabeled) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail("synth", &format!("{e:#}")),
            };
        }
        Command::Match => (Stage::Match, EvalInputs::default()),
        Command::Train => (Stage::Train, EvalInputs::default()),
        Command::Label => (Stage::Label, EvalInputs::default()),
        Command::Eval { predictions, gold } => (Stage::Eval, EvalInputs { predictions, gold }),
        Command::Ablate => (Stage::Ablate, EvalInputs::default()),
        Command::Project => (Stage::Project, EvalInputs::default()),
        Command::Pipeline => (Stage::Pipeline, EvalInputs::default()),
    };
    let config = match PipelineConfig::load(&cli.config, &cli.overrides) {
        Ok(c) => c,
        Err(e) => return fail("config", &e.to_string()),
    };
    match run_stage(stage, &config, &eval) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(StageError { stage, source }) => fail(stage.as_str(), &source.to_string()),
    }
}
