//! `adrmine`: preprocess tweets, build a vocabulary, augment training data,
//! train, predict and evaluate.
//!
//! Exit codes: 0 success, 2 usage / configuration / missing file, 3 data or
//! model mismatch.

mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use adrmine::eval::EvalReport;
use adrmine::tokenize::DEFAULT_VOCAB_SIZE;
use clap::{Parser, Subcommand};

use config::RunConfig;
use failure::Failure;

#[derive(Parser)]
#[command(name = "adrmine", version, about = "ADR tweet detection, mention extraction and MedDRA normalization")]
struct Cli {
    /// Run configuration (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for preprocessing and prediction. Training always
    /// runs on one thread.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize the text of a task-2 or tweet file.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Directory with replacement resource tables.
        #[arg(long)]
        resources: Option<PathBuf>,
    },
    /// Learn byte-pair merges from normalized tweets.
    BuildVocab {
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        /// Output directory for vocab.tsv and merges.tsv.
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = DEFAULT_VOCAB_SIZE)]
        size: usize,
        #[arg(long)]
        resources: Option<PathBuf>,
    },
    /// Add ADR tweets and downsample non-ADR tweets of a task-2 file.
    Augment {
        #[arg(long)]
        base: PathBuf,
        /// Task-2 file of extra ADR tweets.
        #[arg(long)]
        extra: Option<PathBuf>,
        /// Fraction of non-ADR tweets to keep.
        #[arg(long, default_value_t = 0.9)]
        fraction: f64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Train a model; writes a checkpoint and a loss log.
    Train {
        /// Override a configuration key.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Label tweets (classify) or write predicted mention spans (extract,
    /// with codes when a normalizer is given).
    Predict {
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        normalizer: Option<PathBuf>,
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score predictions against gold data.
    Evaluate {
        /// classification, ner or ner+norm.
        #[arg(long)]
        mode: String,
        /// strict, relaxed or both (span modes only).
        #[arg(long = "match", default_value = "both")]
        match_type: String,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// Tweet file the span files refer to.
        #[arg(long)]
        tweets: Option<PathBuf>,
        /// Write the TSV report here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn run_config(cli: &Cli, set: &[String], paths: &[(&str, &Option<PathBuf>)]) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for (key, value) in paths {
        if let Some(v) = value {
            cfg.set(key, &v.to_string_lossy())?;
        }
    }
    for pair in set {
        cfg.set_pair(pair)?;
    }
    if let Some(seed) = cli.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<String, Failure> {
    match &cli.command {
        Command::Preprocess { input, output, resources } => commands::preprocess(input, output, resources.as_deref()),
        Command::BuildVocab {
            input,
            output,
            size,
            resources,
        } => commands::build_vocab(input, output, *size, resources.as_deref()),
        Command::Augment {
            base,
            extra,
            fraction,
            output,
        } => commands::augment(base, extra.as_deref(), *fraction, cli.seed.unwrap_or(0), output),
        Command::Train { set } => commands::train(&run_config(cli, set, &[])?),
        Command::Predict {
            set,
            checkpoint,
            normalizer,
            vocab,
            input,
            output,
        } => {
            let paths = [
                ("checkpoint", checkpoint),
                ("normalizer", normalizer),
                ("vocab", vocab),
                ("input", input),
                ("output", output),
            ];
            commands::predict(&run_config(cli, set, &paths)?)
        }
        Command::Evaluate {
            mode,
            match_type,
            pred,
            gold,
            tweets,
            output,
        } => {
            let reports = commands::evaluate(&commands::EvalArgs {
                mode,
                match_type,
                pred,
                gold,
                tweets: tweets.as_deref(),
            })?;
            let tsv = EvalReport::to_tsv(&reports);
            match output {
                Some(path) => {
                    std::fs::write(path, &tsv)
                        .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))?;
                    Ok(EvalReport::to_table(&reports))
                }
                None => Ok(tsv),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads.max(1)).build_global() {
        eprintln!("adrmine: {e}");
        return ExitCode::from(failure::EXIT_USAGE);
    }
    match run(&cli) {
        Ok(msg) => {
            print!("{msg}");
            if !msg.ends_with('\n') {
                println!();
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("adrmine: {e}");
            ExitCode::from(e.code)
        }
    }
}
