use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use discoparse::evaluation::EvalConfig;
use discoparse::model::ModelConfig;
use discoparse::training::{parse_config, TrainConfig};
use discoparse::trees::{Direction, HeadRuleSet};
use discoparse::{Error, Result};
use discoparse_cli::*;

#[derive(Parser)]
#[command(name = "discoparse", version, about = "Discontinuous constituency parsing via augmented dependencies")]
struct Cli {
    /// Random seed; echoed on every run.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RuleArgs {
    /// Head-rule file; without it every constituent is headed by its
    /// first child.
    #[arg(long)]
    rules: Option<PathBuf>,
}

impl RuleArgs {
    fn load(&self) -> Result<HeadRuleSet> {
        match &self.rules {
            Some(path) => {
                require_file(path)?;
                HeadRuleSet::from_file(path)
            }
            None => Ok(HeadRuleSet::new(Direction::Left)),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    /// discbracket trees to dependency columns
    Dependencies,
    /// dependency columns to discbracket trees
    Constituents,
}

#[derive(Subcommand)]
enum Command {
    /// Convert between discbracket trees and augmented dependencies.
    Convert {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, value_enum, default_value = "dependencies")]
        to: Target,
        #[command(flatten)]
        rules: RuleArgs,
    },
    /// Train a parser; writes the checkpoint and `<model>.report.json`.
    Train {
        train: PathBuf,
        dev: PathBuf,
        #[arg(long, short)]
        model: PathBuf,
        /// `key = value` file with model and optimiser settings.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Pretrained word vectors (`word v1 .. vd` per line).
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Drop the POS embedding.
        #[arg(long)]
        no_pos: bool,
        #[arg(long)]
        epochs: Option<usize>,
        #[command(flatten)]
        rules: RuleArgs,
    },
    /// Parse tokenised text or the terminals of a treebank.
    Parse {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, short)]
        model: PathBuf,
        #[arg(long, default_value_t = 10)]
        beam: usize,
        /// Also write the predicted dependency columns here.
        #[arg(long)]
        dependencies: Option<PathBuf>,
    },
    /// Labelled bracket F1 and discontinuous F1.
    Eval {
        gold: PathBuf,
        pred: PathBuf,
        /// Comma-separated punctuation POS tags.
        #[arg(long, value_delimiter = ',')]
        punct: Option<Vec<String>>,
        /// Comma-separated root labels ignored in scoring.
        #[arg(long, value_delimiter = ',')]
        root_labels: Option<Vec<String>>,
        #[arg(long)]
        json: bool,
    },
    /// Generate a random discontinuous treebank.
    Gen {
        output: PathBuf,
        #[arg(long, default_value_t = 100)]
        count: usize,
        /// Maximum sentence length.
        #[arg(long, default_value_t = 10)]
        size: usize,
        #[arg(long, default_value_t = 0.3)]
        rate: f64,
    },
    /// Check that encode followed by decode reproduces every tree.
    Roundtrip {
        input: PathBuf,
        #[command(flatten)]
        rules: RuleArgs,
    },
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serialisable"));
}

fn load_configs(path: Option<&Path>) -> Result<(ModelConfig, TrainConfig)> {
    let defaults = (ModelConfig::default(), TrainConfig::default());
    match path {
        Some(path) => {
            require_file(path)?;
            let text = std::fs::read_to_string(path)?;
            parse_config(&text, &defaults.0, &defaults.1)
        }
        None => Ok(defaults),
    }
}

fn run(cli: Cli) -> Result<()> {
    println!("seed: {}", cli.seed);
    match cli.command {
        Command::Convert {
            input,
            output,
            to,
            rules,
        } => {
            let direction = match to {
                Target::Dependencies => ConvertDirection::ToDependencies,
                Target::Constituents => ConvertDirection::ToConstituents,
            };
            print_json(&cmd_convert(&input, &output, &rules.load()?, direction)?);
        }
        Command::Train {
            train,
            dev,
            model,
            config,
            embeddings,
            no_pos,
            epochs,
            rules,
        } => {
            let (mut model_config, mut train_config) = load_configs(config.as_deref())?;
            train_config.seed = cli.seed;
            if no_pos {
                model_config.use_pos = false;
            }
            if let Some(e) = epochs {
                train_config.epochs = e;
            }
            let report = cmd_train(&TrainArgs {
                train,
                dev,
                rules: rules.load()?,
                model_config,
                train_config,
                embeddings,
                output: model,
            })?;
            for epoch in &report.epochs {
                println!("{epoch}");
            }
            if let Some(best) = report.best_epoch() {
                println!("best: {best}");
            }
        }
        Command::Parse {
            input,
            output,
            model,
            beam,
            dependencies,
        } => {
            if beam == 0 {
                return Err(Error::Argument("--beam must be at least 1".into()));
            }
            print_json(&cmd_parse(&input, &model, beam, &output, dependencies.as_deref())?);
        }
        Command::Eval {
            gold,
            pred,
            punct,
            root_labels,
            json,
        } => {
            let mut config = EvalConfig::default();
            if let Some(p) = punct {
                config.punct_pos = p.into_iter().collect();
            }
            if let Some(r) = root_labels {
                config.root_labels = r.into_iter().collect();
            }
            let report = cmd_eval(&gold, &pred, &config)?;
            if json {
                print_json(&report);
            } else {
                print!("{report}");
            }
        }
        Command::Gen {
            output,
            count,
            size,
            rate,
        } => {
            let n = cmd_gen(count, size, rate, cli.seed, &output)?;
            println!("wrote {n} trees to {}", output.display());
        }
        Command::Roundtrip { input, rules } => {
            let summary = cmd_roundtrip(&input, &rules.load()?)?;
            print_json(&summary);
            if !summary.failures.is_empty() {
                return Err(Error::Structure(format!(
                    "{} of {} trees failed the round trip",
                    summary.failures.len(),
                    summary.sentences
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
