//! `weightzoo`: generate zoos of trained networks, featurize their weights,
//! and fit, evaluate and probe accuracy predictors.
//!
//! Every artifact records the command line that produced it (see
//! [`RunConfig`]). Failures print one line, `error[<category>]: <message>`,
//! to stderr and exit non-zero.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "weightzoo", version, about = "Predict neural network accuracy from weights")]
struct Cli {
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true, env = "WEIGHTZOO_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
enum Command {
    /// Generate or split a zoo.
    #[command(subcommand)]
    Zoo(ZooCommand),
    /// Turn every network of a zoo into one feature row.
    Featurize(FeaturizeArgs),
    /// Fit one estimator configuration.
    Fit(FitArgs),
    /// Random search with k-fold cross-validation, then refit the best configuration.
    Search(SearchArgs),
    /// Score a model on a feature table.
    Eval(EvalArgs),
    /// Kendall's tau of every model on every zoo or table.
    Transfer(TransferArgs),
    /// Prediction change under weight permutations and scaling.
    Probe(ProbeArgs),
    /// Split counts per feature of a tree model.
    Importance(ImportanceArgs),
    /// Accuracy and hyperparameter summary of a zoo.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
enum ZooCommand {
    /// Train a population of networks under a random hyperparameter sweep.
    Gen(ZooGenArgs),
    /// Partition a zoo's ok networks into two named splits.
    Split(ZooSplitArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Preset {
    /// 300 models, 10 epochs, search budget 50.
    Desk,
    /// 30,000 models, 86 epochs, search budget 1000.
    Paper,
}

impl Preset {
    fn count(self) -> u64 {
        match self {
            Preset::Desk => 300,
            Preset::Paper => 30_000,
        }
    }

    fn epochs(self) -> usize {
        match self {
            Preset::Desk => 10,
            Preset::Paper => 86,
        }
    }

    fn budget(self) -> usize {
        match self {
            Preset::Desk => 50,
            Preset::Paper => 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Arch {
    /// Three 16-filter 3x3 stride-2 convolutions, global average pooling, dense output.
    Cnn,
    /// Two hidden layers of 8 units.
    Mlp,
}

#[derive(Debug, Args, Serialize)]
struct ZooGenArgs {
    /// A directory holding MNIST-style IDX files, or `synthetic[:SEED]`.
    #[arg(long)]
    dataset: String,
    /// Number of networks (default from the preset).
    #[arg(long)]
    count: Option<u64>,
    /// Training epochs per network (default from the preset).
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, value_enum, default_value = "desk")]
    preset: Preset,
    #[arg(long)]
    sweep_seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "cnn")]
    arch: Arch,
    #[arg(long, default_value_t = weightzoo::zoo::DEFAULT_BATCH_SIZE)]
    batch_size: usize,
    /// Use only this many training images (the first ones of an IDX file).
    #[arg(long)]
    train_images: Option<usize>,
    /// Use only this many test images.
    #[arg(long)]
    test_images: Option<usize>,
    #[arg(long, default_value_t = 10)]
    classes: usize,
    /// Side length of synthetic images.
    #[arg(long, default_value_t = 28)]
    image_size: usize,
    /// Pixel noise of synthetic images.
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
struct ZooSplitArgs {
    #[arg(long)]
    zoo: PathBuf,
    /// Networks in the first split; the remaining ok networks form the second.
    #[arg(long)]
    train_count: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "train,test")]
    names: Vec<String>,
}

#[derive(Debug, Args, Serialize)]
struct FeaturizeArgs {
    /// Zoo directory, optionally `DIR#SPLIT` to read a named split.
    #[arg(long)]
    zoo: String,
    /// Feature kind, e.g. `stats_per_layer`, `flat_all`, `stats_layer_subset:final`.
    #[arg(long)]
    kind: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct FitArgs {
    #[arg(long)]
    features: PathBuf,
    /// One of logit_linear, gbm, random_forest, dnn.
    #[arg(long)]
    estimator: String,
    /// JSON file with the estimator's parameters; defaults are used otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct SearchArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    estimator: String,
    /// Configurations to try (default from the preset).
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, value_enum, default_value = "desk")]
    preset: Preset,
    #[arg(long, default_value_t = 3)]
    folds: usize,
    #[arg(long)]
    seed: u64,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    /// Cross-validation report (default: next to the model, `.cv.json`).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write `true,predicted` pairs as CSV.
    #[arg(long)]
    scatter: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct TransferArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    models: Vec<PathBuf>,
    /// Zoos (`DIR` or `DIR#SPLIT`), featurized with the models' feature kind.
    #[arg(long, value_delimiter = ',', conflicts_with = "features", required_unless_present = "features")]
    zoos: Vec<String>,
    /// Feature tables, as an alternative to `--zoos`.
    #[arg(long, value_delimiter = ',')]
    features: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct ProbeArgs {
    /// A model fit on `flat_all` features.
    #[arg(long)]
    model: PathBuf,
    /// Zoo (`DIR` or `DIR#SPLIT`) to sample networks from.
    #[arg(long)]
    zoo: String,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long)]
    seed: u64,
    /// Scale factors to probe besides the permutations.
    #[arg(long, value_delimiter = ',', default_value = "0.5,2")]
    factors: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct ImportanceArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Print the most frequently split features.
    #[arg(long, default_value_t = 10)]
    top: usize,
}

#[derive(Debug, Args, Serialize)]
struct ReportArgs {
    /// Zoo directory, optionally `DIR#SPLIT`.
    #[arg(long)]
    zoo: String,
    /// Directory for `summary.json`, `accuracies.csv` and `bias_range.csv`.
    #[arg(long)]
    out: PathBuf,
}

/// The command line as recorded in artifacts. Thread counts are left out so
/// that outputs do not depend on them.
#[derive(Debug, Serialize)]
pub struct RunConfig<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a Command,
}

impl RunConfig<'_> {
    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("run config serializes")
    }

    pub fn to_line(&self) -> String {
        self.to_value().to_string()
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error[usage]: {first}");
            return ExitCode::from(2);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error[usage]: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error[internal]: {e}");
            return ExitCode::FAILURE;
        }
    }
    let run = RunConfig {
        tool: "weightzoo",
        version: env!("CARGO_PKG_VERSION"),
        command: &cli.command,
    };
    match commands::dispatch(&cli.command, &run, cli.threads) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Display already starts with the category; print it once.
            let text = e.to_string().replace('\n', " ");
            let msg = text.split_once(": ").map_or(text.as_str(), |(_, m)| m);
            eprintln!("error[{}]: {msg}", e.category());
            ExitCode::FAILURE
        }
    }
}
