mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gecdi::error::{Error, ErrorClass};

#[derive(Parser, Debug)]
#[command(name = "gecdi", version, about = "Critic-guided beam search for grammatical error correction")]
pub struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train the base correction model on source<TAB>target pairs.
    TrainGec(TrainGecArgs),
    /// Train an n-gram language model on one sentence per line.
    TrainLm(TrainLmArgs),
    /// Decode training pairs with the base model and label the hypotheses.
    GenGedData(GenGedArgs),
    /// Train the error detector, once per seed.
    TrainGed(TrainGedArgs),
    /// Correct sentences, optionally with critics.
    Decode(DecodeArgs),
    /// Score hypotheses against references.
    Evaluate(EvaluateArgs),
    /// Decode a dev set over an alpha/beta grid.
    Sweep(SweepArgs),
    /// Serve a model over the line protocol on stdio or TCP.
    ServeScorer(ServeArgs),
}

#[derive(Args, Debug)]
pub struct TrainGecArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub add_k: Option<f64>,
    #[arg(long)]
    pub mix: Option<f64>,
    #[arg(long)]
    pub skip_window: Option<usize>,
    #[arg(long)]
    pub min_count: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TrainLmArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long)]
    pub add_k: Option<f64>,
    /// Also write the model vocabulary, one token per line.
    #[arg(long)]
    pub vocab_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenGedArgs {
    #[arg(long)]
    pub gec: Option<PathBuf>,
    #[arg(long)]
    pub pairs: PathBuf,
    /// Receives all.jsonl, train.jsonl and dev.jsonl.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub beam: Option<usize>,
    /// Seed of the train/dev split.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct TrainGedArgs {
    /// Labelled examples (JSON lines); split anew for every seed.
    #[arg(long)]
    pub data: PathBuf,
    /// Parallel TSV whose targets feed the bigram features.
    #[arg(long)]
    pub references: PathBuf,
    /// Model of the first seed.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub l2: Option<f64>,
    /// Per-seed metrics TSV (printed to stdout as well).
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CriticChoice {
    None,
    Lm,
    Ged,
    Both,
}

impl CriticChoice {
    pub fn lm(self) -> bool {
        matches!(self, CriticChoice::Lm | CriticChoice::Both)
    }

    pub fn ged(self) -> bool {
        matches!(self, CriticChoice::Ged | CriticChoice::Both)
    }
}

#[derive(Args, Debug, Default)]
pub struct CriticArgs {
    #[arg(long)]
    pub gec: Option<PathBuf>,
    #[arg(long)]
    pub lm: Option<PathBuf>,
    #[arg(long)]
    pub ged: Option<PathBuf>,
    /// Command that serves the language model on stdio, split on spaces.
    #[arg(long, conflicts_with_all = ["lm", "lm_tcp"])]
    pub lm_cmd: Option<String>,
    /// Address of a language-model server.
    #[arg(long, conflicts_with = "lm")]
    pub lm_tcp: Option<String>,
    /// Vocabulary of a remote language model, one token per line.
    #[arg(long)]
    pub lm_vocab: Option<PathBuf>,
    /// Ask remote scorers for full distributions.
    #[arg(long)]
    pub exact_dist: bool,
    #[arg(long)]
    pub lm_alpha: Option<f64>,
    #[arg(long)]
    pub lm_beta: Option<f64>,
    #[arg(long)]
    pub ged_alpha: Option<f64>,
    #[arg(long)]
    pub ged_beta: Option<f64>,
    #[arg(long)]
    pub shortlist: Option<usize>,
    #[arg(long)]
    pub beam: Option<usize>,
    #[arg(long)]
    pub max_len_ratio: Option<f64>,
    #[arg(long)]
    pub no_length_cap: bool,
    #[arg(long)]
    pub length_normalization: bool,
    /// Weight with entropies in nats instead of normalized ones.
    #[arg(long)]
    pub raw_entropy: bool,
}

#[derive(Args, Debug)]
pub struct DecodeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = CriticChoice::None)]
    pub critic: CriticChoice,
    /// Per-step score breakdown as TSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub common: CriticArgs,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub sources: PathBuf,
    #[arg(long)]
    pub hyps: PathBuf,
    /// `index<TAB>reference` lines, 0-based; repeat an index for more references.
    #[arg(long, required_unless_present = "targets")]
    pub refs: Option<PathBuf>,
    /// One reference per line, aligned with the sources.
    #[arg(long, conflicts_with = "refs")]
    pub targets: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Dev pairs, source<TAB>target.
    #[arg(long)]
    pub dev: PathBuf,
    #[arg(long, value_enum, default_value_t = CriticChoice::Ged)]
    pub critic: CriticChoice,
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: CriticArgs,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Listen on this address instead of stdio.
    #[arg(long)]
    pub tcp: Option<String>,
    /// Print the bound address on stdout once listening.
    #[arg(long, requires = "tcp")]
    pub announce: bool,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e.class() {
                ErrorClass::Config => 2,
                ErrorClass::Data => 3,
                ErrorClass::Transport => 4,
            };
        }
    }
    3
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
