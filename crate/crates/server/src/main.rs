use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser)]
#[command(name = "keychord", version, about = "Keyword-driven chord progression suggestions")]
struct Cli {
    /// Log verbosity (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the shared chord-token vocabulary from corpora.
    Vocab(VocabArgs),
    /// Train a prior (human corpus) or proposal (LLM corpus) model.
    Train(TrainArgs),
    /// Compute the acceptance constant M from candidate progressions.
    Calibrate(CalibrateArgs),
    /// Suggest progressions for keywords, key, mode and bar count.
    Generate(GenerateArgs),
    /// Diversity and coherence evaluations.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Run the HTTP API.
    Serve(ServeArgs),
}

#[derive(Args)]
struct VocabArgs {
    /// Corpus JSONL file; repeat for several.
    #[arg(long = "corpus", required = true)]
    corpora: Vec<PathBuf>,
    #[arg(long, default_value_t = 1)]
    min_freq: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Role {
    Prior,
    Proposal,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Small dimensions and a larger learning rate for CPU-sized corpora.
    Desk,
    /// Full-size reference dimensions.
    Reference,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum)]
    role: Role,
    #[arg(long = "corpus", required = true)]
    corpora: Vec<PathBuf>,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "desk")]
    preset: Preset,
    /// JSON model config; overrides the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Train on every progression length instead of 4-bar ones only.
    #[arg(long)]
    all_lengths: bool,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    p: PathBuf,
    #[arg(long)]
    q: PathBuf,
    /// Defaults to vocab.json next to the prior.
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Corpus-format JSONL of LLM candidates.
    #[arg(long)]
    candidates: PathBuf,
    #[arg(long, default_value_t = 0.95)]
    percentile: f64,
    /// Scoring temperature for both models.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ProviderArgs {
    /// Answer LLM calls from this fixture directory.
    #[arg(long, conflicts_with = "llm_config")]
    mock: Option<PathBuf>,
    /// JSON provider config for a live OpenAI-compatible endpoint.
    #[arg(long)]
    llm_config: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Comma-separated keywords.
    #[arg(long)]
    keywords: String,
    #[arg(long)]
    key: String,
    #[arg(long)]
    mode: String,
    #[arg(long, default_value_t = 4)]
    bars: usize,
    #[command(flatten)]
    provider: ProviderArgs,
    #[arg(long, default_value = "data/models")]
    models: PathBuf,
    /// Calibration artifact; M = 7.64 when absent.
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Sampler config JSON.
    #[arg(long)]
    sampler: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Print the full suggestion set as JSON.
    #[arg(long)]
    json: bool,
    /// Append acceptance records to this JSONL file.
    #[arg(long)]
    audit: Option<PathBuf>,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Self-BLEU of stored sets or of fresh batch/single generations.
    SelfBleu(SelfBleuArgs),
    /// Unigram/bigram JSD of condition files against a corpus.
    Jsd(JsdArgs),
    /// Both comparison tables from shipped data and fixtures.
    Tables(TablesArgs),
}

#[derive(Args)]
struct SelfBleuArgs {
    /// Directory of `<condition>.jsonl` files, one JSON array of progressions per line.
    #[arg(long = "in", conflicts_with_all = ["mock", "llm_config"])]
    input: Option<PathBuf>,
    #[command(flatten)]
    provider: ProviderArgs,
    #[arg(long, default_value_t = 100)]
    pairs: usize,
    #[arg(long, default_value_t = 4)]
    max_n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct JsdArgs {
    /// Reference corpus JSONL.
    #[arg(long)]
    corpus: PathBuf,
    /// Directory of corpus-format `<condition>.jsonl` files.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = keychord::evalkit::MIN_CONDITION_SIZE)]
    min_size: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TablesArgs {
    /// Use the shipped corpora, models and mock fixtures.
    #[arg(long)]
    fixtures: bool,
    #[arg(long, default_value = "data")]
    data: PathBuf,
    #[arg(long, default_value = "data/models")]
    models: PathBuf,
    #[arg(long, default_value = "fixtures")]
    fixture_dir: PathBuf,
    #[arg(long)]
    llm_config: Option<PathBuf>,
    /// Progressions per coherence condition.
    #[arg(long, default_value_t = keychord::evalkit::MIN_CONDITION_SIZE)]
    size: usize,
    /// Set pairs for the diversity table.
    #[arg(long, default_value_t = 10)]
    pairs: usize,
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the bind address from the config.
    #[arg(long)]
    bind: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Vocab(a) => commands::vocab(a),
        Command::Train(a) => commands::train(a),
        Command::Calibrate(a) => commands::calibrate(a),
        Command::Generate(a) => commands::generate(a),
        Command::Eval(EvalCommand::SelfBleu(a)) => commands::self_bleu(a),
        Command::Eval(EvalCommand::Jsd(a)) => commands::jsd(a),
        Command::Eval(EvalCommand::Tables(a)) => commands::tables(a),
        Command::Serve(a) => commands::serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
