//! `s2v`: homophone forensics, vocabulary audit, similarity benchmarks,
//! MDS projection, and desk-scale Speech2Vec training.
//!
//! Exit codes: 0 success, 1 computation error, 2 usage or I/O error.

mod commands;
mod fail;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use s2v_core::forensics::DEFAULT_MARGIN;
use s2v_core::speech2vec::{OptimizerKind, Pooling};

#[derive(Parser, Debug)]
#[command(
    name = "s2v",
    version,
    about = "Speech2Vec forensics and desk-scale reproduction toolkit"
)]
struct Cli {
    /// Seed for every random draw in this invocation.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory for output files; created if missing.
    #[arg(long, global = true, default_value = "s2v_out")]
    out_dir: PathBuf,
    /// Suppress human-readable tables on stdout and informational logs.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Homophone inspection of an embedding table against a random-pair baseline.
    Inspect(InspectArgs),
    /// Transcript word counts and missing-word diff against a reference vocabulary.
    Vocab(VocabArgs),
    /// Spearman evaluation on a directory of word-similarity benchmarks.
    Bench(BenchArgs),
    /// Train the skip-gram encoder-decoder on a spoken corpus.
    Train(TrainArgs),
    /// Classical MDS of word embeddings or per-occurrence encodings.
    Mds(MdsArgs),
    /// Compare analytic gradients with central finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Debug)]
struct InspectArgs {
    /// Embedding table in word2vec text format.
    #[arg(long)]
    embeddings: PathBuf,
    /// Homophone pairs, one `word,word` or `word<TAB>word` per line.
    #[arg(long)]
    homophones: PathBuf,
    /// Number of random word pairs in the baseline.
    #[arg(long, default_value_t = 1000)]
    random_n: u64,
    /// Verdict margin between homophone and random means.
    #[arg(long, default_value_t = DEFAULT_MARGIN)]
    margin: f64,
    /// Words whose nearest neighbors are listed (repeatable).
    #[arg(long = "query")]
    queries: Vec<String>,
    /// Neighbors listed per query.
    #[arg(long, default_value_t = 10)]
    k: usize,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("reference").required(true).args(["embeddings", "reference_vocab"]))]
struct VocabArgs {
    /// Embedding table whose words form the reference vocabulary.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Reference vocabulary file, one word per line.
    #[arg(long)]
    reference_vocab: Option<PathBuf>,
    /// Transcript files or directories (directories are searched for *.txt).
    #[arg(long, num_args = 1.., required = true)]
    transcripts: Vec<PathBuf>,
    /// Keep words occurring at least this many times.
    #[arg(long, default_value_t = 1)]
    min_count: u64,
    /// Treat the first token of every line as an utterance id. Always on for
    /// files named *.trans.txt.
    #[arg(long)]
    utterance_ids: bool,
    /// Also count benchmark pairs not covered by the filtered vocabulary.
    #[arg(long)]
    benchmarks_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    embeddings: PathBuf,
    /// Directory of benchmark files (*.txt, *.csv, *.tsv); the file stem names the benchmark.
    #[arg(long)]
    benchmarks_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OptimizerArg {
    Sgd,
    Adam,
}

impl From<OptimizerArg> for OptimizerKind {
    fn from(o: OptimizerArg) -> Self {
        match o {
            OptimizerArg::Sgd => OptimizerKind::Sgd,
            OptimizerArg::Adam => OptimizerKind::Adam,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PoolingArg {
    /// Final forward and backward hidden states.
    Final,
    /// Mean of encoder outputs over valid frames.
    Mean,
}

impl From<PoolingArg> for Pooling {
    fn from(p: PoolingArg) -> Self {
        match p {
            PoolingArg::Final => Pooling::FinalStates,
            PoolingArg::Mean => Pooling::MeanPool,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    /// Context window on each side.
    #[arg(long, default_value_t = 3)]
    window: usize,
    /// Embedding dimension (also the decoder hidden size).
    #[arg(long, default_value_t = 50)]
    dim: usize,
    /// Hidden size of each encoder direction.
    #[arg(long, default_value_t = 50)]
    hidden: usize,
    #[arg(long, value_enum, default_value_t = PoolingArg::Final)]
    pooling: PoolingArg,
    /// One decoder shared by all context offsets.
    #[arg(long)]
    shared_decoder: bool,
    /// Feed the embedding to the decoder at every step.
    #[arg(long)]
    feed_embedding: bool,
}

#[derive(Args, Debug, Clone)]
struct SyntheticArgs {
    /// Generate a synthetic spoken corpus instead of reading one.
    #[arg(long, conflicts_with = "corpus")]
    synthetic: bool,
    #[arg(long, default_value_t = 100)]
    vocab: usize,
    /// Homophone pairs as a fraction of the vocabulary.
    #[arg(long, default_value_t = 0.1)]
    homophone_fraction: f64,
    #[arg(long, default_value_t = 5000)]
    sentences: usize,
    #[arg(long, default_value_t = 6)]
    sentence_len: usize,
    /// Per-coefficient Gaussian noise added to every occurrence.
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    /// Pairs per synthetic benchmark.
    #[arg(long, default_value_t = 60)]
    bench_pairs: usize,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Spoken corpus file.
    #[arg(long, required_unless_present = "synthetic")]
    corpus: Option<PathBuf>,
    #[command(flatten)]
    synthetic: SyntheticArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Sgd)]
    optimizer: OptimizerArg,
    /// Frames per word after padding or truncation.
    #[arg(long, default_value_t = 20)]
    fixed_frames: usize,
    /// Drop words occurring fewer than this many times.
    #[arg(long, default_value_t = 4)]
    min_count: usize,
    /// Benchmark evaluation cadence in epochs; 0 disables it.
    #[arg(long, default_value_t = 1)]
    eval_every: usize,
    /// Benchmarks evaluated during training. Synthetic runs default to the
    /// generated ones.
    #[arg(long)]
    benchmarks_dir: Option<PathBuf>,
    /// Homophone list for the post-training inspection (synthetic runs use
    /// the generated one).
    #[arg(long)]
    homophones: Option<PathBuf>,
    /// Random pairs in the post-training inspection.
    #[arg(long, default_value_t = 1000)]
    random_n: u64,
}

#[derive(Args, Debug)]
struct MdsArgs {
    /// Embedding table; one point per listed word.
    #[arg(long, conflicts_with_all = ["checkpoint", "corpus"])]
    embeddings: Option<PathBuf>,
    /// Trained checkpoint; one point per sampled occurrence in --corpus.
    #[arg(long, requires = "corpus")]
    checkpoint: Option<PathBuf>,
    #[arg(long, requires = "checkpoint")]
    corpus: Option<PathBuf>,
    /// Words to project, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    words: Vec<String>,
    /// Occurrences sampled per word (seeded).
    #[arg(long, default_value_t = 50)]
    per_word_cap: usize,
    #[arg(long, default_value_t = 20)]
    fixed_frames: usize,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    /// Number of seeded random models; model k uses seed + k.
    #[arg(long, default_value_t = 1)]
    models: u64,
    #[arg(long, default_value_t = 1e-4)]
    epsilon: f64,
    /// Maximum relative error accepted.
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    #[arg(long, default_value_t = 1)]
    window: usize,
    #[arg(long, default_value_t = 4)]
    dim: usize,
    #[arg(long, default_value_t = 4)]
    hidden: usize,
    #[arg(long, default_value_t = 4)]
    fixed_frames: usize,
    #[arg(long, default_value_t = 2)]
    sentences: usize,
    #[arg(long, default_value_t = 3)]
    sentence_len: usize,
    #[arg(long, value_enum, default_value_t = PoolingArg::Final)]
    pooling: PoolingArg,
    #[arg(long)]
    shared_decoder: bool,
    #[arg(long)]
    feed_embedding: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
