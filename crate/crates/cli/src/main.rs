mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use psl_core::context_engine::RetrievalMode;

#[derive(Parser, Debug)]
#[command(name = "psl", version, about = "Protein question answering with retrieved in-context exemplars")]
pub struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed recorded in output headers and used by the mock backend.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Chat backend: `openai` talks to an OpenAI-compatible endpoint at
    /// $PSL_BASE_URL, `mock` answers offline.
    #[arg(long, global = true, value_enum, default_value_t = Backend::Openai)]
    pub backend: Backend,
    /// Run data-parallel loops on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Only warnings and errors on stderr.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Backend {
    Openai,
    Mock,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Convert a UniProt TSV export to protein JSONL, or a benchmark file to
    /// evaluation items with --mapping.
    Import(ImportArgs),
    /// Count proteins per GO term and prune the DAG into grouping nodes.
    PruneDag(PruneArgs),
    /// Remove redundancy inside every group by identity clustering and IC sampling.
    Dedup(DedupArgs),
    /// Generate the QA corpus from curated proteins.
    GenQa(GenQaArgs),
    /// Build the retrieval index over a QA corpus.
    BuildIndex(BuildIndexArgs),
    /// Answer one question about one sequence.
    Query(QueryArgs),
    /// Score answers against references with ROUGE-L.
    Eval(EvalArgs),
    /// Evaluate across exemplar counts.
    SweepK(SweepArgs),
    /// Evaluate across retrieval modes.
    Ablate(AblateArgs),
    /// Corpus statistics.
    Stats(StatsArgs),
}

#[derive(Args, Debug)]
pub struct ImportArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Built-in benchmark mapping name or a mapping JSON file.
    #[arg(long)]
    pub mapping: Option<String>,
}

#[derive(Args, Debug)]
pub struct PruneArgs {
    #[arg(long)]
    pub obo: Option<PathBuf>,
    #[arg(long)]
    pub proteins: Option<PathBuf>,
    /// Retained groups, one JSON record per line.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub tau0: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub total_count: Option<u64>,
}

#[derive(Args, Debug)]
pub struct DedupArgs {
    #[arg(long)]
    pub obo: Option<PathBuf>,
    #[arg(long)]
    pub proteins: Option<PathBuf>,
    /// Output of prune-dag.
    #[arg(long)]
    pub groups: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-member cluster and sampling decisions.
    #[arg(long)]
    pub provenance: Option<PathBuf>,
    #[arg(long)]
    pub identity: Option<f64>,
    #[arg(long)]
    pub per_group_target: Option<usize>,
    /// Align every pair instead of gating on shared k-mers.
    #[arg(long)]
    pub no_prefilter: bool,
}

#[derive(Args, Debug)]
pub struct GenQaArgs {
    #[arg(long)]
    pub proteins: Option<PathBuf>,
    /// Comma-separated: attr, know, desc, tf.
    #[arg(long)]
    pub types: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to `<out>.ckpt`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Continue from an existing checkpoint instead of starting over.
    #[arg(long)]
    pub resume: bool,
    #[arg(long)]
    pub rejects: Option<PathBuf>,
    /// Directory with attribute.txt, knowledge.txt, descriptive.txt, true_false.txt.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[arg(long)]
    pub retries: Option<u32>,
}

#[derive(Args, Debug)]
pub struct BuildIndexArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub kmer: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct RetrievalArgs {
    /// Prebuilt index from build-index.
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// QA corpus to index on the fly when no --index is given.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// dual, seq, qa or zero.
    #[arg(long)]
    pub mode: Option<RetrievalMode>,
    #[arg(long)]
    pub token_budget: Option<usize>,
}

#[derive(Args, Debug)]
pub struct QueryArgs {
    #[command(flatten)]
    pub retrieval: RetrievalArgs,
    #[arg(long, conflicts_with = "seq_file")]
    pub seq: Option<String>,
    /// Raw or FASTA sequence file.
    #[arg(long)]
    pub seq_file: Option<PathBuf>,
    #[arg(long)]
    pub question: String,
    /// Keeps this protein's own entries out of the context.
    #[arg(long)]
    pub accession: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Print the prompt without calling the model.
    #[arg(long)]
    pub dry_run: bool,
    /// Write the context bundle as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct EvalCommon {
    #[command(flatten)]
    pub retrieval: RetrievalArgs,
    /// Evaluation items JSONL.
    #[arg(long)]
    pub items: Option<PathBuf>,
    /// Report TSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Report JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Per-item answers, scores and context bundles.
    #[arg(long)]
    pub per_item: Option<PathBuf>,
    /// Dataset tag for items without one.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Model tag for report rows.
    #[arg(long)]
    pub model: Option<String>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: EvalCommon,
    /// Overrides the task default (11 for descriptions, 4 for QA).
    #[arg(long)]
    pub k: Option<usize>,
    /// Human ratings CSV: item_id, rater_id, condition, score.
    #[arg(long)]
    pub ratings: Option<PathBuf>,
    #[arg(long, default_value = "with")]
    pub with_condition: String,
    #[arg(long, default_value = "without")]
    pub without_condition: String,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: EvalCommon,
    /// Comma list or inclusive range such as `1..12`.
    #[arg(long, default_value = "1..12")]
    pub ks: String,
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    #[command(flatten)]
    pub common: EvalCommon,
    #[arg(long, default_value = "dual,seq,qa")]
    pub modes: String,
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Optional; supplies superkingdoms.
    #[arg(long)]
    pub proteins: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

fn init_logging(cli: &Cli) {
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => "warn",
        (false, 0) => "info",
        (false, 1) => "debug",
        _ => "trace",
    };
    let env = env_logger::Env::default().default_filter_or(level);
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).format_target(false).try_init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_logging(&cli);
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("psl: {e}");
            e.exit_code()
        }
    }
}
