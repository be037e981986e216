//! Answer scoring, rater agreement, k-sweeps, mode ablations and corpus
//! statistics.

mod agreement;
mod dataset;
mod rouge;
mod runner;
mod stats;

pub use agreement::{
    krippendorff_alpha, pairwise_winloss, read_ratings_csv, summarize_ratings, AlphaResult, HumanSummary, Rating,
    RatingSet, WinLoss,
};
pub use dataset::{import_dataset, read_eval_items, DatasetSpec, EvalItem, SourceFormat};
pub use rouge::{rouge_l, rouge_l_tokens, RougeScore};
pub use runner::{ablate, evaluate, k_sweep, EvalOptions, EvalReport, EvalRow, EvalRun, ItemResult, DEFAULT_SWEEP};
pub use stats::{
    corpus_stats, CorpusStats, LengthBin, REFERENCE_ATTRIBUTE_COUNT, REFERENCE_SEQUENCE_SHARE, REFERENCE_TRUE_FALSE_COUNT,
};

use crate::context_engine::ContextError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("ratings: {0}")]
    Ratings(String),
    #[error("krippendorff alpha needs at least 2 units with 2+ ratings, got {0}")]
    InsufficientRatings(usize),
    #[error("no paired ratings for win/loss")]
    NoPairs,
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("no evaluation items")]
    NoItems,
    #[error("item {id}: {source}")]
    Item {
        id: String,
        #[source]
        source: ContextError,
    },
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Jsonl(#[from] crate::jsonl::JsonlError),
}
