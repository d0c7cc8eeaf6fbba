//! First-pass question answering: candidate lists, the retrieval baseline, and recall.

mod candidates;
mod recall;
mod tfidf;

use thiserror::Error;

pub use candidates::{Candidate, CandidateGenerator, CandidateList, MASS_TOLERANCE};
pub use recall::{recall_at_ks, topk_recall};
pub use tfidf::{build_index, tokenize, QaConfig, TfidfGenerator, TfidfIndex};

#[derive(Debug, Error)]
pub enum QaError {
    #[error("cannot build an index from an empty corpus")]
    EmptyCorpus,
    #[error("invalid candidate list: {0}")]
    InvalidCandidates(String),
    #[error("evaluation set is empty")]
    EmptyEval,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("{0}")]
    Config(String),
    #[error("index cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
