//! Accuracy rate, corpus BLEU and BERTScore.
//!
//! All metric types are generic over the floating-point [`Scalar`]; the
//! crate root exposes `f64` aliases.
//!
//! [`Scalar`]: crate::Scalar

mod accuracy;
mod bertscore;
mod bleu;
mod embedding;

use thiserror::Error;

pub use accuracy::{accuracy_rate, ArResult, ErJudgement};
pub use bertscore::{bert_score, corpus_bert_score, mean_scores, BertScoreResult};
pub use bleu::{corpus_bleu, tokenize_13a, BleuResult, BleuStats, MAX_NGRAM_ORDER};
pub use embedding::EmbeddingMatrix;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("{0} is undefined for empty input")]
    EmptyInput(&'static str),
    #[error("{hypotheses} hypotheses but {references} references")]
    LengthMismatch { hypotheses: usize, references: usize },
    #[error("embedding dimension mismatch: hypothesis {hyp}, reference {reference}")]
    DimensionMismatch { hyp: usize, reference: usize },
    #[error("malformed embedding matrix: {0}")]
    Shape(String),
    #[error("event counts overflow")]
    Overflow,
}
