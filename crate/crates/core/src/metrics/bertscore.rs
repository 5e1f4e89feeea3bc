use serde::{Deserialize, Serialize};

use super::embedding::EmbeddingMatrix;
use super::MetricsError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BertScoreResult<T> {
    pub precision: T,
    pub recall: T,
    pub f1: T,
}

impl<T: Scalar> BertScoreResult<T> {
    /// F1 is the harmonic mean, defined as 0 when precision + recall <= 0.
    pub fn from_precision_recall(precision: T, recall: T) -> Self {
        let sum = precision + recall;
        let f1 = if sum > T::zero() {
            T::lit(2.0) * precision * recall / sum
        } else {
            T::zero()
        };
        Self {
            precision,
            recall,
            f1,
        }
    }
}

/// Greedy-matching BERTScore between one hypothesis and one reference.
///
/// Every hypothesis token is matched to its most similar reference token
/// (precision) and vice versa (recall), using cosine similarity. No idf
/// weighting, no baseline rescaling.
pub fn bert_score<T: Scalar>(
    hyp: &EmbeddingMatrix<T>,
    reference: &EmbeddingMatrix<T>,
) -> Result<BertScoreResult<T>, MetricsError> {
    if hyp.is_empty() || reference.is_empty() {
        return Err(MetricsError::EmptyInput("embedding matrix"));
    }
    if hyp.dim() != reference.dim() {
        return Err(MetricsError::DimensionMismatch {
            hyp: hyp.dim(),
            reference: reference.dim(),
        });
    }
    // rows flagged unit-norm may still be off by up to 1e-6
    let h = hyp.normalized();
    let r = reference.normalized();

    let neg_inf = T::neg_infinity();
    let mut best_for_hyp = vec![neg_inf; h.len()];
    let mut best_for_ref = vec![neg_inf; r.len()];
    for (i, hv) in h.rows().enumerate() {
        for (j, rv) in r.rows().enumerate() {
            let sim = hv.iter().zip(rv).map(|(&a, &b)| a * b).sum::<T>();
            best_for_hyp[i] = best_for_hyp[i].max(sim);
            best_for_ref[j] = best_for_ref[j].max(sim);
        }
    }
    let precision = best_for_hyp.iter().copied().sum::<T>() / T::count(h.len());
    let recall = best_for_ref.iter().copied().sum::<T>() / T::count(r.len());
    Ok(BertScoreResult::from_precision_recall(precision, recall))
}

/// Unweighted mean of per-pair precision, recall and F1 (F1 averaged, not
/// recomputed from the averaged precision and recall).
pub fn corpus_bert_score<T: Scalar>(
    pairs: &[(EmbeddingMatrix<T>, EmbeddingMatrix<T>)],
) -> Result<BertScoreResult<T>, MetricsError> {
    let scores = pairs
        .iter()
        .map(|(h, r)| bert_score(h, r))
        .collect::<Result<Vec<_>, _>>()?;
    mean_scores(&scores)
}

/// Mean over already-computed pair scores.
pub fn mean_scores<T: Scalar>(scores: &[BertScoreResult<T>]) -> Result<BertScoreResult<T>, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::EmptyInput("BERTScore corpus"));
    }
    let n = T::count(scores.len());
    Ok(BertScoreResult {
        precision: scores.iter().map(|s| s.precision).sum::<T>() / n,
        recall: scores.iter().map(|s| s.recall).sum::<T>() / n,
        f1: scores.iter().map(|s| s.f1).sum::<T>() / n,
    })
}
