//! Corpus BLEU with the WMT `13a` tokenizer, exponential smoothing and
//! 4-gram precisions, matching sacreBLEU's default configuration.

use std::collections::HashMap;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::scalar::Scalar;

pub const MAX_NGRAM_ORDER: usize = 4;

/// Stand-in for log(0), same constant the reference scorer uses.
const LOG_ZERO: f64 = -9_999_999_999.0;

static RE_SYMBOLS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"([\{-~\[-`\x20-&\(-\+:-@/])").unwrap());
static RE_PERIOD_COMMA_AFTER_NONDIGIT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"([^0-9])([\.,])").unwrap());
static RE_PERIOD_COMMA_BEFORE_NONDIGIT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"([\.,])([^0-9])").unwrap());
static RE_DASH_AFTER_DIGIT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"([0-9])(-)").unwrap());

/// Python's `str.isspace` also treats the ASCII separators 0x1C-0x1F as
/// whitespace; `char::is_whitespace` does not.
fn is_py_space(c: char) -> bool {
    c.is_whitespace() || ('\u{1c}'..='\u{1f}').contains(&c)
}

/// mteval-v13a tokenization.
pub fn tokenize_13a(line: &str) -> Vec<String> {
    let line = line.trim_end_matches(is_py_space);
    let mut line = line.replace("<skipped>", "").replace("-\n", "").replace('\n', " ");
    if line.contains('&') {
        line = line
            .replace("&quot;", "\"")
            .replace("&amp;", "&")
            .replace("&lt;", "<")
            .replace("&gt;", ">");
    }
    let padded = format!(" {line} ");
    let s = RE_SYMBOLS.replace_all(&padded, " ${1} ");
    let s = RE_PERIOD_COMMA_AFTER_NONDIGIT.replace_all(&s, "${1} ${2} ");
    let s = RE_PERIOD_COMMA_BEFORE_NONDIGIT.replace_all(&s, " ${1} ${2}");
    let s = RE_DASH_AFTER_DIGIT.replace_all(&s, "${1} ${2} ");
    s.split(is_py_space)
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Sufficient statistics for corpus BLEU; they add across sentence pairs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BleuStats {
    pub hyp_len: usize,
    pub ref_len: usize,
    pub correct: [usize; MAX_NGRAM_ORDER],
    pub total: [usize; MAX_NGRAM_ORDER],
}

impl std::ops::AddAssign for BleuStats {
    fn add_assign(&mut self, rhs: Self) {
        self.hyp_len += rhs.hyp_len;
        self.ref_len += rhs.ref_len;
        for n in 0..MAX_NGRAM_ORDER {
            self.correct[n] += rhs.correct[n];
            self.total[n] += rhs.total[n];
        }
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

impl BleuStats {
    pub fn for_pair(hypothesis: &str, reference: &str) -> Self {
        let hyp = tokenize_13a(hypothesis);
        let reference = tokenize_13a(reference);
        let mut stats = BleuStats {
            hyp_len: hyp.len(),
            ref_len: reference.len(),
            ..Default::default()
        };
        for n in 1..=MAX_NGRAM_ORDER {
            let hyp_counts = ngram_counts(&hyp, n);
            let ref_counts = ngram_counts(&reference, n);
            for (gram, &count) in &hyp_counts {
                stats.total[n - 1] += count;
                if let Some(&r) = ref_counts.get(gram) {
                    stats.correct[n - 1] += count.min(r);
                }
            }
        }
        stats
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BleuResult<T> {
    /// 0..=100.
    pub score: T,
    /// n-gram precisions for n = 1..=4, as percentages (smoothed where the
    /// raw count is zero).
    pub precisions: [T; MAX_NGRAM_ORDER],
    pub brevity_penalty: T,
    pub hyp_len: usize,
    pub ref_len: usize,
    pub correct: [usize; MAX_NGRAM_ORDER],
    pub total: [usize; MAX_NGRAM_ORDER],
}

impl<T: Scalar> BleuResult<T> {
    pub fn from_stats(stats: &BleuStats) -> Self {
        let hundred = T::lit(100.0);
        let brevity_penalty = if stats.hyp_len < stats.ref_len {
            if stats.hyp_len > 0 {
                (T::one() - T::count(stats.ref_len) / T::count(stats.hyp_len)).exp()
            } else {
                T::zero()
            }
        } else {
            T::one()
        };

        let mut precisions = [T::zero(); MAX_NGRAM_ORDER];
        let mut result = Self {
            score: T::zero(),
            precisions,
            brevity_penalty,
            hyp_len: stats.hyp_len,
            ref_len: stats.ref_len,
            correct: stats.correct,
            total: stats.total,
        };
        if stats.correct.iter().all(|&c| c == 0) {
            return result;
        }

        let mut smooth = T::one();
        for ((p, &correct), &total) in precisions.iter_mut().zip(&stats.correct).zip(&stats.total) {
            if total == 0 {
                break;
            }
            *p = if correct == 0 {
                smooth = smooth * T::lit(2.0);
                hundred / (smooth * T::count(total))
            } else {
                hundred * T::count(correct) / T::count(total)
            };
        }
        let log_sum: T = precisions
            .iter()
            .map(|&p| if p == T::zero() { T::lit(LOG_ZERO) } else { p.ln() })
            .sum();
        result.precisions = precisions;
        result.score = brevity_penalty * (log_sum / T::count(MAX_NGRAM_ORDER)).exp();
        result
    }
}

/// Corpus-level BLEU: n-gram statistics are pooled over all pairs before the
/// precisions and brevity penalty are computed.
pub fn corpus_bleu<T: Scalar, H: AsRef<str>, R: AsRef<str>>(
    hypotheses: &[H],
    references: &[R],
) -> Result<BleuResult<T>, MetricsError> {
    if hypotheses.len() != references.len() {
        return Err(MetricsError::LengthMismatch {
            hypotheses: hypotheses.len(),
            references: references.len(),
        });
    }
    if hypotheses.is_empty() {
        return Err(MetricsError::EmptyInput("BLEU corpus"));
    }
    let mut stats = BleuStats::default();
    for (h, r) in hypotheses.iter().zip(references) {
        stats += BleuStats::for_pair(h.as_ref(), r.as_ref());
    }
    Ok(BleuResult::from_stats(&stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize_13a(s)
    }

    #[test]
    fn tokenizer_splits_punctuation() {
        assert_eq!(toks("Hello, world!"), ["Hello", ",", "world", "!"]);
        assert_eq!(toks("The car's speed was 3.5 m/s."), ["The", "car's", "speed", "was", "3.5", "m", "/", "s", "."]);
        assert_eq!(toks("1,000 cars"), ["1,000", "cars"]);
        assert_eq!(toks("a 3-leg turn"), ["a", "3", "-", "leg", "turn"]);
        assert_eq!(toks("ego-car"), ["ego-car"]);
        assert_eq!(toks("&quot;hi&quot; &amp; bye"), ["\"", "hi", "\"", "&", "bye"]);
        assert!(toks("   ").is_empty());
    }

    #[test]
    fn identical_corpus_scores_100() {
        let hyps = ["the driver brakes hard at the light", "a truck merges into the left lane"];
        let r: BleuResult<f64> = corpus_bleu(&hyps, &hyps).unwrap();
        assert!((r.score - 100.0).abs() < 1e-9);
        assert_eq!(r.brevity_penalty, 1.0);
    }

    #[test]
    fn no_shared_unigrams_scores_zero() {
        let r: BleuResult<f64> = corpus_bleu(&["the cat sat on mat"], &["a dog ran far away"]).unwrap();
        assert_eq!(r.score, 0.0);
    }

    #[test]
    fn short_hypothesis_without_higher_orders_is_floored() {
        // no 3-grams in the hypothesis at all: log-zero floor drives the score to 0
        let r: BleuResult<f64> = corpus_bleu(&["a b"], &["a b"]).unwrap();
        assert_eq!(r.score, 0.0);
        assert_eq!(r.precisions[0], 100.0);
    }

    #[test]
    fn brevity_penalty_and_smoothing() {
        let r: BleuResult<f64> = corpus_bleu(&["a b c d"], &["a b c d e f"]).unwrap();
        assert!((r.brevity_penalty - (1.0f64 - 6.0 / 4.0).exp()).abs() < 1e-15);
        assert!((r.score - 100.0 * (-0.5f64).exp()).abs() < 1e-9);

        // 4-gram count is zero: smoothed to 100 / (2 * total)
        let r: BleuResult<f64> = corpus_bleu(&["a b c x e"], &["a b c d e"]).unwrap();
        assert_eq!(r.correct, [4, 2, 1, 0]);
        assert_eq!(r.precisions[3], 100.0 / (2.0 * 2.0));
    }

    #[test]
    fn errors() {
        assert!(matches!(
            corpus_bleu::<f64, _, _>(&["a"], &["a", "b"]),
            Err(MetricsError::LengthMismatch { .. })
        ));
        assert!(matches!(
            corpus_bleu::<f64, &str, &str>(&[], &[]),
            Err(MetricsError::EmptyInput(_))
        ));
    }

    #[test]
    fn f32_agrees_with_f64() {
        let h = ["the driver slows down before the intersection"];
        let r = ["the driver slows down near the busy intersection"];
        let a: BleuResult<f64> = corpus_bleu(&h, &r).unwrap();
        let b: BleuResult<f32> = corpus_bleu(&h, &r).unwrap();
        assert!((a.score - b.score as f64).abs() < 1e-3);
    }
}
