use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::parser::ParsedAnswer;
use crate::scalar::Scalar;

/// One scored event-recognition answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErJudgement {
    pub clip_id: String,
    pub template_id: String,
    pub turn_index: usize,
    pub gold: ParsedAnswer,
    pub predicted: ParsedAnswer,
    pub is_true_event: bool,
}

impl ErJudgement {
    /// A true event needs the same variant and, for choices, the same
    /// canonical label. Unparseable predictions never count.
    pub fn judge(
        clip_id: impl Into<String>,
        template_id: impl Into<String>,
        turn_index: usize,
        gold: ParsedAnswer,
        predicted: ParsedAnswer,
    ) -> Self {
        let is_true_event = !predicted.is_unparseable() && predicted == gold;
        Self {
            clip_id: clip_id.into(),
            template_id: template_id.into(),
            turn_index,
            gold,
            predicted,
            is_true_event,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArResult<T> {
    pub true_events: u64,
    pub false_events: u64,
    pub ar: T,
}

impl<T: Scalar> ArResult<T> {
    /// Builds the result from raw counts; errors when both are zero.
    pub fn from_counts(true_events: u64, false_events: u64) -> Result<Self, MetricsError> {
        let total = true_events
            .checked_add(false_events)
            .ok_or(MetricsError::Overflow)?;
        if total == 0 {
            return Err(MetricsError::EmptyInput("accuracy rate"));
        }
        let ar = T::from_u64(true_events).expect("count fits") / T::from_u64(total).expect("count fits");
        Ok(Self {
            true_events,
            false_events,
            ar,
        })
    }

    pub fn total(&self) -> u64 {
        self.true_events + self.false_events
    }

    /// The rate as an exact fraction.
    pub fn exact(&self) -> Ratio<u64> {
        Ratio::new(self.true_events, self.total())
    }
}

/// AR = true events / (false events + true events).
pub fn accuracy_rate<T: Scalar>(judgements: &[ErJudgement]) -> Result<ArResult<T>, MetricsError> {
    let true_events = judgements.iter().filter(|j| j.is_true_event).count() as u64;
    let false_events = judgements.len() as u64 - true_events;
    ArResult::from_counts(true_events, false_events)
}
