//! Turning raw model text into structured answers.

mod classify;
mod normalize;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{InstructionTemplate, TemplateKind};

pub use classify::{classify_binary, classify_choice, classify_explanation};
pub use normalize::{normalize, NormalizationRuleSet};

#[derive(Debug, Error)]
pub enum ParserError {
    #[error("invalid normalization rules: {0}")]
    Rules(String),
}

/// A model response after cleanup and classification.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParsedAnswer {
    Affirmative,
    Negative,
    Choice(String),
    Explanation(String),
    Unparseable(String),
}

impl ParsedAnswer {
    pub fn is_affirmative(&self) -> bool {
        matches!(self, ParsedAnswer::Affirmative)
    }

    pub fn is_unparseable(&self) -> bool {
        matches!(self, ParsedAnswer::Unparseable(_))
    }

    /// Compact label used in CSV output and text tables.
    pub fn label(&self) -> String {
        match self {
            ParsedAnswer::Affirmative => "yes".into(),
            ParsedAnswer::Negative => "no".into(),
            ParsedAnswer::Choice(label) => label.clone(),
            ParsedAnswer::Explanation(_) => "explanation".into(),
            ParsedAnswer::Unparseable(_) => "unparseable".into(),
        }
    }
}

impl fmt::Display for ParsedAnswer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParsedAnswer::Explanation(text) => write!(f, "explanation({text})"),
            ParsedAnswer::Unparseable(raw) => write!(f, "unparseable({raw})"),
            other => f.write_str(&other.label()),
        }
    }
}

/// Normalizes `raw` and classifies it according to the template's kind.
/// Returns the normalized text alongside the answer.
pub fn parse_response(
    raw: &str,
    template: &InstructionTemplate,
    rules: &NormalizationRuleSet,
) -> (String, ParsedAnswer) {
    let text = normalize(raw, rules);
    let answer = match &template.kind {
        TemplateKind::Binary if template.free_text => classify_explanation(&text),
        TemplateKind::Binary => classify_binary(&text),
        TemplateKind::Categorical { choices } => classify_choice(&text, choices),
        TemplateKind::Open => classify_explanation(&text),
    };
    (text, answer)
}
