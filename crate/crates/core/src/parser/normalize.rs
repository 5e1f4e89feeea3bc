use std::fs;
use std::path::Path;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use super::ParserError;

const DEFAULT_RULES: &str = include_str!("default_rules.json");

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    #[serde(default)]
    version: String,
    greeting_patterns: Vec<String>,
    #[serde(default)]
    closing_patterns: Vec<String>,
    #[serde(default)]
    role_prefixes: Vec<String>,
}

/// Boilerplate-stripping rules applied to raw model text.
///
/// Greeting patterns are anchored at the start of the text and removed
/// repeatedly; closing patterns are anchored at the end. Role prefixes are
/// matched case-insensitively as literal prefixes.
#[derive(Debug, Clone)]
pub struct NormalizationRuleSet {
    version: String,
    greetings: Vec<Regex>,
    closings: Vec<Regex>,
    role_prefixes: Vec<String>,
}

impl NormalizationRuleSet {
    pub fn from_json(text: &str) -> Result<Self, ParserError> {
        let file: RuleFile = serde_json::from_str(text).map_err(|e| ParserError::Rules(e.to_string()))?;
        let compile = |pattern: &str, anchor: &str| {
            let source = match anchor {
                "start" => format!(r"^(?:{pattern})\s*"),
                _ => format!(r"\s*(?:{pattern})$"),
            };
            RegexBuilder::new(&source)
                .case_insensitive(true)
                .build()
                .map_err(|e| ParserError::Rules(format!("pattern {pattern:?}: {e}")))
        };
        let greetings = file
            .greeting_patterns
            .iter()
            .map(|p| compile(p, "start"))
            .collect::<Result<Vec<_>, _>>()?;
        let closings = file
            .closing_patterns
            .iter()
            .map(|p| compile(p, "end"))
            .collect::<Result<Vec<_>, _>>()?;
        let role_prefixes = file
            .role_prefixes
            .iter()
            .map(|p| p.trim().to_lowercase())
            .filter(|p| !p.is_empty())
            .collect();
        Ok(Self {
            version: file.version,
            greetings,
            closings,
            role_prefixes,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ParserError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| ParserError::Rules(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn default_json() -> &'static str {
        DEFAULT_RULES
    }
}

impl Default for NormalizationRuleSet {
    fn default() -> Self {
        Self::from_json(DEFAULT_RULES).expect("embedded normalization rules are valid")
    }
}

/// Strips role prefixes, leading greetings, and trailing pleasantries, and
/// collapses whitespace. Runs to a fixpoint, so it is idempotent.
pub fn normalize(raw: &str, rules: &NormalizationRuleSet) -> String {
    let mut text = collapse_whitespace(raw);
    loop {
        let before = text.len();
        text = strip_once(&text, rules);
        if text.len() == before {
            return text;
        }
    }
}

fn strip_once(text: &str, rules: &NormalizationRuleSet) -> String {
    let mut out = text;
    for prefix in &rules.role_prefixes {
        if out.len() >= prefix.len()
            && out.is_char_boundary(prefix.len())
            && out[..prefix.len()].eq_ignore_ascii_case(prefix)
        {
            out = out[prefix.len()..].trim_start();
        }
    }
    for re in &rules.greetings {
        if let Some(m) = re.find(out) {
            out = &out[m.end()..];
        }
    }
    for re in &rules.closings {
        if let Some(m) = re.find(out) {
            out = &out[..m.start()];
        }
    }
    out.trim().to_string()
}

fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}
