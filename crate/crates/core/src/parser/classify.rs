use std::sync::LazyLock;

use regex::Regex;

use super::ParsedAnswer;
use crate::catalog::Choice;

const AFFIRMATIVE_LEADS: &[&str] = &["yes", "yeah", "yep", "affirmative", "correct", "indeed"];
const NEGATIVE_LEADS: &[&str] = &["no", "nope", "negative", "not", "never", "none"];

static UNCERTAIN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(?:hard|difficult|impossible) to (?:tell|say|determine|see)\b|\bunclear\b|\b(?:not|unsure) (?:sure|certain)\b|\b(?:cannot|can't|can not|unable to) (?:be )?(?:determine|determined|tell|say|confirm)\b|\binsufficient information\b|\bno way to (?:tell|know)\b|\b(?:maybe|perhaps|possibly)\b",
    )
    .unwrap()
});

static NEGATION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(?:no|not|never|none|nobody|nothing|neither|nor|without)\b|n't\b").unwrap()
});

static AFFIRMATION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(?:yes|indeed|definitely|clearly|visible|appears|seems|there (?:is|are|was|were)|i (?:can )?see|is|are|was|were|did|does|do|has|had|have|can)\b",
    )
    .unwrap()
});

fn leading_word(text: &str) -> Option<String> {
    let word: String = text
        .trim_start()
        .chars()
        .take_while(|c| c.is_alphanumeric() || *c == '\'')
        .collect();
    (!word.is_empty()).then(|| word.to_lowercase())
}

/// Yes/no classification of already-normalized text.
///
/// A leading yes/no token decides immediately. Otherwise hedging phrases
/// make the answer unparseable, any negation cue makes it negative, and a
/// plain declarative statement (an affirming cue, or at least three words)
/// is affirmative.
pub fn classify_binary(text: &str) -> ParsedAnswer {
    let text = text.trim();
    if let Some(word) = leading_word(text) {
        if AFFIRMATIVE_LEADS.contains(&word.as_str()) {
            return ParsedAnswer::Affirmative;
        }
        if NEGATIVE_LEADS.contains(&word.as_str()) {
            return ParsedAnswer::Negative;
        }
    }
    if UNCERTAIN.is_match(text) {
        return ParsedAnswer::Unparseable(text.to_string());
    }
    if NEGATION.is_match(text) {
        return ParsedAnswer::Negative;
    }
    if AFFIRMATION.is_match(text) || text.split_whitespace().count() >= 3 {
        return ParsedAnswer::Affirmative;
    }
    ParsedAnswer::Unparseable(text.to_string())
}

/// Case-insensitive whole-word match against the choice labels (and their
/// aliases). The earliest match in the text wins; at the same position the
/// longer match wins, then catalog order.
pub fn classify_choice(text: &str, choices: &[Choice]) -> ParsedAnswer {
    let haystack = text.to_lowercase();
    // (position, -length, catalog index)
    let mut best: Option<(usize, std::cmp::Reverse<usize>, usize)> = None;
    for (index, choice) in choices.iter().enumerate() {
        for name in choice.names() {
            let needle = name.to_lowercase();
            if let Some(pos) = find_whole_word(&haystack, &needle) {
                let key = (pos, std::cmp::Reverse(needle.len()), index);
                if best.is_none_or(|b| key < b) {
                    best = Some(key);
                }
            }
        }
    }
    match best {
        Some((_, _, index)) => ParsedAnswer::Choice(choices[index].label.clone()),
        None => ParsedAnswer::Unparseable(text.trim().to_string()),
    }
}

/// Explanations only need to survive normalization non-empty.
pub fn classify_explanation(text: &str) -> ParsedAnswer {
    let text = text.trim();
    if text.is_empty() {
        ParsedAnswer::Unparseable(String::new())
    } else {
        ParsedAnswer::Explanation(text.to_string())
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn find_whole_word(haystack: &str, needle: &str) -> Option<usize> {
    if needle.is_empty() {
        return None;
    }
    let mut start = 0;
    while let Some(offset) = haystack[start..].find(needle) {
        let pos = start + offset;
        let end = pos + needle.len();
        let before_ok = haystack[..pos].chars().next_back().is_none_or(|c| !is_word_char(c));
        let after_ok = haystack[end..].chars().next().is_none_or(|c| !is_word_char(c));
        if before_ok && after_ok {
            return Some(pos);
        }
        start = pos + haystack[pos..].chars().next().map_or(1, char::len_utf8);
    }
    None
}
