use std::collections::HashMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::client::ModelClient;
use super::wire::{ChatTurn, DecodeParams, InferenceRequest, Media};
use super::GatewayError;
use crate::catalog::{Catalog, ExpansionMode, InstructionInstance};
use crate::parser::{parse_response, NormalizationRuleSet, ParsedAnswer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DialogueOptions {
    pub mode: ExpansionMode,
    /// Send earlier question/answer pairs as context with each new question.
    pub include_history: bool,
    pub params: DecodeParams,
}

impl Default for DialogueOptions {
    fn default() -> Self {
        Self {
            mode: ExpansionMode::Exhaustive,
            include_history: true,
            params: DecodeParams::default(),
        }
    }
}

/// What one clip's visual (and optional audio) input looks like on the wire.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipMedia {
    pub media: Media,
    pub audio: Option<String>,
    /// Frame count the active merge policy prescribes.
    pub expected_frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub instance: InstructionInstance,
    pub question: String,
    pub raw_response: String,
    pub normalized: String,
    pub parsed: ParsedAnswer,
    pub latency_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueTranscript {
    pub clip_id: String,
    pub entries: Vec<TranscriptEntry>,
}

impl DialogueTranscript {
    pub fn failures(&self) -> usize {
        self.entries.iter().filter(|e| e.error.is_some()).count()
    }
}

/// Asks each instruction as one user turn, in order, and parses the replies.
///
/// In conditional mode a follow-up is only asked when its parent parsed as
/// affirmative. A failed turn is recorded as unparseable (with the error
/// kind) and left out of later context; the dialogue carries on.
pub fn run_dialogue(
    client: &dyn ModelClient,
    clip: &ClipMedia,
    instances: &[InstructionInstance],
    catalog: &Catalog,
    rules: &NormalizationRuleSet,
    options: &DialogueOptions,
) -> Result<DialogueTranscript, GatewayError> {
    let clip_id = instances.first().map(|i| i.clip_id.clone()).unwrap_or_default();
    for pair in instances.windows(2) {
        if pair[1].turn_index <= pair[0].turn_index {
            return Err(GatewayError::Precondition("instances must be ordered by turn_index".into()));
        }
    }
    if let Some(i) = instances.iter().find(|i| i.clip_id != clip_id) {
        return Err(GatewayError::Precondition(format!(
            "instances mix clips {clip_id:?} and {:?}",
            i.clip_id
        )));
    }

    let mut history: Vec<ChatTurn> = Vec::new();
    let mut answers: HashMap<usize, ParsedAnswer> = HashMap::new();
    let mut entries = Vec::with_capacity(instances.len());

    for instance in instances {
        let template = catalog.get(&instance.template_id).ok_or_else(|| {
            GatewayError::Precondition(format!("unknown template {:?}", instance.template_id))
        })?;

        let gated = options.mode == ExpansionMode::Conditional && instance.parent_turn.is_some();
        if gated {
            let parent_ok = instance
                .parent_turn
                .and_then(|p| answers.get(&p))
                .is_some_and(ParsedAnswer::is_affirmative);
            if !parent_ok {
                continue;
            }
        }

        let mut turns = if options.include_history {
            history.clone()
        } else {
            Vec::new()
        };
        turns.push(ChatTurn::user(template.text.clone()));
        let request = InferenceRequest::new(
            clip.media.clone(),
            clip.audio.clone(),
            turns,
            options.params,
            clip.expected_frames,
        )?;

        let started = Instant::now();
        let result = client.query_model(&request);
        let latency_ms = started.elapsed().as_millis() as u64;

        let entry = match result {
            Ok(raw) => {
                let (normalized, parsed) = parse_response(&raw, template, rules);
                history.push(ChatTurn::user(template.text.clone()));
                history.push(ChatTurn::assistant(raw.clone()));
                TranscriptEntry {
                    instance: instance.clone(),
                    question: template.text.clone(),
                    raw_response: raw,
                    normalized,
                    parsed,
                    latency_ms,
                    error: None,
                }
            }
            Err(err) => TranscriptEntry {
                instance: instance.clone(),
                question: template.text.clone(),
                raw_response: String::new(),
                normalized: String::new(),
                parsed: ParsedAnswer::Unparseable(err.kind().to_string()),
                latency_ms,
                error: Some(err.to_string()),
            },
        };
        answers.insert(instance.turn_index, entry.parsed.clone());
        entries.push(entry);
    }

    Ok(DialogueTranscript { clip_id, entries })
}
