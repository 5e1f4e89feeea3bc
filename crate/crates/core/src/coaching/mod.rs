//! Turns a dialogue transcript into detected events, matches them against a
//! coaching database and writes driver and manager reports.

mod db;
mod report;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

pub use db::{default_db_json, CoachingDb, CoachingEntry, Severity};
pub use report::{compose_report, CoachingReport, GeneratedBy, ReportEvent};

use crate::catalog::{Catalog, TemplateKind};
use crate::gateway::{DialogueTranscript, TranscriptEntry};
use crate::parser::ParsedAnswer;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CoachingError {
    #[error("{0}")]
    Io(String),
    #[error("coaching db parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("duplicate event_label {0:?} in coaching db")]
    DuplicateLabel(String),
    #[error("invalid coaching db: {0}")]
    Invalid(String),
    #[error("transcript refers to template {0:?}, which is not in the catalog")]
    UnknownTemplate(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedEvent {
    pub event_label: String,
    pub evidence: TranscriptEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SituationRecord {
    pub clip_id: String,
    pub detected_events: Vec<DetectedEvent>,
    /// Categorical template id to chosen label.
    pub context_labels: BTreeMap<String, String>,
    /// Open-question template id to explanation.
    pub open_answers: BTreeMap<String, String>,
}

impl SituationRecord {
    pub fn event(&self, label: &str) -> Option<&DetectedEvent> {
        self.detected_events.iter().find(|e| e.event_label == label)
    }
}

/// Affirmative answers to event-labelled templates become detected events,
/// categorical choices become context labels and open-question
/// explanations are kept as written.
pub fn detect_events(transcript: &DialogueTranscript, catalog: &Catalog) -> Result<SituationRecord, CoachingError> {
    let mut record = SituationRecord {
        clip_id: transcript.clip_id.clone(),
        detected_events: Vec::new(),
        context_labels: BTreeMap::new(),
        open_answers: BTreeMap::new(),
    };
    for entry in &transcript.entries {
        let id = &entry.instance.template_id;
        let template = catalog.get(id).ok_or_else(|| CoachingError::UnknownTemplate(id.clone()))?;
        match (&template.kind, &entry.parsed) {
            (TemplateKind::Binary, ParsedAnswer::Affirmative) => {
                if let Some(label) = &template.event_label {
                    if record.event(label).is_none() {
                        record.detected_events.push(DetectedEvent {
                            event_label: label.clone(),
                            evidence: entry.clone(),
                        });
                    }
                }
            }
            (TemplateKind::Categorical { .. }, ParsedAnswer::Choice(label)) => {
                record.context_labels.insert(id.clone(), label.clone());
            }
            (TemplateKind::Open, ParsedAnswer::Explanation(text)) => {
                record.open_answers.insert(id.clone(), text.clone());
            }
            _ => {}
        }
    }
    Ok(record)
}

/// Database entries for the detected events, most severe first, ties by
/// label. Events the database does not know are skipped with a warning.
pub fn align_with_db(record: &SituationRecord, db: &CoachingDb) -> Vec<CoachingEntry> {
    let mut entries: Vec<CoachingEntry> = record
        .detected_events
        .iter()
        .filter_map(|event| {
            let entry = db.get(&event.event_label);
            if entry.is_none() {
                warn!(clip = %record.clip_id, label = %event.event_label, "event has no coaching entry");
            }
            entry.cloned()
        })
        .collect();
    entries.sort_by(|a, b| {
        a.severity
            .rank()
            .cmp(&b.severity.rank())
            .then_with(|| a.event_label.cmp(&b.event_label))
    });
    entries
}
