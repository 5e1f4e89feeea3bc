use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use tracing::warn;

use super::{CoachingDb, CoachingEntry, SituationRecord, Severity};
use crate::gateway::{ChatTurn, DecodeParams, InferenceRequest, Media, ModelClient};

pub const NO_EVENTS_PHRASE: &str = "No risky events detected";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratedBy {
    Templated,
    LlmComposed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportEvent {
    pub event_label: String,
    pub severity: Severity,
    pub guidance: String,
    pub evidence_turn: usize,
    pub question: String,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoachingReport {
    pub clip_id: String,
    pub db_version: String,
    pub driver_text: String,
    pub manager_text: String,
    pub events: Vec<ReportEvent>,
    /// Detected events with no database entry.
    pub uncoached_events: Vec<String>,
    pub generated_by: GeneratedBy,
}

impl CoachingReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        format!(
            "== Driver ==\n{}\n\n== Manager ==\n{}\n",
            self.driver_text.trim_end(),
            self.manager_text.trim_end()
        )
    }
}

fn display_name(id: &str) -> String {
    let spaced = id.replace('_', " ");
    let mut chars = spaced.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => spaced,
    }
}

fn conditions_line(record: &SituationRecord) -> String {
    if record.context_labels.is_empty() {
        return "Conditions: not reported.".into();
    }
    let parts: Vec<String> = record
        .context_labels
        .iter()
        .map(|(id, label)| format!("{} {label}", id.replace('_', " ")))
        .collect();
    format!("Conditions: {}.", parts.join("; "))
}

fn open_answer_lines(record: &SituationRecord, out: &mut String) {
    for (id, text) in &record.open_answers {
        let _ = writeln!(out, "{}: {text}", display_name(id));
    }
}

fn report_events(record: &SituationRecord, entries: &[CoachingEntry]) -> Vec<ReportEvent> {
    entries
        .iter()
        .filter_map(|entry| {
            let detected = record.event(&entry.event_label)?;
            Some(ReportEvent {
                event_label: entry.event_label.clone(),
                severity: entry.severity,
                guidance: entry.driver_guidance.clone(),
                evidence_turn: detected.evidence.instance.turn_index,
                question: detected.evidence.question.clone(),
                answer: detected.evidence.raw_response.clone(),
            })
        })
        .collect()
}

fn driver_text(record: &SituationRecord, entries: &[CoachingEntry], uncoached: &[String]) -> String {
    let mut out = format!("Coaching report for clip {}\n\n{}\n\n", record.clip_id, conditions_line(record));
    if entries.is_empty() {
        let _ = writeln!(out, "{NO_EVENTS_PHRASE}. Keep up the safe driving.");
    } else {
        out.push_str("Events to work on:\n");
        for (i, entry) in entries.iter().enumerate() {
            let _ = writeln!(
                out,
                "{}. {} ({}): {}",
                i + 1,
                display_name(&entry.event_label),
                entry.severity,
                entry.driver_guidance
            );
        }
    }
    if !uncoached.is_empty() {
        let _ = writeln!(out, "Also noticed: {}.", uncoached.join(", "));
    }
    if !record.open_answers.is_empty() {
        out.push('\n');
        open_answer_lines(record, &mut out);
    }
    out
}

fn manager_text(
    record: &SituationRecord,
    entries: &[CoachingEntry],
    events: &[ReportEvent],
    uncoached: &[String],
    db_version: &str,
) -> String {
    let mut out = format!(
        "Manager summary for clip {} (coaching db {db_version})\n\n{}\n\n",
        record.clip_id,
        conditions_line(record)
    );
    let count = |s: Severity| entries.iter().filter(|e| e.severity == s).count();
    if entries.is_empty() {
        let _ = writeln!(out, "Detected events: 0. {NO_EVENTS_PHRASE}.");
    } else {
        let _ = writeln!(
            out,
            "Detected events: {} (critical {}, warn {}, info {})",
            entries.len(),
            count(Severity::Critical),
            count(Severity::Warn),
            count(Severity::Info)
        );
        for (i, (entry, event)) in entries.iter().zip(events).enumerate() {
            let _ = writeln!(
                out,
                "{}. [{}] {} at turn {}: asked {:?}, answered {:?}. {}",
                i + 1,
                entry.severity,
                entry.event_label,
                event.evidence_turn,
                event.question,
                event.answer,
                entry.manager_guidance
            );
        }
    }
    let _ = writeln!(
        out,
        "Uncoached events: {}",
        if uncoached.is_empty() {
            "none".to_string()
        } else {
            uncoached.join(", ")
        }
    );
    if !record.open_answers.is_empty() {
        out.push('\n');
        open_answer_lines(record, &mut out);
    }
    out
}

fn evidence_block(record: &SituationRecord) -> String {
    let mut out = String::new();
    for event in &record.detected_events {
        let _ = writeln!(
            out,
            "- {} (turn {}): {:?} -> {:?}",
            event.event_label, event.evidence.instance.turn_index, event.evidence.question, event.evidence.raw_response
        );
    }
    if out.is_empty() {
        out.push_str("- none\n");
    }
    out
}

fn compose_with(
    llm: &dyn ModelClient,
    params: DecodeParams,
    audience: &str,
    templated: &str,
    evidence: &str,
) -> Option<String> {
    let prompt = format!(
        "Write coaching guidance for the {audience} of this dashcam clip. Use only the report and evidence below.\n\nReport:\n{templated}\nEvidence:\n{evidence}"
    );
    let request = InferenceRequest::new(Media::none(), None, vec![ChatTurn::user(prompt)], params, 0).ok()?;
    match llm.query_model(&request) {
        Ok(text) if !text.trim().is_empty() => Some(text.trim().to_string()),
        Ok(_) => {
            warn!(audience, "empty composition from model, using template");
            None
        }
        Err(e) => {
            warn!(audience, error = %e, "composition failed, using template");
            None
        }
    }
}

/// Builds the report from aligned entries. Without `llm` the result is a
/// pure function of its inputs. With `llm`, the templated texts plus the
/// evidence are sent as prompts and the replies replace the texts; any
/// failure falls back to the templated report.
pub fn compose_report(
    record: &SituationRecord,
    entries: &[CoachingEntry],
    db: &CoachingDb,
    llm: Option<&dyn ModelClient>,
    params: DecodeParams,
) -> CoachingReport {
    let entries: Vec<CoachingEntry> = entries
        .iter()
        .filter(|e| record.event(&e.event_label).is_some())
        .cloned()
        .collect();
    let events = report_events(record, &entries);
    let uncoached: Vec<String> = record
        .detected_events
        .iter()
        .map(|e| e.event_label.clone())
        .filter(|label| !entries.iter().any(|e| &e.event_label == label))
        .collect();

    let driver = driver_text(record, &entries, &uncoached);
    let manager = manager_text(record, &entries, &events, &uncoached, db.version());
    let mut report = CoachingReport {
        clip_id: record.clip_id.clone(),
        db_version: db.version().to_string(),
        driver_text: driver,
        manager_text: manager,
        events,
        uncoached_events: uncoached,
        generated_by: GeneratedBy::Templated,
    };

    if let Some(llm) = llm {
        let evidence = evidence_block(record);
        let driver = compose_with(llm, params, "driver", &report.driver_text, &evidence);
        let manager = compose_with(llm, params, "fleet manager", &report.manager_text, &evidence);
        if let (Some(driver), Some(manager)) = (driver, manager) {
            report.driver_text = driver;
            report.manager_text = manager;
            report.generated_by = GeneratedBy::LlmComposed;
        }
    }
    report
}
