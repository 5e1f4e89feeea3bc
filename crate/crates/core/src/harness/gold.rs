use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::catalog::{Catalog, TemplateKind};
use crate::parser::ParsedAnswer;

/// Reference answers for one clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldRecord {
    pub clip_id: String,
    /// Event-recognition template id to expected answer.
    pub er_gold: BTreeMap<String, ParsedAnswer>,
    /// Open-question template id to reference explanation.
    pub oq_gold: BTreeMap<String, String>,
}

impl GoldRecord {
    /// Checks the record covers every scored template with a well-typed answer.
    pub fn validate(&self, catalog: &Catalog) -> Result<(), HarnessError> {
        let bad = |template: &str, reason: String| HarnessError::IncompleteGold {
            clip: self.clip_id.clone(),
            template: template.to_string(),
            reason,
        };
        for template in catalog.templates() {
            if template.is_event_recognition() {
                let Some(answer) = self.er_gold.get(&template.id) else {
                    return Err(bad(&template.id, "no event-recognition answer".into()));
                };
                match (&template.kind, answer) {
                    (TemplateKind::Binary, ParsedAnswer::Affirmative | ParsedAnswer::Negative) => {}
                    (TemplateKind::Categorical { choices }, ParsedAnswer::Choice(label)) => {
                        if !choices.iter().any(|c| &c.label == label) {
                            return Err(bad(&template.id, format!("{label:?} is not one of the choices")));
                        }
                    }
                    (_, other) => return Err(bad(&template.id, format!("answer {other} does not fit the template"))),
                }
            } else if template.is_open_question() {
                match self.oq_gold.get(&template.id) {
                    Some(text) if !text.trim().is_empty() => {}
                    _ => return Err(bad(&template.id, "missing or empty reference explanation".into())),
                }
            }
        }
        for id in self.er_gold.keys().chain(self.oq_gold.keys()) {
            if catalog.get(id).is_none() {
                return Err(bad(id, "not in the catalog".into()));
            }
        }
        Ok(())
    }
}

/// Reads gold records, one JSON object per non-blank line.
pub fn parse_gold(text: &str) -> Result<BTreeMap<String, GoldRecord>, HarnessError> {
    let mut records = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: GoldRecord = serde_json::from_str(line).map_err(|e| HarnessError::Gold {
            line: i + 1,
            message: e.to_string(),
        })?;
        if records.contains_key(&record.clip_id) {
            return Err(HarnessError::Gold {
                line: i + 1,
                message: format!("duplicate clip_id {:?}", record.clip_id),
            });
        }
        records.insert(record.clip_id.clone(), record);
    }
    Ok(records)
}

pub fn load_gold(path: impl AsRef<Path>) -> Result<BTreeMap<String, GoldRecord>, HarnessError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    parse_gold(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn complete(clip: &str) -> GoldRecord {
        let catalog = Catalog::default();
        let mut record = GoldRecord {
            clip_id: clip.into(),
            er_gold: BTreeMap::new(),
            oq_gold: BTreeMap::new(),
        };
        for t in catalog.templates() {
            match &t.kind {
                TemplateKind::Binary => {
                    record.er_gold.insert(t.id.clone(), ParsedAnswer::Negative);
                }
                TemplateKind::Categorical { choices } => {
                    record.er_gold.insert(t.id.clone(), ParsedAnswer::Choice(choices[0].label.clone()));
                }
                TemplateKind::Open => {
                    record.oq_gold.insert(t.id.clone(), "The car drives on.".into());
                }
            }
        }
        record
    }

    #[test]
    fn complete_record_validates() {
        complete("c1").validate(&Catalog::default()).unwrap();
    }

    #[test]
    fn missing_template_names_clip_and_template() {
        let mut record = complete("c9");
        record.er_gold.remove("harsh_braking");
        let err = record.validate(&Catalog::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("c9") && msg.contains("harsh_braking"), "{msg}");
    }

    #[test]
    fn choice_outside_the_list_is_rejected() {
        let mut record = complete("c1");
        record.er_gold.insert("weather".into(), ParsedAnswer::Choice("Hail".into()));
        assert!(record.validate(&Catalog::default()).is_err());
        record.er_gold.insert("weather".into(), ParsedAnswer::Affirmative);
        assert!(record.validate(&Catalog::default()).is_err());
    }

    #[test]
    fn jsonl_round_trip_and_errors() {
        let line = serde_json::to_string(&complete("c1")).unwrap();
        let records = parse_gold(&format!("{line}\n\n")).unwrap();
        assert_eq!(records["c1"], complete("c1"));
        let dup = parse_gold(&format!("{line}\n{line}\n")).unwrap_err();
        assert!(matches!(dup, HarnessError::Gold { line: 2, .. }));
        assert!(matches!(parse_gold("{"), Err(HarnessError::Gold { line: 1, .. })));
    }
}
