//! Instruction templates and their per-clip expansion into dialogue turns.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const DEFAULT_CATALOG: &str = include_str!("default_catalog.json");

/// Misspellings seen in the source material, mapped to their canonical label.
const KNOWN_TYPOS: &[(&str, &str)] = &[("rainly", "Rainy")];

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("cannot read catalog {path}: {message}")]
    Io { path: String, message: String },
    #[error("catalog parse error at {line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate template id {0:?}")]
    DuplicateId(String),
    #[error("template {template:?} has a follow-up pointing at unknown id {target:?}")]
    UnknownFollowUp { template: String, target: String },
    #[error("template {0:?}: categorical questions need at least 2 distinct choices")]
    TooFewChoices(String),
    #[error("template {template:?}: {reason}")]
    Invalid { template: String, reason: String },
}

/// One answer label plus the spellings that also count as it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Choice {
    pub label: String,
    pub aliases: Vec<String>,
}

impl Choice {
    pub fn new(label: impl Into<String>) -> Self {
        Self::with_aliases(label, std::iter::empty::<String>())
    }

    pub fn with_aliases<S: Into<String>>(label: impl Into<String>, aliases: impl IntoIterator<Item = S>) -> Self {
        Self {
            label: label.into(),
            aliases: aliases.into_iter().map(Into::into).collect(),
        }
    }

    /// Canonical label followed by aliases.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.label.as_str()).chain(self.aliases.iter().map(String::as_str))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplateKind {
    Binary,
    Categorical { choices: Vec<Choice> },
    Open,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FollowUpRule {
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstructionTemplate {
    pub id: String,
    pub kind: TemplateKind,
    pub text: String,
    pub followups: Vec<FollowUpRule>,
    /// Coaching event raised when this question is answered affirmatively.
    pub event_label: Option<String>,
    /// Yes/no-typed question that really asks for a reason; when set it is
    /// parsed as free text and left out of the accuracy rate.
    pub free_text: bool,
}

impl InstructionTemplate {
    /// Counts toward the accuracy rate.
    pub fn is_event_recognition(&self) -> bool {
        match self.kind {
            TemplateKind::Binary => !self.free_text,
            TemplateKind::Categorical { .. } => true,
            TemplateKind::Open => false,
        }
    }

    pub fn is_open_question(&self) -> bool {
        matches!(self.kind, TemplateKind::Open)
    }

    pub fn choices(&self) -> &[Choice] {
        match &self.kind {
            TemplateKind::Categorical { choices } => choices,
            _ => &[],
        }
    }
}

// ---- file format ----

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogFile {
    #[serde(default)]
    version: String,
    templates: Vec<TemplateRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum KindRecord {
    Binary,
    Categorical,
    Open,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ChoiceRecord {
    Label(String),
    Full {
        label: String,
        #[serde(default)]
        aliases: Vec<String>,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateRecord {
    id: String,
    kind: KindRecord,
    text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    choices: Vec<ChoiceRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    followups: Vec<FollowUpRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    event_label: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    free_text: bool,
}

/// Validated, immutable set of instruction templates.
#[derive(Debug, Clone)]
pub struct Catalog {
    version: String,
    templates: Vec<InstructionTemplate>,
    index: HashMap<String, usize>,
    parent: HashMap<String, String>,
}

impl Catalog {
    pub fn from_json(text: &str) -> Result<Self, CatalogError> {
        let file: CatalogFile = serde_json::from_str(text).map_err(|e| CatalogError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let templates = file
            .templates
            .into_iter()
            .map(template_from_record)
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(file.version, templates)
    }

    pub fn new(version: impl Into<String>, templates: Vec<InstructionTemplate>) -> Result<Self, CatalogError> {
        let mut index = HashMap::new();
        for (i, t) in templates.iter().enumerate() {
            if t.id.trim().is_empty() {
                return Err(CatalogError::Invalid {
                    template: t.id.clone(),
                    reason: "empty id".into(),
                });
            }
            if index.insert(t.id.clone(), i).is_some() {
                return Err(CatalogError::DuplicateId(t.id.clone()));
            }
        }

        let mut parent: HashMap<String, String> = HashMap::new();
        for t in &templates {
            let invalid = |reason: &str| CatalogError::Invalid {
                template: t.id.clone(),
                reason: reason.into(),
            };
            match &t.kind {
                TemplateKind::Categorical { choices } => {
                    let distinct: HashSet<String> = choices.iter().map(|c| c.label.to_lowercase()).collect();
                    if distinct.len() < 2 || distinct.len() != choices.len() {
                        return Err(CatalogError::TooFewChoices(t.id.clone()));
                    }
                }
                TemplateKind::Binary | TemplateKind::Open => {}
            }
            if t.event_label.is_some() && t.kind != TemplateKind::Binary {
                return Err(invalid("only yes/no questions may raise events"));
            }
            if t.free_text && t.kind != TemplateKind::Binary {
                return Err(invalid("free_text applies only to yes/no questions"));
            }
            if !t.followups.is_empty() && t.kind != TemplateKind::Binary {
                return Err(invalid("only yes/no questions may have follow-ups"));
            }
            for rule in &t.followups {
                let Some(&ti) = index.get(&rule.target) else {
                    return Err(CatalogError::UnknownFollowUp {
                        template: t.id.clone(),
                        target: rule.target.clone(),
                    });
                };
                let target = &templates[ti];
                if target.id == t.id {
                    return Err(invalid("a template cannot follow up on itself"));
                }
                if matches!(target.kind, TemplateKind::Categorical { .. }) {
                    return Err(invalid(&format!(
                        "follow-up {:?} must be a yes/no or open question",
                        target.id
                    )));
                }
                if !target.followups.is_empty() {
                    return Err(invalid(&format!("follow-up {:?} cannot have follow-ups of its own", target.id)));
                }
                if let Some(previous) = parent.insert(target.id.clone(), t.id.clone()) {
                    return Err(CatalogError::Invalid {
                        template: target.id.clone(),
                        reason: format!("follow-up of both {previous:?} and {:?}", t.id),
                    });
                }
            }
        }

        Ok(Self {
            version: version.into(),
            templates,
            index,
            parent,
        })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn templates(&self) -> &[InstructionTemplate] {
        &self.templates
    }

    pub fn get(&self, id: &str) -> Option<&InstructionTemplate> {
        self.index.get(id).map(|&i| &self.templates[i])
    }

    pub fn parent_of(&self, id: &str) -> Option<&InstructionTemplate> {
        self.parent.get(id).and_then(|p| self.get(p))
    }

    pub fn is_followup(&self, id: &str) -> bool {
        self.parent.contains_key(id)
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    /// Templates that are not follow-ups, in catalog order.
    pub fn primary_templates(&self) -> impl Iterator<Item = &InstructionTemplate> {
        self.templates.iter().filter(|t| !self.is_followup(&t.id))
    }

    pub fn event_recognition_count(&self) -> usize {
        self.templates.iter().filter(|t| t.is_event_recognition()).count()
    }

    pub fn open_question_count(&self) -> usize {
        self.templates.iter().filter(|t| t.is_open_question()).count()
    }

    pub fn to_json(&self) -> String {
        let file = CatalogFile {
            version: self.version.clone(),
            templates: self.templates.iter().map(template_to_record).collect(),
        };
        serde_json::to_string_pretty(&file).expect("catalog serializes")
    }
}

impl Default for Catalog {
    /// The built-in dashcam instruction set.
    fn default() -> Self {
        Self::from_json(DEFAULT_CATALOG).expect("embedded catalog is valid")
    }
}

pub fn load_catalog(path: impl AsRef<Path>) -> Result<Catalog, CatalogError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| CatalogError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Catalog::from_json(&text)
}

pub fn default_catalog_json() -> &'static str {
    DEFAULT_CATALOG
}

fn canonical_choice(label: String, aliases: Vec<String>) -> Choice {
    let folded = label.trim().to_lowercase();
    match KNOWN_TYPOS.iter().find(|(typo, _)| *typo == folded) {
        Some((_, canonical)) => {
            let mut all = vec![label.trim().to_string()];
            all.extend(aliases);
            all.dedup();
            Choice::with_aliases(*canonical, all)
        }
        None => Choice::with_aliases(label.trim(), aliases),
    }
}

fn template_from_record(r: TemplateRecord) -> Result<InstructionTemplate, CatalogError> {
    let kind = match r.kind {
        KindRecord::Binary | KindRecord::Open if !r.choices.is_empty() => {
            return Err(CatalogError::Invalid {
                template: r.id,
                reason: "choices are only allowed on categorical questions".into(),
            })
        }
        KindRecord::Binary => TemplateKind::Binary,
        KindRecord::Open => TemplateKind::Open,
        KindRecord::Categorical => TemplateKind::Categorical {
            choices: r
                .choices
                .into_iter()
                .map(|c| match c {
                    ChoiceRecord::Label(label) => canonical_choice(label, Vec::new()),
                    ChoiceRecord::Full { label, aliases } => canonical_choice(label, aliases),
                })
                .collect(),
        },
    };
    Ok(InstructionTemplate {
        id: r.id,
        kind,
        text: r.text,
        followups: r.followups,
        event_label: r.event_label,
        free_text: r.free_text,
    })
}

fn template_to_record(t: &InstructionTemplate) -> TemplateRecord {
    let (kind, choices) = match &t.kind {
        TemplateKind::Binary => (KindRecord::Binary, Vec::new()),
        TemplateKind::Open => (KindRecord::Open, Vec::new()),
        TemplateKind::Categorical { choices } => (
            KindRecord::Categorical,
            choices
                .iter()
                .map(|c| {
                    if c.aliases.is_empty() {
                        ChoiceRecord::Label(c.label.clone())
                    } else {
                        ChoiceRecord::Full {
                            label: c.label.clone(),
                            aliases: c.aliases.clone(),
                        }
                    }
                })
                .collect(),
        ),
    };
    TemplateRecord {
        id: t.id.clone(),
        kind,
        text: t.text.clone(),
        choices,
        followups: t.followups.clone(),
        event_label: t.event_label.clone(),
        free_text: t.free_text,
    }
}

// ---- expansion ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ExpansionMode {
    /// Every template once, follow-ups unconditionally.
    #[default]
    Exhaustive,
    /// Follow-ups are placeholders, asked only after an affirmative parent.
    Conditional,
}

/// One planned dialogue turn for a clip.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionInstance {
    pub clip_id: String,
    pub template_id: String,
    pub turn_index: usize,
    /// Turn index of the parent question, set exactly for follow-ups.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_turn: Option<usize>,
    /// Only issued if the parent is answered affirmatively.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub conditional: bool,
}

/// Expands the catalog into ordered turns for one clip. Primary templates
/// keep catalog order; each one's follow-ups come right after it.
pub fn expand_for_clip(catalog: &Catalog, clip_id: &str, mode: ExpansionMode) -> Vec<InstructionInstance> {
    let mut out = Vec::with_capacity(catalog.templates().len());
    for template in catalog.primary_templates() {
        let parent_turn = out.len();
        out.push(InstructionInstance {
            clip_id: clip_id.to_string(),
            template_id: template.id.clone(),
            turn_index: parent_turn,
            parent_turn: None,
            conditional: false,
        });
        for rule in &template.followups {
            out.push(InstructionInstance {
                clip_id: clip_id.to_string(),
                template_id: rule.target.clone(),
                turn_index: out.len(),
                parent_turn: Some(parent_turn),
                conditional: mode == ExpansionMode::Conditional,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_catalog_matches_instruction_table() {
        let catalog = Catalog::default();
        let primary_er = catalog
            .primary_templates()
            .filter(|t| t.is_event_recognition())
            .count();
        let followups = catalog.templates().iter().filter(|t| catalog.is_followup(&t.id)).count();
        assert_eq!(primary_er, 11);
        assert_eq!(followups, 9);
        assert_eq!(catalog.open_question_count(), 2);
        assert_eq!(catalog.event_recognition_count(), 20);
    }

    #[test]
    fn weather_choices_normalize_typo() {
        let catalog = Catalog::default();
        let labels: Vec<_> = catalog.get("weather").unwrap().choices().iter().map(|c| c.label.as_str()).collect();
        assert_eq!(labels, ["Clear", "Rainy", "Foggy", "Snowy"]);

        let text = r#"{"templates":[{"id":"w","kind":"categorical","text":"?","choices":["Clear","Rainly"]}]}"#;
        let catalog = Catalog::from_json(text).unwrap();
        let rainy = &catalog.get("w").unwrap().choices()[1];
        assert_eq!(rainy.label, "Rainy");
        assert_eq!(rainy.aliases, ["Rainly"]);
    }

    #[test]
    fn unknown_followup_is_named() {
        let text = r#"{"templates":[{"id":"a","kind":"binary","text":"?","followups":[{"target":"x"}]}]}"#;
        let err = Catalog::from_json(text).unwrap_err();
        assert!(matches!(&err, CatalogError::UnknownFollowUp { target, .. } if target == "x"));
        assert!(err.to_string().contains("\"x\""));
    }

    #[test]
    fn structural_errors() {
        let dup = r#"{"templates":[{"id":"a","kind":"open","text":"?"},{"id":"a","kind":"open","text":"?"}]}"#;
        assert!(matches!(Catalog::from_json(dup), Err(CatalogError::DuplicateId(id)) if id == "a"));

        let one_choice = r#"{"templates":[{"id":"c","kind":"categorical","text":"?","choices":["Dry"]}]}"#;
        assert!(matches!(Catalog::from_json(one_choice), Err(CatalogError::TooFewChoices(_))));

        let same_choice = r#"{"templates":[{"id":"c","kind":"categorical","text":"?","choices":["Dry","dry"]}]}"#;
        assert!(matches!(Catalog::from_json(same_choice), Err(CatalogError::TooFewChoices(_))));

        let nested = r#"{"templates":[
            {"id":"a","kind":"binary","text":"?","followups":[{"target":"b"}]},
            {"id":"b","kind":"binary","text":"?","followups":[{"target":"c"}]},
            {"id":"c","kind":"binary","text":"?"}]}"#;
        assert!(matches!(Catalog::from_json(nested), Err(CatalogError::Invalid { .. })));

        let to_categorical = r#"{"templates":[
            {"id":"a","kind":"binary","text":"?","followups":[{"target":"c"}]},
            {"id":"c","kind":"categorical","text":"?","choices":["x","y"]}]}"#;
        assert!(matches!(Catalog::from_json(to_categorical), Err(CatalogError::Invalid { .. })));

        assert!(matches!(Catalog::from_json(""), Err(CatalogError::Parse { .. })));
    }

    #[test]
    fn free_text_flag_removes_item_from_ar_count() {
        let text = r#"{"templates":[
            {"id":"a","kind":"binary","text":"?","followups":[{"target":"why"}]},
            {"id":"why","kind":"binary","text":"Why?","free_text":true}]}"#;
        let catalog = Catalog::from_json(text).unwrap();
        assert_eq!(catalog.event_recognition_count(), 1);
        assert_eq!(expand_for_clip(&catalog, "c", ExpansionMode::Exhaustive).len(), 2);
    }

    #[test]
    fn exhaustive_expansion_orders_followups_after_parent() {
        let catalog = Catalog::default();
        let turns = expand_for_clip(&catalog, "c1", ExpansionMode::Exhaustive);
        assert_eq!(turns.len(), 22);
        let ids: Vec<_> = turns.iter().take(6).map(|t| t.template_id.as_str()).collect();
        assert_eq!(
            ids,
            ["lane_cut_off", "lane_cut_off_signal", "driver_visible", "driver_smoking", "driver_phone", "driver_aggression"]
        );
        for (i, t) in turns.iter().enumerate() {
            assert_eq!(t.turn_index, i);
            assert_eq!(t.parent_turn.is_some(), catalog.is_followup(&t.template_id));
            assert!(!t.conditional);
            if let Some(p) = t.parent_turn {
                assert_eq!(
                    turns[p].template_id,
                    catalog.parent_of(&t.template_id).unwrap().id
                );
            }
        }
    }

    #[test]
    fn conditional_marks_followups() {
        let catalog = Catalog::default();
        let turns = expand_for_clip(&catalog, "c1", ExpansionMode::Conditional);
        assert_eq!(turns.iter().filter(|t| t.conditional).count(), 9);
    }

    #[test]
    fn empty_catalog_expands_to_nothing() {
        let catalog = Catalog::from_json(r#"{"templates":[]}"#).unwrap();
        assert!(expand_for_clip(&catalog, "c", ExpansionMode::Exhaustive).is_empty());
    }

    #[test]
    fn export_round_trips() {
        let catalog = Catalog::default();
        let again = Catalog::from_json(&catalog.to_json()).unwrap();
        assert_eq!(catalog.templates(), again.templates());
        assert_eq!(catalog.version(), again.version());
    }
}
