use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CoachingError;

const DEFAULT_DB: &str = include_str!("default_db.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Warn,
    Critical,
}

impl Severity {
    /// 0 for critical, growing as severity drops.
    pub fn rank(self) -> u8 {
        match self {
            Severity::Critical => 0,
            Severity::Warn => 1,
            Severity::Info => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Info => "info",
            Severity::Warn => "warn",
            Severity::Critical => "critical",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoachingEntry {
    pub event_label: String,
    pub severity: Severity,
    pub driver_guidance: String,
    pub manager_guidance: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DbFile {
    #[serde(default)]
    version: Option<String>,
    entries: Vec<CoachingEntry>,
}

/// Event label to guidance, keyed exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct CoachingDb {
    version: String,
    entries: BTreeMap<String, CoachingEntry>,
}

impl CoachingDb {
    pub fn new(version: impl Into<String>, entries: Vec<CoachingEntry>) -> Result<Self, CoachingError> {
        let mut map = BTreeMap::new();
        for entry in entries {
            if entry.event_label.trim().is_empty() {
                return Err(CoachingError::Invalid("entry with empty event_label".into()));
            }
            if entry.driver_guidance.trim().is_empty() || entry.manager_guidance.trim().is_empty() {
                return Err(CoachingError::Invalid(format!(
                    "entry {:?} has empty guidance",
                    entry.event_label
                )));
            }
            let label = entry.event_label.clone();
            if map.insert(label.clone(), entry).is_some() {
                return Err(CoachingError::DuplicateLabel(label));
            }
        }
        Ok(Self {
            version: version.into(),
            entries: map,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, CoachingError> {
        let file: DbFile = serde_json::from_str(text).map_err(|e| CoachingError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::new(file.version.unwrap_or_else(|| "unversioned".into()), file.entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CoachingError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| CoachingError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn get(&self, label: &str) -> Option<&CoachingEntry> {
        self.entries.get(label)
    }

    pub fn entries(&self) -> impl Iterator<Item = &CoachingEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Default for CoachingDb {
    fn default() -> Self {
        Self::from_json(DEFAULT_DB).expect("embedded coaching db is valid")
    }
}

pub fn default_db_json() -> &'static str {
    DEFAULT_DB
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Catalog;

    #[test]
    fn default_db_covers_every_catalog_event() {
        let db = CoachingDb::default();
        for template in Catalog::default().templates() {
            if let Some(label) = &template.event_label {
                assert!(db.get(label).is_some(), "{label} missing from db");
            }
        }
        assert_eq!(db.get("phone_usage").unwrap().severity, Severity::Critical);
    }

    #[test]
    fn duplicate_labels_rejected() {
        let text = r#"{"entries": [
            {"event_label": "a", "severity": "info", "driver_guidance": "x", "manager_guidance": "y"},
            {"event_label": "a", "severity": "warn", "driver_guidance": "x", "manager_guidance": "y"}]}"#;
        assert_eq!(CoachingDb::from_json(text), Err(CoachingError::DuplicateLabel("a".into())));
    }

    #[test]
    fn empty_guidance_rejected() {
        let text = r#"{"entries": [{"event_label": "a", "severity": "info", "driver_guidance": " ", "manager_guidance": "y"}]}"#;
        assert!(matches!(CoachingDb::from_json(text), Err(CoachingError::Invalid(_))));
    }

    #[test]
    fn bad_severity_is_a_parse_error() {
        let text = r#"{"entries": [{"event_label": "a", "severity": "severe", "driver_guidance": "x", "manager_guidance": "y"}]}"#;
        assert!(matches!(CoachingDb::from_json(text), Err(CoachingError::Parse { line: 1, .. })));
    }
}
