use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::HarnessError;
use crate::gateway::{DecodeParams, RetryPolicy};
use crate::media::MergePolicy;

/// Everything the commands need. Mirrors the CLI flags; relative paths in a
/// config file are resolved against the file's directory.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarnessConfig {
    pub manifest: Option<PathBuf>,
    pub policy: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub gold: Option<PathBuf>,
    pub db: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    /// Model name to base URL.
    pub endpoints: BTreeMap<String, String>,
    /// Base URL used for `/embed`; defaults to the first endpoint by name.
    pub embed_endpoint: Option<String>,
    pub seed: u64,
    pub temperature: f64,
    pub max_tokens: u32,
    pub max_in_flight: usize,
    pub include_history: bool,
    /// Let the coach command polish reports with the model.
    pub compose_with_llm: bool,
    pub retry: RetryPolicy,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        let params = DecodeParams::default();
        Self {
            manifest: None,
            policy: None,
            catalog: None,
            rules: None,
            gold: None,
            db: None,
            out: None,
            cache_dir: None,
            endpoints: BTreeMap::new(),
            embed_endpoint: None,
            seed: params.seed,
            temperature: params.temperature,
            max_tokens: params.max_tokens,
            max_in_flight: 4,
            include_history: true,
            compose_with_llm: false,
            retry: RetryPolicy::default(),
        }
    }
}

impl HarnessConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        if let Some(dir) = path.parent() {
            config.rebase(dir);
        }
        Ok(config)
    }

    fn rebase(&mut self, dir: &Path) {
        for slot in [
            &mut self.manifest,
            &mut self.policy,
            &mut self.catalog,
            &mut self.rules,
            &mut self.gold,
            &mut self.db,
            &mut self.out,
            &mut self.cache_dir,
        ] {
            if let Some(p) = slot.as_mut() {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
    }

    pub fn params(&self) -> DecodeParams {
        DecodeParams {
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            seed: self.seed,
        }
    }

    pub fn require<'a>(&self, value: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, HarnessError> {
        value
            .as_deref()
            .ok_or_else(|| HarnessError::Config(format!("no {what} configured")))
    }

    pub fn merge_policy(&self) -> Result<MergePolicy, HarnessError> {
        let Some(path) = &self.policy else {
            return Ok(MergePolicy::default());
        };
        let text = fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let policy: MergePolicy = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?
        } else {
            serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?
        };
        policy.validate()?;
        Ok(policy)
    }

    /// Cache directory, defaulting to `.dashcoach-cache` next to the manifest.
    pub fn cache_root(&self) -> Result<PathBuf, HarnessError> {
        if let Some(dir) = &self.cache_dir {
            return Ok(dir.clone());
        }
        let manifest = self.require(&self.manifest, "manifest")?;
        let base = manifest.parent().unwrap_or(Path::new("."));
        Ok(base.join(".dashcoach-cache"))
    }

    /// Parses `NAME=URL`; a bare URL is named `default`.
    pub fn parse_endpoint(spec: &str) -> Result<(String, String), HarnessError> {
        match spec.split_once('=') {
            Some((name, url)) if !name.is_empty() && !url.is_empty() => Ok((name.to_string(), url.to_string())),
            Some(_) => Err(HarnessError::Config(format!("bad endpoint {spec:?}, expected NAME=URL"))),
            None if !spec.is_empty() => Ok(("default".to_string(), spec.to_string())),
            None => Err(HarnessError::Config("empty endpoint".into())),
        }
    }
}
