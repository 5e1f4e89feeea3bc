//! The `ingest`, `evaluate` and `coach` commands, independent of any CLI.

mod cache;
mod config;
mod evaluate;
mod gold;

use std::path::PathBuf;

use thiserror::Error;
use tracing::info;

pub use cache::{ingest, merge_clip, FrameCache, IngestSummary};
pub use config::HarnessConfig;
pub use evaluate::{
    run_dialogues, run_evaluation, Embedder, ErItem, EvalReport, EvalSetup, ModelReport, OqItem,
};
pub use gold::{load_gold, parse_gold, GoldRecord};

use crate::catalog::{expand_for_clip, load_catalog, Catalog, CatalogError, ExpansionMode};
use crate::coaching::{align_with_db, compose_report, detect_events, CoachingDb, CoachingError, CoachingReport};
use crate::gateway::{run_dialogue, ClipMedia, DialogueOptions, GatewayError, InferenceClient, Media, ModelClient};
use crate::media::{load_manifest, AutoDecoder, Manifest, MediaError};
use crate::metrics::MetricsError;
use crate::parser::{NormalizationRuleSet, ParserError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Media(#[from] MediaError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Rules(#[from] ParserError),
    #[error(transparent)]
    Coaching(#[from] CoachingError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("gold file line {line}: {message}")]
    Gold { line: usize, message: String },
    #[error("no gold record for test clip {0:?}")]
    MissingGold(String),
    #[error("gold record for clip {clip:?}, template {template:?}: {reason}")]
    IncompleteGold { clip: String, template: String, reason: String },
    #[error("endpoint {name:?}: {source}")]
    Endpoint {
        name: String,
        #[source]
        source: GatewayError,
    },
    #[error("embedding failed: {0}")]
    Embed(GatewayError),
    #[error("frame cache: {0}")]
    Cache(String),
    #[error("cannot write output: {0}")]
    Output(String),
    #[error("{} clip(s) failed to ingest: {}", .0.len(), format_failures(.0))]
    Ingest(Vec<(String, String)>),
    #[error("unknown clip {0:?}")]
    UnknownClip(String),
}

fn format_failures(failures: &[(String, String)]) -> String {
    failures
        .iter()
        .map(|(clip, err)| format!("{clip}: {err}"))
        .collect::<Vec<_>>()
        .join("; ")
}

fn manifest(config: &HarnessConfig) -> Result<Manifest, HarnessError> {
    Ok(load_manifest(config.require(&config.manifest, "manifest")?)?)
}

fn catalog(config: &HarnessConfig) -> Result<Catalog, HarnessError> {
    Ok(match &config.catalog {
        Some(path) => load_catalog(path)?,
        None => Catalog::default(),
    })
}

fn rules(config: &HarnessConfig) -> Result<NormalizationRuleSet, HarnessError> {
    Ok(match &config.rules {
        Some(path) => NormalizationRuleSet::load(path)?,
        None => NormalizationRuleSet::default(),
    })
}

fn client(config: &HarnessConfig, name: &str, url: &str) -> Result<InferenceClient, HarnessError> {
    let client = InferenceClient::new(url, config.retry);
    client.health().map_err(|source| HarnessError::Endpoint {
        name: name.to_string(),
        source,
    })?;
    Ok(client)
}

/// Extracts and caches merged frames for every clip in the manifest.
pub fn cmd_ingest(config: &HarnessConfig) -> Result<IngestSummary, HarnessError> {
    let manifest = manifest(config)?;
    let policy = config.merge_policy()?;
    let cache = FrameCache::new(config.cache_root()?);
    let summary = ingest(&manifest, manifest.clips(), &policy, &cache, &AutoDecoder::default())?;
    info!(
        extracted = summary.extracted.len(),
        cached = summary.cached.len(),
        failed = summary.failures.len(),
        "ingest finished"
    );
    Ok(summary)
}

/// Evaluates every configured endpoint over the test split and, when `out`
/// is set, writes the report files there.
pub fn cmd_evaluate(config: &HarnessConfig) -> Result<EvalReport, HarnessError> {
    let manifest = manifest(config)?;
    let catalog = catalog(config)?;
    let rules = rules(config)?;
    let gold = load_gold(config.require(&config.gold, "gold file")?)?;
    let policy = config.merge_policy()?;
    let cache = FrameCache::new(config.cache_root()?);
    if config.endpoints.is_empty() {
        return Err(HarnessError::Config("no model endpoints configured".into()));
    }

    let clients = config
        .endpoints
        .iter()
        .map(|(name, url)| Ok((name.clone(), client(config, name, url)?)))
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let embedder = match &config.embed_endpoint {
        Some(url) => client(config, "embed", url)?,
        None => clients[0].1.clone(),
    };
    let models: Vec<(String, &dyn ModelClient)> = clients
        .iter()
        .map(|(name, c)| (name.clone(), c as &dyn ModelClient))
        .collect();

    let decoder = AutoDecoder::default();
    let setup = EvalSetup {
        manifest: &manifest,
        catalog: &catalog,
        rules: &rules,
        gold: &gold,
        policy: &policy,
        cache: &cache,
        decoder: &decoder,
        params: config.params(),
        include_history: config.include_history,
        max_in_flight: config.max_in_flight,
    };
    let report = run_evaluation(&setup, &models, &embedder)?;
    if let Some(out) = &config.out {
        report.write(out)?;
    }
    Ok(report)
}

/// What `cmd_coach` produced and where it was written.
#[derive(Debug, Clone)]
pub struct CoachOutcome {
    pub report: CoachingReport,
    pub written: Vec<PathBuf>,
}

/// Conditional dialogue on one clip, then detection, alignment and report
/// composition. Uses the first configured endpoint (by name).
pub fn cmd_coach(config: &HarnessConfig, clip_id: &str) -> Result<CoachOutcome, HarnessError> {
    let manifest = manifest(config)?;
    let clip = manifest
        .get(clip_id)
        .ok_or_else(|| HarnessError::UnknownClip(clip_id.to_string()))?;
    let catalog = catalog(config)?;
    let rules = rules(config)?;
    let db = match &config.db {
        Some(path) => CoachingDb::load(path)?,
        None => CoachingDb::default(),
    };
    let policy = config.merge_policy()?;
    let cache = FrameCache::new(config.cache_root()?);
    let (name, url) = config
        .endpoints
        .iter()
        .next()
        .ok_or_else(|| HarnessError::Config("no model endpoint configured".into()))?;
    let client = client(config, name, url)?;

    let summary = ingest(&manifest, [clip], &policy, &cache, &AutoDecoder::default())?;
    if !summary.is_ok() {
        return Err(HarnessError::Ingest(summary.failures));
    }
    let merged = cache
        .load(&clip.id, &policy)?
        .ok_or_else(|| HarnessError::Cache(format!("entry for {} vanished", clip.id)))?;
    let media = ClipMedia {
        media: Media::from_frames(&merged),
        audio: clip.audio.as_ref().map(|a| manifest.resolve(a).display().to_string()),
        expected_frames: policy.sample_count,
    };
    let options = DialogueOptions {
        mode: ExpansionMode::Conditional,
        include_history: config.include_history,
        params: config.params(),
    };
    let instances = expand_for_clip(&catalog, &clip.id, ExpansionMode::Conditional);
    let transcript = run_dialogue(&client, &media, &instances, &catalog, &rules, &options).map_err(|source| {
        HarnessError::Endpoint {
            name: name.clone(),
            source,
        }
    })?;

    let record = detect_events(&transcript, &catalog)?;
    let entries = align_with_db(&record, &db);
    let llm = config.compose_with_llm.then_some(&client as &dyn ModelClient);
    let report = compose_report(&record, &entries, &db, llm, config.params());

    let mut written = Vec::new();
    if let Some(out) = &config.out {
        std::fs::create_dir_all(out).map_err(|e| HarnessError::Output(format!("{}: {e}", out.display())))?;
        for (ext, body) in [("json", report.to_json()), ("txt", report.to_text())] {
            let path = out.join(format!("{}.coaching.{ext}", clip.id));
            std::fs::write(&path, body).map_err(|e| HarnessError::Output(format!("{}: {e}", path.display())))?;
            written.push(path);
        }
    }
    Ok(CoachOutcome { report, written })
}
