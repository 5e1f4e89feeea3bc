#![allow(dead_code)]

use std::path::{Path, PathBuf};

use dashcoach_core::catalog::{expand_for_clip, Catalog, ExpansionMode, TemplateKind};
use dashcoach_core::gateway::{DialogueTranscript, TranscriptEntry};
use dashcoach_core::harness::{cmd_evaluate, EvalReport, HarnessConfig, HarnessError};
use dashcoach_core::parser::ParsedAnswer;
use dashcoach_mock::{MockServer, StubConfig};
use rand::seq::IndexedRandom;
use rand::Rng;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

pub fn e2e_config(cache: &Path, endpoints: &[(&str, &str)]) -> HarnessConfig {
    let base = fixtures().join("e2e");
    HarnessConfig {
        manifest: Some(base.join("manifest.json")),
        policy: Some(base.join("policy.json")),
        gold: Some(base.join("gold.jsonl")),
        cache_dir: Some(cache.to_path_buf()),
        endpoints: endpoints.iter().map(|(n, u)| (n.to_string(), u.to_string())).collect(),
        seed: 42,
        ..Default::default()
    }
}

/// Evaluates the three-clip fixture against a fresh stub server.
pub fn run_e2e(stub: StubConfig) -> Result<EvalReport, HarnessError> {
    let server = MockServer::start(stub).expect("mock server starts");
    let cache = tempfile::tempdir().unwrap();
    cmd_evaluate(&e2e_config(cache.path(), &[("stub", server.url())]))
}

/// An exhaustive transcript for clip `c1` with random answers.
pub fn random_transcript(rng: &mut impl Rng, catalog: &Catalog) -> DialogueTranscript {
    let entries = expand_for_clip(catalog, "c1", ExpansionMode::Exhaustive)
        .into_iter()
        .map(|instance| {
            let template = catalog.get(&instance.template_id).unwrap();
            let parsed = match &template.kind {
                TemplateKind::Binary => match rng.random_range(0..5) {
                    0 | 1 => ParsedAnswer::Affirmative,
                    2 | 3 => ParsedAnswer::Negative,
                    _ => ParsedAnswer::Unparseable("unsure".into()),
                },
                TemplateKind::Categorical { choices } => {
                    ParsedAnswer::Choice(choices.choose(rng).unwrap().label.clone())
                }
                TemplateKind::Open => ParsedAnswer::Explanation("The ego-car drives on.".into()),
            };
            TranscriptEntry {
                question: template.text.clone(),
                raw_response: parsed.label(),
                normalized: parsed.label(),
                parsed,
                latency_ms: 0,
                error: None,
                instance,
            }
        })
        .collect();
    DialogueTranscript {
        clip_id: "c1".into(),
        entries,
    }
}
