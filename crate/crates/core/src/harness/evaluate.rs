use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use serde::{Deserialize, Serialize};
use tracing::info;

use super::cache::{ingest, FrameCache};
use super::gold::GoldRecord;
use super::HarnessError;
use crate::catalog::{expand_for_clip, Catalog, ExpansionMode};
use crate::gateway::{
    run_dialogue, ClipMedia, DecodeParams, DialogueOptions, DialogueTranscript, GatewayError, InferenceClient, Media,
    ModelClient,
};
use crate::media::{ClipPair, Manifest, MergePolicy, Split, VideoDecoder};
use crate::metrics::{accuracy_rate, bert_score, corpus_bleu, mean_scores, ErJudgement, EmbeddingMatrix};
use crate::parser::{NormalizationRuleSet, ParsedAnswer};
use crate::{ArResult, BertScoreResult, BleuResult};

const EMBED_BATCH: usize = 32;

/// Anything that turns texts into per-token embeddings.
pub trait Embedder: Send + Sync {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingMatrix<f64>>, GatewayError>;
}

impl Embedder for InferenceClient {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingMatrix<f64>>, GatewayError> {
        InferenceClient::embed(self, texts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErItem {
    pub clip_id: String,
    pub turn_index: usize,
    pub template_id: String,
    pub gold: ParsedAnswer,
    pub predicted: ParsedAnswer,
    pub is_true_event: bool,
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ErItem {
    pub fn judgement(&self) -> ErJudgement {
        ErJudgement {
            clip_id: self.clip_id.clone(),
            template_id: self.template_id.clone(),
            turn_index: self.turn_index,
            gold: self.gold.clone(),
            predicted: self.predicted.clone(),
            is_true_event: self.is_true_event,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OqItem {
    pub clip_id: String,
    pub turn_index: usize,
    pub template_id: String,
    pub hypothesis: String,
    pub reference: String,
    /// Sentence-level BLEU of this pair alone.
    pub bleu: f64,
    pub bertscore: BertScoreResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub name: String,
    pub ar: ArResult,
    /// AR as an exact fraction, e.g. "27/60".
    pub ar_exact: String,
    pub bleu: BleuResult,
    pub bertscore: BertScoreResult,
    pub failed_turns: usize,
    pub er_items: Vec<ErItem>,
    pub oq_items: Vec<OqItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub catalog_version: String,
    pub rules_version: String,
    pub policy_digest: String,
    pub seed: u64,
    pub clips: Vec<String>,
    /// Sorted by name.
    pub models: Vec<ModelReport>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn failed_turns(&self) -> usize {
        self.models.iter().map(|m| m.failed_turns).sum()
    }

    /// Plain-text tables: AR per model, then BLEU and BERTScore per model.
    pub fn tables(&self) -> String {
        let width = self.models.iter().map(|m| m.name.len()).max().unwrap_or(0).max("Model".len());
        let mut out = format!("Event recognition ({} clips)\n", self.clips.len());
        let _ = writeln!(out, "{:<width$}  {:>7}  {:>6}  {:>6}", "Model", "AR (%)", "True", "False");
        for m in &self.models {
            let _ = writeln!(
                out,
                "{:<width$}  {:>7.1}  {:>6}  {:>6}",
                m.name,
                m.ar.ar * 100.0,
                m.ar.true_events,
                m.ar.false_events
            );
        }
        out.push_str("\nOpen questions\n");
        let _ = writeln!(
            out,
            "{:<width$}  {:>6}  {:>11}  {:>8}  {:>6}",
            "Model", "BLEU", "BERTScore P", "R", "F1"
        );
        for m in &self.models {
            let _ = writeln!(
                out,
                "{:<width$}  {:>6.2}  {:>11.4}  {:>8.4}  {:>6.4}",
                m.name, m.bleu.score, m.bertscore.precision, m.bertscore.recall, m.bertscore.f1
            );
        }
        out
    }

    pub fn items_csv(&self) -> Result<String, HarnessError> {
        #[derive(Serialize)]
        struct Row<'a> {
            model: &'a str,
            clip_id: &'a str,
            turn_index: usize,
            template_id: &'a str,
            kind: &'a str,
            gold: String,
            predicted: String,
            is_true_event: Option<bool>,
            bleu: Option<f64>,
            bert_precision: Option<f64>,
            bert_recall: Option<f64>,
            bert_f1: Option<f64>,
            error: Option<&'a str>,
        }
        let mut writer = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| HarnessError::Config(format!("csv: {e}"));
        for m in &self.models {
            let mut rows: Vec<Row> = Vec::new();
            for item in &m.er_items {
                rows.push(Row {
                    model: &m.name,
                    clip_id: &item.clip_id,
                    turn_index: item.turn_index,
                    template_id: &item.template_id,
                    kind: "er",
                    gold: item.gold.label(),
                    predicted: item.predicted.label(),
                    is_true_event: Some(item.is_true_event),
                    bleu: None,
                    bert_precision: None,
                    bert_recall: None,
                    bert_f1: None,
                    error: item.error.as_deref(),
                });
            }
            for item in &m.oq_items {
                rows.push(Row {
                    model: &m.name,
                    clip_id: &item.clip_id,
                    turn_index: item.turn_index,
                    template_id: &item.template_id,
                    kind: "oq",
                    gold: item.reference.clone(),
                    predicted: item.hypothesis.clone(),
                    is_true_event: None,
                    bleu: Some(item.bleu),
                    bert_precision: Some(item.bertscore.precision),
                    bert_recall: Some(item.bertscore.recall),
                    bert_f1: Some(item.bertscore.f1),
                    error: item.error.as_deref(),
                });
            }
            rows.sort_by(|a, b| (a.clip_id, a.turn_index).cmp(&(b.clip_id, b.turn_index)));
            for row in rows {
                writer.serialize(row).map_err(csv_err)?;
            }
        }
        let bytes = writer.into_inner().map_err(|e| HarnessError::Config(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    /// Writes `report.json`, `items.csv` and `tables.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
        fs::create_dir_all(dir).map_err(|e| HarnessError::Output(format!("{}: {e}", dir.display())))?;
        let files = [
            ("report.json", self.to_json()),
            ("items.csv", self.items_csv()?),
            ("tables.txt", self.tables()),
        ];
        let mut written = Vec::new();
        for (name, body) in files {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| HarnessError::Output(format!("{}: {e}", path.display())))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Inputs shared by every model in one evaluation run.
pub struct EvalSetup<'a> {
    pub manifest: &'a Manifest,
    pub catalog: &'a Catalog,
    pub rules: &'a NormalizationRuleSet,
    pub gold: &'a BTreeMap<String, GoldRecord>,
    pub policy: &'a MergePolicy,
    pub cache: &'a FrameCache,
    pub decoder: &'a dyn VideoDecoder,
    pub params: DecodeParams,
    pub include_history: bool,
    pub max_in_flight: usize,
}

impl EvalSetup<'_> {
    /// Test-split clips sorted by id, each with validated gold.
    fn test_clips(&self) -> Result<Vec<&ClipPair>, HarnessError> {
        let mut clips: Vec<&ClipPair> = self.manifest.split(Split::Test).collect();
        if clips.is_empty() {
            return Err(HarnessError::Config("manifest has no test clips".into()));
        }
        clips.sort_by(|a, b| a.id.cmp(&b.id));
        for clip in &clips {
            let record = self
                .gold
                .get(&clip.id)
                .ok_or_else(|| HarnessError::MissingGold(clip.id.clone()))?;
            record.validate(self.catalog)?;
        }
        Ok(clips)
    }

    fn clip_media(&self, clips: &[&ClipPair]) -> Result<Vec<ClipMedia>, HarnessError> {
        let summary = ingest(self.manifest, clips.iter().copied(), self.policy, self.cache, self.decoder)?;
        if !summary.is_ok() {
            return Err(HarnessError::Ingest(summary.failures));
        }
        clips
            .iter()
            .map(|clip| {
                let merged = self
                    .cache
                    .load(&clip.id, self.policy)?
                    .ok_or_else(|| HarnessError::Cache(format!("entry for {} vanished", clip.id)))?;
                Ok(ClipMedia {
                    media: Media::from_frames(&merged),
                    audio: clip
                        .audio
                        .as_ref()
                        .map(|a| self.manifest.resolve(a).display().to_string()),
                    expected_frames: self.policy.sample_count,
                })
            })
            .collect()
    }
}

/// Runs exhaustive dialogues for `clips` with at most `max_in_flight` at once.
/// Output order follows `clips`, whatever order the dialogues finish in.
pub fn run_dialogues(
    client: &dyn ModelClient,
    clips: &[&ClipPair],
    media: &[ClipMedia],
    catalog: &Catalog,
    rules: &NormalizationRuleSet,
    options: &DialogueOptions,
    max_in_flight: usize,
) -> Result<Vec<DialogueTranscript>, GatewayError> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<DialogueTranscript, GatewayError>>>> =
        Mutex::new(vec![None; clips.len()]);
    let workers = max_in_flight.max(1).min(clips.len());
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= clips.len() {
                    break;
                }
                let instances = expand_for_clip(catalog, &clips[i].id, options.mode);
                let result = run_dialogue(client, &media[i], &instances, catalog, rules, options);
                results.lock().expect("no worker panicked")[i] = Some(result);
            });
        }
    });
    results
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|r| r.expect("every clip was processed"))
        .collect()
}

fn score_open_questions(items: &mut [OqItem], embedder: &dyn Embedder) -> Result<(), HarnessError> {
    // empty hypotheses (failed turns) score zero and are never sent
    let scored: Vec<usize> = (0..items.len())
        .filter(|&i| !items[i].hypothesis.trim().is_empty())
        .collect();
    let mut texts = Vec::with_capacity(scored.len() * 2);
    for &i in &scored {
        texts.push(items[i].hypothesis.clone());
        texts.push(items[i].reference.clone());
    }
    let mut matrices = Vec::with_capacity(texts.len());
    for chunk in texts.chunks(EMBED_BATCH) {
        matrices.extend(embedder.embed(chunk).map_err(HarnessError::Embed)?);
    }
    for (k, &i) in scored.iter().enumerate() {
        let (hyp, reference) = (&matrices[2 * k], &matrices[2 * k + 1]);
        items[i].bertscore = if hyp.is_empty() || reference.is_empty() {
            BertScoreResult::from_precision_recall(0.0, 0.0)
        } else {
            bert_score(hyp, reference)?
        };
    }
    Ok(())
}

fn evaluate_model(
    name: &str,
    client: &dyn ModelClient,
    setup: &EvalSetup<'_>,
    clips: &[&ClipPair],
    media: &[ClipMedia],
    embedder: &dyn Embedder,
) -> Result<ModelReport, HarnessError> {
    let options = DialogueOptions {
        mode: ExpansionMode::Exhaustive,
        include_history: setup.include_history,
        params: setup.params,
    };
    let transcripts = run_dialogues(
        client,
        clips,
        media,
        setup.catalog,
        setup.rules,
        &options,
        setup.max_in_flight,
    )
    .map_err(|source| HarnessError::Endpoint {
        name: name.to_string(),
        source,
    })?;

    let mut er_items = Vec::new();
    let mut oq_items = Vec::new();
    let mut failed_turns = 0;
    for transcript in &transcripts {
        let gold = &setup.gold[&transcript.clip_id];
        failed_turns += transcript.failures();
        for entry in &transcript.entries {
            let id = &entry.instance.template_id;
            let template = setup.catalog.get(id).expect("transcript built from this catalog");
            if template.is_event_recognition() {
                let judgement = ErJudgement::judge(
                    &transcript.clip_id,
                    id,
                    entry.instance.turn_index,
                    gold.er_gold[id].clone(),
                    entry.parsed.clone(),
                );
                er_items.push(ErItem {
                    clip_id: judgement.clip_id,
                    turn_index: judgement.turn_index,
                    template_id: judgement.template_id,
                    gold: judgement.gold,
                    predicted: judgement.predicted,
                    is_true_event: judgement.is_true_event,
                    response: entry.raw_response.clone(),
                    error: entry.error.clone(),
                });
            } else if template.is_open_question() {
                let hypothesis = match &entry.parsed {
                    ParsedAnswer::Explanation(text) => text.clone(),
                    _ => String::new(),
                };
                let reference = gold.oq_gold[id].clone();
                let bleu: BleuResult = corpus_bleu(&[&hypothesis], &[&reference])?;
                oq_items.push(OqItem {
                    clip_id: transcript.clip_id.clone(),
                    turn_index: entry.instance.turn_index,
                    template_id: id.clone(),
                    hypothesis,
                    reference,
                    bleu: bleu.score,
                    bertscore: BertScoreResult::from_precision_recall(0.0, 0.0),
                    error: entry.error.clone(),
                });
            }
        }
    }

    let judgements: Vec<ErJudgement> = er_items.iter().map(ErItem::judgement).collect();
    let ar: ArResult = accuracy_rate(&judgements)?;
    let hyps: Vec<&str> = oq_items.iter().map(|i| i.hypothesis.as_str()).collect();
    let refs: Vec<&str> = oq_items.iter().map(|i| i.reference.as_str()).collect();
    let bleu: BleuResult = corpus_bleu(&hyps, &refs)?;
    score_open_questions(&mut oq_items, embedder)?;
    let pair_scores: Vec<BertScoreResult> = oq_items.iter().map(|i| i.bertscore).collect();
    let bertscore = mean_scores(&pair_scores)?;
    info!(model = name, ar = ar.ar, bleu = bleu.score, bert_f1 = bertscore.f1, failed_turns, "model evaluated");

    Ok(ModelReport {
        name: name.to_string(),
        ar_exact: ar.exact().to_string(),
        ar,
        bleu,
        bertscore,
        failed_turns,
        er_items,
        oq_items,
    })
}

/// Evaluates each model over the test split. Models are reported in name
/// order and items in (clip id, turn) order, so the report bytes do not
/// depend on scheduling.
pub fn run_evaluation(
    setup: &EvalSetup<'_>,
    models: &[(String, &dyn ModelClient)],
    embedder: &dyn Embedder,
) -> Result<EvalReport, HarnessError> {
    if models.is_empty() {
        return Err(HarnessError::Config("no model endpoints configured".into()));
    }
    let clips = setup.test_clips()?;
    let media = setup.clip_media(&clips)?;
    let mut ordered: Vec<&(String, &dyn ModelClient)> = models.iter().collect();
    ordered.sort_by(|a, b| a.0.cmp(&b.0));
    let reports = ordered
        .into_iter()
        .map(|(name, client)| evaluate_model(name, *client, setup, &clips, &media, embedder))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EvalReport {
        catalog_version: setup.catalog.version().to_string(),
        rules_version: setup.rules.version().to_string(),
        policy_digest: setup.policy.digest(),
        seed: setup.params.seed,
        clips: clips.iter().map(|c| c.id.clone()).collect(),
        models: reports,
    })
}
