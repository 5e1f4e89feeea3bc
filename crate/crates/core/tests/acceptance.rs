//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Run with `cargo test -p dashcoach-core --test acceptance`. Set
//! `DASHCOACH_BLESS=1` to rewrite the end-to-end golden report instead of
//! comparing against it.

mod common;

use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use dashcoach_core::catalog::{expand_for_clip, Catalog, ExpansionMode};
use dashcoach_core::coaching::{align_with_db, compose_report, detect_events, CoachingDb};
use dashcoach_core::gateway::DecodeParams;
use dashcoach_core::media::{
    extract_frames, merge_side_by_side, ClipPair, FrameDirDecoder, FrameSet, Layout, MergePolicy, Split,
};
use dashcoach_core::metrics::{accuracy_rate, bert_score, corpus_bleu, ErJudgement, EmbeddingMatrix};
use dashcoach_core::parser::{normalize, parse_response, NormalizationRuleSet, ParsedAnswer};
use dashcoach_core::{ArResult, BleuResult};
use dashcoach_mock::StubConfig;
use image::{Rgb, RgbImage};
use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- BLEU

#[derive(Deserialize)]
struct BleuPair {
    hyp: String,
    #[serde(rename = "ref")]
    reference: String,
    expected_bleu: f64,
}

#[derive(Deserialize)]
struct BleuCorpus {
    expected_bleu: f64,
}

fn bleu_oracle() -> Outcome {
    let base = common::fixtures().join("bleu");
    let pairs: Vec<BleuPair> = fs::read_to_string(base.join("pairs.jsonl"))
        .map_err(|e| e.to_string())?
        .lines()
        .map(|l| serde_json::from_str(l).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    check(pairs.len() == 50, || format!("expected 50 pairs, found {}", pairs.len()))?;
    let mut worst = 0.0f64;
    for (i, p) in pairs.iter().enumerate() {
        let got: BleuResult = corpus_bleu(&[&p.hyp], &[&p.reference]).map_err(|e| e.to_string())?;
        let diff = (got.score - p.expected_bleu).abs();
        worst = worst.max(diff);
        check(diff <= 0.01, || format!("pair {i}: got {} expected {}", got.score, p.expected_bleu))?;
    }
    let corpus: BleuCorpus =
        serde_json::from_str(&fs::read_to_string(base.join("corpus.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let hyps: Vec<&str> = pairs.iter().map(|p| p.hyp.as_str()).collect();
    let refs: Vec<&str> = pairs.iter().map(|p| p.reference.as_str()).collect();
    let got: BleuResult = corpus_bleu(&hyps, &refs).map_err(|e| e.to_string())?;
    let diff = (got.score - corpus.expected_bleu).abs();
    check(diff <= 0.01, || format!("corpus: got {} expected {}", got.score, corpus.expected_bleu))?;
    Ok(format!("50 pairs + corpus, max |diff| {:.2e}", worst.max(diff)))
}

// ----------------------------------------------------------- BERTScore

fn random_matrix(rng: &mut impl Rng, tokens: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..tokens)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

fn brute_force(hyp: &[Vec<f64>], reference: &[Vec<f64>]) -> (f64, f64, f64) {
    let cosine = |a: &[f64], b: &[f64]| {
        let mut dot = 0.0;
        let mut na = 0.0;
        let mut nb = 0.0;
        for k in 0..a.len() {
            dot += a[k] * b[k];
            na += a[k] * a[k];
            nb += b[k] * b[k];
        }
        dot / (na.sqrt() * nb.sqrt())
    };
    let mut p = 0.0;
    for h in hyp {
        let mut best = f64::NEG_INFINITY;
        for r in reference {
            best = best.max(cosine(h, r));
        }
        p += best;
    }
    p /= hyp.len() as f64;
    let mut r = 0.0;
    for rv in reference {
        let mut best = f64::NEG_INFINITY;
        for h in hyp {
            best = best.max(cosine(h, rv));
        }
        r += best;
    }
    r /= reference.len() as f64;
    let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    (p, r, f)
}

fn bertscore_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let (nh, nr) = (rng.random_range(1..=20), rng.random_range(1..=20));
        let hyp = random_matrix(&mut rng, nh, 16);
        let reference = random_matrix(&mut rng, nr, 16);
        let names = |n: usize| (0..n).map(|k| format!("t{k}")).collect();
        let h = EmbeddingMatrix::new(names(nh), hyp.clone()).map_err(|e| e.to_string())?;
        let r = EmbeddingMatrix::new(names(nr), reference.clone()).map_err(|e| e.to_string())?;
        let got = bert_score(&h, &r).map_err(|e| e.to_string())?;
        let (p, rc, f) = brute_force(&hyp, &reference);
        for (a, b) in [(got.precision, p), (got.recall, rc), (got.f1, f)] {
            worst = worst.max((a - b).abs());
            check((a - b).abs() <= 1e-9, || format!("pair {i}: {a} vs {b}"))?;
        }
    }
    Ok(format!("100 pairs, max |diff| {worst:.2e}"))
}

// ------------------------------------------------------------------- AR

fn judgements(t: u64, f: u64) -> Vec<ErJudgement> {
    let yes = |ok: bool, i: u64| {
        ErJudgement::judge(
            "c",
            "t",
            i as usize,
            ParsedAnswer::Affirmative,
            if ok { ParsedAnswer::Affirmative } else { ParsedAnswer::Negative },
        )
    };
    (0..t).map(|i| yes(true, i)).chain((0..f).map(|i| yes(false, t + i))).collect()
}

fn ar_formula() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    for _ in 0..1000 {
        let t = rng.random_range(0..60u64);
        let f = rng.random_range(if t == 0 { 1 } else { 0 }..60u64);
        let mut items = judgements(t, f);
        let ar: ArResult = accuracy_rate(&items).map_err(|e| e.to_string())?;
        check(ar.exact() == Ratio::new(t, t + f), || format!("T={t} F={f}: exact {}", ar.exact()))?;
        check(ar.ar == t as f64 / (t + f) as f64, || format!("T={t} F={f}: {}", ar.ar))?;
        items.shuffle(&mut rng);
        let shuffled: ArResult = accuracy_rate(&items).map_err(|e| e.to_string())?;
        check(shuffled == ar, || format!("T={t} F={f}: order changed the result"))?;
    }
    check(accuracy_rate::<f64>(&[]).is_err(), || "empty input did not error".into())?;
    Ok("1000 random (T, F) exact, empty input rejected, order invariant".into())
}

// -------------------------------------------------------------- catalog

fn catalog_counts() -> Outcome {
    let catalog = Catalog::default();
    let (mut er, mut oq) = (0, 0);
    for c in 0..100 {
        let instances = expand_for_clip(&catalog, &format!("clip{c:03}"), ExpansionMode::Exhaustive);
        let clip_er = instances
            .iter()
            .filter(|i| catalog.get(&i.template_id).unwrap().is_event_recognition())
            .count();
        let clip_oq = instances
            .iter()
            .filter(|i| catalog.get(&i.template_id).unwrap().is_open_question())
            .count();
        check(clip_er == 20 && clip_oq == 2, || format!("clip {c}: {clip_er} ER + {clip_oq} OQ"))?;
        er += clip_er;
        oq += clip_oq;
    }
    check(er == 2000 && oq == 200, || format!("{er} ER + {oq} OQ"))?;
    Ok(format!("{er} ER + {oq} OQ over 100 clips"))
}

// ---------------------------------------------------------------- merge

fn frame_set(id: &str, frames: Vec<RgbImage>, w: u32, h: u32) -> FrameSet {
    FrameSet {
        clip_id: id.into(),
        timestamps: (0..frames.len()).map(|i| i as f64).collect(),
        frames,
        width: w,
        height: h,
    }
}

fn merge_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for i in 0..20 {
        let (w, h, k) = (rng.random_range(16..64), rng.random_range(16..48), rng.random_range(1..5));
        let policy = MergePolicy::new(k, w, h, Layout::RoadLeft).map_err(|e| e.to_string())?;
        let mut random_frames = || -> Vec<RgbImage> {
            (0..k)
                .map(|_| RgbImage::from_fn(w, h, |_, _| Rgb([rng.random(), rng.random(), rng.random()])))
                .collect()
        };
        let road = frame_set("r", random_frames(), w, h);
        let driver = frame_set("r", random_frames(), w, h);
        let merged = merge_side_by_side(&road, &driver, &policy).map_err(|e| e.to_string())?;
        check(
            merged.width == 2 * w && merged.height == h && merged.frames.iter().all(|f| f.dimensions() == (2 * w, h)),
            || format!("pair {i}: merged to {}x{}", merged.width, merged.height),
        )?;
    }

    let policy = MergePolicy::new(2, 24, 16, Layout::RoadLeft).map_err(|e| e.to_string())?;
    let black = frame_set("bw", vec![RgbImage::from_pixel(24, 16, Rgb([0, 0, 0])); 2], 24, 16);
    let white = frame_set("bw", vec![RgbImage::from_pixel(24, 16, Rgb([255, 255, 255])); 2], 24, 16);
    let merged = merge_side_by_side(&black, &white, &policy).map_err(|e| e.to_string())?;
    for frame in &merged.frames {
        for (x, _, px) in frame.enumerate_pixels() {
            let want = if x < 24 { [0, 0, 0] } else { [255, 255, 255] };
            check(px.0 == want, || format!("pixel at x={x} is {:?}", px.0))?;
        }
    }

    let base = common::fixtures().join("merge");
    for (layout, dir) in [(Layout::RoadLeft, "expected_road_left"), (Layout::RoadRight, "expected_road_right")] {
        let policy = MergePolicy::new(3, 32, 24, layout).map_err(|e| e.to_string())?;
        let clip = ClipPair {
            id: "golden".into(),
            road_video: "road".into(),
            driver_video: "driver".into(),
            audio: None,
            duration_s: 3.0,
            split: Split::Test,
            gold: None,
        };
        let (road, driver) = extract_frames(&clip, &base, &policy, &FrameDirDecoder).map_err(|e| e.to_string())?;
        let merged = merge_side_by_side(&road, &driver, &policy).map_err(|e| e.to_string())?;
        for (i, frame) in merged.frames.iter().enumerate() {
            let path = base.join(dir).join(format!("frame_{i:03}.png"));
            let expected = image::open(&path).map_err(|e| e.to_string())?.to_rgb8();
            check(frame.as_raw() == expected.as_raw(), || format!("{} differs", path.display()))?;
        }
    }
    Ok("20 random pairs 2x wide, black/white exact, matches Pillow composites".into())
}

// --------------------------------------------------------------- parser

#[derive(Deserialize)]
struct CorpusRow {
    raw: String,
    template: String,
    expected: String,
    normalized: Option<String>,
}

fn parser_corpus() -> Outcome {
    let catalog = Catalog::default();
    let rules = NormalizationRuleSet::default();
    let text = fs::read_to_string(common::fixtures().join("parser/corpus.jsonl")).map_err(|e| e.to_string())?;
    let rows: Vec<CorpusRow> = text
        .lines()
        .map(|l| serde_json::from_str(l).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let mut failures = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let template = catalog
            .get(&row.template)
            .ok_or_else(|| format!("row {i}: unknown template {}", row.template))?;
        let (normalized, parsed) = parse_response(&row.raw, template, &rules);
        let label = match &parsed {
            ParsedAnswer::Explanation(_) => "explanation".to_string(),
            other => other.label(),
        };
        let norm_ok = row.normalized.as_ref().is_none_or(|n| *n == normalized);
        if label != row.expected || !norm_ok {
            failures.push(format!("row {i} {:?}: got {label} / {normalized:?}", row.raw));
        }
        let again = normalize(&normalized, &rules);
        if again != normalized {
            failures.push(format!("row {i}: normalize not idempotent ({normalized:?} -> {again:?})"));
        }
    }
    check(failures.is_empty(), || failures.join("; "))?;
    Ok(format!("{}/{} rows, normalize idempotent", rows.len(), rows.len()))
}

// ------------------------------------------------------------ end to end

fn end_to_end() -> Outcome {
    let report = common::run_e2e(StubConfig::default()).map_err(|e| e.to_string())?;
    let json = report.to_json();
    let golden = common::fixtures().join("e2e/golden/report.json");
    if std::env::var_os("DASHCOACH_BLESS").is_some() {
        fs::create_dir_all(golden.parent().unwrap()).map_err(|e| e.to_string())?;
        fs::write(&golden, &json).map_err(|e| e.to_string())?;
    }
    let expected = fs::read_to_string(&golden).map_err(|e| format!("{}: {e}", golden.display()))?;
    check(json == expected, || "report differs from golden".into())?;

    let again = common::run_e2e(StubConfig::default()).map_err(|e| e.to_string())?;
    check(again.to_json() == json, || "second run differs".into())?;

    for model in &report.models {
        let items: Vec<ErJudgement> = model.er_items.iter().map(|i| i.judgement()).collect();
        let recomputed: ArResult = accuracy_rate(&items).map_err(|e| e.to_string())?;
        check(recomputed == model.ar, || format!("{}: AR not recomputable", model.name))?;
        check(
            model.er_items.len() == 60 && model.oq_items.len() == 6,
            || format!("{}: {} ER, {} OQ items", model.name, model.er_items.len(), model.oq_items.len()),
        )?;
    }
    Ok(format!("byte-identical to golden, AR {} recomputed", report.models[0].ar_exact))
}

// -------------------------------------------------------------- coaching

fn coaching_traceability() -> Outcome {
    let catalog = Catalog::default();
    let db = CoachingDb::default();
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let mut events = 0;
    for i in 0..50 {
        let transcript = common::random_transcript(&mut rng, &catalog);
        let record = detect_events(&transcript, &catalog).map_err(|e| e.to_string())?;
        let entries = align_with_db(&record, &db);
        let report = compose_report(&record, &entries, &db, None, DecodeParams::default());
        for event in &report.events {
            events += 1;
            let traced = transcript.entries.iter().any(|e| {
                e.parsed == ParsedAnswer::Affirmative
                    && e.instance.turn_index == event.evidence_turn
                    && catalog.get(&e.instance.template_id).unwrap().event_label.as_deref()
                        == Some(event.event_label.as_str())
            });
            check(traced, || format!("transcript {i}: {} has no affirmative source", event.event_label))?;
            check(db.get(&event.event_label).is_some(), || {
                format!("transcript {i}: {} not in db", event.event_label)
            })?;
        }
        let again = compose_report(&record, &entries, &db, None, DecodeParams::default());
        check(again.to_json() == report.to_json() && again.to_text() == report.to_text(), || {
            format!("transcript {i}: report not deterministic")
        })?;
    }
    Ok(format!("50 transcripts, {events} events traced"))
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("BLEU oracle equivalence", Duration::from_secs(1), bleu_oracle),
        ("BERTScore oracle equivalence", Duration::from_secs(1), bertscore_oracle),
        ("AR formula", Duration::from_secs(1), ar_formula),
        ("Catalog counts", Duration::from_secs(1), catalog_counts),
        ("Merge invariants", Duration::from_secs(5), merge_invariants),
        ("Parser corpus", Duration::from_secs(1), parser_corpus),
        ("End-to-end determinism", Duration::from_secs(30), end_to_end),
        ("Coaching traceability", Duration::from_secs(5), coaching_traceability),
    ];
    let mut failed = 0;
    for (name, budget, run) in criteria {
        let started = Instant::now();
        let outcome = run();
        let elapsed = started.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > budget => Err(format!("{detail}, but took {elapsed:?} (budget {budget:?})")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{:.0} ms]", elapsed.as_secs_f64() * 1000.0),
            Err(reason) => {
                failed += 1;
                println!("FAIL  {name}: {reason} [{:.0} ms]", elapsed.as_secs_f64() * 1000.0);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion/criteria failed");
        ExitCode::FAILURE
    }
}
