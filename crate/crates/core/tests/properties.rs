use dashcoach_core::catalog::{Catalog, Choice};
use dashcoach_core::media::{merge_side_by_side, FrameSet, Layout, MergePolicy};
use dashcoach_core::metrics::{accuracy_rate, bert_score, corpus_bleu, ErJudgement, EmbeddingMatrix};
use dashcoach_core::parser::{classify_choice, normalize, NormalizationRuleSet, ParsedAnswer};
use dashcoach_core::{ArResult, BleuResult};
use image::{Rgb, RgbImage};
use proptest::prelude::*;

fn matrix(rows: Vec<Vec<f64>>) -> EmbeddingMatrix<f64> {
    EmbeddingMatrix::new((0..rows.len()).map(|i| format!("t{i}")).collect(), rows).unwrap()
}

fn rows(dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(
        prop::collection::vec(-1.0f64..1.0, dim).prop_filter("non-zero row", |r| r.iter().any(|v| v.abs() > 1e-3)),
        1..8,
    )
}

const FRAGMENTS: &[&str] = &[
    "Sure!", "Hello,", "hi there.", "Yes", "no", "ASSISTANT:", "Answer:", "Based on the video,",
    "I hope this helps.", "Let me know if you have any other questions!", "the", "road", "is", "wet.",
    "   ", "\n", "Certainly.", "Thank you for the question.", "Okay:", "!",
];

fn response() -> impl Strategy<Value = String> {
    prop_oneof![
        prop::collection::vec(prop::sample::select(FRAGMENTS), 0..10).prop_map(|w| w.join(" ")),
        "\\PC{0,60}",
    ]
}

proptest! {
    #[test]
    fn normalize_is_idempotent(raw in response()) {
        let rules = NormalizationRuleSet::default();
        let once = normalize(&raw, &rules);
        prop_assert_eq!(normalize(&once, &rules), once);
    }

    #[test]
    fn bertscore_swaps_precision_and_recall(h in rows(6), r in rows(6)) {
        let (h, r) = (matrix(h), matrix(r));
        let forward = bert_score(&h, &r).unwrap();
        let backward = bert_score(&r, &h).unwrap();
        prop_assert!((forward.precision - backward.recall).abs() < 1e-12);
        prop_assert!((forward.recall - backward.precision).abs() < 1e-12);
        prop_assert!((forward.f1 - backward.f1).abs() < 1e-12);
    }

    #[test]
    fn bertscore_ignores_row_order_and_scale(h in rows(5), r in rows(5), scale in 0.1f64..10.0) {
        let base = bert_score(&matrix(h.clone()), &matrix(r.clone())).unwrap();
        let mut shuffled = h.clone();
        shuffled.reverse();
        let scaled: Vec<Vec<f64>> = r.iter().map(|row| row.iter().map(|v| v * scale).collect()).collect();
        let other = bert_score(&matrix(shuffled), &matrix(scaled)).unwrap();
        prop_assert!((base.precision - other.precision).abs() < 1e-9);
        prop_assert!((base.recall - other.recall).abs() < 1e-9);
        if base.precision >= 0.0 && base.recall >= 0.0 {
            prop_assert!(base.f1 <= 1.0 + 1e-12 && base.f1 >= 0.0);
        }
    }

    #[test]
    fn corpus_bleu_ignores_pair_order(
        pairs in prop::collection::vec(("[a-d ]{0,20}", "[a-d ]{1,20}"), 1..10),
    ) {
        let hyps: Vec<&str> = pairs.iter().map(|p| p.0.as_str()).collect();
        let refs: Vec<&str> = pairs.iter().map(|p| p.1.as_str()).collect();
        let forward: BleuResult = corpus_bleu(&hyps, &refs).unwrap();
        let (mut rh, mut rr) = (hyps.clone(), refs.clone());
        rh.reverse();
        rr.reverse();
        let backward: BleuResult = corpus_bleu(&rh, &rr).unwrap();
        prop_assert_eq!(forward, backward);
        prop_assert!((0.0..=100.0 + 1e-9).contains(&forward.score));
    }

    #[test]
    fn identical_text_scores_full_bleu(text in "[a-z]{1,6}( [a-z]{1,6}){3,12}") {
        let result: BleuResult = corpus_bleu(&[&text], &[&text]).unwrap();
        prop_assert!((result.score - 100.0).abs() < 1e-9);
    }

    #[test]
    fn another_true_event_never_lowers_ar(t in 0u64..50, f in 0u64..50) {
        prop_assume!(t + f > 0);
        let make = |t: u64, f: u64| -> Vec<ErJudgement> {
            (0..t + f)
                .map(|i| {
                    let predicted = if i < t { ParsedAnswer::Negative } else { ParsedAnswer::Affirmative };
                    ErJudgement::judge("c", "x", i as usize, ParsedAnswer::Negative, predicted)
                })
                .collect()
        };
        let before: ArResult = accuracy_rate(&make(t, f)).unwrap();
        let after: ArResult = accuracy_rate(&make(t + 1, f)).unwrap();
        prop_assert!(after.ar >= before.ar);
        prop_assert_eq!(before.true_events, t);
        prop_assert!((0.0..=1.0).contains(&before.ar));
    }

    #[test]
    fn swapping_layout_swaps_halves(w in 16u32..40, h in 16u32..30, k in 1usize..4, seed in any::<u64>()) {
        let frames = |salt: u64| -> Vec<RgbImage> {
            (0..k)
                .map(|i| RgbImage::from_fn(w, h, |x, y| {
                    let v = seed ^ salt ^ (i as u64 * 31 + x as u64 * 7 + y as u64 * 13);
                    Rgb([v as u8, (v >> 8) as u8, (v >> 16) as u8])
                }))
                .collect()
        };
        let set = |frames| FrameSet { clip_id: "p".into(), frames, timestamps: vec![0.0; k], width: w, height: h };
        let (road, driver) = (set(frames(1)), set(frames(2)));
        let left = merge_side_by_side(&road, &driver, &MergePolicy::new(k, w, h, Layout::RoadLeft).unwrap()).unwrap();
        let right = merge_side_by_side(&road, &driver, &MergePolicy::new(k, w, h, Layout::RoadRight).unwrap()).unwrap();
        for (a, b) in left.frames.iter().zip(&right.frames) {
            for y in 0..h {
                for x in 0..w {
                    prop_assert_eq!(a.get_pixel(x, y), b.get_pixel(x + w, y));
                    prop_assert_eq!(a.get_pixel(x + w, y), b.get_pixel(x, y));
                }
            }
        }
    }

    #[test]
    fn choices_come_from_the_list(text in "\\PC{0,80}") {
        let catalog = Catalog::default();
        let choices: &[Choice] = catalog.get("road_information").unwrap().choices();
        match classify_choice(&text, choices) {
            ParsedAnswer::Choice(label) => prop_assert!(choices.iter().any(|c| c.label == label)),
            ParsedAnswer::Unparseable(_) => {}
            other => prop_assert!(false, "unexpected {other:?}"),
        }
    }
}
