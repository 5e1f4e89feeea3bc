#!/usr/bin/env python3
"""Regenerates the test fixtures under crates/core/tests/fixtures.

Expected values (BLEU scores, composite images) come from sacrebleu and
Pillow, not from the Rust code under test.
"""
import json
import random
from pathlib import Path

import sacrebleu
from PIL import Image

ROOT = Path(__file__).resolve().parent.parent / "crates" / "core" / "tests" / "fixtures"


def pattern(width, height, seed):
    rng = random.Random(seed)
    a, b, c = (rng.randrange(256) for _ in range(3))
    img = Image.new("RGB", (width, height))
    img.putdata([((x * 7 + a) % 256, (y * 11 + b) % 256, (x * y + c) % 256)
                 for y in range(height) for x in range(width)])
    return img


def frame_dir(path, width, height, frames, fps, seed):
    path.mkdir(parents=True, exist_ok=True)
    (path / "video.json").write_text(json.dumps({"fps": fps}) + "\n")
    for i in range(frames):
        pattern(width, height, seed * 1000 + i).save(path / f"frame_{i:03d}.png")


# ---------------------------------------------------------------- end to end

E2E_CLIPS = ["c1", "c2", "c3"]

SCENES = [
    "The ego-car drives along a wet highway behind a truck and keeps a steady distance.",
    "A car cuts into the ego-car's lane at an intersection and the ego-car brakes hard.",
    "The driver looks at a phone while the ego-car waits at a stop sign in the city.",
]
ACTIONS = [
    "The ego-car should keep a safe distance and reduce speed on the wet road.",
    "The ego-car should slow down early and leave room for merging vehicles.",
    "The driver should put the phone away and stop fully at the stop sign.",
]


def gold_record(index, clip_id):
    rng = random.Random(100 + index)
    binary = [
        "lane_cut_off", "lane_cut_off_signal", "driver_visible", "driver_smoking", "driver_phone",
        "driver_aggression", "stop_sign_visible", "stop_sign_ignored", "safe_following_distance",
        "speed_management", "harsh_braking", "harsh_braking_reason", "lane_change", "lane_change_reason",
        "sharp_turn", "sharp_turn_reason",
    ]
    er = {t: rng.choice(["affirmative", "negative"]) for t in binary}
    er["road_condition"] = {"choice": rng.choice(["Dry", "Wet", "Icy"])}
    er["weather"] = {"choice": rng.choice(["Clear", "Rainy", "Foggy", "Snowy"])}
    er["visibility"] = {"choice": rng.choice(["Clear", "Moderate", "Poor", "Night"])}
    er["road_information"] = {"choice": rng.choice(["Highway", "Intersection", "School Zone", "Tunnel"])}
    return {
        "clip_id": clip_id,
        "er_gold": er,
        "oq_gold": {"scene_description": SCENES[index], "recommended_action": ACTIONS[index]},
    }


def make_e2e():
    base = ROOT / "e2e"
    clips = []
    for i, clip in enumerate(E2E_CLIPS):
        frame_dir(base / "videos" / clip / "road", 48, 36, 10, 2.0, 10 * i + 1)
        frame_dir(base / "videos" / clip / "driver", 40, 30, 10, 2.0, 10 * i + 2)
        clips.append({
            "id": clip,
            "road_video": f"videos/{clip}/road",
            "driver_video": f"videos/{clip}/driver",
            "duration_s": 5.0,
            "split": "test",
        })
    # a training clip that evaluation must skip
    frame_dir(base / "videos" / "t1" / "road", 48, 36, 4, 2.0, 91)
    frame_dir(base / "videos" / "t1" / "driver", 40, 30, 4, 2.0, 92)
    clips.append({"id": "t1", "road_video": "videos/t1/road", "driver_video": "videos/t1/driver",
                  "duration_s": 2.0, "split": "train"})
    (base / "manifest.json").write_text(json.dumps({"clips": clips}, indent=2) + "\n")
    (base / "policy.json").write_text(json.dumps(
        {"sample_count": 4, "width": 32, "height": 24, "layout": "road_left"}, indent=2) + "\n")
    with open(base / "gold.jsonl", "w") as f:
        for i, clip in enumerate(E2E_CLIPS):
            f.write(json.dumps(gold_record(i, clip)) + "\n")


# --------------------------------------------------------------------- merge

def make_merge():
    base = ROOT / "merge"
    frame_dir(base / "road", 32, 24, 3, 1.0, 501)
    frame_dir(base / "driver", 32, 24, 3, 1.0, 502)
    # sampled at (i + 0.5) * 3 / 3 seconds with fps 1 -> frames 0, 1, 2
    for layout in ["road_left", "road_right"]:
        out = base / f"expected_{layout}"
        out.mkdir(parents=True, exist_ok=True)
        for i in range(3):
            road = Image.open(base / "road" / f"frame_{i:03d}.png").convert("RGB")
            driver = Image.open(base / "driver" / f"frame_{i:03d}.png").convert("RGB")
            left, right = (road, driver) if layout == "road_left" else (driver, road)
            canvas = Image.new("RGB", (64, 24))
            canvas.paste(left, (0, 0))
            canvas.paste(right, (32, 0))
            canvas.save(out / f"frame_{i:03d}.png")


# ---------------------------------------------------------------------- BLEU

VOCAB = ("the ego-car driver road lane car truck brakes slows stops turns left right signal "
         "speed distance wet icy highway intersection pedestrian crossing 30 km/h 2.5 meters "
         "quickly suddenly, safely. is was while and then , . ! ? ( ) \" ' - it's don't").split()

BASE_SENTENCES = SCENES + ACTIONS + [
    "The ego-car changes lanes to the left without using the turn signal.",
    "A pedestrian crosses the road near the school zone, so the ego-car stops.",
    "Visibility is poor because of fog; the driver reduces speed to 30 km/h.",
    "The truck ahead brakes suddenly and the ego-car keeps 2.5 meters of distance.",
    "It's night, the road is icy and the driver doesn't use high beams.",
]


def perturb(rng, sentence):
    words = sentence.split()
    for _ in range(rng.randrange(0, 5)):
        op = rng.randrange(3)
        if op == 0 and words:
            words[rng.randrange(len(words))] = rng.choice(VOCAB)
        elif op == 1 and len(words) > 1:
            del words[rng.randrange(len(words))]
        else:
            words.insert(rng.randrange(len(words) + 1), rng.choice(VOCAB))
    return " ".join(words)


def make_bleu():
    rng = random.Random(2024)
    pairs = []
    for i in range(50):
        ref = rng.choice(BASE_SENTENCES)
        if i % 10 == 0:
            hyp = ref
        elif i % 17 == 3:
            hyp = " ".join(rng.choice(VOCAB) for _ in range(rng.randrange(1, 6)))
        else:
            hyp = perturb(rng, ref)
        pairs.append((hyp, ref))
    pairs[7] = ("", pairs[7][1])
    base = ROOT / "bleu"
    base.mkdir(parents=True, exist_ok=True)
    with open(base / "pairs.jsonl", "w") as f:
        for hyp, ref in pairs:
            score = sacrebleu.corpus_bleu([hyp], [[ref]]).score
            f.write(json.dumps({"hyp": hyp, "ref": ref, "expected_bleu": score}) + "\n")
    corpus = sacrebleu.corpus_bleu([h for h, _ in pairs], [[r for _, r in pairs]])
    (base / "corpus.json").write_text(json.dumps({
        "expected_bleu": corpus.score,
        "precisions": corpus.precisions,
        "brevity_penalty": corpus.bp,
        "hyp_len": corpus.sys_len,
        "ref_len": corpus.ref_len,
        "sacrebleu_version": sacrebleu.__version__,
    }, indent=2) + "\n")


if __name__ == "__main__":
    make_e2e()
    make_merge()
    make_bleu()
