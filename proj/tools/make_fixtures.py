#!/usr/bin/env python3
"""Regenerates the bundled fixtures under fixtures/mini.

The outputs are committed; rerunning this script reproduces them exactly.
"""
import json
import struct
from pathlib import Path

import numpy as np
from PIL import Image

ROOT = Path(__file__).resolve().parent.parent / "fixtures" / "mini"
DIM = 32
N_CANDIDATES = 128
FRAMES_PER_VIDEO = 10

SAMPLES = [
    {"id": "vid001_0", "kind": "video", "uri": "videos/vid001",
     "question": "what does the white dog do after going to the cushion?",
     "options": ["lie down", "smell the black dog", "run away", "bark loudly", "sit still"],
     "answer_index": 1, "category": "temporal"},
    {"id": "vid001_1", "kind": "video", "uri": "videos/vid001",
     "question": "why does the black dog stand up?",
     "options": ["to greet the white dog", "to eat food", "to sleep", "to chase a ball", "to drink water"],
     "answer_index": 0, "category": "causal"},
    {"id": "vid002_0", "kind": "video", "uri": "videos/vid002",
     "question": "how many people are in the room?",
     "options": ["one", "two", "three", "four", "five"],
     "answer_index": 2, "category": "descriptive"},
    {"id": "vid003_0", "kind": "video", "uri": "videos/vid003",
     "question": "what does the boy do before jumping?",
     "options": ["claps his hands", "looks at the camera", "bends his knees", "waves", "takes off his hat"],
     "answer_index": 2, "category": "temporal"},
    {"id": "img001", "kind": "image", "uri": "images/img001.png",
     "question": "What color is the large square?",
     "options": ["red", "green", "blue", "yellow"],
     "answer_index": 0, "category": "CP"},
    {"id": "img002", "kind": "image", "uri": "images/img002.png",
     "question": "Which shape is on the left?",
     "options": ["circle", "square", "triangle", "star"],
     "answer_index": 1, "category": "FP"},
]

NEXTQA_CSV = """video,frame_count,width,height,question,answer,qid,type,a0,a1,a2,a3,a4
4882821564,1200,640,480,what does the white dog do after going to the cushion,1,6,TN,lie down,smell the black dog,run away,bark,sit
4882821564,1200,640,480,why did the black dog stand up,0,7,CW,to greet the dog,to eat,to sleep,to chase a ball,to drink
3238737531,900,640,360,how many people are there,2,2,DC,one,two,three,four,five
"""

MMSTAR_ROWS = [
    {"index": 0, "question": "What is the main object in the image?\nOptions: A: a cat, B: a dog, C: a car, D: a tree",
     "answer": "B", "category": "coarse perception", "l2_category": "image scene and topic", "image": "images/img001.png"},
    {"index": 1, "question": "Which shape is larger?\nOptions: A: the circle, B: the square, C: they are equal, D: cannot tell",
     "answer": "A", "category": "fine-grained perception", "l2_category": "attribute", "image": "images/img002.png"},
]


def unit(v):
    return (v / np.linalg.norm(v)).astype("<f4")


def write_emb1(path, records, model):
    with open(path, "wb") as f:
        f.write(b"EMB1")
        f.write(struct.pack("<II", len(records), DIM))
        for rid, vec in records:
            raw = rid.encode("utf-8")
            f.write(struct.pack("<H", len(raw)))
            f.write(raw)
            f.write(np.asarray(vec, dtype="<f4").tobytes())
    Path(str(path) + ".meta.json").write_text(json.dumps({"model": model}) + "\n")


def write_frames(directory, seed):
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    base = rng.integers(0, 256, size=3)
    for k in range(FRAMES_PER_VIDEO):
        colour = tuple(int(c) for c in (base + 20 * k) % 256)
        img = Image.new("RGB", (16, 16), colour)
        img.putpixel((k, k), (255, 255, 255))
        img.save(directory / f"frame_{k:03d}.png", optimize=False)


def main():
    ROOT.mkdir(parents=True, exist_ok=True)
    media = ROOT / "media"
    for n, vid in enumerate(sorted({s["uri"] for s in SAMPLES if s["kind"] == "video"})):
        write_frames(media / vid, 100 + n)
    for n, s in enumerate(s for s in SAMPLES if s["kind"] == "image"):
        path = media / s["uri"]
        path.parent.mkdir(parents=True, exist_ok=True)
        img = Image.new("RGB", (24, 24), (200, 30 + 60 * n, 40))
        img.save(path, optimize=False)

    with open(ROOT / "annotations.jsonl", "w") as f:
        for s in SAMPLES:
            f.write(json.dumps(s) + "\n")
    (ROOT / "nextqa.csv").write_text(NEXTQA_CSV)
    with open(ROOT / "mmstar.jsonl", "w") as f:
        for row in MMSTAR_ROWS:
            f.write(json.dumps(row) + "\n")

    rng = np.random.default_rng(20240601)
    text, visual = [], []
    for s in SAMPLES:
        centers = rng.standard_normal((6, DIM))
        for i in range(N_CANDIDATES):
            vec = centers[i % 6] + 0.35 * rng.standard_normal(DIM)
            text.append((f"{s['id']}#cand{i}", unit(vec)))
        visual.append((f"{s['id']}#vis", unit(rng.standard_normal(DIM))))
    write_emb1(ROOT / "text.emb1", text, "fixture-random-32")
    write_emb1(ROOT / "visual.emb1", visual, "fixture-random-32")

    config = {
        "paths": {
            "work_dir": "work",
            "input": "annotations.jsonl",
            "input_format": "canonical",
            "media_root": "media",
            "text_embeddings": "text.emb1",
            "visual_embeddings": "visual.emb1",
        },
        "selector": {"strategy": "cluster_clip", "seed": 1},
        "N": 128,
        "m": 4,
        "frames": 8,
        "global_seed": 7,
        "max_concurrency": 4,
        "mc_trials": 20000,
    }
    (ROOT / "pipeline.json").write_text(json.dumps(config, indent=2) + "\n")


if __name__ == "__main__":
    main()
