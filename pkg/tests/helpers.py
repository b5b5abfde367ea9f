"""Shared synthetic-data builders for pipeline and acceptance tests."""

import json
import random

WORDS = [
    "accuracy", "model", "training", "figure", "axis", "loss", "epoch",
    "baseline", "curve", "dataset", "score", "metric", "result", "plot",
]


def make_sentence(rng, lo=4, hi=9):
    words = [rng.choice(WORDS) for _ in range(rng.randint(lo, hi))]
    return " ".join(words).capitalize() + "."


def make_record(rng, record_id):
    gold = make_sentence(rng)
    relevant = gold[:-1].lower() + " as shown."
    noise = [make_sentence(rng) for _ in range(rng.randint(1, 3))]
    sentences = [relevant.capitalize()] + noise
    rng.shuffle(sentences)
    return {
        "record_id": record_id,
        "ocr_text": " ".join(rng.choice(WORDS) for _ in range(3)),
        "mentions": [make_sentence(rng, 3, 5)],
        "paragraphs": [" ".join(sentences)],
        "gold_caption": gold,
    }


def make_records(n, seed=0):
    rng = random.Random(seed)
    return [make_record(rng, f"rec{i:04d}") for i in range(n)]


def make_candidates(records, seed=0, per_record=4):
    """Candidate pools where one candidate per record is a gold duplicate."""
    rng = random.Random(seed)
    rows = []
    for rec in records:
        texts = [rec["gold_caption"], rec["gold_caption"]]
        texts += [make_sentence(rng) for _ in range(per_record - 2)]
        for i, text in enumerate(texts):
            rows.append(
                {
                    "record_id": rec["record_id"],
                    "source_model": "synthetic",
                    "epoch": 1,
                    "sample_index": i,
                    "text": text,
                }
            )
    return rows


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    return path
