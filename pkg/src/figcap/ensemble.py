"""Consensus selection over a candidate-caption pool.

Each candidate is scored by its average similarity to every other pool
member; the highest-scoring candidate wins (minimum-Bayes-risk style
selection). Default similarity is normalized ROUGE-2 with the other
candidate as reference.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .metrics import rouge_n_normalized
from .textkit import tokenize

SimFn = Callable[[str, str], float]


class EmptyPoolError(ValueError):
    pass


class PoolIngestError(ValueError):
    pass


@dataclass(frozen=True)
class Candidate:
    text: str
    source_model: str
    epoch: int
    sample_index: int

    @property
    def key(self) -> tuple[str, int, int]:
        return (self.source_model, self.epoch, self.sample_index)


@dataclass(frozen=True)
class CandidatePool:
    record_id: str
    candidates: list[Candidate]


@dataclass(frozen=True)
class ConsensusResult:
    scores: list[float]
    winner_index: int
    winner: Candidate


def default_sim(a: str, b: str) -> float:
    """Normalized ROUGE-2 of a against b, with b as the reference."""
    return rouge_n_normalized(tokenize(a), tokenize(b), 2)


def consensus_scores(pool: CandidatePool, sim: SimFn = default_sim) -> list[float]:
    """Average similarity of each candidate to all others.

    s_n = 1/(N-1) * sum over m != n of sim(r_n, r_m). Summation runs in
    ascending m order so results are bit-stable regardless of evaluation
    parallelism.
    """
    cands = pool.candidates
    n = len(cands)
    if n < 2:
        raise EmptyPoolError("consensus scores need at least 2 candidates")
    scores = []
    for i, cand in enumerate(cands):
        total = 0.0
        for j, other in enumerate(cands):
            if j != i:
                total += sim(cand.text, other.text)
        scores.append(total / (n - 1))
    return scores


def select_caption(pool: CandidatePool, sim: SimFn = default_sim) -> ConsensusResult:
    """Pick the consensus winner; ties break to the lowest index."""
    if not pool.candidates:
        raise EmptyPoolError(f"record {pool.record_id}: empty candidate pool")
    if len(pool.candidates) == 1:
        return ConsensusResult([0.0], 0, pool.candidates[0])
    scores = consensus_scores(pool, sim)
    winner_index = max(range(len(scores)), key=lambda i: (scores[i], -i))
    return ConsensusResult(scores, winner_index, pool.candidates[winner_index])


def parse_candidate_line(line: str, lineno: int, path) -> tuple[str, Candidate]:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise PoolIngestError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
    missing = [k for k in ("record_id", "source_model", "epoch", "sample_index", "text") if k not in obj]
    if missing:
        raise PoolIngestError(f"{path}:{lineno}: missing fields {missing}")
    return obj["record_id"], Candidate(
        text=obj["text"],
        source_model=obj["source_model"],
        epoch=int(obj["epoch"]),
        sample_index=int(obj["sample_index"]),
    )


def load_candidate_files(sources: list[str | Path]) -> dict[str, CandidatePool]:
    """Read candidate JSONL files into per-record pools.

    Ingestion order is file order then line order; a repeated
    (source_model, epoch, sample_index) key within one record is an error.
    """
    pools: dict[str, list[Candidate]] = {}
    seen: dict[str, set[tuple[str, int, int]]] = {}
    for path in sources:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                record_id, cand = parse_candidate_line(line, lineno, path)
                keys = seen.setdefault(record_id, set())
                if cand.key in keys:
                    raise PoolIngestError(
                        f"{path}:{lineno}: duplicate candidate {cand.key} for record {record_id}"
                    )
                keys.add(cand.key)
                pools.setdefault(record_id, []).append(cand)
    return {rid: CandidatePool(rid, cands) for rid, cands in pools.items()}


def assemble_pool(record_id: str, sources: list[str | Path]) -> CandidatePool:
    """Pool for one record, merged from candidate files in deterministic order."""
    pools = load_candidate_files(sources)
    if record_id not in pools:
        raise PoolIngestError(f"no candidates found for record {record_id}")
    return pools[record_id]
