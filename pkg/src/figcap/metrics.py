"""Caption quality metrics: ROUGE-1/2, length-normalized ROUGE, and BLEU-4.

All metrics operate on token sequences from :func:`figcap.textkit.tokenize`
and are deterministic. Normalized ROUGE is 10 * recall / ln(1 + |reference|),
which rescales recall by reference length so short and long captions compare
on one axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .textkit import TokenSeq, ngrams

BLEU_MAX_ORDER = 4


class EmptyCorpusError(ValueError):
    pass


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class MetricReport:
    bleu4: float
    rouge1: RougeScore
    rouge2: RougeScore
    rouge1_norm: float
    rouge2_norm: float

    def to_dict(self) -> dict:
        """Flat JSON form with stable key order."""
        return {
            "bleu4": self.bleu4,
            "rouge1_p": self.rouge1.precision,
            "rouge1_r": self.rouge1.recall,
            "rouge1_f": self.rouge1.f1,
            "rouge2_p": self.rouge2.precision,
            "rouge2_r": self.rouge2.recall,
            "rouge2_f": self.rouge2.f1,
            "rouge1_norm": self.rouge1_norm,
            "rouge2_norm": self.rouge2_norm,
        }


def _f1(p: float, r: float) -> float:
    if p + r == 0:
        return 0.0
    return 2.0 * p * r / (p + r)


def _clipped_overlap(candidate: TokenSeq, reference: TokenSeq, n: int) -> tuple[int, int, int]:
    cand = ngrams(candidate, n)
    ref = ngrams(reference, n)
    overlap = sum(min(count, ref[gram]) for gram, count in cand.items())
    return overlap, sum(cand.values()), sum(ref.values())


def rouge_n(candidate: TokenSeq, reference: TokenSeq, n: int) -> RougeScore:
    """ROUGE-N precision/recall/F1 via clipped n-gram multiset overlap."""
    overlap, n_cand, n_ref = _clipped_overlap(candidate, reference, n)
    p = overlap / n_cand if n_cand else 0.0
    r = overlap / n_ref if n_ref else 0.0
    return RougeScore(p, r, _f1(p, r))


def rouge_n_normalized(candidate: TokenSeq, reference: TokenSeq, n: int) -> float:
    """Length-normalized ROUGE-N: 10 * recall / ln(1 + reference length)."""
    if not reference:
        return 0.0
    recall = rouge_n(candidate, reference, n).recall
    return 10.0 * recall / math.log(1 + len(reference))


def bleu4(candidate: TokenSeq, reference: TokenSeq) -> float:
    """Smoothed sentence BLEU-4 against a single reference.

    Geometric mean of clipped modified precisions for orders 1..4; a zero
    precision at order n is replaced by 1 / (2 * number of candidate
    n-grams of that order), or 1/2 when the candidate has none. Brevity
    penalty exp(1 - |ref|/|cand|) applies when the candidate is shorter.
    """
    if not candidate:
        return 0.0
    log_sum = 0.0
    for n in range(1, BLEU_MAX_ORDER + 1):
        overlap, n_cand, _ = _clipped_overlap(candidate, reference, n)
        if overlap > 0:
            precision = overlap / n_cand
        else:
            precision = 1.0 / (2.0 * max(n_cand, 1))
        log_sum += math.log(precision)
    score = math.exp(log_sum / BLEU_MAX_ORDER)
    if len(candidate) < len(reference):
        score *= math.exp(1.0 - len(reference) / len(candidate))
    return score


def score_pair(candidate: TokenSeq, reference: TokenSeq) -> MetricReport:
    return MetricReport(
        bleu4=bleu4(candidate, reference),
        rouge1=rouge_n(candidate, reference, 1),
        rouge2=rouge_n(candidate, reference, 2),
        rouge1_norm=rouge_n_normalized(candidate, reference, 1),
        rouge2_norm=rouge_n_normalized(candidate, reference, 2),
    )


def evaluate_corpus(pairs: list[tuple[TokenSeq, TokenSeq]]) -> MetricReport:
    """Arithmetic mean of per-pair metric reports."""
    if not pairs:
        raise EmptyCorpusError("cannot evaluate an empty corpus")
    reports = [score_pair(c, r) for c, r in pairs]
    k = len(reports)

    def mean(get):
        return sum(get(rep) for rep in reports) / k

    return MetricReport(
        bleu4=mean(lambda r: r.bleu4),
        rouge1=RougeScore(
            mean(lambda r: r.rouge1.precision),
            mean(lambda r: r.rouge1.recall),
            mean(lambda r: r.rouge1.f1),
        ),
        rouge2=RougeScore(
            mean(lambda r: r.rouge2.precision),
            mean(lambda r: r.rouge2.recall),
            mean(lambda r: r.rouge2.f1),
        ),
        rouge1_norm=mean(lambda r: r.rouge1_norm),
        rouge2_norm=mean(lambda r: r.rouge2_norm),
    )
