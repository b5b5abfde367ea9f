"""Gold-sentence filtering.

Each paragraph chunk c is scored by the likelihood ratio

    ratio(c) = P(output | c + " " + mention) / P(output | mention)

and kept when the ratio clears a threshold. The probability provider is
pluggable; the built-in :class:`CacheScorer` interpolates a smoothed
background unigram model with a cache distribution built from the context,
so chunks that share vocabulary with the output score higher.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Protocol

from .textkit import Chunk, TokenSeq, split_chunks, tokenize

DEFAULT_LAMBDA = 1.0

LogProbFn = Callable[[str, str], float]


class FilterError(ValueError):
    pass


class ConditionalScorer(Protocol):
    def conditional_log_prob(self, context: str, output: str) -> float: ...


@dataclass(frozen=True)
class ScoredChunk:
    chunk: Chunk
    ratio: float
    kept: bool


@dataclass(frozen=True)
class FilteredParagraph:
    text: str
    kept_indices: list[int]
    lambda_used: float

    @property
    def is_empty(self) -> bool:
        return not self.kept_indices


class CacheScorer:
    """Interpolated unigram-cache language model.

    P(w | ctx) = (1 - alpha) * P_bg(w) + alpha * P_cache(w | ctx), where the
    background is an add-k unigram fit with a single unknown-token bucket and
    the cache is an add-beta distribution over the context tokens. For every
    context the distribution over vocabulary plus unknown sums to 1.
    """

    def __init__(self, background: dict[str, float], unk_prob: float, alpha: float, beta: float):
        self.background = background
        self.unk_prob = unk_prob
        self.alpha = alpha
        self.beta = beta
        self.vocab_size = len(background)

    def background_prob(self, token: str) -> float:
        return self.background.get(token, self.unk_prob)

    def _cache_prob(self, token: str, context_tokens: TokenSeq) -> float:
        # tokens outside the vocabulary share one bucket, mirroring the
        # background's unknown handling so the distribution stays normalized
        if token in self.background:
            count = sum(1 for t in context_tokens if t == token)
        else:
            count = sum(1 for t in context_tokens if t not in self.background)
        denom = len(context_tokens) + self.beta * (self.vocab_size + 1)
        return (count + self.beta) / denom

    def token_prob(self, token: str, context_tokens: TokenSeq) -> float:
        return (1.0 - self.alpha) * self.background_prob(token) + self.alpha * self._cache_prob(
            token, context_tokens
        )

    def conditional_log_prob(self, context: str, output: str) -> float:
        """Natural-log probability of the output tokens given the context."""
        out_tokens = tokenize(output)
        if not out_tokens:
            raise FilterError("output must contain at least one token")
        ctx_tokens = tokenize(context)
        return sum(math.log(self.token_prob(t, ctx_tokens)) for t in out_tokens)


def fit_cache_scorer(
    corpus: list[TokenSeq], alpha: float, beta: float, k: float
) -> CacheScorer:
    """Fit the background unigram distribution with add-k smoothing.

    P_bg(w) = (count(w) + k) / (total + k * (V + 1)); the extra bucket holds
    all unknown-token mass.
    """
    if not corpus:
        raise FilterError("corpus must be non-empty")
    if not 0.0 < alpha < 1.0:
        raise FilterError(f"alpha must be in (0, 1), got {alpha}")
    if beta <= 0.0:
        raise FilterError(f"beta must be > 0, got {beta}")
    if k <= 0.0:
        raise FilterError(f"k must be > 0, got {k}")
    counts: dict[str, int] = {}
    total = 0
    for seq in corpus:
        for tok in seq:
            counts[tok] = counts.get(tok, 0) + 1
            total += 1
    vocab = len(counts)
    denom = total + k * (vocab + 1)
    background = {w: (c + k) / denom for w, c in counts.items()}
    return CacheScorer(background, unk_prob=k / denom, alpha=alpha, beta=beta)


def relevance_ratio(
    scorer: ConditionalScorer, chunk: Chunk, mention: str, output: str
) -> float:
    """exp(logP(output | chunk + mention) - logP(output | mention)).

    Chunk precedes mention with a single-space join. Computed entirely in
    log space, so the result is always finite and positive.
    """
    context_with = f"{chunk.text} {mention}"
    with_chunk = scorer.conditional_log_prob(context_with, output)
    without = scorer.conditional_log_prob(mention, output)
    return math.exp(with_chunk - without)


def filter_paragraph(
    scorer: ConditionalScorer,
    paragraphs: list[str],
    mention: str,
    output: str,
    lam: float = DEFAULT_LAMBDA,
) -> tuple[list[ScoredChunk], FilteredParagraph]:
    """Score every chunk and keep those with ratio >= lam, in source order.

    When no chunk passes, the filtered paragraph is empty; callers decide
    whether to fall back to the unfiltered text.
    """
    if lam < 0:
        raise FilterError(f"threshold must be >= 0, got {lam}")
    scored = []
    for chunk in split_chunks(paragraphs):
        ratio = relevance_ratio(scorer, chunk, mention, output)
        scored.append(ScoredChunk(chunk, ratio, ratio >= lam))
    kept = [s for s in scored if s.kept]
    filtered = FilteredParagraph(
        text=" ".join(s.chunk.text for s in kept),
        kept_indices=[s.chunk.index for s in kept],
        lambda_used=lam,
    )
    return scored, filtered
