"""Self-contained sequence model backing the reference service.

An interpolated bigram/unigram language model with a context cache. It is
deliberately tiny: the service's contract is the wire protocol, not the
model, so any scorer that produces finite negative log-probabilities and
seeded samples can be swapped in via configuration.
"""

from __future__ import annotations

import hashlib
import math
import random
import re
from collections import Counter
from dataclasses import dataclass, field

_TOKEN_RE = re.compile(r"[^\W_]+|\S", re.UNICODE)

DEFAULT_CORPUS = """
The figure shows model accuracy over training epochs. Results improve with
larger models on the benchmark. A comparison of baseline and proposed
methods appears in the plot. Error bars denote one standard deviation.
The curve plots validation loss against the number of steps. Captions
summarize the key finding of each figure. The table reports scores for
every configuration. Performance saturates after the fifth epoch.
"""


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass
class NgramSequenceModel:
    """Bigram LM with unigram backoff and a context-cache mixture.

    P(w | prev, ctx) = mix of corpus bigram, corpus unigram (add-k smoothed
    over vocab + unknown bucket) and the empirical distribution of the
    request context. Scoring sums natural-log token probabilities.
    """

    unigram: Counter = field(default_factory=Counter)
    bigram: Counter = field(default_factory=Counter)
    total: int = 0
    k: float = 0.5
    cache_weight: float = 0.4
    bigram_weight: float = 0.3

    @classmethod
    def fit(cls, text: str, **kwargs) -> "NgramSequenceModel":
        model = cls(**kwargs)
        tokens = tokenize(text)
        model.unigram = Counter(tokens)
        model.bigram = Counter(zip(tokens, tokens[1:]))
        model.total = len(tokens)
        return model

    @property
    def vocab(self) -> list[str]:
        return sorted(self.unigram)

    def _unigram_prob(self, token: str) -> float:
        vocab_size = len(self.unigram)
        return (self.unigram.get(token, 0) + self.k) / (self.total + self.k * (vocab_size + 1))

    def _bigram_prob(self, prev: str, token: str) -> float:
        vocab_size = len(self.unigram)
        return (self.bigram.get((prev, token), 0) + self.k) / (
            self.unigram.get(prev, 0) + self.k * (vocab_size + 1)
        )

    def _cache_prob(self, token: str, ctx_counts: Counter, ctx_len: int) -> float:
        vocab_size = len(self.unigram)
        beta = self.k
        return (ctx_counts.get(token, 0) + beta) / (ctx_len + beta * (vocab_size + 1))

    def token_log_prob(self, prev: str | None, token: str, ctx_counts: Counter, ctx_len: int) -> float:
        base = self._unigram_prob(token)
        if prev is not None:
            base = (1 - self.bigram_weight) * base + self.bigram_weight * self._bigram_prob(prev, token)
        prob = (1 - self.cache_weight) * base + self.cache_weight * self._cache_prob(
            token, ctx_counts, ctx_len
        )
        return math.log(prob)

    def score(self, context: str, output: str) -> float:
        """Natural-log probability of the output tokens given the context."""
        out_tokens = tokenize(output)
        if not out_tokens:
            raise ValueError("output must contain at least one token")
        ctx_tokens = tokenize(context)
        ctx_counts = Counter(ctx_tokens)
        total = 0.0
        prev = None
        for tok in out_tokens:
            total += self.token_log_prob(prev, tok, ctx_counts, len(ctx_tokens))
            prev = tok
        return total

    def generate(self, prompt: str, seed: int, request_id: str, sample_index: int) -> str:
        """Sample one caption; deterministic in (seed, request_id, sample_index)."""
        digest = hashlib.sha256(f"{seed}:{request_id}:{sample_index}".encode()).digest()
        rng = random.Random(int.from_bytes(digest[:8], "big"))
        ctx_tokens = tokenize(prompt)
        ctx_counts = Counter(ctx_tokens)
        vocab = self.vocab or ["caption"]
        length = rng.randint(5, 12)
        out: list[str] = []
        prev = None
        for _ in range(length):
            weights = [
                math.exp(self.token_log_prob(prev, w, ctx_counts, len(ctx_tokens))) for w in vocab
            ]
            prev = rng.choices(vocab, weights=weights, k=1)[0]
            out.append(prev)
        return " ".join(out)
