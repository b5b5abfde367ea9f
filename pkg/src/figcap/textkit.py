"""Deterministic text primitives: tokenization, sentence splitting, n-grams.

Everything in here is a pure function. The tokenizer and splitter are
rule-based on purpose so that metric values are reproducible bit-for-bit
across machines and runs.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass

TokenSeq = list[str]

# A token is either a maximal run of letters/digits (underscore excluded)
# or a single non-space character.
_TOKEN_RE = re.compile(r"[^\W_]+|\S", re.UNICODE)

_WS_RE = re.compile(r"\s+")

MAX_NGRAM_ORDER = 4


class InvalidNgramOrder(ValueError):
    pass


@dataclass(frozen=True)
class Chunk:
    """One sentence-level block of a concatenated paragraph."""

    text: str
    index: int
    char_span: tuple[int, int]


def tokenize(text: str) -> TokenSeq:
    """Lowercase and split into letter/digit runs and single punctuation marks.

    Empty or whitespace-only input yields an empty list. Idempotent through
    a space join: tokenize(" ".join(tokenize(s))) == tokenize(s).
    """
    return _TOKEN_RE.findall(text.lower())


def join_tokens(tokens: TokenSeq) -> str:
    return " ".join(tokens)


def normalize_whitespace(text: str) -> str:
    return _WS_RE.sub(" ", text).strip()


def _is_split_point(text: str, i: int) -> bool:
    """True if the sentence-final character at position i ends a chunk.

    Requires whitespace then an uppercase letter or digit after position i.
    A period gets an abbreviation guard: no split when the word before it
    looks like an abbreviation -- a short capitalized word ("Fig."), a word
    of at most two letters ("al."), or a dotted compound ("e.g.").
    """
    ch = text[i]
    if ch not in ".!?":
        return False
    j = i + 1
    if j >= len(text) or not text[j].isspace():
        return False
    while j < len(text) and text[j].isspace():
        j += 1
    if j >= len(text) or not (text[j].isupper() or text[j].isdigit()):
        return False
    if ch == ".":
        # word = maximal run of non-space chars immediately before the "."
        k = i
        while k > 0 and not text[k - 1].isspace():
            k -= 1
        word = text[k:i]
        if word and word[-1].isalpha():
            if "." in word or len(word) <= 2 or (len(word) == 3 and word[0].isupper()):
                return False
    return True


def split_chunks(paragraphs: list[str]) -> list[Chunk]:
    """Join paragraphs with single spaces and split into sentence chunks.

    Chunk char_spans index into the normalized joined paragraph; joining the
    chunk texts back with single spaces reconstructs it exactly.
    """
    text = normalize_whitespace(" ".join(paragraphs))
    if not text:
        return []
    chunks: list[Chunk] = []
    start = 0
    for i in range(len(text)):
        if _is_split_point(text, i):
            piece = text[start : i + 1].strip()
            if piece:
                lo = text.index(piece, start)
                chunks.append(Chunk(piece, len(chunks), (lo, lo + len(piece))))
            start = i + 1
    tail = text[start:].strip()
    if tail:
        lo = text.index(tail, start)
        chunks.append(Chunk(tail, len(chunks), (lo, lo + len(tail))))
    return chunks


def ngrams(tokens: TokenSeq, n: int) -> Counter:
    """Sliding-window n-gram multiset for n in 1..4."""
    if not 1 <= n <= MAX_NGRAM_ORDER:
        raise InvalidNgramOrder(f"n-gram order must be in 1..{MAX_NGRAM_ORDER}, got {n}")
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))
