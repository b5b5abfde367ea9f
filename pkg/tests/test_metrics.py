import math
import random
from collections import Counter

import pytest

from figcap.metrics import (
    EmptyCorpusError,
    bleu4,
    evaluate_corpus,
    rouge_n,
    rouge_n_normalized,
    score_pair,
)


def brute_rouge_overlap(cand, ref, n):
    """Independent clipped-overlap count: enumerate windows directly."""
    cand_grams = Counter(tuple(cand[i : i + n]) for i in range(len(cand) - n + 1))
    ref_grams = Counter(tuple(ref[i : i + n]) for i in range(len(ref) - n + 1))
    return sum(min(c, ref_grams[g]) for g, c in cand_grams.items())


def random_tokens(rng, lo=4, hi=40):
    return [rng.choice("abcdefgh") for _ in range(rng.randint(lo, hi))]


class TestRougeN:
    def test_identical_sequences(self):
        toks = ["the", "figure", "shows", "results"]
        for n in (1, 2):
            score = rouge_n(toks, toks, n)
            assert score.precision == score.recall == score.f1 == 1.0

    def test_hand_counted_unigram(self):
        score = rouge_n(["a", "b", "c"], ["a", "b", "d"], 1)
        assert score.precision == pytest.approx(2 / 3)
        assert score.recall == pytest.approx(2 / 3)
        assert score.f1 == pytest.approx(2 / 3)

    def test_no_bigrams_in_candidate(self):
        score = rouge_n(["x"], ["a", "b"], 2)
        assert score == rouge_n(["x"], ["a", "b"], 2)
        assert score.precision == score.recall == score.f1 == 0.0

    def test_clipping(self):
        # candidate repeats "a" 4 times but reference has it twice
        score = rouge_n(["a", "a", "a", "a"], ["a", "b", "a"], 1)
        assert score.precision == pytest.approx(2 / 4)
        assert score.recall == pytest.approx(2 / 3)

    def test_precision_recall_duality(self):
        rng = random.Random(3)
        for _ in range(100):
            a, b = random_tokens(rng), random_tokens(rng)
            for n in (1, 2):
                assert rouge_n(a, b, n).precision == pytest.approx(
                    rouge_n(b, a, n).recall, abs=1e-12
                )

    def test_matches_brute_force(self):
        rng = random.Random(11)
        for _ in range(100):
            a, b = random_tokens(rng), random_tokens(rng)
            for n in (1, 2):
                overlap = brute_rouge_overlap(a, b, n)
                score = rouge_n(a, b, n)
                assert score.precision == pytest.approx(overlap / (len(a) - n + 1))
                assert score.recall == pytest.approx(overlap / (len(b) - n + 1))

    def test_monotone_recall_on_unmatched_append(self):
        rng = random.Random(5)
        for _ in range(50):
            a, b = random_tokens(rng), random_tokens(rng)
            base = rouge_n(a, b, 1).recall
            unmatched = [t for t in b if Counter(a)[t] < Counter(b)[t]]
            if unmatched:
                grown = rouge_n(a + [unmatched[0]], b, 1).recall
                assert grown >= base


class TestRougeNormalized:
    def test_identical_six_tokens(self):
        toks = list("abcdef")
        assert rouge_n_normalized(toks, toks, 1) == pytest.approx(10 / math.log(7), abs=1e-9)

    def test_empty_candidate(self):
        assert rouge_n_normalized([], ["a", "b"], 1) == 0.0

    def test_empty_reference(self):
        assert rouge_n_normalized(["a"], [], 1) == 0.0

    def test_partial_overlap(self):
        got = rouge_n_normalized(["a", "b", "c"], ["a", "b", "d"], 1)
        assert got == pytest.approx(10 * (2 / 3) / math.log(4), abs=1e-9)

    def test_nonnegative(self):
        rng = random.Random(9)
        for _ in range(100):
            assert rouge_n_normalized(random_tokens(rng), random_tokens(rng), 2) >= 0


class TestBleu4:
    def test_identical_sequences(self):
        toks = list("abcdefgh")
        assert bleu4(toks, toks) == 1.0

    def test_empty_candidate(self):
        assert bleu4([], ["a", "b"]) == 0.0

    def test_one_token_changed(self):
        # hand-derived: p1=7/8, p2=6/7, p3=5/6, p4=4/5, BP=1
        ref = list("abcdefgh")
        cand = list("abcdefgx")
        expected = (7 / 8 * 6 / 7 * 5 / 6 * 4 / 5) ** 0.25
        assert bleu4(cand, ref) == pytest.approx(expected, abs=1e-9)

    def test_brevity_penalty(self):
        ref = list("abcdefgh")
        cand = list("abcd")
        # precisions all 1 for the 4-token prefix; BP = exp(1 - 8/4)
        expected = math.exp(1 - 8 / 4)
        assert bleu4(cand, ref) == pytest.approx(expected, abs=1e-9)

    def test_no_overlap_smoothing(self):
        # zero matches at every order: each precision becomes 1/(2*count_n)
        cand = list("wxyz")
        ref = list("abcd")
        expected = (1 / 8 * 1 / 6 * 1 / 4 * 1 / 2) ** 0.25
        assert bleu4(cand, ref) == pytest.approx(expected, abs=1e-9)

    def test_bounds(self):
        rng = random.Random(13)
        for _ in range(200):
            a, b = random_tokens(rng, 1, 20), random_tokens(rng, 1, 20)
            assert 0.0 <= bleu4(a, b) <= 1.0


class TestEvaluateCorpus:
    def test_empty_corpus(self):
        with pytest.raises(EmptyCorpusError):
            evaluate_corpus([])

    def test_singleton_equals_pair(self):
        pair = (["a", "b", "c", "d"], ["a", "b", "c", "e"])
        report = evaluate_corpus([pair])
        assert report == score_pair(*pair)

    def test_mean_of_two(self):
        perfect = (["a", "b"], ["a", "b"])
        disjoint = (["x", "y"], ["a", "b"])
        report = evaluate_corpus([perfect, disjoint])
        assert report.rouge1.f1 == pytest.approx(0.5)

    def test_mean_invariance_under_copies(self):
        pair = (["a", "b", "c"], ["a", "b", "d"])
        single = evaluate_corpus([pair])
        many = evaluate_corpus([pair] * 7)
        assert many.rouge1.f1 == pytest.approx(single.rouge1.f1)
        assert many.bleu4 == pytest.approx(single.bleu4)
        assert many.rouge2_norm == pytest.approx(single.rouge2_norm)

    def test_json_serialization_keys(self):
        report = score_pair(["a", "b"], ["a", "b"])
        assert list(report.to_dict()) == [
            "bleu4",
            "rouge1_p",
            "rouge1_r",
            "rouge1_f",
            "rouge2_p",
            "rouge2_r",
            "rouge2_f",
            "rouge1_norm",
            "rouge2_norm",
        ]
