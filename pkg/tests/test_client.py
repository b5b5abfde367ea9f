import math

import pytest

from figcap.client import (
    InvalidBatchError,
    ProtocolViolationError,
    RemoteScorer,
    ScoreRequest,
    ServiceUnreachableError,
    generate_batch,
    score_batch,
)
from figcap.conformance import StubScorerService, run_conformance_suite
from figcap.prompts import PromptTemplate, build_prompt


def reqs(n):
    return [ScoreRequest(f"r{i}", f"context {i}", f"output {i}") for i in range(n)]


class TestScoreBatch:
    def test_empty_batch_rejected(self):
        with pytest.raises(InvalidBatchError):
            score_batch("http://127.0.0.1:1", [])

    def test_oversized_batch_rejected(self):
        with pytest.raises(InvalidBatchError):
            score_batch("http://127.0.0.1:1", reqs(257))

    def test_duplicate_request_ids_rejected(self):
        batch = [ScoreRequest("same", "c", "o"), ScoreRequest("same", "c2", "o2")]
        with pytest.raises(InvalidBatchError):
            score_batch("http://127.0.0.1:1", batch)

    def test_empty_output_rejected_client_side(self):
        with pytest.raises(InvalidBatchError):
            score_batch("http://127.0.0.1:1", [ScoreRequest("r", "c", "")])

    def test_roundtrip(self):
        with StubScorerService() as stub:
            responses = score_batch(stub.endpoint, reqs(5))
            assert [r.request_id for r in responses] == [f"r{i}" for i in range(5)]
            assert all(r.ok and r.log_prob < 0 for r in responses)

    def test_realignment_under_reordering(self):
        with StubScorerService() as straight, StubScorerService(reverse_order=True) as reversed_:
            batch = reqs(6)
            a = score_batch(straight.endpoint, batch)
            b = score_batch(reversed_.endpoint, batch)
            assert [(r.request_id, r.log_prob) for r in a] == [
                (r.request_id, r.log_prob) for r in b
            ]

    def test_dropped_requests_become_error_markers(self):
        with StubScorerService(drop_every=2) as stub:
            responses = score_batch(stub.endpoint, reqs(6))
            assert len(responses) == 6
            for i, resp in enumerate(responses):
                if (i + 1) % 2 == 0:
                    assert not resp.ok
                    assert math.isnan(resp.log_prob)
                else:
                    assert resp.ok

    def test_nan_log_prob_is_protocol_violation(self):
        with StubScorerService(emit_nan=True) as stub:
            with pytest.raises(ProtocolViolationError):
                score_batch(stub.endpoint, reqs(2))

    def test_retry_after_transient_500(self):
        with StubScorerService(fail_first=1) as stub:
            responses = score_batch(stub.endpoint, reqs(2), max_retries=2)
            assert all(r.ok for r in responses)

    def test_unreachable_service(self):
        with pytest.raises(ServiceUnreachableError):
            score_batch("http://127.0.0.1:1", reqs(1), timeout=0.5, max_retries=0)


class TestGenerateBatch:
    def prompts(self, n=2):
        return [
            build_prompt(f"ocr {i}", [f"mention {i}"], "Some text.", PromptTemplate.plain())
            for i in range(n)
        ]

    def test_sample_count_honored(self):
        with StubScorerService() as stub:
            out = generate_batch(stub.endpoint, self.prompts(), samples_per_prompt=16, seed=1)
            assert all(len(lst) == 16 for lst in out)
            assert [c.sample_index for c in out[0]] == list(range(16))

    def test_zero_samples_rejected(self):
        with pytest.raises(InvalidBatchError):
            generate_batch("http://127.0.0.1:1", self.prompts(), samples_per_prompt=0, seed=1)

    def test_seeded_determinism(self):
        with StubScorerService() as stub:
            a = generate_batch(stub.endpoint, self.prompts(), samples_per_prompt=3, seed=5)
            b = generate_batch(stub.endpoint, self.prompts(), samples_per_prompt=3, seed=5)
            assert [[c.text for c in lst] for lst in a] == [[c.text for c in lst] for lst in b]

    def test_realignment_under_reordering(self):
        with StubScorerService() as straight, StubScorerService(reverse_order=True) as reversed_:
            a = generate_batch(straight.endpoint, self.prompts(3), samples_per_prompt=2, seed=9)
            b = generate_batch(reversed_.endpoint, self.prompts(3), samples_per_prompt=2, seed=9)
            assert [[c.text for c in lst] for lst in a] == [[c.text for c in lst] for lst in b]


class TestRemoteScorer:
    def test_acts_as_conditional_scorer(self):
        with StubScorerService() as stub:
            remote = RemoteScorer(stub.endpoint)
            lp = remote.conditional_log_prob("the figure shows", "accuracy")
            assert math.isfinite(lp) and lp < 0
            # must agree with the stub's underlying cache scorer
            assert lp == pytest.approx(
                stub.scorer.conditional_log_prob("the figure shows", "accuracy")
            )


class TestStubConformance:
    def test_stub_passes_conformance_suite(self):
        with StubScorerService() as stub:
            run_conformance_suite(stub.endpoint)
