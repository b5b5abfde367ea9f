"""In-process stub service and the client conformance suite.

The stub implements the /v1/score and /v1/generate wire protocol on top of
the built-in cache scorer, with optional misbehaviors (response reordering,
dropped requests, non-finite values) for exercising the client. The
conformance checks at the bottom are service-agnostic: they accept any
endpoint URL, so a real service must pass exactly the same suite as the
stub.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import requests

from .filtering import CacheScorer, fit_cache_scorer
from .textkit import tokenize

_STUB_CORPUS = [
    tokenize(s)
    for s in [
        "the figure shows accuracy over training epochs",
        "results improve with larger models on the benchmark",
        "a comparison of baseline and proposed methods",
        "error bars denote one standard deviation",
    ]
]


def default_stub_scorer() -> CacheScorer:
    return fit_cache_scorer(_STUB_CORPUS, alpha=0.5, beta=0.1, k=1.0)


def _seeded_generate(text: str, seed: int, request_id: str, sample_index: int) -> str:
    """Deterministic pseudo-generation: sample words from the prompt text."""
    words = tokenize(text) or ["caption"]
    digest = hashlib.sha256(f"{seed}:{request_id}:{sample_index}".encode()).digest()
    rng = random.Random(int.from_bytes(digest[:8], "big"))
    length = rng.randint(3, min(10, max(3, len(words))))
    return " ".join(rng.choice(words) for _ in range(length))


class StubScorerService:
    """Threaded HTTP stub speaking the scorer/generator protocol.

    Behavior flags:
        reverse_order: answer batches in reversed order (alignment check)
        drop_every: omit every k-th request from the response (error markers)
        emit_nan: return NaN log_probs (protocol-violation check)
        fail_first: return 500 for the first N requests (retry check)
    """

    def __init__(
        self,
        scorer: CacheScorer | None = None,
        reverse_order: bool = False,
        drop_every: int = 0,
        emit_nan: bool = False,
        fail_first: int = 0,
    ):
        self.scorer = scorer or default_stub_scorer()
        self.reverse_order = reverse_order
        self.drop_every = drop_every
        self.emit_nan = emit_nan
        self.remaining_failures = fail_first
        self.lock = threading.Lock()
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _send(self, code: int, obj: dict):
                body = json.dumps(obj).encode()
                self.send_response(code)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def do_GET(self):
                if self.path == "/healthz":
                    self._send(200, {"status": "ok"})
                else:
                    self._send(404, {"error": "not found"})

            def do_POST(self):
                with stub.lock:
                    if stub.remaining_failures > 0:
                        stub.remaining_failures -= 1
                        self._send(500, {"error": "transient failure"})
                        return
                length = int(self.headers.get("Content-Length", 0))
                try:
                    payload = json.loads(self.rfile.read(length))
                except json.JSONDecodeError:
                    self._send(400, {"error": "invalid JSON"})
                    return
                if self.path == "/v1/score":
                    self._send(200, stub.handle_score(payload))
                elif self.path == "/v1/generate":
                    self._send(200, stub.handle_generate(payload))
                else:
                    self._send(404, {"error": "not found"})

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    @property
    def endpoint(self) -> str:
        return f"http://127.0.0.1:{self.server.server_port}"

    def handle_score(self, payload: dict) -> dict:
        responses = []
        for i, req in enumerate(payload.get("requests", [])):
            rid = req.get("request_id", "")
            if self.drop_every and (i + 1) % self.drop_every == 0:
                continue
            if not req.get("output"):
                responses.append({"request_id": rid, "error": "empty output"})
                continue
            if self.emit_nan:
                responses.append({"request_id": rid, "log_prob": math.nan})
                continue
            lp = self.scorer.conditional_log_prob(req.get("context", ""), req["output"])
            responses.append({"request_id": rid, "log_prob": lp})
        if self.reverse_order:
            responses.reverse()
        return {"responses": responses}

    def handle_generate(self, payload: dict) -> dict:
        k = payload.get("samples_per_prompt", 1)
        seed = payload.get("seed", 0)
        results = []
        for prompt in payload.get("prompts", []):
            rid = prompt.get("request_id", "")
            cands = [_seeded_generate(prompt.get("text", ""), seed, rid, i) for i in range(k)]
            results.append({"request_id": rid, "candidates": cands})
        if self.reverse_order:
            results.reverse()
        return {"results": results}

    def __enter__(self) -> "StubScorerService":
        self.thread.start()
        return self

    def __exit__(self, *exc) -> None:
        self.server.shutdown()
        self.server.server_close()


# ---------------------------------------------------------------------------
# Conformance suite: any protocol implementation must pass all checks.
# ---------------------------------------------------------------------------


def check_health(endpoint: str) -> None:
    resp = requests.get(endpoint.rstrip("/") + "/healthz", timeout=10)
    assert resp.status_code == 200, f"healthz returned {resp.status_code}"


def check_score_alignment(endpoint: str) -> None:
    """Responses realign by request_id no matter the service's answer order."""
    from .client import ScoreRequest, score_batch

    reqs = [
        ScoreRequest(request_id=f"r{i}", context="figure shows", output=f"accuracy epoch {i}")
        for i in range(8)
    ]
    responses = score_batch(endpoint, reqs)
    assert [r.request_id for r in responses] == [r.request_id for r in reqs]
    for resp in responses:
        assert resp.ok, f"{resp.request_id} failed: {resp.error}"
        assert math.isfinite(resp.log_prob) and resp.log_prob < 0

    # identical requests under different ids must score identically
    dup = [ScoreRequest(f"d{i}", "same context", "same output") for i in range(4)]
    dup_resp = score_batch(endpoint, dup)
    assert len({r.log_prob for r in dup_resp}) == 1


def check_score_empty_output_error(endpoint: str) -> None:
    """An empty output yields a per-request protocol error, not a score."""
    resp = requests.post(
        endpoint.rstrip("/") + "/v1/score",
        json={"requests": [{"request_id": "bad", "context": "c", "output": ""}]},
        timeout=10,
    )
    if resp.status_code == 200:
        items = resp.json()["responses"]
        assert len(items) == 1 and "error" in items[0], f"expected error marker, got {items}"
    else:
        assert 400 <= resp.status_code < 500, f"unexpected status {resp.status_code}"


def check_context_sensitivity(endpoint: str) -> None:
    """Quoting the output inside the context must raise its score."""
    from .client import ScoreRequest, score_batch

    output = "accuracy improves with training"
    reqs = [
        ScoreRequest("with", f"the figure shows that {output} . see results", output),
        ScoreRequest("without", "see results", output),
    ]
    with_ctx, without_ctx = score_batch(endpoint, reqs)
    assert with_ctx.log_prob > without_ctx.log_prob, (
        f"expected context quoting output to score higher: "
        f"{with_ctx.log_prob} vs {without_ctx.log_prob}"
    )


def check_generate_determinism(endpoint: str) -> None:
    """Same seed, same prompts: identical candidates; counts always honored."""
    from .client import generate_batch
    from .prompts import PromptTemplate, build_prompt

    prompts = [
        build_prompt("axis labels", ["as shown in figure 1"], "The model converges.", PromptTemplate.plain()),
        build_prompt("legend", ["figure 2 compares"], "Baselines differ.", PromptTemplate.plain()),
    ]
    first = generate_batch(endpoint, prompts, samples_per_prompt=4, seed=7)
    second = generate_batch(endpoint, prompts, samples_per_prompt=4, seed=7)
    assert [[c.text for c in lst] for lst in first] == [[c.text for c in lst] for lst in second]
    for lst in first:
        assert len(lst) == 4
        assert [c.sample_index for c in lst] == [0, 1, 2, 3]


ALL_CHECKS = [
    check_health,
    check_score_alignment,
    check_score_empty_output_error,
    check_context_sensitivity,
    check_generate_determinism,
]


def run_conformance_suite(endpoint: str) -> None:
    """Run every check against the given endpoint; raises on first failure."""
    for check in ALL_CHECKS:
        check(endpoint)
