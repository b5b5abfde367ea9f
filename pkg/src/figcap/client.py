"""HTTP client for external scoring and generation services.

Wire protocol (JSON over HTTP):

    POST /v1/score    {"requests": [{"request_id", "context", "output"}]}
                   -> {"responses": [{"request_id", "log_prob"}]}
    POST /v1/generate {"prompts": [{"request_id", "text"}],
                       "samples_per_prompt": int, "seed": int}
                   -> {"results": [{"request_id", "candidates": [str]}]}

Responses are realigned to the request order by request_id, so services may
answer in any order. Failures after retries surface as per-request error
markers rather than dropped entries.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import requests

from .ensemble import Candidate
from .prompts import PromptText

MAX_BATCH = 256


class ClientError(Exception):
    """Base for all scorer-client failures."""


class InvalidBatchError(ClientError):
    pass


class ServiceUnreachableError(ClientError):
    pass


class ServiceTimeoutError(ClientError):
    pass


class ProtocolViolationError(ClientError):
    pass


@dataclass(frozen=True)
class ScoreRequest:
    request_id: str
    context: str
    output: str


@dataclass(frozen=True)
class ScoreResponse:
    request_id: str
    log_prob: float
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _post_json(endpoint: str, path: str, payload: dict, timeout: float, max_retries: int) -> dict:
    url = endpoint.rstrip("/") + path
    last_exc: Exception | None = None
    for attempt in range(max_retries + 1):
        try:
            resp = requests.post(url, json=payload, timeout=timeout)
        except requests.Timeout as exc:
            last_exc = ServiceTimeoutError(f"timeout after {timeout}s: {url}")
            last_exc.__cause__ = exc
        except requests.ConnectionError as exc:
            last_exc = ServiceUnreachableError(f"cannot reach {url}: {exc}")
            last_exc.__cause__ = exc
        else:
            if resp.status_code >= 500:
                last_exc = ServiceUnreachableError(f"{url} returned {resp.status_code}")
            else:
                try:
                    return resp.json()
                except ValueError as exc:
                    raise ProtocolViolationError(f"{url}: response is not JSON") from exc
        if attempt < max_retries:
            time.sleep(min(0.1 * 2**attempt, 2.0))
    assert last_exc is not None
    raise last_exc


def score_batch(
    endpoint: str,
    requests_batch: list[ScoreRequest],
    timeout: float = 30.0,
    max_retries: int = 2,
) -> list[ScoreResponse]:
    """Score a batch of (context, output) pairs against an external service.

    The returned list is aligned 1:1 with the input batch. Requests the
    service failed to answer come back with an error marker; a transport
    failure of the whole batch raises instead.
    """
    if not 1 <= len(requests_batch) <= MAX_BATCH:
        raise InvalidBatchError(f"batch size must be in 1..{MAX_BATCH}, got {len(requests_batch)}")
    ids = [r.request_id for r in requests_batch]
    if len(set(ids)) != len(ids):
        raise InvalidBatchError("request_ids within a batch must be unique")
    for r in requests_batch:
        if not r.output:
            raise InvalidBatchError(f"request {r.request_id}: output must be non-empty")

    payload = {
        "requests": [
            {"request_id": r.request_id, "context": r.context, "output": r.output}
            for r in requests_batch
        ]
    }
    body = _post_json(endpoint, "/v1/score", payload, timeout, max_retries)
    if not isinstance(body, dict) or not isinstance(body.get("responses"), list):
        raise ProtocolViolationError("score response missing 'responses' list")

    by_id: dict[str, ScoreResponse] = {}
    for item in body["responses"]:
        rid = item.get("request_id")
        if rid not in set(ids):
            raise ProtocolViolationError(f"response for unknown request_id {rid!r}")
        if "error" in item:
            by_id[rid] = ScoreResponse(rid, math.nan, error=str(item["error"]))
            continue
        lp = item.get("log_prob")
        if not isinstance(lp, (int, float)) or not math.isfinite(lp):
            raise ProtocolViolationError(f"request {rid}: non-finite or missing log_prob: {lp!r}")
        by_id[rid] = ScoreResponse(rid, float(lp))
    return [
        by_id.get(rid, ScoreResponse(rid, math.nan, error="no response from service"))
        for rid in ids
    ]


class RemoteScorer:
    """Adapter exposing the score endpoint as a conditional-probability scorer.

    Drop-in for :class:`figcap.filtering.CacheScorer` in the filter stage.
    """

    def __init__(self, endpoint: str, timeout: float = 30.0, max_retries: int = 2):
        self.endpoint = endpoint
        self.timeout = timeout
        self.max_retries = max_retries
        self._counter = 0

    def conditional_log_prob(self, context: str, output: str) -> float:
        self._counter += 1
        req = ScoreRequest(request_id=f"q{self._counter}", context=context, output=output)
        resp = score_batch(self.endpoint, [req], self.timeout, self.max_retries)[0]
        if not resp.ok:
            raise ProtocolViolationError(f"scoring failed: {resp.error}")
        return resp.log_prob


def generate_batch(
    endpoint: str,
    prompts: list[PromptText],
    samples_per_prompt: int,
    seed: int,
    timeout: float = 60.0,
    max_retries: int = 2,
    source_model: str = "remote",
    epoch: int = 0,
) -> list[list[Candidate]]:
    """Request sampled captions for each prompt from an external generator."""
    if samples_per_prompt < 1:
        raise InvalidBatchError(f"samples_per_prompt must be >= 1, got {samples_per_prompt}")
    if not 1 <= len(prompts) <= MAX_BATCH:
        raise InvalidBatchError(f"batch size must be in 1..{MAX_BATCH}, got {len(prompts)}")
    ids = [f"p{i}" for i in range(len(prompts))]
    payload = {
        "prompts": [{"request_id": rid, "text": p.text} for rid, p in zip(ids, prompts)],
        "samples_per_prompt": samples_per_prompt,
        "seed": seed,
    }
    body = _post_json(endpoint, "/v1/generate", payload, timeout, max_retries)
    if not isinstance(body, dict) or not isinstance(body.get("results"), list):
        raise ProtocolViolationError("generate response missing 'results' list")
    by_id: dict[str, list[str]] = {}
    for item in body["results"]:
        rid = item.get("request_id")
        if rid not in set(ids):
            raise ProtocolViolationError(f"result for unknown request_id {rid!r}")
        cands = item.get("candidates")
        if not isinstance(cands, list) or len(cands) != samples_per_prompt:
            raise ProtocolViolationError(
                f"request {rid}: expected {samples_per_prompt} candidates, got "
                f"{len(cands) if isinstance(cands, list) else cands!r}"
            )
        by_id[rid] = [str(c) for c in cands]
    missing = [rid for rid in ids if rid not in by_id]
    if missing:
        raise ProtocolViolationError(f"service dropped prompts: {missing}")
    return [
        [
            Candidate(text=text, source_model=source_model, epoch=epoch, sample_index=i)
            for i, text in enumerate(by_id[rid])
        ]
        for rid in ids
    ]
