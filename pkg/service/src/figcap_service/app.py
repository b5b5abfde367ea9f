"""FastAPI application implementing the /v1/score and /v1/generate protocol.

POST /v1/score    {"requests": [{"request_id", "context", "output"}]}
               -> {"responses": [{"request_id", "log_prob"} | {"request_id", "error"}]}
POST /v1/generate {"prompts": [{"request_id", "text"}],
                   "samples_per_prompt": int, "seed": int}
               -> {"results": [{"request_id", "candidates": [str]}]}
GET  /healthz  -> 200

Per-request problems (empty output, overlong input) come back as error
markers inside a 200 response; malformed or oversized batches get a 4xx;
unexpected model failures get a 5xx carrying the affected request_ids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .model import DEFAULT_CORPUS, NgramSequenceModel


@dataclass
class ServiceConfig:
    model_name: str = "builtin-ngram"
    device: str = "cpu"
    max_batch: int = 256
    port: int = 8080
    max_input_tokens: int = 4096
    corpus_path: str | None = None

    def __post_init__(self):
        if self.max_batch < 1:
            raise ValueError(f"max_batch must be >= 1, got {self.max_batch}")


class ScoreRequestItem(BaseModel):
    request_id: str
    context: str = ""
    output: str = ""


class ScoreBody(BaseModel):
    requests: list[ScoreRequestItem] = Field(default_factory=list)


class PromptItem(BaseModel):
    request_id: str
    text: str = ""


class GenerateBody(BaseModel):
    prompts: list[PromptItem] = Field(default_factory=list)
    samples_per_prompt: int = 1
    seed: int = 0


def load_model(config: ServiceConfig) -> NgramSequenceModel:
    if config.corpus_path:
        text = Path(config.corpus_path).read_text(encoding="utf-8")
    else:
        text = DEFAULT_CORPUS
    return NgramSequenceModel.fit(text)


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    model = load_model(config)
    app = FastAPI(title="figcap scorer service")

    def too_long(text: str) -> bool:
        return len(text.split()) > config.max_input_tokens

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "model": config.model_name}

    @app.post("/v1/score")
    def score(body: ScoreBody):
        if not body.requests:
            return JSONResponse(status_code=400, content={"error": "empty batch"})
        if len(body.requests) > config.max_batch:
            return JSONResponse(
                status_code=400,
                content={"error": f"batch size {len(body.requests)} exceeds {config.max_batch}"},
            )
        responses = []
        failed_ids = []
        for req in body.requests:
            if not req.output.strip():
                responses.append({"request_id": req.request_id, "error": "empty output", "code": "empty_output"})
                continue
            if too_long(req.context) or too_long(req.output):
                responses.append({"request_id": req.request_id, "error": "input too long", "code": "input_too_long"})
                continue
            try:
                lp = model.score(req.context, req.output)
                if not math.isfinite(lp):
                    raise ValueError("non-finite log-probability")
                responses.append({"request_id": req.request_id, "log_prob": lp})
            except Exception:
                failed_ids.append(req.request_id)
        if failed_ids:
            return JSONResponse(
                status_code=500, content={"error": "model failure", "request_ids": failed_ids}
            )
        return {"responses": responses}

    @app.post("/v1/generate")
    def generate(body: GenerateBody):
        if not body.prompts:
            return JSONResponse(status_code=400, content={"error": "empty batch"})
        if len(body.prompts) > config.max_batch:
            return JSONResponse(
                status_code=400,
                content={"error": f"batch size {len(body.prompts)} exceeds {config.max_batch}"},
            )
        if body.samples_per_prompt < 1:
            return JSONResponse(status_code=400, content={"error": "samples_per_prompt must be >= 1"})
        results = []
        failed_ids = []
        for prompt in body.prompts:
            if too_long(prompt.text):
                return JSONResponse(
                    status_code=400,
                    content={"error": "input too long", "request_ids": [prompt.request_id]},
                )
            try:
                cands = [
                    model.generate(prompt.text, body.seed, prompt.request_id, i)
                    for i in range(body.samples_per_prompt)
                ]
                results.append({"request_id": prompt.request_id, "candidates": cands})
            except Exception:
                failed_ids.append(prompt.request_id)
        if failed_ids:
            return JSONResponse(
                status_code=500, content={"error": "model failure", "request_ids": failed_ids}
            )
        return {"results": results}

    return app


def serve(config: ServiceConfig | None = None) -> None:
    import uvicorn

    config = config or ServiceConfig()
    uvicorn.run(create_app(config), host="0.0.0.0", port=config.port)


def main(argv: list[str] | None = None) -> int:
    import argparse

    parser = argparse.ArgumentParser(prog="figcap-service", description="reference scorer/generator service")
    parser.add_argument("--port", type=int, default=8080)
    parser.add_argument("--max-batch", type=int, default=256)
    parser.add_argument("--corpus", help="plain-text corpus to fit the model on")
    args = parser.parse_args(argv)
    serve(ServiceConfig(port=args.port, max_batch=args.max_batch, corpus_path=args.corpus))
    return 0
