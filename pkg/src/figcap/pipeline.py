"""Batch orchestration: records in, filtered text, prompts, selected captions
and metric reports out, with every intermediate stage persisted as JSONL.

Stage outputs are written in input-record order regardless of the worker
count, so runs are byte-identical across parallelism settings.
"""

from __future__ import annotations

import json
import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import metrics as metrics_mod
from .client import RemoteScorer, generate_batch
from .ensemble import Candidate, CandidatePool, load_candidate_files, select_caption
from .filtering import CacheScorer, FilteredParagraph, ScoredChunk, filter_paragraph, fit_cache_scorer
from .metrics import MetricReport, RougeScore
from .prompts import PromptTemplate, TemplateId, build_prompt
from .textkit import normalize_whitespace, tokenize


class RecordLoadError(ValueError):
    pass


class ConfigError(ValueError):
    pass


class FilterMode(str, enum.Enum):
    ORACLE = "oracle"
    EXTERNAL = "external"
    OFF = "off"


DEFAULT_FIELD_MAP = {
    "record_id": "record_id",
    "ocr_text": "ocr_text",
    "mentions": "mentions",
    "paragraphs": "paragraphs",
    "gold_caption": "gold_caption",
}


@dataclass(frozen=True)
class Record:
    record_id: str
    ocr_text: str
    mentions: list[str]
    paragraphs: list[str]
    gold_caption: str | None = None


@dataclass
class PipelineConfig:
    lam: float = 1.0
    template_id: TemplateId = TemplateId.PLAIN
    max_prompt_chars: int = 4096
    filter_mode: FilterMode = FilterMode.ORACLE
    scorer_endpoint: str | None = None
    parallelism: int = 1
    seed: int = 0
    # cache-scorer hyperparameters (oracle mode)
    alpha: float = 0.5
    beta: float = 0.1
    smoothing_k: float = 1.0
    samples_per_prompt: int = 1
    field_map: dict = field(default_factory=lambda: dict(DEFAULT_FIELD_MAP))

    def __post_init__(self):
        self.template_id = TemplateId(self.template_id)
        self.filter_mode = FilterMode(self.filter_mode)
        if self.parallelism < 1:
            raise ConfigError(f"parallelism must be >= 1, got {self.parallelism}")
        if self.filter_mode is FilterMode.EXTERNAL and not self.scorer_endpoint:
            raise ConfigError("external filter mode requires scorer_endpoint")

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        raw = path.read_bytes()
        if path.suffix.lower() == ".toml":
            import tomli

            data = tomli.loads(raw.decode("utf-8"))
        else:
            data = json.loads(raw)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc


@dataclass
class RecordResult:
    record_id: str
    caption: str | None
    report: MetricReport | None
    error: str | None = None
    scored_chunks: list[ScoredChunk] = field(default_factory=list)
    filtered: FilteredParagraph | None = None
    prompt_text: str | None = None
    scores: list[float] = field(default_factory=list)
    winner: Candidate | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def load_records(path: str | Path, field_map: dict | None = None) -> list[Record]:
    """Parse a JSONL dataset into records, validating as it goes.

    Parse errors carry the 1-based line number; duplicate record_ids are
    rejected up front.
    """
    fmap = dict(DEFAULT_FIELD_MAP)
    fmap.update(field_map or {})
    records: list[Record] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RecordLoadError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if fmap["record_id"] not in obj:
                raise RecordLoadError(f"{path}:{lineno}: missing field {fmap['record_id']!r}")
            rid = str(obj[fmap["record_id"]])
            if rid in seen:
                raise RecordLoadError(f"{path}:{lineno}: duplicate record_id {rid!r}")
            seen.add(rid)
            mentions = obj.get(fmap["mentions"], [])
            paragraphs = obj.get(fmap["paragraphs"], [])
            if isinstance(mentions, str):
                mentions = [mentions]
            if isinstance(paragraphs, str):
                paragraphs = [paragraphs]
            gold = obj.get(fmap["gold_caption"])
            records.append(
                Record(
                    record_id=rid,
                    ocr_text=str(obj.get(fmap["ocr_text"], "")),
                    mentions=[str(m) for m in mentions],
                    paragraphs=[str(p) for p in paragraphs],
                    gold_caption=None if gold is None else str(gold),
                )
            )
    return records


def build_oracle_scorer(config: PipelineConfig, records: list[Record]) -> CacheScorer:
    """Fit the built-in cache scorer on the batch's own text.

    The background corpus is every record's paragraphs, mentions and gold
    caption, which keeps oracle runs self-contained and deterministic.
    """
    corpus = []
    for rec in records:
        for para in rec.paragraphs:
            corpus.append(tokenize(para))
        for mention in rec.mentions:
            corpus.append(tokenize(mention))
        if rec.gold_caption:
            corpus.append(tokenize(rec.gold_caption))
    corpus = [seq for seq in corpus if seq]
    if not corpus:
        raise ConfigError("oracle filter mode needs some text to fit the scorer on")
    return fit_cache_scorer(corpus, alpha=config.alpha, beta=config.beta, k=config.smoothing_k)


def _process_record(
    config: PipelineConfig,
    record: Record,
    scorer,
    pool: CandidatePool | None,
) -> RecordResult:
    result = RecordResult(record.record_id, caption=None, report=None)
    try:
        mention = " ".join(record.mentions)

        if config.filter_mode is FilterMode.OFF:
            paragraph = normalize_whitespace(" ".join(record.paragraphs))
        else:
            if config.filter_mode is FilterMode.ORACLE and not record.gold_caption:
                raise ConfigError(f"record {record.record_id}: oracle mode needs a gold caption")
            output = record.gold_caption or ""
            scored, filtered = filter_paragraph(
                scorer, record.paragraphs, mention, output, config.lam
            )
            result.scored_chunks = scored
            result.filtered = filtered
            paragraph = filtered.text

        prompt = build_prompt(
            record.ocr_text,
            record.mentions,
            paragraph,
            PromptTemplate.from_id(config.template_id),
            config.max_prompt_chars,
        )
        result.prompt_text = prompt.text

        if pool is None:
            raise ConfigError(f"record {record.record_id}: no candidate pool available")
        consensus = select_caption(pool)
        result.scores = consensus.scores
        result.winner = consensus.winner
        result.caption = consensus.winner.text

        if record.gold_caption is not None:
            result.report = metrics_mod.score_pair(
                tokenize(result.caption), tokenize(record.gold_caption)
            )
    except Exception as exc:  # per-record isolation: one bad record never aborts the batch
        result.error = f"{type(exc).__name__}: {exc}"
    return result


def _generate_pools(config: PipelineConfig, records: list[Record], prompts) -> dict[str, CandidatePool]:
    pools = {}
    cand_lists = generate_batch(
        config.scorer_endpoint,
        prompts,
        samples_per_prompt=config.samples_per_prompt,
        seed=config.seed,
    )
    for rec, cands in zip(records, cand_lists):
        pools[rec.record_id] = CandidatePool(rec.record_id, cands)
    return pools


def run_pipeline(
    config: PipelineConfig,
    records: list[Record],
    candidate_files: list[str | Path] | None = None,
    output_dir: str | Path | None = None,
) -> list[RecordResult]:
    """Filter, prompt, select and evaluate every record.

    Candidates come from JSONL files when given, otherwise from the
    configured generate endpoint. Results keep input order; failures are
    collected per record.
    """
    scorer = None
    if config.filter_mode is FilterMode.ORACLE:
        scorer = build_oracle_scorer(config, records)
    elif config.filter_mode is FilterMode.EXTERNAL:
        scorer = RemoteScorer(config.scorer_endpoint)

    if candidate_files:
        pools = load_candidate_files(candidate_files)
    elif config.scorer_endpoint:
        # build prompts from unfiltered text to request generation in one batch
        prompts = [
            build_prompt(
                r.ocr_text,
                r.mentions,
                normalize_whitespace(" ".join(r.paragraphs)),
                PromptTemplate.from_id(config.template_id),
                config.max_prompt_chars,
            )
            for r in records
        ]
        pools = _generate_pools(config, records, prompts)
    else:
        pools = {}

    def work(record: Record) -> RecordResult:
        return _process_record(config, record, scorer, pools.get(record.record_id))

    if config.parallelism == 1 or len(records) <= 1:
        results = [work(r) for r in records]
    else:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            results = list(pool.map(work, records))

    if output_dir is not None:
        persist_results(Path(output_dir), config, records, results)
    return results


def _dump(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False)


def persist_results(
    out: Path, config: PipelineConfig, records: list[Record], results: list[RecordResult]
) -> None:
    """Write every stage's output as JSONL keyed by record_id."""
    out.mkdir(parents=True, exist_ok=True)

    with open(out / "chunks.jsonl", "w", encoding="utf-8") as fh:
        for res in results:
            for sc in res.scored_chunks:
                fh.write(
                    _dump(
                        {
                            "record_id": res.record_id,
                            "chunk_index": sc.chunk.index,
                            "ratio": sc.ratio,
                            "kept": sc.kept,
                            "lambda": config.lam,
                        }
                    )
                    + "\n"
                )

    with open(out / "filtered.jsonl", "w", encoding="utf-8") as fh:
        for res in results:
            if res.filtered is not None:
                fh.write(
                    _dump(
                        {
                            "record_id": res.record_id,
                            "text": res.filtered.text,
                            "kept_indices": res.filtered.kept_indices,
                            "lambda": res.filtered.lambda_used,
                            "empty": res.filtered.is_empty,
                        }
                    )
                    + "\n"
                )

    with open(out / "prompts.jsonl", "w", encoding="utf-8") as fh:
        for res in results:
            if res.prompt_text is not None:
                fh.write(
                    _dump(
                        {
                            "record_id": res.record_id,
                            "template_id": config.template_id.value,
                            "text": res.prompt_text,
                        }
                    )
                    + "\n"
                )

    with open(out / "selections.jsonl", "w", encoding="utf-8") as fh:
        for res in results:
            if res.winner is not None:
                fh.write(
                    _dump(
                        {
                            "record_id": res.record_id,
                            "text": res.winner.text,
                            "source_model": res.winner.source_model,
                            "epoch": res.winner.epoch,
                            "sample_index": res.winner.sample_index,
                            "scores": res.scores,
                        }
                    )
                    + "\n"
                )

    with open(out / "metrics.jsonl", "w", encoding="utf-8") as fh:
        for res in results:
            if res.report is not None:
                row = {"record_id": res.record_id}
                row.update(res.report.to_dict())
                fh.write(_dump(row) + "\n")

    corpus = corpus_report(results)
    if corpus is not None:
        (out / "metrics_corpus.json").write_text(_dump(corpus.to_dict()) + "\n", encoding="utf-8")

    with open(out / "failures.jsonl", "w", encoding="utf-8") as fh:
        for res in results:
            if res.error is not None:
                fh.write(_dump({"record_id": res.record_id, "error": res.error}) + "\n")


def corpus_report(results: list[RecordResult]) -> MetricReport | None:
    """Arithmetic mean of the per-record reports, None when there are none."""
    reports = [r.report for r in results if r.report is not None]
    if not reports:
        return None
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


@dataclass(frozen=True)
class SweepRow:
    lam: float
    mean_kept_fraction: float
    report: MetricReport | None


def sweep_lambda(
    config: PipelineConfig,
    records: list[Record],
    lambdas: list[float],
    candidate_files: list[str | Path] | None = None,
) -> list[SweepRow]:
    """Run the pipeline once per threshold and tabulate kept fractions."""
    if config.filter_mode is FilterMode.OFF:
        raise ConfigError("lambda sweep needs an active filter mode")
    rows = []
    for lam in lambdas:
        cfg = PipelineConfig(**{**config.__dict__, "lam": lam})
        results = run_pipeline(cfg, records, candidate_files)
        fractions = []
        for res in results:
            if res.scored_chunks:
                fractions.append(sum(1 for s in res.scored_chunks if s.kept) / len(res.scored_chunks))
        mean_frac = sum(fractions) / len(fractions) if fractions else 1.0
        rows.append(SweepRow(lam, mean_frac, corpus_report(results)))
    return rows
