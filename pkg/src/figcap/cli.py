"""Batch command-line interface.

Subcommands mirror the pipeline stages: filter, prompt, select, eval, plus
the end-to-end run and a lambda sweep. Exit codes: 0 success, 1 usage or
config error, 2 partial record failures, 3 service unreachable.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .client import ServiceTimeoutError, ServiceUnreachableError
from .ensemble import load_candidate_files, select_caption
from .metrics import score_pair
from .pipeline import (
    ConfigError,
    FilterMode,
    PipelineConfig,
    RecordLoadError,
    corpus_report,
    load_records,
    persist_results,
    run_pipeline,
    sweep_lambda,
)
from .prompts import PromptTemplate, build_prompt
from .textkit import normalize_whitespace, tokenize

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARTIAL = 2
EXIT_UNREACHABLE = 3


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="records JSONL path")
    p.add_argument("--output", required=True, help="output file or directory")
    p.add_argument("--config", help="pipeline config (TOML or JSON)")
    p.add_argument("--lambda", dest="lam", type=float, help="filter threshold")
    p.add_argument("--template", choices=["plain", "instruction"])
    p.add_argument("--filter-mode", choices=[m.value for m in FilterMode])
    p.add_argument("--candidates", nargs="+", default=None, help="candidate JSONL files")
    p.add_argument("--endpoint", help="scorer/generator service URL")
    p.add_argument("--parallelism", type=int)
    p.add_argument("--seed", type=int)


def _build_config(args) -> PipelineConfig:
    config = PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    if args.lam is not None:
        config.lam = args.lam
    if args.template:
        config.template_id = config.template_id.__class__(args.template)
    if getattr(args, "filter_mode", None):
        config.filter_mode = FilterMode(args.filter_mode)
    if args.endpoint:
        config.scorer_endpoint = args.endpoint
    if args.parallelism is not None:
        config.parallelism = args.parallelism
    if args.seed is not None:
        config.seed = args.seed
    config.__post_init__()
    return config


def _report_failures(results) -> int:
    failed = [r for r in results if not r.ok]
    for res in failed:
        print(f"FAIL {res.record_id}: {res.error}", file=sys.stderr)
    print(f"{len(results) - len(failed)} succeeded, {len(failed)} failed", file=sys.stderr)
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_run(args) -> int:
    config = _build_config(args)
    records = load_records(args.input, config.field_map)
    results = run_pipeline(config, records, args.candidates, output_dir=args.output)
    return _report_failures(results)


def cmd_filter(args) -> int:
    config = _build_config(args)
    if config.filter_mode is FilterMode.OFF:
        raise ConfigError("filter subcommand needs oracle or external mode")
    records = load_records(args.input, config.field_map)
    # run only the filter stage; records without pools still produce chunk output
    results = run_pipeline(config, records, None)
    out = Path(args.output)
    persist_results(out, config, records, results)
    failed = [r for r in results if not r.ok and r.filtered is None]
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_prompt(args) -> int:
    config = _build_config(args)
    records = load_records(args.input, config.field_map)
    filtered_by_id = {}
    if args.filtered:
        with open(args.filtered, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    obj = json.loads(line)
                    filtered_by_id[obj["record_id"]] = obj["text"]
    with open(args.output, "w", encoding="utf-8") as fh:
        for rec in records:
            paragraph = filtered_by_id.get(
                rec.record_id, normalize_whitespace(" ".join(rec.paragraphs))
            )
            prompt = build_prompt(
                rec.ocr_text,
                rec.mentions,
                paragraph,
                PromptTemplate.from_id(config.template_id),
                config.max_prompt_chars,
            )
            fh.write(
                json.dumps(
                    {
                        "record_id": rec.record_id,
                        "template_id": config.template_id.value,
                        "text": prompt.text,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    return EXIT_OK


def cmd_select(args) -> int:
    if not args.candidates:
        raise ConfigError("select needs --candidates")
    pools = load_candidate_files(args.candidates)
    with open(args.output, "w", encoding="utf-8") as fh:
        for rid in pools:
            result = select_caption(pools[rid])
            fh.write(
                json.dumps(
                    {
                        "record_id": rid,
                        "text": result.winner.text,
                        "source_model": result.winner.source_model,
                        "epoch": result.winner.epoch,
                        "sample_index": result.winner.sample_index,
                        "scores": result.scores,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    return EXIT_OK


def cmd_eval(args) -> int:
    config = _build_config(args)
    records = {r.record_id: r for r in load_records(args.input, config.field_map)}
    rows = []
    failed = 0
    with open(args.selections, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            rec = records.get(obj["record_id"])
            if rec is None or rec.gold_caption is None:
                print(f"FAIL {obj['record_id']}: no gold caption", file=sys.stderr)
                failed += 1
                continue
            report = score_pair(tokenize(obj["text"]), tokenize(rec.gold_caption))
            row = {"record_id": obj["record_id"]}
            row.update(report.to_dict())
            rows.append(row)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "metrics.jsonl", "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    if rows:
        mean = {
            key: sum(r[key] for r in rows) / len(rows)
            for key in rows[0]
            if key != "record_id"
        }
        (out / "metrics_corpus.json").write_text(
            json.dumps(mean, ensure_ascii=False) + "\n", encoding="utf-8"
        )
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_sweep(args) -> int:
    config = _build_config(args)
    records = load_records(args.input, config.field_map)
    rows = sweep_lambda(config, records, args.lambdas, args.candidates)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        for row in rows:
            obj = {"lambda": row.lam, "mean_kept_fraction": row.mean_kept_fraction}
            if row.report is not None:
                obj["metrics"] = row.report.to_dict()
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="figcap", description="figure-caption summarization pipeline"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="full pipeline: filter, prompt, select, eval")
    _add_common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_filter = sub.add_parser("filter", help="score and threshold paragraph chunks")
    _add_common(p_filter)
    p_filter.set_defaults(func=cmd_filter)

    p_prompt = sub.add_parser("prompt", help="render generation prompts")
    _add_common(p_prompt)
    p_prompt.add_argument("--filtered", help="filtered.jsonl from the filter stage")
    p_prompt.set_defaults(func=cmd_prompt)

    p_select = sub.add_parser("select", help="consensus-select captions from pools")
    _add_common(p_select)
    p_select.set_defaults(func=cmd_select)

    p_eval = sub.add_parser("eval", help="score selections against gold captions")
    _add_common(p_eval)
    p_eval.add_argument("--selections", required=True, help="selections.jsonl")
    p_eval.set_defaults(func=cmd_eval)

    p_sweep = sub.add_parser("sweep", help="tabulate kept fraction and metrics per lambda")
    _add_common(p_sweep)
    p_sweep.add_argument("--lambdas", nargs="+", type=float, required=True)
    p_sweep.set_defaults(func=cmd_sweep)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, RecordLoadError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ServiceUnreachableError, ServiceTimeoutError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNREACHABLE


if __name__ == "__main__":
    sys.exit(main())
