"""Command-line entry point: `python -m slotfill <command> ...`.

Exit codes: 0 ok, 1 usage/config, 2 data error, 3 backend error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, List, Sequence

from pydantic import ValidationError

from slotfill.config import AppSettings, configure_logging, load_settings, override
from slotfill.errors import ConfigError, MalformedJson, SlotFillError, UsageError

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


def _read_json(path: str) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise UsageError(f"no such file: {path}") from None
    except json.JSONDecodeError as e:
        raise MalformedJson(path, f"line {e.lineno} column {e.colno}", e.msg) from None


def _settings(args: argparse.Namespace) -> AppSettings:
    settings = load_settings(getattr(args, "config", None))
    backend_file = getattr(args, "backend", None)
    if backend_file:
        settings = settings.model_copy(update={"backend": load_settings(backend_file).backend})
    settings = override(
        settings,
        "tracker",
        max_prompt_tokens=getattr(args, "max_prompt_tokens", None),
        max_output_tokens=getattr(args, "max_output_tokens", None),
        counter=getattr(args, "counter", None),
        mode=getattr(args, "mode", None),
    )
    settings = override(
        settings,
        "server",
        port=getattr(args, "port", None),
        host=getattr(args, "host", None),
        store=getattr(args, "store", None),
    )
    return settings


def _need_backend(settings: AppSettings) -> None:
    if settings.backend is None:
        raise ConfigError("no backend configured (pass --backend CFG.toml)")


# ------------------------- Commands -------------------------
def cmd_ingest_sgd(args: argparse.Namespace) -> int:
    from slotfill.data.sgd_ingest import ingest_sgd

    tracker = _settings(args).tracker
    records = ingest_sgd(args.input, args.output, args.seed, tracker.budget, tracker.token_counter, args.workers)
    print(f"wrote {len(records)} records to {args.output}")
    return 0


def cmd_augment(args: argparse.Namespace) -> int:
    from slotfill.backends.factory import build_backend
    from slotfill.data.augment import PipelineConfig, run_pipeline
    from slotfill.data.sgd_ingest import read_jsonl, write_jsonl

    tracker = _settings(args).tracker
    config = PipelineConfig(
        seed=args.seed,
        limit=args.limit,
        max_prompt_tokens=tracker.max_prompt_tokens,
        max_output_tokens=tracker.max_output_tokens,
        counter=tracker.counter,
        keep_unchanged=not args.only_changed,
        workers=args.workers,
        **{k: v for k, v in (("id_probability", args.id_probability), ("relation_rate", args.relation_rate), ("distractor_rate", args.distractor_rate)) if v is not None},
    )
    if args.pipeline != "long-value" and not args.input:
        raise UsageError(f"--input is required for pipeline {args.pipeline}")
    records = read_jsonl(args.input) if args.input else []
    paraphraser = None
    if args.paraphrase_backend:
        backend_config = load_settings(args.paraphrase_backend).backend
        if backend_config is None:
            raise ConfigError(f"{args.paraphrase_backend} holds no backend section")
        paraphraser = build_backend(backend_config)
    out = run_pipeline(args.pipeline, records, config, paraphraser)
    count = write_jsonl(out, args.output)
    print(f"{args.pipeline}: wrote {count} records to {args.output}")
    return 0


def cmd_build_prompts(args: argparse.Namespace) -> int:
    from slotfill.data.sgd_ingest import read_jsonl, write_jsonl
    from slotfill.nlp.core import Conversation
    from slotfill.nlp.promptgen import build_record, library_from_json, rebuild

    tracker = _settings(args).tracker
    budget, counter = tracker.budget, tracker.token_counter
    if args.input:
        records = [rebuild(r, budget, counter) for r in read_jsonl(args.input)]
    elif args.slots and args.conversation:
        library = library_from_json(_read_json(args.slots))
        conversation = Conversation.from_json(_read_json(args.conversation))
        gold = _read_json(args.gold) if args.gold else {}
        records = [build_record(library, conversation, gold, budget=budget, counter=counter)]
    else:
        raise UsageError("give --input IN.jsonl, or --slots and --conversation")

    if args.output:
        count = write_jsonl(records, args.output)
        logger.info("wrote %d records to %s", count, args.output)
        return 0
    for record in records:
        sys.stdout.write(record.prompt + "\n")
        if args.with_output:
            sys.stdout.write(record.gold_output + "\n")
    return 0


def cmd_split(args: argparse.Namespace) -> int:
    from slotfill.data.augment.split import parse_ratios, partition, split_dataset
    from slotfill.data.sgd_ingest import read_jsonl, write_jsonl

    ratios = parse_ratios(args.ratios)
    records = split_dataset(read_jsonl(args.input), ratios, args.seed)
    write_jsonl(records, args.output)
    if args.per_split_dir:
        directory = Path(args.per_split_dir)
        directory.mkdir(parents=True, exist_ok=True)
        for split, part in partition(records).items():
            write_jsonl(part, directory / f"{split.value.lower()}.jsonl")
    counts = {s.value: len(p) for s, p in partition(records).items()}
    print(", ".join(f"{k}={v}" for k, v in counts.items()))
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    from slotfill.backends.factory import build_backend
    from slotfill.data.sgd_ingest import read_jsonl
    from slotfill.evalkit import format_table, resolve_matcher, run_eval

    settings = _settings(args)
    _need_backend(settings)
    tracker = settings.tracker
    dataset = read_jsonl(args.dataset)
    backend_config = settings.backend
    records = dataset if not backend_config.dataset else None
    backend = build_backend(backend_config, records, tracker.budget, tracker.token_counter)
    report = run_eval(
        dataset,
        backend,
        tracker.budget,
        tracker.token_counter,
        resolve_matcher(args.matcher, tracker.fuzzy_threshold),
        args.parallelism,
        fail_fast=args.fail_fast,
        fuzzy_threshold=tracker.fuzzy_threshold,
        repair_substring=tracker.repair_substring,
        average_by=args.average_by,
        stop_sequences=backend_config.stop_sequences,
    )
    print(format_table(report))
    if args.report:
        Path(args.report).write_text(json.dumps(report.to_json(), indent=2) + "\n", encoding="utf-8")
    return 0


def cmd_repl(args: argparse.Namespace) -> int:
    from slotfill.backends.factory import build_backend
    from slotfill.nlp.promptgen import library_from_json
    from slotfill.repl import run_repl

    settings = _settings(args)
    _need_backend(settings)
    library = library_from_json(_read_json(args.slots))
    backend = build_backend(settings.backend, budget=settings.tracker.budget, counter=settings.tracker.token_counter)
    return run_repl(library, backend, settings.tracker, settings.tracker.mode)


def cmd_serve(args: argparse.Namespace) -> int:
    from slotfill.main import serve

    settings = _settings(args)
    _need_backend(settings)
    serve(settings)
    return 0


def cmd_sample(args: argparse.Namespace) -> int:
    from slotfill.data.sample import write_sample_corpus

    write_sample_corpus(args.output, args.dialogues, args.seed)
    print(f"wrote {args.dialogues} dialogues to {args.output}")
    return 0


# ------------------------- Parser -------------------------
def _budget_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-prompt-tokens", type=int)
    p.add_argument("--max-output-tokens", type=int)
    p.add_argument("--counter", help="whitespace, chars4 or module:function")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="settings file (TOML or JSON)")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING, ...")
    common.add_argument("--json-errors", action="store_true", help="print errors as JSON on stderr")

    parser = _Parser(prog="slotfill", description="Slot-filling dataset and tracking toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest-sgd", parents=[common], help="convert an SGD directory to JSONL records")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=4)
    _budget_flags(p)
    p.set_defaults(func=cmd_ingest_sgd)

    p = sub.add_parser("augment", parents=[common], help="run one augmentation pipeline")
    p.add_argument("--pipeline", required=True)
    p.add_argument("--input")
    p.add_argument("--output", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--limit", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--id-probability", type=float)
    p.add_argument("--relation-rate", type=float)
    p.add_argument("--distractor-rate", type=float)
    p.add_argument("--only-changed", action="store_true", help="drop records the pipeline left untouched")
    p.add_argument("--paraphrase-backend", help="backend config used to paraphrase multi-slot utterances")
    _budget_flags(p)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("build-prompts", parents=[common], help="re-render prompts under a token budget")
    p.add_argument("--input")
    p.add_argument("--slots")
    p.add_argument("--conversation")
    p.add_argument("--gold")
    p.add_argument("--output")
    p.add_argument("--with-output", action="store_true", help="also print the gold output after each prompt")
    _budget_flags(p)
    p.set_defaults(func=cmd_build_prompts)

    p = sub.add_parser("split", parents=[common], help="tag records TRAIN/VAL/TEST by dialogue")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--ratios", default="0.8,0.1,0.1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--per-split-dir")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("eval", parents=[common], help="score a backend on a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--backend")
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--report")
    p.add_argument("--matcher", default="exact", help="exact, casefold or fuzzy")
    p.add_argument("--average-by", default="example", choices=("example", "category"))
    p.add_argument("--fail-fast", action="store_true")
    _budget_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("repl", parents=[common], help="interactive tracking session")
    p.add_argument("--slots", required=True)
    p.add_argument("--backend")
    p.add_argument("--mode", choices=("replace", "merge"))
    _budget_flags(p)
    p.set_defaults(func=cmd_repl)

    p = sub.add_parser("serve", parents=[common], help="run the HTTP service")
    p.add_argument("--backend")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--store", help="directory for file-backed sessions")
    p.add_argument("--mode", choices=("replace", "merge"))
    _budget_flags(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("sample", parents=[common], help="write a small synthetic SGD-layout corpus")
    p.add_argument("--output", required=True)
    p.add_argument("--dialogues", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sample)
    return parser


def _report_error(e: SlotFillError, json_errors: bool) -> int:
    if json_errors:
        sys.stderr.write(json.dumps(e.to_dict()) + "\n")
    else:
        sys.stderr.write(f"error: {e}\n")
    return e.exit_code


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    json_errors = "--json-errors" in argv
    try:
        args = build_parser().parse_args(argv)
        if args.log_level:
            configure_logging(args.log_level)
        else:
            configure_logging(load_settings(args.config).logging if args.config else None)
        return args.func(args)
    except SlotFillError as e:
        return _report_error(e, json_errors)
    except ValidationError as e:
        return _report_error(ConfigError(str(e)), json_errors)
    except FileNotFoundError as e:
        return _report_error(UsageError(f"no such file: {e.filename}"), json_errors)
    except KeyboardInterrupt:
        return 130


def run(argv: List[str] | None = None) -> None:
    sys.exit(main(argv))
