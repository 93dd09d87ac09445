"""Scoring of predicted belief states: Macro F1, Joint Goal Accuracy, latency.

Macro F1 is the mean of per-example F1 over (slot id, value) pairs. An example
whose prediction and gold are both empty scores F1 = 1.
"""

from __future__ import annotations

import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Sequence, Tuple

import numpy as np

from slotfill.backends.base import CompletionBackend
from slotfill.errors import BackendError, BudgetImpossible, ConfigError, EmptyScoreSet
from slotfill.nlp.core import BeliefState, Category, PromptRecord, ensure_same_library
from slotfill.nlp.outparse import DEFAULT_FUZZY_THRESHOLD, extract, similarity
from slotfill.nlp.promptgen import DEFAULT_BUDGET, WHITESPACE, TokenBudget, TokenCounter

logger = logging.getLogger(__name__)

Matcher = Callable[[str, str], bool]


def exact_match(predicted: str, gold: str) -> bool:
    return predicted.strip() == gold.strip()


def casefold_match(predicted: str, gold: str) -> bool:
    return predicted.strip().casefold() == gold.strip().casefold()


def fuzzy_matcher(threshold: float = DEFAULT_FUZZY_THRESHOLD) -> Matcher:
    def _match(predicted: str, gold: str) -> bool:
        return similarity(predicted.strip(), gold.strip()) >= threshold

    return _match


def resolve_matcher(name: str, threshold: float = DEFAULT_FUZZY_THRESHOLD) -> Matcher:
    name = name.strip().lower()
    if name in ("exact", "trim"):
        return exact_match
    if name == "casefold":
        return casefold_match
    if name == "fuzzy":
        return fuzzy_matcher(threshold)
    raise ConfigError(f"unknown matcher {name!r} (known: exact, casefold, fuzzy)")


def _ratio(num: int, den: int, empty: float) -> float:
    return num / den if den else empty


@dataclass(frozen=True)
class ExampleScore:
    tp: int
    fp: int
    fn: int
    key_tp: int = 0
    key_fp: int = 0
    key_fn: int = 0
    latency_s: float | None = None
    category: Category = Category.SGD

    @property
    def f1(self) -> float:
        denominator = 2 * self.tp + self.fp + self.fn
        return _ratio(2 * self.tp, denominator, 1.0)

    @property
    def precision(self) -> float:
        return _ratio(self.tp, self.tp + self.fp, 1.0 if self.fn == 0 else 0.0)

    @property
    def recall(self) -> float:
        return _ratio(self.tp, self.tp + self.fn, 1.0 if self.fp == 0 else 0.0)

    @property
    def key_f1(self) -> float:
        return _ratio(2 * self.key_tp, 2 * self.key_tp + self.key_fp + self.key_fn, 1.0)

    @property
    def joint_correct(self) -> bool:
        return self.fp == 0 and self.fn == 0


def score_example(
    pred: BeliefState,
    gold: BeliefState,
    matcher: Matcher = exact_match,
    alternatives: Mapping[str, Sequence[str]] | None = None,
    latency_s: float | None = None,
    category: Category = Category.SGD,
) -> ExampleScore:
    """A predicted pair is a true positive when gold has the id and the matcher
    accepts the value against any gold alternative for it."""
    ensure_same_library(pred, gold)
    alternatives = alternatives or {}
    tp = fp = 0
    matched = set()
    for slot_id, value in pred.items():
        gold_value = gold.get(slot_id)
        options = alternatives.get(slot_id) or ((gold_value,) if gold_value is not None else ())
        if any(matcher(value, option) for option in options):
            tp += 1
            matched.add(slot_id)
        else:
            fp += 1
    gold_ids = set(gold.values)
    pred_ids = set(pred.values)
    return ExampleScore(
        tp=tp,
        fp=fp,
        fn=len(gold_ids - matched),
        key_tp=len(gold_ids & pred_ids),
        key_fp=len(pred_ids - gold_ids),
        key_fn=len(gold_ids - pred_ids),
        latency_s=latency_s,
        category=Category(category),
    )


def score_record(record: PromptRecord, pred: BeliefState, matcher: Matcher = exact_match, latency_s: float | None = None) -> ExampleScore:
    alternatives = {slot_id: record.gold_alternatives(slot_id) for slot_id in record.gold_state.values}
    return score_example(pred, record.gold_state, matcher, alternatives, latency_s, record.category)


def _require(scores: Sequence[ExampleScore]) -> None:
    if not scores:
        raise EmptyScoreSet("no examples to score")


def macro_f1(scores: Sequence[ExampleScore]) -> float:
    _require(scores)
    return float(np.mean([s.f1 for s in scores]))


def jga(scores: Sequence[ExampleScore]) -> float:
    _require(scores)
    return float(np.mean([1.0 if s.joint_correct else 0.0 for s in scores]))


@dataclass(frozen=True)
class LatencyStats:
    mean: float = 0.0
    p50: float = 0.0
    p95: float = 0.0
    n: int = 0


def latency_stats(scores: Sequence[ExampleScore]) -> LatencyStats:
    samples = np.array([s.latency_s for s in scores if s.latency_s is not None], dtype=float)
    if samples.size == 0:
        return LatencyStats()
    return LatencyStats(
        mean=float(samples.mean()),
        p50=float(np.percentile(samples, 50)),
        p95=float(np.percentile(samples, 95)),
        n=int(samples.size),
    )


# ------------------------- Reports -------------------------
@dataclass
class CategoryStats:
    macro_f1: float
    jga: float
    n: int
    mean_latency_s: float
    precision: float = 0.0
    recall: float = 0.0
    key_f1: float = 0.0
    p50_latency_s: float = 0.0
    p95_latency_s: float = 0.0
    errors: int = 0

    @classmethod
    def of(cls, scores: Sequence[ExampleScore], errors: int = 0) -> "CategoryStats":
        latency = latency_stats(scores)
        return cls(
            macro_f1=macro_f1(scores),
            jga=jga(scores),
            n=len(scores),
            mean_latency_s=latency.mean,
            precision=float(np.mean([s.precision for s in scores])),
            recall=float(np.mean([s.recall for s in scores])),
            key_f1=float(np.mean([s.key_f1 for s in scores])),
            p50_latency_s=latency.p50,
            p95_latency_s=latency.p95,
            errors=errors,
        )


@dataclass
class EvalReport:
    per_category: Dict[str, CategoryStats]
    overall: CategoryStats
    warnings: Dict[str, int] = field(default_factory=dict)
    errors: int = 0
    average_by: str = "example"

    def to_json(self) -> Dict[str, Any]:
        return {
            "per_category": {cat: asdict(stats) for cat, stats in self.per_category.items()},
            "overall": asdict(self.overall),
            "warnings": dict(self.warnings),
            "errors": self.errors,
            "average_by": self.average_by,
        }

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "EvalReport":
        return cls(
            per_category={cat: CategoryStats(**stats) for cat, stats in obj["per_category"].items()},
            overall=CategoryStats(**obj["overall"]),
            warnings=dict(obj.get("warnings", {})),
            errors=int(obj.get("errors", 0)),
            average_by=obj.get("average_by", "example"),
        )


def build_report(
    scores: Sequence[ExampleScore],
    warnings: Mapping[str, int] | None = None,
    errored: Sequence[bool] | None = None,
    average_by: str = "example",
) -> EvalReport:
    if average_by not in ("example", "category"):
        raise ConfigError(f"average_by must be 'example' or 'category', not {average_by!r}")
    _require(scores)
    errored = list(errored) if errored is not None else [False] * len(scores)
    grouped: Dict[Category, List[Tuple[ExampleScore, bool]]] = {}
    for score, failed in zip(scores, errored):
        grouped.setdefault(score.category, []).append((score, failed))

    per_category = {}
    for category in Category:
        if category in grouped:
            items = grouped[category]
            per_category[category.value] = CategoryStats.of([s for s, _ in items], sum(f for _, f in items))
    overall = CategoryStats.of(scores, sum(errored))
    if average_by == "category":
        stats = list(per_category.values())
        overall.macro_f1 = float(np.mean([s.macro_f1 for s in stats]))
        overall.jga = float(np.mean([s.jga for s in stats]))
    return EvalReport(per_category, overall, dict(warnings or {}), sum(errored), average_by)


def run_eval(
    dataset: Sequence[PromptRecord],
    backend: CompletionBackend,
    budget: TokenBudget = DEFAULT_BUDGET,
    counter: TokenCounter = WHITESPACE,
    matcher: Matcher = exact_match,
    parallelism: int = 1,
    *,
    fail_fast: bool = False,
    fuzzy_threshold: float = DEFAULT_FUZZY_THRESHOLD,
    repair_substring: bool = False,
    average_by: str = "example",
    stop_sequences: Sequence[str] = (),
) -> EvalReport:
    """Extract over every record with at most `parallelism` backend calls in flight."""
    if not dataset:
        raise EmptyScoreSet("dataset is empty")
    if parallelism < 1:
        raise ConfigError("parallelism must be >= 1")

    def _one(record: PromptRecord) -> Tuple[ExampleScore, List[str], bool]:
        try:
            extraction = extract(
                record.library,
                record.conversation,
                backend,
                budget,
                counter,
                fuzzy_threshold=fuzzy_threshold,
                repair_substring=repair_substring,
                stop_sequences=stop_sequences,
            )
        except (BackendError, BudgetImpossible) as e:
            if fail_fast:
                raise
            logger.warning("record %s failed: %s", record.record_id or "?", e)
            return score_record(record, BeliefState.of({}, record.library), matcher), [], True
        reasons = [w.reason.value for w in extraction.warnings]
        return score_record(record, extraction.state, matcher, extraction.latency_s), reasons, False

    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        results = list(pool.map(_one, dataset))

    scores = [r[0] for r in results]
    warnings = Counter(reason for r in results for reason in r[1])
    report = build_report(scores, dict(sorted(warnings.items())), [r[2] for r in results], average_by)
    logger.info(
        "evaluated %d records: macro_f1=%.4f jga=%.4f errors=%d",
        report.overall.n,
        report.overall.macro_f1,
        report.overall.jga,
        report.errors,
    )
    return report


def format_table(report: EvalReport) -> str:
    rows = [f"{'Category':<14}{'Macro F1':>10}{'JGA':>10}{'N':>8}{'Errors':>8}"]
    for category, stats in report.per_category.items():
        rows.append(f"{category:<14}{stats.macro_f1:>10.3f}{stats.jga:>10.3f}{stats.n:>8d}{stats.errors:>8d}")
    o = report.overall
    rows.append(f"{'Overall':<14}{o.macro_f1:>10.3f}{o.jga:>10.3f}{o.n:>8d}{o.errors:>8d}")
    rows.append("")
    rows.append(f"Latency (s)   mean {o.mean_latency_s:.4f}   p50 {o.p50_latency_s:.4f}   p95 {o.p95_latency_s:.4f}")
    if report.warnings:
        rows.append("Warnings      " + ", ".join(f"{k}={v}" for k, v in report.warnings.items()))
    return "\n".join(rows)
