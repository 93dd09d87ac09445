from __future__ import annotations

import json

import pytest

from slotfill.backends.base import Completion, CompletionRequest
from slotfill.backends.local import CorruptBackend, MockDelayBackend, OracleBackend
from slotfill.data.sample import write_sample_corpus
from slotfill.data.sgd_ingest import load_sgd, to_records
from slotfill.errors import BackendError, ConfigError, EmptyScoreSet
from slotfill.evalkit import (
    EvalReport,
    ExampleScore,
    build_report,
    casefold_match,
    format_table,
    jga,
    macro_f1,
    resolve_matcher,
    run_eval,
    score_example,
)
from slotfill.nlp.core import BeliefState, Category, Conversation, Role, SlotLibrary, SlotSpec, Turn
from slotfill.nlp.promptgen import build_record


class FailingBackend:
    is_local = True

    def complete(self, req: CompletionRequest) -> Completion:
        raise BackendError("model offline")

    def ping(self) -> bool:
        return False


@pytest.fixture(scope="module")
def sgd_records(sample_corpus):
    corpus = load_sgd(sample_corpus)
    return to_records(corpus.dialogues[:30], corpus.schemas, id_assigner=0)


def test_partial_prediction_counts():
    score = score_example(BeliefState({"Slot-1": "a", "Slot-3": "c"}), BeliefState({"Slot-1": "a", "Slot-2": "b"}))
    assert (score.tp, score.fp, score.fn) == (1, 1, 1)
    assert score.f1 == pytest.approx(0.5)
    assert not score.joint_correct


def test_empty_prediction_and_gold_is_perfect():
    score = score_example(BeliefState({}), BeliefState({}))
    assert score.f1 == 1.0
    assert score.joint_correct


def test_wrong_value_is_both_false_positive_and_miss():
    score = score_example(BeliefState({"Slot-1": "x"}), BeliefState({"Slot-1": "a"}))
    assert (score.tp, score.fp, score.fn) == (0, 1, 1)
    assert score.key_f1 == 1.0


def test_any_gold_alternative_matches():
    score = score_example(
        BeliefState({"Slot-1": "6 pm"}),
        BeliefState({"Slot-1": "6 in the evening"}),
        alternatives={"Slot-1": ("6 in the evening", "6 pm")},
    )
    assert score.joint_correct


def test_matchers():
    assert casefold_match(" Fresno ", "fresno")
    assert resolve_matcher("exact")("Fresno ", "Fresno")
    assert not resolve_matcher("exact")("fresno", "Fresno")
    assert resolve_matcher("fuzzy", 0.8)("Fresnoo", "Fresno")
    with pytest.raises(ConfigError):
        resolve_matcher("semantic")


def test_aggregates_need_scores():
    scores = [ExampleScore(1, 0, 0), ExampleScore(0, 1, 1)]
    assert macro_f1(scores) == pytest.approx(0.5)
    assert jga(scores) == pytest.approx(0.5)
    with pytest.raises(EmptyScoreSet):
        macro_f1([])
    with pytest.raises(EmptyScoreSet):
        run_eval([], MockDelayBackend(0))


def test_oracle_scores_perfectly(sgd_records):
    report = run_eval(sgd_records, OracleBackend(sgd_records))
    assert report.overall.macro_f1 == 1.0
    assert report.overall.jga == 1.0
    assert report.overall.n == len(sgd_records)
    assert report.errors == 0
    assert list(report.per_category) == ["SGD"]


def test_parallelism_does_not_change_scores(sgd_records):
    oracle = CorruptBackend(OracleBackend(sgd_records), drop_k=1, seed=3)
    serial = run_eval(sgd_records, oracle, parallelism=1)
    parallel = run_eval(sgd_records, oracle, parallelism=4)
    assert serial.overall.macro_f1 == parallel.overall.macro_f1
    assert serial.overall.jga == parallel.overall.jga
    assert serial.overall.jga < 1.0


def test_dropping_one_pair(registration):
    record = registration.record()
    report = run_eval([record], CorruptBackend(OracleBackend([record]), drop_k=1))
    assert report.overall.macro_f1 == pytest.approx(12 / 13)
    assert report.overall.jga == 0.0


def test_backend_failures_score_as_empty(money):
    record = money.record()
    report = run_eval([record], FailingBackend())
    assert report.errors == 1
    assert report.overall.macro_f1 == 0.0
    with pytest.raises(BackendError):
        run_eval([record], FailingBackend(), fail_fast=True)


def test_latency_is_reported(money):
    record = money.record()
    report = run_eval([record, record], MockDelayBackend(0.02, OracleBackend([record])), parallelism=2)
    assert report.overall.mean_latency_s >= 0.02
    assert report.overall.p95_latency_s >= report.overall.p50_latency_s


def test_average_by_category():
    scores = [
        ExampleScore(1, 0, 0, category=Category.SGD),
        ExampleScore(1, 0, 0, category=Category.SGD),
        ExampleScore(1, 0, 0, category=Category.SGD),
        ExampleScore(0, 1, 0, category=Category.LONG_VALUE),
    ]
    assert build_report(scores).overall.macro_f1 == pytest.approx(0.75)
    assert build_report(scores, average_by="category").overall.macro_f1 == pytest.approx(0.5)
    with pytest.raises(ConfigError):
        build_report(scores, average_by="slot")


def test_report_json_and_table(sgd_records):
    report = run_eval(sgd_records, OracleBackend(sgd_records))
    again = EvalReport.from_json(json.loads(json.dumps(report.to_json())))
    assert again == report
    table = format_table(report)
    overall = next(line for line in table.splitlines() if line.startswith("Overall"))
    assert overall.split()[1:3] == ["1.000", "1.000"]


def test_dropping_one_of_five_slots_everywhere():
    library = SlotLibrary(tuple(SlotSpec(f"Slot-{n}", f"value number {n}") for n in range(1, 6)))
    records = []
    for i in range(8):
        values = {f"Slot-{n}": f"v{i}x{n}" for n in range(1, 6)}
        conversation = Conversation((Turn(Role.USER, " ".join(values.values())),))
        records.append(build_record(library, conversation, values, dialogue_id=f"d{i}", record_id=f"d{i}:0"))
    report = run_eval(records, CorruptBackend(OracleBackend(records), drop_k=1, seed=4))
    assert report.overall.macro_f1 == pytest.approx(8 / 9, abs=1e-9)
    assert report.overall.jga == 0.0


@pytest.mark.slow
def test_oracle_scores_perfectly_over_a_thousand_records(tmp_path):
    corpus = load_sgd(write_sample_corpus(tmp_path / "corpus", n_dialogues=400, seed=8))
    records = to_records(corpus.dialogues, corpus.schemas, id_assigner=0)
    assert len(records) >= 1_000
    report = run_eval(records, OracleBackend(records), parallelism=8)
    assert (report.overall.macro_f1, report.overall.jga, report.errors) == (1.0, 1.0, 0)


@pytest.mark.parametrize("delay", [0.01, 0.05, 0.2])
def test_mock_delay_latency_stays_close_to_the_delay(money, delay):
    record = money.record()
    report = run_eval([record] * 5, MockDelayBackend(delay, OracleBackend([record])))
    assert delay <= report.overall.mean_latency_s <= delay + 0.02
    assert report.overall.macro_f1 == 1.0
