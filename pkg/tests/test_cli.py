from __future__ import annotations

import json
from pathlib import Path

import pytest

from slotfill.cli import main
from slotfill.data.sgd_ingest import read_jsonl
from slotfill.nlp.core import Category

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def oracle_cfg(tmp_path):
    path = tmp_path / "oracle.toml"
    path.write_text('kind = "oracle"\n', encoding="utf-8")
    return path


@pytest.fixture
def ingested(sample_corpus, tmp_path):
    out = tmp_path / "sgd.jsonl"
    assert main(["ingest-sgd", "--input", str(sample_corpus), "--output", str(out), "--seed", "0"]) == 0
    return out


def _overall(stdout: str):
    line = next(row for row in stdout.splitlines() if row.startswith("Overall"))
    return line.split()[1:3]


def test_ingest_writes_records_and_slot_map(sample_corpus, tmp_path, capsys):
    out = tmp_path / "sgd.jsonl"
    assert main(["ingest-sgd", "--input", str(sample_corpus), "--output", str(out), "--seed", "0"]) == 0
    assert "records to" in capsys.readouterr().out
    assert len(read_jsonl(out)) > 0
    assert json.loads((tmp_path / "slot_map.json").read_text(encoding="utf-8"))["seed"] == 0


def test_split_then_eval_with_oracle(ingested, oracle_cfg, tmp_path, capsys):
    out = tmp_path / "all.jsonl"
    assert main(["split", "--input", str(ingested), "--output", str(out), "--per-split-dir", str(tmp_path), "--seed", "1"]) == 0
    assert "TRAIN=" in capsys.readouterr().out

    report = tmp_path / "report.json"
    code = main(
        ["eval", "--dataset", str(tmp_path / "test.jsonl"), "--backend", str(oracle_cfg), "--parallelism", "4", "--report", str(report)]
    )
    assert code == 0
    assert _overall(capsys.readouterr().out) == ["1.000", "1.000"]
    assert json.loads(report.read_text(encoding="utf-8"))["overall"]["jga"] == 1.0


def test_build_prompts_from_slots_and_conversation(money, tmp_path, capsys):
    raw = json.loads((FIXTURES / "money.json").read_text(encoding="utf-8"))
    slots, conv, gold = tmp_path / "slots.json", tmp_path / "conv.json", tmp_path / "gold.json"
    slots.write_text(json.dumps(raw["library"]), encoding="utf-8")
    conv.write_text(json.dumps(raw["conversation"]), encoding="utf-8")
    gold.write_text(json.dumps(raw["gold"]), encoding="utf-8")

    assert main(["build-prompts", "--slots", str(slots), "--conversation", str(conv)]) == 0
    assert capsys.readouterr().out == money.prompt + "\n"

    assert main(["build-prompts", "--slots", str(slots), "--conversation", str(conv), "--gold", str(gold), "--with-output"]) == 0
    assert capsys.readouterr().out == money.prompt + "\n" + money.output + "\n"


def test_augment_is_reproducible(ingested, tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for out in (a, b):
        assert main(["augment", "--pipeline", "name-split", "--input", str(ingested), "--output", str(out), "--seed", "7"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert any(r.category is Category.NAME_SPLIT for r in read_jsonl(a))


def test_long_value_needs_no_input(tmp_path):
    out = tmp_path / "long.jsonl"
    assert main(["augment", "--pipeline", "long-value", "--output", str(out), "--limit", "5"]) == 0
    assert [r.category for r in read_jsonl(out)] == [Category.LONG_VALUE] * 5


def test_unknown_pipeline_is_a_usage_error(ingested, tmp_path, capsys):
    code = main(["augment", "--pipeline", "synonyms", "--input", str(ingested), "--output", str(tmp_path / "o.jsonl"), "--json-errors"])
    assert code == 1
    error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert error["error"] == "UsageError"
    assert error["exit_code"] == 1


def test_missing_required_flag(capsys):
    assert main(["split", "--output", "x.jsonl"]) == 1
    assert "error:" in capsys.readouterr().err


def test_missing_input_file(tmp_path):
    assert main(["split", "--input", str(tmp_path / "absent.jsonl"), "--output", str(tmp_path / "o.jsonl")]) == 1


def test_bad_ratios(ingested, tmp_path):
    assert main(["split", "--input", str(ingested), "--output", str(tmp_path / "o.jsonl"), "--ratios", "0.5,0.5,0.5"]) == 1


def test_malformed_dataset_is_a_data_error(tmp_path, oracle_cfg, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{not json\n", encoding="utf-8")
    assert main(["eval", "--dataset", str(bad), "--backend", str(oracle_cfg), "--json-errors"]) == 2
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["error"] == "MalformedLine"


def test_eval_without_backend(ingested):
    assert main(["eval", "--dataset", str(ingested)]) == 1


def test_unreachable_backend_exit_code(ingested, tmp_path, capsys):
    cfg = tmp_path / "down.toml"
    cfg.write_text('kind = "http"\nendpoint = "http://127.0.0.1:9/v1/completions"\nretries = 0\ntimeout_s = 2.0\n', encoding="utf-8")
    assert main(["eval", "--dataset", str(ingested), "--backend", str(cfg), "--fail-fast", "--json-errors"]) == 3
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["exit_code"] == 3


def test_sample_command(tmp_path, capsys):
    assert main(["sample", "--output", str(tmp_path / "s"), "--dialogues", "5", "--seed", "2"]) == 0
    assert (tmp_path / "s" / "schema.json").is_file()
    assert "wrote 5 dialogues" in capsys.readouterr().out
