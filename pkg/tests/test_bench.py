from __future__ import annotations

import json
import random

import pytest
from click.testing import CliRunner
from conftest import SUITE, bundled_raw
from hypothesis import given, settings
from hypothesis import strategies as st

from scara.bench import (
    Confusion,
    best_rank,
    cliffs_delta,
    confusion,
    load_report,
    recall_at_k,
    report_json,
    report_text,
    run_suite,
    write_report,
)
from scara.cli import main

# ---------------------------------------------------------------- confusion


def test_precision_with_no_false_positives():
    c = Confusion(tp=7, fp=0)
    assert c.precision == 1.0


def test_recall_seven_of_eleven():
    c = Confusion(tp=7, fn=4)
    assert c.recall == pytest.approx(7 / 11)
    assert round(c.recall, 3) == 0.636


def test_all_unknown():
    c = confusion(["unknown"] * 4, ["reachable", "infeasible", "reachable", None])
    assert (c.tp, c.fp, c.tn, c.fn) == (0, 0, 0, 0)
    assert c.unknown_rate == 1.0


def test_four_case_fixture():
    preds = ["reachable", "reachable", "infeasible", "infeasible"]
    truth = ["reachable", "infeasible", "infeasible", "reachable"]
    c = confusion(preds, truth)
    assert (c.tp, c.fp, c.tn, c.fn) == (1, 1, 1, 1)
    assert (c.precision, c.recall, c.fpr, c.fnr) == (0.5, 0.5, 0.5, 0.5)


def test_missing_truth_is_excluded(caplog):
    c = confusion(["reachable", "infeasible"], [None, "unknown"])
    assert c.excluded == 2 and c.total == 0
    assert "excluded" in caplog.text


def test_lengths_must_match():
    with pytest.raises(ValueError):
        confusion(["reachable"], [])


_preds = st.sampled_from(["reachable", "infeasible", "unknown"])
_truths = st.sampled_from(["reachable", "infeasible"])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(_preds, _truths), max_size=30), st.randoms(use_true_random=False))
def test_confusion_is_order_free_and_consistent(pairs, rng):
    c = confusion([p for p, _ in pairs], [t for _, t in pairs])
    shuffled = list(pairs)
    rng.shuffle(shuffled)
    assert confusion([p for p, _ in shuffled], [t for _, t in shuffled]) == c
    assert c.total == len(pairs)
    for x in (c.precision, c.recall, c.fpr, c.fnr, c.unknown_rate):
        assert 0.0 <= x <= 1.0


# -------------------------------------------------------------- recall@k


def test_recall_at_ten_for_ranks_one_and_twelve():
    assert recall_at_k([1, 12], (10,)) == {10: 0.5}


def test_recall_reaches_one_at_max_rank():
    ranks = [3, 1, 7]
    assert recall_at_k(ranks, (7, 50)) == {7: 1.0, 50: 1.0}


def test_unranked_cases_miss_everywhere():
    assert recall_at_k([None, 1], (1, 50)) == {1: 0.5, 50: 0.5}
    assert recall_at_k([]) == {k: 0.0 for k in (1, 3, 5, 10, 20, 50)}


def test_best_rank():
    ranked = [["E", "B", "C"], ["E", "A", "C"]]
    assert best_rank(ranked, [["E", "A", "C"]]) == 2
    assert best_rank(ranked, [["Z"]]) is None


@settings(max_examples=100, deadline=None)
@given(st.lists(st.one_of(st.none(), st.integers(1, 60)), min_size=1, max_size=20))
def test_recall_is_monotone_in_k(ranks):
    ks = tuple(range(1, 61))
    table = recall_at_k(ranks, ks)
    vals = [table[k] for k in ks]
    assert vals == sorted(vals)
    found = [r for r in ranks if r is not None]
    if len(found) == len(ranks):
        assert table[max(found)] == 1.0


# ----------------------------------------------------------------- cliffs


def test_cliffs_examples():
    assert cliffs_delta([1, 1, 1], [1, 1]) == 0
    assert cliffs_delta([5, 6], [1, 2, 3]) == 1
    # a zero false-positive rate against a sample that is one half or more
    # above zero in three of four runs gives -0.75
    assert cliffs_delta([0.0, 0.0, 0.0, 0.0], [0.5, 0.5, 0.5, 0.0]) == -0.75


def test_cliffs_needs_samples():
    with pytest.raises(ValueError):
        cliffs_delta([], [1])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(-5, 5), min_size=1, max_size=10),
       st.lists(st.integers(-5, 5), min_size=1, max_size=10))
def test_cliffs_is_antisymmetric_and_bounded(xs, ys):
    d = cliffs_delta(xs, ys)
    assert d == -cliffs_delta(ys, xs)
    assert -1 <= d <= 1


def test_random_metric_inputs():
    rng = random.Random(7)
    for _ in range(100):
        n = rng.randint(1, 25)
        preds = [rng.choice(["reachable", "infeasible", "unknown"]) for _ in range(n)]
        truth = [rng.choice(["reachable", "infeasible"]) for _ in range(n)]
        c = confusion(preds, truth)
        assert c.tp + c.fp + c.tn + c.fn + c.unknown == n
        xs = [rng.random() for _ in range(rng.randint(1, 8))]
        ys = [rng.random() for _ in range(rng.randint(1, 8))]
        assert cliffs_delta(xs, ys) == -cliffs_delta(ys, xs)


# ---------------------------------------------------------------- reports


@pytest.fixture(scope="module")
def suite_result():
    return run_suite(SUITE)


def test_suite_totals(suite_result):
    c = suite_result.confusion()
    assert c.total == 15
    assert (c.tp, c.fp, c.tn, c.fn) == (10, 0, 3, 0)
    assert c.unknown == 2 and c.excluded == 0


def test_three_partitions(suite_result):
    assert suite_result.partitions() == ["binary", "ics", "protocol"]
    text = report_text(suite_result)
    for block in ("Verification", "Label mix", "Remediation", "Diagnostics"):
        assert block in text
    header = text.splitlines()[0].split()
    assert header == ["binary", "ics", "protocol", "all"]


def test_empty_suite_report(tmp_path):
    res = run_suite([])
    doc = json.loads(report_json(res))
    assert doc["summary"]["all"]["cases"] == 0
    assert doc["summary"]["all"]["verification"]["TP"] == 0
    assert doc["cases"] == []
    assert "Verification" in report_text(res)


def test_json_round_trip(suite_result, tmp_path):
    out = write_report(suite_result, tmp_path)
    text = (out / "report.json").read_text()
    doc = load_report(out / "report.json")
    assert json.dumps(doc, indent=2, sort_keys=True) + "\n" == text
    assert (out / "summary.txt").exists()
    assert any((out / "certificates").iterdir())
    assert any((out / "policies").iterdir())


def test_parallel_and_serial_reports_match(suite_result):
    assert report_json(run_suite(SUITE, workers=3)) == report_json(suite_result)


# -------------------------------------------------------------------- cli


def test_cli_validate_suite():
    r = CliRunner().invoke(main, ["validate-suite", "--suite", str(SUITE)])
    assert r.exit_code == 0
    assert "15/15 manifests valid" in r.output


def test_cli_run_and_verify():
    path = str(SUITE / "BIN-001.json")
    r = CliRunner().invoke(main, ["run", "--manifest", path])
    assert r.exit_code == 0, r.output
    assert json.loads(r.output)["case_id"] == "BIN-001"
    r = CliRunner().invoke(main, ["verify", "--manifest", path, "--candidate", "copy:recv->copy"])
    assert r.exit_code == 0, r.output
    assert json.loads(r.output)["label"] == "SatStrict"


def test_cli_remediate():
    path = str(SUITE / "BIN-001.json")
    r = CliRunner().invoke(main, ["remediate", "--manifest", path, "--candidate", "copy:recv->copy"])
    assert r.exit_code == 0, r.output
    assert json.loads(r.output)["final_state"] == "VerifiedRemediation"


def test_cli_usage_errors(tmp_path):
    path = str(SUITE / "BIN-001.json")
    r = CliRunner().invoke(main, ["verify", "--manifest", path, "--candidate", "nope"])
    assert r.exit_code == 2
    cfg = tmp_path / "c.json"
    cfg.write_text('{"gamma": 1}')
    r = CliRunner().invoke(main, ["run", "--manifest", path, "--config", str(cfg)])
    assert r.exit_code == 2
    r = CliRunner().invoke(main, ["run"])
    assert r.exit_code == 2


def test_cli_case_error_exit_one(tmp_path):
    raw = bundled_raw("BIN-001")
    raw["ssckg"]["relations"].append({"src": "copy", "dst": "ghost", "type": "data-flow",
                                      "risk": True})
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(raw))
    r = CliRunner().invoke(main, ["run", "--manifest", str(bad)])
    assert r.exit_code == 1
    r = CliRunner().invoke(main, ["validate-suite", "--suite", str(tmp_path)])
    assert r.exit_code == 1
    r = CliRunner().invoke(main, ["bench", "--suite", str(tmp_path), "--report",
                                  str(tmp_path / "out")])
    assert r.exit_code == 1


def test_cli_bench_writes_reports(tmp_path):
    r = CliRunner().invoke(main, ["bench", "--report", str(tmp_path), "--workers", "2"])
    assert r.exit_code == 0, r.output
    doc = load_report(tmp_path / "report.json")
    assert doc["summary"]["all"]["cases"] == 15


def test_cli_config_file_applies(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"feedback": false}')
    r = CliRunner().invoke(main, ["run", "--manifest", str(SUITE / "BIN-002.json"),
                                  "--config", str(cfg)])
    assert r.exit_code == 0
    assert json.loads(r.output)["outcomes"][0]["final_state"] == "RemediationFailed"
