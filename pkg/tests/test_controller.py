from __future__ import annotations

import json
import random

import pytest
from conftest import bundled, bundled_raw, gt_candidate, reparse

from scara.caca import Config, tier_set
from scara.controller import FINAL_STATES, case_config, rsa_cva_loop, run_case
from scara.osva import verify


def _outcome(rep, case):
    return rep.outcome_for(case.ground_truth["candidate"])


def test_infeasible_case_resolves_false_positive(suite_reports):
    o = _outcome(suite_reports["PROT-003"], bundled("PROT-003"))
    assert o.final_state == "ResolvedFalsePositive"
    assert o.detail["reason"] == "proto"
    assert o.remedy is None and o.trace == []


def test_unknown_case_with_enforcement_point_gets_advisory(suite_reports):
    o = _outcome(suite_reports["PROT-004"], bundled("PROT-004"))
    assert o.final_state == "UnresolvedOrAdvisory"
    assert o.advisory is not None and o.advisory.advisory and o.advisory.tier == 1
    assert o.remedy is None


def test_golden_case_verifies_at_tier_two(suite_reports):
    o = _outcome(suite_reports["BIN-001"], bundled("BIN-001"))
    assert o.final_state == "VerifiedRemediation"
    assert o.detail["tier"] == 2
    assert o.detail["epsilon"]["post_label"] == "Unsat"
    assert len(o.trace) == 1


def test_relaxed_without_harness_is_unconfirmed(suite_reports):
    o = _outcome(suite_reports["ICS-004"], bundled("ICS-004"))
    assert o.final_state == "UnconfirmedCandidate"
    assert o.trace == [] and o.remedy is None


def test_tier_three_accepts_in_one_step(suite_reports):
    o = _outcome(suite_reports["ICS-001"], bundled("ICS-001"))
    assert o.final_state == "VerifiedRemediation"
    assert o.detail["tier"] == 3 and len(o.trace) == 1
    assert len(o.trace[0].candidates) >= 1


def test_tier_two_rejected_three_times_then_tier_one():
    raw = bundled_raw("BIN-001")
    raw["artifact"]["scan_slack"] = 0  # every guard now breaks the timing check
    raw["context"]["replay"]["enforcement_point"] = True
    case = reparse(raw)
    o = _outcome(run_case(case, case_config(case)), case)
    assert o.final_state == "VerifiedRemediation"
    assert [(s.tier, s.iteration) for s in o.trace] == [(2, 1), (2, 2), (2, 3), (1, 1)]
    assert all(s.to_dict()["delta"]["kind"] == "side_effect" for s in o.trace[:3])
    assert o.detail["tier"] == 1


def test_exhausted_without_enforcement_point_fails_with_last_delta():
    raw = bundled_raw("BIN-001")
    raw["artifact"]["scan_slack"] = 0
    case = reparse(raw)
    o = _outcome(run_case(case, case_config(case)), case)
    assert o.final_state == "RemediationFailed"
    assert o.detail["last_delta"]["kind"] == "side_effect"
    assert o.advisory is None


def test_feedback_off_fails_overblocking_case():
    case = bundled("BIN-002")
    o = _outcome(run_case(case, case_config(case, cli_overrides={"feedback": False})), case)
    assert o.final_state == "RemediationFailed"
    assert len(o.trace) == Config().k_iters


def test_loop_refuses_unsat_labels():
    case = bundled("BIN-001")
    c = gt_candidate(case)
    res = verify(case.artifact, case.ssckg, c, Config())
    with pytest.raises(ValueError):
        rsa_cva_loop(case.artifact, case.ssckg, c, res, "Unsat", {1}, Config())


def test_invalid_manifest_is_a_case_error():
    raw = bundled_raw("BIN-001")
    raw["ssckg"]["relations"].append({"src": "copy", "dst": "ghost", "type": "data-flow",
                                      "risk": True})
    case = reparse(raw)
    rep = run_case(case, Config())
    assert rep.error and "DanglingRelation" in rep.error
    assert rep.outcomes == []


def test_case_config_precedence():
    raw = bundled_raw("BIN-001")
    raw["config_overrides"] = {"k_iters": 5, "alpha": 0.2}
    case = reparse(raw)
    assert case_config(case).k_iters == 5
    cfg = case_config(case, {"k_iters": 4, "beam_b": 3}, {"beam_b": 2})
    assert (cfg.k_iters, cfg.beam_b, cfg.alpha) == (4, 2, 0.2)


def test_routing_is_total_and_invariants_hold(suite_reports):
    for rep in suite_reports.values():
        assert rep.error is None
        for o in rep.outcomes:
            assert o.final_state in FINAL_STATES
            label = o.label
            if label == "Unsat":
                assert o.final_state == "ResolvedFalsePositive"
            if label == "Unknown":
                assert o.final_state == "UnresolvedOrAdvisory"
            if label in ("Unsat", "Unknown"):
                assert o.trace == [] and o.remedy is None
            if o.advisory is not None:
                assert o.final_state != "VerifiedRemediation"


def test_remedy_tiers_are_legal(suite_cases, suite_reports):
    for cid, rep in suite_reports.items():
        allowed = tier_set(suite_cases[cid].artifact.availability)
        for o in rep.outcomes:
            for s in o.trace:
                assert s.tier in allowed


def test_run_case_is_deterministic(suite_cases):
    case = suite_cases["ICS-005"]
    a = json.dumps(run_case(case, case_config(case)).to_dict(), sort_keys=True)
    b = json.dumps(run_case(case, case_config(case)).to_dict(), sort_keys=True)
    assert a == b


@pytest.mark.parametrize("seed", range(12))
def test_fuzzed_configs_respect_the_loop_bound(seed, suite_cases):
    rng = random.Random(seed)
    over = {"k_iters": rng.randint(1, 4), "beam_b": rng.randint(1, 8),
            "alpha": rng.random(), "feedback": rng.random() < 0.5,
            "tau_cov": rng.choice([0.5, 0.95, 1.0]), "tau_block": rng.choice([0.0, 0.05, 0.5])}
    for cid in sorted(suite_cases)[seed % 3::3]:
        case = suite_cases[cid]
        cfg = case_config(case, over)
        rep = run_case(case, cfg)
        tiers = tier_set(case.artifact.availability)
        for o in rep.outcomes:
            assert len(o.trace) <= cfg.k_iters * len(tiers) + 1
            if o.label in ("Unsat", "Unknown"):
                assert o.remedy is None and o.trace == []
