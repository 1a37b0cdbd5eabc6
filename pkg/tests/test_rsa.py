from __future__ import annotations

import dataclasses
import itertools

import pytest
from builders import B, C, E, V, artifact, br, graph, read, sink
from conftest import bundled, gt_candidate
from hypothesis import given, settings
from hypothesis import strategies as st

from scara.caca import Config, ContextHints, normalize
from scara.constraints import ConstraintAtom
from scara.model import Box, BoxDNF
from scara.osva import verify
from scara.paths import defined_before
from scara.rsa import (
    GuardPatch,
    Policy,
    RejectionConstraint,
    TierInfeasible,
    digest,
    hull,
    subtract_point,
    synth_tier1,
    synth_tier2,
    synth_tier3,
    witness_class,
)


def _modbus(availability="policy-only", hi=2047):
    art = artifact(
        [B("E", read("mb"), tags=["protocol-handler"], labels=["recv-message"]),
         B("W", br(C("fc", "neq", 16), None), sink("s1", C("addr", "gt", 1000)),
           labels=["write-register"])],
        [E("E", "W")],
        [V("fc", 0, 31), V("addr", 0, hi)],
        channels=[{"name": "mb", "fields": ["fc", "addr"]}],
        availability=availability,
    )
    g = graph([("recv", "recv-message", 0.3, ["E"]), ("reg", "write-register", 0.9, ["W"])],
              [("recv", "reg", "protocol-interaction")])
    (c,) = normalize([{"entity_or_block": "reg", "src": "recv", "snk": "reg",
                       "relation_type": "data-flow", "rho": 0.9}], g, art, ContextHints())
    return art, g, c, verify(art, g, c, Config())


# ---------------------------------------------------------------- tier 1


def test_tier1_blocks_exactly_the_conjunction():
    art, _, c, res = _modbus()
    assert res.label == "SatStrict"
    r = synth_tier1(c, res, art)
    assert isinstance(r.payload, Policy) and r.tier == 1
    assert r.payload.gate == BoxDNF((Box.of({"fc": [16], "addr": range(1001, 2048)}),))
    dom = art.domains()
    for fc, addr in itertools.product(dom["fc"], range(0, 2048, 7)):
        blocked = r.payload.gate.matches({"fc": fc, "addr": addr})
        assert blocked == (fc == 16 and addr > 1000)


def test_tier1_is_minimal():
    """Dropping any conjunct widens the gate onto values the witness class never takes."""
    art, _, c, res = _modbus()
    gate = synth_tier1(c, res, art).payload.gate
    models, _ = witness_class(res, art)
    bad = {(m["fc"], m["addr"]) for m in models}
    (box,) = gate.boxes
    for var in box.vars:
        wider = Box.of({k: v for k, v in box.as_dict().items() if k != var})
        extra = [(fc, a) for fc, a in itertools.product(range(32), range(2048))
                 if wider.matches({"fc": fc, "addr": a}) and (fc, a) not in bad]
        assert extra, var


def test_tier1_needs_an_enforcement_point():
    art, _, c, res = _modbus()
    with pytest.raises(TierInfeasible):
        synth_tier1(c, res, art, enforcement_point=False)


def test_tier1_side_effect_delta_excludes_point():
    art, _, c, res = _modbus()
    d = RejectionConstraint("side_effect", {"points": [{"fc": 16, "addr": 1500}]})
    gate = synth_tier1(c, res, art, [d]).payload.gate
    assert not gate.matches({"fc": 16, "addr": 1500})
    assert gate.matches({"fc": 16, "addr": 1499}) and gate.matches({"fc": 16, "addr": 1501})


def test_tier1_advisory_without_witness():
    art, _, c, _ = _modbus()
    with pytest.raises(TierInfeasible):
        # the prior alone spans every value: a constant gate is refused
        synth_tier1(c, None, art)


# ---------------------------------------------------------------- tier 2


def test_tier2_guard_before_copy():
    case = bundled("BIN-001")
    res = verify(case.artifact, case.ssckg, gt_candidate(case), Config())
    r = synth_tier2(gt_candidate(case), res, case.artifact)
    p = r.payload
    assert isinstance(p, GuardPatch) and r.tier == 2
    art = case.artifact
    assert set(p.pred.vars) <= set(art.observables)
    idx = res.witness_walk.blocks.index(p.block)
    assert set(p.pred.vars) <= defined_before(res.witness_walk, art)[idx]
    w = {**res.witness["inputs"], **res.witness["state"]}
    assert p.pred.matches(w)


def test_tier2_refuses_policy_only():
    art, _, c, res = _modbus("policy-only")
    with pytest.raises(TierInfeasible):
        synth_tier2(c, res, art)


def test_tier2_side_effect_shrinks_guard():
    art, _, c, res = _modbus("binary-rewritable")
    base = synth_tier2(c, res, art).payload.pred
    d = RejectionConstraint("side_effect", {"points": [{"fc": 16, "addr": 2000}]})
    shrunk = synth_tier2(c, res, art, [d]).payload.pred
    assert base.matches({"fc": 16, "addr": 2000}) and not shrunk.matches({"fc": 16, "addr": 2000})
    for a in range(1001, 2048):
        if a != 2000:
            assert shrunk.matches({"fc": 16, "addr": a})


def test_tier2_coverage_delta_shifts_later():
    case = bundled("BIN-001")
    c = gt_candidate(case)
    res = verify(case.artifact, case.ssckg, c, Config())
    first = synth_tier2(c, res, case.artifact).payload.block
    later = synth_tier2(c, res, case.artifact, [RejectionConstraint("coverage", {})]).payload.block
    blocks = res.witness_walk.blocks
    assert blocks.index(later) == blocks.index(first) + 1


def test_empty_projection_is_infeasible():
    art, _, c, res = _modbus("binary-rewritable")
    dead = dataclasses.replace(res, witness_atoms=res.witness_atoms + (ConstraintAtom("fc", "gt", 99),))
    with pytest.raises(TierInfeasible, match="empty"):
        synth_tier2(c, dead, art)


# ---------------------------------------------------------------- tier 3


def test_tier3_requires_source():
    art, g, c, res = _modbus("binary-rewritable")
    with pytest.raises(TierInfeasible):
        synth_tier3(c, res, art, g)


def test_tier3_bounds_check_binds_sink_condition():
    case = bundled("PROT-005")
    c = gt_candidate(case)
    res = verify(case.artifact, case.ssckg, c, Config())
    cands = synth_tier3(c, res, case.artifact, case.ssckg)
    names = [r.payload.template for r in cands]
    assert names[0] == "bounds-check-insert"
    assert len(cands) <= 5
    trig = case.artifact.sinks()[res.witness_walk.sink][1].trigger
    p = cands[0].payload.params["cond"]
    assert (p["var"], p["rel"]) == (trig.var, trig.rel)
    assert all(r.tier == 3 and "bulk" in r.preserve for r in cands)


def test_tier3_preserve_filters_clamp():
    case = bundled("PROT-005")
    c = gt_candidate(case)
    res = verify(case.artifact, case.ssckg, c, Config())
    plain = [r.payload.template for r in synth_tier3(c, res, case.artifact, case.ssckg)]
    assert "input-clamp" in plain
    d = RejectionConstraint("coverage", {"must_remain_reachable": ["bulk"]})
    kept = [r.payload.template for r in synth_tier3(c, res, case.artifact, case.ssckg, [d])]
    assert "input-clamp" not in kept
    assert kept == [t for t in plain if t != "input-clamp"]


# --------------------------------------------------------- box helpers


def _dnf(draw_boxes, names):
    return BoxDNF(tuple(Box.of(bx) for bx in draw_boxes))


@st.composite
def small_dnf(draw):
    names = ["a", "b"]
    domains = {"a": tuple(range(5)), "b": tuple(range(4))}
    boxes = []
    for _ in range(draw(st.integers(0, 3))):
        bx = {}
        for n in names:
            if draw(st.booleans()):
                bx[n] = draw(st.frozensets(st.sampled_from(domains[n]), min_size=1))
        boxes.append(bx)
    return _dnf(boxes, names), domains


@settings(max_examples=200, deadline=None)
@given(small_dnf(), st.integers(0, 4), st.integers(0, 3))
def test_subtract_point_removes_only_that_point(spec, pa, pb):
    d, domains = spec
    out = subtract_point(d, {"a": pa, "b": pb}, domains)
    for a, b in itertools.product(domains["a"], domains["b"]):
        env = {"a": a, "b": b}
        if (a, b) == (pa, pb):
            assert not out.matches(env)
        else:
            assert out.matches(env) == d.matches(env)


@settings(max_examples=200, deadline=None)
@given(small_dnf())
def test_hull_covers_its_dnf(spec):
    d, domains = spec
    if d.is_empty():
        return
    h = hull(d, domains)
    for a, b in itertools.product(domains["a"], domains["b"]):
        env = {"a": a, "b": b}
        if d.matches(env):
            assert h.matches(env)


def test_digest_readmits_reported_points():
    p = {"fc": 16, "addr": 2000}
    view = digest([RejectionConstraint("side_effect", {"points": [p]}),
                   RejectionConstraint("replay", {"point": p})])
    assert view.excluded == [] and view.readmit == [p] and view.shift == 0
    view = digest([RejectionConstraint("reachability", {})])
    assert view.shift == 1
