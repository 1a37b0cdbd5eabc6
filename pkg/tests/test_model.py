from __future__ import annotations

import networkx as nx
import pytest
from builders import B, C, E, V, artifact, graph, read, sink, straight_line
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import risk_closure

from scara.model import (
    FSM,
    Box,
    BoxDNF,
    Cond,
    ValidationError,
    VarRef,
    VarSpec,
    entry_entities,
    reachable_entities,
    validate_case,
)


class TestVarSpec:
    def test_int_domain_is_inclusive(self):
        assert VarSpec("x", lo=2, hi=5).domain() == (2, 3, 4, 5)

    def test_enum_encodes_names(self):
        v = VarSpec("q", kind="enum", values=("idle", "busy"), role="state")
        assert v.domain() == (0, 1)
        assert v.encode("busy") == 1
        assert v.encode(0) == 0
        with pytest.raises(ValidationError):
            v.encode("gone")

    def test_bool_and_explicit_values(self):
        assert VarSpec("b", kind="bool").domain() == (0, 1)
        assert VarSpec("c", values=(200, 64)).domain() == (64, 200)

    def test_empty_domain_rejected(self):
        with pytest.raises(ValidationError):
            VarSpec("x", lo=3, hi=1).domain()


def test_cond_with_reference_operand():
    c = Cond("len", "gt", VarRef("cap", 1))
    assert c.holds({"len": 66, "cap": 64})
    assert not c.holds({"len": 65, "cap": 64})


def test_box_dnf_matching():
    d = BoxDNF((Box.of({"x": [1, 2]}), Box.of({"y": [7]})))
    assert d.matches({"x": 2, "y": 0})
    assert d.matches({"x": 0, "y": 7})
    assert not d.matches({"x": 0, "y": 0})
    assert not BoxDNF(()).matches({"x": 1})
    assert d.vars == ("x", "y")


def test_fsm_reachability():
    f = FSM(("a", "b", "c", "d"), "a", (("a", "b"), ("b", "c"), ("c", "a")))
    assert f.reachable_from(["a"]) == {"a", "b", "c"}
    assert f.reachable_from(["d"]) == {"d"}


# ------------------------------------------------------------ entry set


def test_entry_single_tagged_entity():
    art, g = straight_line()
    assert entry_entities(g, art) == {"e_in"}


def test_entry_none_tagged():
    art, g = straight_line(tags=())
    assert entry_entities(g, art) == set()


def _five_entity_case():
    blocks = [B(f"b{i}", tags=["task-root"] if i in (1, 3) else []) for i in range(5)]
    art = artifact(blocks, [E(f"b{i}", f"b{i + 1}") for i in range(4)], [V("x", 0, 1)])
    ents = [(f"e{i}", "scan-cycle", 0.5, [f"b{i}"]) for i in range(5)]
    rels = [("e0", "e1", "data-flow"), ("e1", "e2", "control-dep"), ("e2", "e3", "ipc"),
            ("e3", "e4", "data-flow", False)]
    return art, graph(ents, rels)


def test_entry_two_of_five():
    art, g = _five_entity_case()
    assert entry_entities(g, art) == {"e1", "e3"}


# --------------------------------------------------------------- closure


def test_chain_closure():
    art = artifact([B("A", tags=["exported"]), B("B"), B("C")], [E("A", "B"), E("B", "C")],
                   [V("x", 0, 1)])
    g = graph([("e1", "l", 0.1, ["A"]), ("e2", "l", 0.1, ["B"]), ("e3", "l", 0.1, ["C"])],
              [("e1", "e2", "data-flow"), ("e2", "e3", "data-flow")])
    assert reachable_entities(g, art) == {"e1", "e2", "e3"}


def test_non_risk_relation_is_pruned():
    art = artifact([B("A", tags=["exported"]), B("B")], [E("A", "B")], [V("x", 0, 1)])
    g = graph([("e1", "l", 0.1, ["A"]), ("e2", "l", 0.1, ["B"])], [("e1", "e2", "calls", False)])
    assert reachable_entities(g, art) == {"e1"}


def test_diamond_with_pruned_branch():
    art = artifact([B("A", tags=["exported"]), B("B"), B("C"), B("D"), B("X")],
                   [E("A", "B")], [V("x", 0, 1)])
    g = graph(
        [("a", "l", 0.1, ["A"]), ("b", "l", 0.1, ["B"]), ("c", "l", 0.1, ["C"]),
         ("d", "l", 0.1, ["D"]), ("x", "l", 0.1, ["X"])],
        [("a", "b", "data-flow"), ("a", "c", "doc-link", False), ("b", "d", "data-flow"),
         ("c", "x", "data-flow")],
    )
    assert reachable_entities(g, art) == {"a", "b", "d"}


@st.composite
def random_graph(draw):
    n = draw(st.integers(1, 9))
    ids = [f"e{i}" for i in range(n)]
    tagged = draw(st.lists(st.booleans(), min_size=n, max_size=n))
    rels = draw(st.lists(
        st.tuples(st.sampled_from(ids), st.sampled_from(ids),
                  st.sampled_from(["data-flow", "ipc", "note"])),
        max_size=3 * n,
    ))
    rels = [(s, d, t, t != "note") for s, d, t in rels]
    return ids, tagged, rels


@settings(max_examples=150, deadline=None)
@given(random_graph())
def test_closure_matches_oracles(spec):
    ids, tagged, rels = spec
    blocks = [B(f"b_{e}", tags=["exported"] if t else []) for e, t in zip(ids, tagged)]
    art = artifact(blocks, [], [V("x", 0, 1)])
    g = graph([(e, "l", 0.1, [f"b_{e}"]) for e in ids], rels)
    got = reachable_entities(g, art)
    entry_blocks = [f"b_{e}" for e, t in zip(ids, tagged) if t]
    assert got == risk_closure(ids, rels, {e: [f"b_{e}"] for e in ids}, entry_blocks)
    dg = nx.DiGraph()
    dg.add_nodes_from(ids)
    dg.add_edges_from((s, d) for s, d, _, risk in rels if risk)
    seeds = {e for e, t in zip(ids, tagged) if t}
    via_nx = set(seeds).union(*(nx.descendants(dg, s) for s in seeds)) if seeds else set()
    assert got == via_nx


# ------------------------------------------------------------ validation


def test_bundled_cases_validate(suite_cases):
    for cid, case in suite_cases.items():
        assert validate_case(case.artifact, case.ssckg) == [], cid


def _kinds(art, g):
    return {v.kind for v in validate_case(art, g)}


def test_dangling_phi():
    art, _ = straight_line()
    g = graph([("e_in", "recv-message", 0.3, ["E", "nowhere"])])
    assert "DanglingPhi" in _kinds(art, g)


def test_rho_out_of_range():
    art, _ = straight_line()
    g = graph([("e_in", "recv-message", 1.3, ["E"])])
    assert _kinds(art, g) == {"RiskOutOfRange"}


def test_structural_violations():
    art = artifact(
        [B("A", read("nochan"), sink("s", C("x", "gt", 1), kind="weird")), B("A")],
        [E("A", "Z")],
        [V("x", 0, 3)],
        entry="A",
    )
    g = graph([("e", "l", 0.5, ["A"])], [("e", "ghost", "data-flow"), ("e", "e", "friendship")])
    kinds = _kinds(art, g)
    assert {"DuplicateBlock", "DanglingEdge", "NoEntry", "UnknownChannel", "BadSinkKind",
            "DanglingRelation", "BadRiskRelation"} <= kinds


def test_undeclared_variable_in_sink():
    art = artifact([B("A", sink("s", C("x", "gt", 1)), tags=["exported"])], [], [V("x", 0, 3)])
    art2 = art.__class__(**{**art.__dict__, "variables": ()})
    g = graph([("e", "l", 0.5, ["A"])])
    assert "UndeclaredVariable" in _kinds(art2, g)


def test_phi_must_be_total():
    art, _ = straight_line()
    g = graph([("e_in", "l", 0.3, ["E"]), ("e2", "l", 0.3, [])], phi={"e_in": ["E"]})
    assert "PhiNotTotal" in _kinds(art, g)
