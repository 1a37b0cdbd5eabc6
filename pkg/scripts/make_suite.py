#!/usr/bin/env python3
"""Generate the bundled 15-case synthetic suite into src/scara/data/suite.

Three partitions of five cases (binary-like, protocol-like, ICS-like). By
construction 11 cases are reachable, 3 infeasible and 1 undecidable within
the default budget. Each case is small enough for exhaustive checking except
the budget case, whose input product is 10**6 on purpose.

Run:  python3 scripts/make_suite.py [--out DIR]
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

# ------------------------------------------------------------------ helpers


def var(name, lo=0, hi=0, role="input", family=None, kind="int", values=None, nominal=None):
    d = {"name": name, "kind": kind, "lo": lo, "hi": hi, "role": role}
    d["family"] = family or ("io" if role == "input" else "runtime")
    if values is not None:
        d["values"] = list(values)
    if nominal is not None:
        d["nominal"] = list(nominal)
    return d


def C(v, rel, operand):
    return {"var": v, "rel": rel, "operand": operand}


def ref(name, offset=0):
    return {"ref": name, "offset": offset}


def read(ch):
    return {"op": "read", "channel": ch}


def assign(t, value=None, source=None, offset=0):
    d = {"op": "assign", "target": t, "offset": offset}
    if source is not None:
        d["source"] = source
    else:
        d["value"] = value
    return d


def br(cond, target=None):
    return {"op": "branch", "cond": cond, "target": target}


def sink(sid, kind, trig):
    return {"op": "sink", "id": sid, "kind": kind, "trigger": trig}


def blk(bid, instrs=(), tags=(), labels=()):
    return {"id": bid, "instrs": list(instrs), "tags": list(tags), "labels": list(labels)}


def edge(src, dst, guard=None):
    return {"src": src, "dst": dst, "guard": guard}


def ent(eid, label, rho, blocks):
    return {"id": eid, "label": label, "rho": rho}, (eid, blocks)


def graph(entities, relations):
    ents, phi = [], {}
    for e, (eid, blocks) in entities:
        ents.append(e)
        phi[eid] = list(blocks)
    rels = [
        {"src": s, "dst": d, "type": t, "risk": r}
        for s, d, t, *rest in relations
        for r in [rest[0] if rest else True]
    ]
    return {"entities": ents, "relations": rels, "phi": phi}


def alert(v, src, snk, rel, rho, tool="static-scan"):
    return {
        "source_tool": tool,
        "entity_or_block": v,
        "relation_type": rel,
        "src": src,
        "snk": snk,
        "rho": rho,
    }


def atom(v, rel, operand, family=None):
    d = {"var": v, "relation": rel, "operand": operand}
    if family:
        d["family"] = family
    return d


TIME_VAR = var("t", 0, 3, role="state", family="time")
TIME_HINT = {"atoms": [atom("t", "in-range", [0, 3])], "evidence": 0.3}


def msg(ch, fields, fsm=None, nxt=None):
    d = {"channel": ch, "fields": fields}
    if fsm is not None:
        d["fsm"] = fsm
        d["next"] = nxt if nxt is not None else fsm
    return d


def gt(label, vuln_paths=(), remedy=None, refuting=None, replay=False, candidate=None):
    d = {
        "label": label,
        "replay": replay,
        "remedy": remedy or {},
        "vulnerable_paths": [list(p) for p in vuln_paths],
        "candidate": candidate,
    }
    if refuting:
        d["refuting_family"] = refuting
    return d


def case(case_id, partition, artifact, ssckg, alerts, ground_truth, context, traces, overrides=None):
    return {
        "case_id": case_id,
        "partition": partition,
        "artifact": artifact,
        "ssckg": ssckg,
        "candidates": alerts,
        "ground_truth": ground_truth,
        "context": context,
        "benign_traces": traces,
        "config_overrides": overrides or {},
    }


def cid(v, src, snk):
    return f"{v}:{src}->{snk}"


# ---------------------------------------------------------- shared shapes

MODBUS_FSM = {
    "states": ["idle", "connected", "session", "locked"],
    "initial": "idle",
    "transitions": [
        ["idle", "connected"],
        ["connected", "session"],
        ["session", "session"],
        ["session", "idle"],
    ],
}


def modbus_vars(fc_hi=31, addr_hi=255):
    return [
        var("fc", 0, fc_hi),
        var("addr", 0, addr_hi),
        var("q", kind="enum", values=MODBUS_FSM["states"], role="state", family="proto"),
    ]


def copy_handler(sink_block_instrs, extra_blocks=(), extra_edges=(), pre=()):
    """entry E (reads net) -> A -> C (copy + sink) -> R; A may branch elsewhere."""
    blocks = [
        blk("E", [read("net")], tags=["network-handler"], labels=["recv-message", "parse-header"]),
        blk("A", list(pre), labels=["parse-payload", "dispatch-command"]),
        blk("C", sink_block_instrs, labels=["copy-buffer", "write-buffer"]),
        blk("R", [], labels=["send-response"]),
        *extra_blocks,
    ]
    edges = [edge("E", "A"), edge("A", "C"), edge("C", "R"), *extra_edges]
    return blocks, edges


def copy_graph(extra=(), extra_rel=()):
    ents = [
        ent("recv", "recv-message", 0.3, ["E"]),
        ent("parse", "parse-payload", 0.4, ["A"]),
        ent("copy", "copy-buffer", 0.9, ["C"]),
        ent("resp", "send-response", 0.2, ["R"]),
        *extra,
    ]
    rels = [
        ("recv", "parse", "data-flow"),
        ("parse", "copy", "data-flow"),
        ("copy", "resp", "control-dep"),
        *extra_rel,
    ]
    return graph(ents, rels)


def net_traces(lens, state=None, kinds=None):
    out = []
    for i, n in enumerate(lens):
        fields = {"len": n}
        if kinds is not None:
            fields["kind"] = kinds[i % len(kinds)]
        out.append({"state": dict(state or {}), "messages": [msg("net", fields)]})
    return out


# ------------------------------------------------------------- binary-like


def bin_001():
    """Guard insertion accepted on the first attempt."""
    blocks, edges = copy_handler(
        [assign("n", source="len"), assign("cap", 64), sink("s1", "buffer-write", C("n", "gt", ref("cap")))],
        extra_blocks=[blk("L", [], labels=["log-event"])],
        pre=[br(C("kind", "neq", 1), "L")],
    )
    art = {
        "availability": "binary-rewritable",
        "entry": "E",
        "variables": [
            var("len", 0, 255),
            var("kind", 0, 3),
            var("n", 0, 255, role="local"),
            var("cap", 0, 255, role="local"),
        ],
        "channels": [{"name": "net", "fields": ["len", "kind"]}],
        "observables": ["len", "kind"],
        "blocks": blocks,
        "edges": edges + [edge("L", "R")],
        "scan_slack": 16,
    }
    g = copy_graph([ent("log", "log-event", 0.1, ["L"])], [("parse", "log", "control-dep")])
    traces = net_traces([4, 16, 32, 64, 200, 90], kinds=[1, 1, 0, 1, 2, 3])
    # the len=200/kind=2 and len=90/kind=3 messages take the logging branch
    return case(
        "BIN-001", "binary", art, g,
        [alert("copy", "recv", "copy", "data-flow", 0.9)],
        gt("reachable", [["E", "A", "C"]], {"tier": 2, "outcome": "VerifiedRemediation"},
           candidate=cid("copy", "recv", "copy")),
        {"replay": {"enforcement_point": False, "harness": True}},
        traces,
    )


def _overblock_case(case_id, partition, lim_name, lim_values, field_name, labels, benign):
    blocks = [
        blk("E", [read("bus")], tags=["task-root"], labels=["recv-message"]),
        blk("C", [sink("s1", "buffer-write", C(field_name, "gt", ref(lim_name)))], labels=labels),
        blk("R", [], labels=["send-response"]),
    ]
    art = {
        "availability": "binary-rewritable",
        "entry": "E",
        "variables": [
            var(field_name, 0, 255),
            var(lim_name, role="state", family="runtime", values=lim_values),
        ],
        "channels": [{"name": "bus", "fields": [field_name]}],
        "observables": [field_name, lim_name],
        "blocks": blocks,
        "edges": [edge("E", "C"), edge("C", "R")],
        "scan_slack": 32,
    }
    g = graph(
        [
            ent("rx", "recv-message", 0.3, ["E"]),
            ent("store", labels[0], 0.85, ["C"]),
            ent("ack", "send-response", 0.2, ["R"]),
        ],
        [("rx", "store", "data-flow"), ("store", "ack", "control-dep")],
    )
    traces = []
    for lim, val in benign:
        traces.append({"state": {lim_name: lim}, "messages": [msg("bus", {field_name: val})]})
    return case(
        case_id, partition, art, g,
        [alert("store", "rx", "store", "shared-mem", 0.85)],
        gt("reachable", [["E", "C"]], {"tier": 2, "outcome": "VerifiedRemediation",
                                        "note": "needs overblocking feedback"},
           candidate=cid("store", "rx", "store")),
        {"replay": {"enforcement_point": False, "harness": True}},
        traces,
    )


def bin_002():
    """Range guard over-approximates len > cap and blocks benign large-cap runs."""
    return _overblock_case(
        "BIN-002", "binary", "cap", [64, 200], "len", ["copy-buffer", "write-buffer"],
        [(64, 10), (64, 60), (200, 100), (200, 150), (200, 20)],
    )


def bin_003():
    """Earliest guard position starves a benign branch; the guard must move later."""
    blocks, edges = copy_handler(
        [sink("s1", "buffer-write", C("len", "gt", 64))],
        extra_blocks=[blk("Y", [], labels=["alloc-buffer", "shared-mem-access"])],
        pre=[br(C("len", "in-range", [100, 110]), "Y")],
    )
    art = {
        "availability": "binary-rewritable",
        "entry": "E",
        "variables": [var("len", 0, 255), var("kind", 0, 3)],
        "channels": [{"name": "net", "fields": ["len", "kind"]}],
        "observables": ["len"],
        "blocks": blocks,
        "edges": edges + [edge("Y", "R")],
    }
    g = copy_graph([ent("bulk", "alloc-buffer", 0.3, ["Y"])], [("parse", "bulk", "data-flow")])
    traces = net_traces([10, 40, 105, 64, 108])
    return case(
        "BIN-003", "binary", art, g,
        [alert("copy", "recv", "copy", "data-flow", 0.8)],
        gt("reachable", [["E", "A", "C"]], {"tier": 2, "outcome": "VerifiedRemediation",
                                             "note": "needs coverage feedback"},
           candidate=cid("copy", "recv", "copy")),
        {"replay": {"enforcement_point": False, "harness": True}},
        traces,
    )


def bin_004():
    """Infeasible: the copy only runs in maintenance mode, which the runtime excludes."""
    blocks, edges = copy_handler(
        [sink("s1", "buffer-write", C("len", "gt", 64))],
        extra_blocks=[blk("L", [], labels=["log-event"])],
        pre=[br(C("mode", "neq", 2), "L")],
    )
    art = {
        "availability": "binary-rewritable",
        "entry": "E",
        "variables": [
            var("len", 0, 255),
            var("mode", 0, 3, role="state", family="runtime"),
            TIME_VAR,
        ],
        "channels": [{"name": "net", "fields": ["len"]}],
        "observables": ["len", "mode"],
        "blocks": blocks,
        "edges": edges + [edge("L", "R")],
    }
    g = copy_graph([ent("log", "log-event", 0.1, ["L"])], [("parse", "log", "control-dep")])
    return case(
        "BIN-004", "binary", art, g,
        [alert("copy", "recv", "copy", "control-dep", 0.7)],
        gt("infeasible", refuting="runtime", candidate=cid("copy", "recv", "copy")),
        {
            "runtime": {"atoms": [atom("mode", "in-set", [0, 1])], "evidence": 0.9},
            "time": TIME_HINT,
            "replay": {"enforcement_point": False, "harness": True},
        },
        net_traces([10, 80], state={"mode": 0, "t": 0}),
    )


def _relaxed_case(case_id, partition, harness, labels, availability="binary-rewritable"):
    blocks, edges = copy_handler(
        [sink("s1", "buffer-write", C("len", "gt", 64))],
        extra_blocks=[blk("L", [], labels=["log-event"])],
        pre=[br(C("temp", "neq", 2), "L")],
    )
    blocks[2]["labels"] = labels
    art = {
        "availability": availability,
        "entry": "E",
        "variables": [var("len", 0, 255), var("temp", 0, 3, role="state", family="env")],
        "channels": [{"name": "net", "fields": ["len"]}],
        "observables": ["len"],
        "blocks": blocks,
        "edges": edges + [edge("L", "R")],
    }
    g = copy_graph([ent("log", "log-event", 0.1, ["L"])], [("parse", "log", "control-dep")])
    return case(
        case_id, partition, art, g,
        [alert("copy", "recv", "copy", "data-flow", 0.75)],
        gt("reachable", [["E", "A", "C"]],
           {"tier": 2, "outcome": "VerifiedRemediation" if harness else "UnconfirmedCandidate"},
           replay=harness, candidate=cid("copy", "recv", "copy")),
        {
            "env": {"atoms": [atom("temp", "eq", 0)], "evidence": 0.2},
            "replay": {"enforcement_point": False, "harness": harness},
        },
        net_traces([10, 30, 64], state={"temp": 2}) + net_traces([100], state={"temp": 0}),
    )


def bin_005():
    """Reachable only outside the assumed ambient envelope; a harness confirms it."""
    return _relaxed_case("BIN-005", "binary", True, ["copy-buffer", "write-buffer"])


# ----------------------------------------------------------- protocol-like


def _modbus_case(case_id, partition, fc_sets, traces, availability="policy-only",
                 enforcement=True, rho=0.9, fc_hi=31):
    """Write handler: session state and an accepted function code reach the copy."""
    d_instrs = [br(C("fc", "nin-set", fc_sets), "X")]
    blocks = [
        blk("E", [read("modbus")], tags=["protocol-handler"], labels=["recv-message", "parse-header"]),
        blk("D", d_instrs, labels=["check-state", "dispatch-command"]),
        blk("W", [assign("a", source="addr"), sink("s1", "buffer-write", C("a", "gt", 200))],
            labels=["write-register", "write-buffer"]),
        blk("X", [], labels=["send-response"]),
    ]
    edges = [edge("E", "D"), edge("D", "W", C("q", "eq", "session")), edge("D", "X"), edge("W", "X")]
    art = {
        "availability": availability,
        "entry": "E",
        "variables": modbus_vars(fc_hi) + [var("a", 0, 255, role="local")],
        "channels": [{"name": "modbus", "fields": ["fc", "addr"], "state_var": "q", "fsm": MODBUS_FSM}],
        "observables": ["fc", "addr", "q"],
        "blocks": blocks,
        "edges": edges,
    }
    g = graph(
        [
            ent("mb_rx", "recv-message", 0.3, ["E"]),
            ent("mb_state", "check-state", 0.5, ["D"]),
            ent("mb_write", "write-register", rho, ["W"]),
            ent("mb_resp", "send-response", 0.2, ["X"]),
        ],
        [
            ("mb_rx", "mb_state", "protocol-interaction"),
            ("mb_state", "mb_write", "protocol-interaction"),
            ("mb_write", "mb_resp", "data-flow"),
            ("mb_state", "mb_resp", "control-dep"),
        ],
    )
    return case(
        case_id, partition, art, g,
        [alert("mb_write", "mb_rx", "mb_write", "protocol-interaction", rho)],
        None,
        {"replay": {"enforcement_point": enforcement, "harness": False}},
        traces,
    )


def _session_trace(msgs):
    return {"state": {"q": "idle"}, "messages": msgs}


def _opening():
    return [msg("modbus", {"fc": 0, "addr": 0}, "idle", "connected"),
            msg("modbus", {"fc": 1, "addr": 0}, "connected", "session")]


def _benign_modbus(n, extra=()):
    out = []
    for i in range(n):
        body = [msg("modbus", {"fc": 3, "addr": (i * 37) % 256}, "session", "session"),
                msg("modbus", {"fc": 16, "addr": (i * 13) % 200}, "session", "session")]
        out.append(_session_trace(_opening() + body))
    for t in extra:
        out.append(_session_trace(_opening() + t))
    return out


def prot_001():
    """Exact gate on function code 16 with a high address, accepted as is."""
    c = _modbus_case("PROT-001", "protocol", [16], _benign_modbus(20))
    c["ground_truth"] = gt("reachable", [["E", "D", "W"]], {"tier": 1, "outcome": "VerifiedRemediation"},
                           candidate=cid("mb_write", "mb_rx", "mb_write"))
    return c


def prot_002():
    """Codes 15 and 17 reach the copy; the hull also drops benign code-16 writes."""
    extra = [[msg("modbus", {"fc": 16, "addr": 220}, "session", "session")],
             [msg("modbus", {"fc": 16, "addr": 240}, "session", "session")]]
    c = _modbus_case("PROT-002", "protocol", [15, 17], _benign_modbus(18, extra))
    c["ground_truth"] = gt("reachable", [["E", "D", "W"]],
                           {"tier": 1, "outcome": "VerifiedRemediation", "note": "needs false-blocking feedback"},
                           candidate=cid("mb_write", "mb_rx", "mb_write"))
    return c


def prot_003():
    """Infeasible: the vulnerable handler needs the locked state, which no
    protocol transition reaches."""
    c = _modbus_case("PROT-003", "protocol", [16], _benign_modbus(4))
    art = c["artifact"]
    art["edges"][1] = edge("D", "W", C("q", "eq", "locked"))
    art["variables"].append(TIME_VAR)
    c["context"]["time"] = TIME_HINT
    c["ground_truth"] = gt("infeasible", refuting="proto", candidate=cid("mb_write", "mb_rx", "mb_write"))
    return c


def prot_004():
    """Three-way ordering over 100-value fields: unsatisfiable, but proving it
    takes more leaves than the budget allows."""
    blocks = [
        blk("E", [read("dnp")], tags=["protocol-handler"], labels=["recv-message", "parse-header"]),
        blk("O1", [br(C("x", "le", ref("y")), "X")], labels=["parse-payload", "validate-length"]),
        blk("O2", [br(C("y", "le", ref("z")), "X")], labels=["parse-payload", "validate-length"]),
        blk("W", [sink("s1", "buffer-read", C("z", "gt", ref("x")))], labels=["read-buffer", "copy-buffer"]),
        blk("X", [], labels=["send-response"]),
    ]
    art = {
        "availability": "policy-only",
        "entry": "E",
        "variables": [var("x", 0, 99), var("y", 0, 99), var("z", 0, 99), TIME_VAR],
        "channels": [{"name": "dnp", "fields": ["x", "y", "z"]}],
        "observables": ["x", "y", "z"],
        "blocks": blocks,
        "edges": [edge("E", "O1"), edge("O1", "O2"), edge("O2", "W"), edge("W", "X")],
    }
    g = graph(
        [
            ent("dnp_rx", "recv-message", 0.3, ["E"]),
            ent("dnp_order", "validate-length", 0.4, ["O1", "O2"]),
            ent("dnp_read", "read-buffer", 0.8, ["W"]),
            ent("dnp_resp", "send-response", 0.2, ["X"]),
        ],
        [
            ("dnp_rx", "dnp_order", "protocol-interaction"),
            ("dnp_order", "dnp_read", "data-flow"),
            ("dnp_read", "dnp_resp", "data-flow"),
        ],
    )
    traces = [
        {"state": {"t": 0}, "messages": [msg("dnp", {"x": 50, "y": 40, "z": 10})]},
        {"state": {"t": 1}, "messages": [msg("dnp", {"x": 5, "y": 6, "z": 7})]},
    ]
    return case(
        "PROT-004", "protocol", art, g,
        [alert("dnp_read", "dnp_rx", "dnp_read", "data-flow", 0.8)],
        gt("unknown", candidate=cid("dnp_read", "dnp_rx", "dnp_read")),
        {
            "io": {"atoms": [atom("x", "in-range", [10, 99])], "evidence": 0.9},
            "time": TIME_HINT,
            "replay": {"enforcement_point": True, "harness": False},
        },
        traces,
    )


def prot_005():
    """Source-level repair: clamping the length starves a bulk path, a bounds
    check in the copy block does not."""
    blocks, edges = copy_handler(
        [assign("n", source="len"), sink("s1", "buffer-write", C("n", "gt", 64))],
        extra_blocks=[blk("Z", [], labels=["alloc-buffer", "copy-buffer"])],
        pre=[br(C("len", "ge", 100), "Z")],
    )
    art = {
        "availability": "source-available",
        "entry": "E",
        "variables": [var("len", 0, 255), var("n", 0, 255, role="local")],
        "channels": [{"name": "net", "fields": ["len"]}],
        "observables": ["len"],
        "blocks": blocks,
        "edges": edges + [edge("Z", "R")],
        "invariants": [atom("len", "in-range", [0, 255])],
    }
    g = copy_graph([ent("bulk", "alloc-buffer", 0.3, ["Z"])], [("parse", "bulk", "data-flow")])
    return case(
        "PROT-005", "protocol", art, g,
        [alert("copy", "recv", "copy", "data-flow", 0.85)],
        gt("reachable", [["E", "A", "C"]], {"tier": 3, "outcome": "VerifiedRemediation",
                                             "template": "bounds-check-insert"},
           candidate=cid("copy", "recv", "copy")),
        {"replay": {"enforcement_point": False, "harness": True}},
        net_traces([5, 50, 120, 200]),
    )


# ---------------------------------------------------------------- ICS-like


def ics_001():
    """Source-level repair of a counter overflow in a scan-cycle task."""
    blocks = [
        blk("S", [read("io")], tags=["scan-root"], labels=["scan-cycle", "read-register"]),
        blk("K", [assign("total", source="cnt", offset=200),
                  sink("s1", "integer-overflow", C("total", "gt", 255))],
            labels=["compute-offset", "write-register"]),
        blk("U", [], labels=["update-state"]),
    ]
    art = {
        "availability": "source-available",
        "entry": "S",
        "variables": [var("cnt", 0, 127), var("total", 0, 511, role="local")],
        "channels": [{"name": "io", "fields": ["cnt"]}],
        "observables": ["cnt"],
        "blocks": blocks,
        "edges": [edge("S", "K"), edge("K", "U")],
        "invariants": [atom("cnt", "le", 127)],
    }
    g = graph(
        [
            ent("scan", "scan-cycle", 0.3, ["S"]),
            ent("acc", "compute-offset", 0.9, ["K"]),
            ent("upd", "update-state", 0.3, ["U"]),
        ],
        [("scan", "acc", "data-flow"), ("acc", "upd", "data-flow")],
    )
    traces = [{"state": {}, "messages": [msg("io", {"cnt": v})]} for v in (0, 10, 40, 55)]
    return case(
        "ICS-001", "ics", art, g,
        [alert("acc", "scan", "acc", "mmio", 0.9)],
        gt("reachable", [["S", "K"]], {"tier": 3, "outcome": "VerifiedRemediation"},
           candidate=cid("acc", "scan", "acc")),
        {"replay": {"enforcement_point": False, "harness": True}},
        traces,
    )


def ics_002():
    """Setpoint guard over-approximates level > limit (second overblocking case)."""
    return _overblock_case(
        "ICS-002", "ics", "limit", [50, 120], "level", ["write-register", "write-buffer"],
        [(50, 20), (120, 80), (120, 100), (50, 49)],
    )


def ics_003():
    """Infeasible: the register value needed by the sink exceeds the physical range."""
    blocks = [
        blk("S", [read("io")], tags=["scan-root"], labels=["scan-cycle", "read-register"]),
        blk("K", [br(C("reg", "le", 200), "U")], labels=["validate-length"]),
        blk("W", [sink("s1", "buffer-write", C("reg", "gt", 200))], labels=["write-buffer"]),
        blk("U", [], labels=["update-state"]),
    ]
    art = {
        "availability": "binary-rewritable",
        "entry": "S",
        "variables": [var("reg", 0, 255), TIME_VAR],
        "channels": [{"name": "io", "fields": ["reg"]}],
        "observables": ["reg"],
        "blocks": blocks,
        "edges": [edge("S", "K"), edge("K", "W"), edge("W", "U")],
    }
    g = graph(
        [
            ent("scan", "scan-cycle", 0.3, ["S"]),
            ent("chk", "validate-length", 0.4, ["K"]),
            ent("wr", "write-buffer", 0.7, ["W"]),
            ent("upd", "update-state", 0.3, ["U"]),
        ],
        [("scan", "chk", "data-flow"), ("chk", "wr", "data-flow"), ("wr", "upd", "data-flow")],
    )
    return case(
        "ICS-003", "ics", art, g,
        [alert("wr", "scan", "wr", "io", 0.7)],
        gt("infeasible", refuting="io", candidate=cid("wr", "scan", "wr")),
        {
            "io": {"atoms": [atom("reg", "in-range", [0, 99])], "evidence": 0.8},
            "time": TIME_HINT,
            "replay": {"enforcement_point": False, "harness": True},
        },
        [{"state": {"t": 0}, "messages": [msg("io", {"reg": 50})]}],
    )


def ics_004():
    """Reachable only outside the ambient envelope, and no harness to confirm it."""
    c = _relaxed_case("ICS-004", "ics", False, ["write-register", "write-buffer"])
    return c


def ics_005():
    """Gateway policy whose hull also drops a benign session-closing message."""
    extra = [[msg("modbus", {"fc": 16, "addr": 230}, "session", "idle")]]
    c = _modbus_case("ICS-005", "ics", [15, 17], _benign_modbus(19, extra))
    c["ground_truth"] = gt("reachable", [["E", "D", "W"]],
                           {"tier": 1, "outcome": "VerifiedRemediation", "note": "needs conformance feedback"},
                           candidate=cid("mb_write", "mb_rx", "mb_write"))
    return c


CASES = [bin_001, bin_002, bin_003, bin_004, bin_005,
         prot_001, prot_002, prot_003, prot_004, prot_005,
         ics_001, ics_002, ics_003, ics_004, ics_005]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    root = Path(__file__).resolve().parents[1]
    ap.add_argument("--out", default=str(root / "src" / "scara" / "data" / "suite"))
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for old in out.glob("*.json"):
        old.unlink()
    for fn in CASES:
        c = fn()
        path = out / f"{c['case_id']}.json"
        path.write_text(json.dumps(c, indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(CASES)} cases to {out}")


if __name__ == "__main__":
    main()
