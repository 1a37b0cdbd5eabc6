"""Case manifest loading (see ``docs/manifest.md`` for the schema)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from scara.caca import ContextHints, HintRecord, ReplayHint
from scara.constraints import ConstraintAtom
from scara.model import (
    FSM,
    SSCKG,
    STATE_FAMILIES,
    Assign,
    Availability,
    Block,
    Box,
    Branch,
    ChannelSpec,
    Cond,
    Edge,
    Entity,
    Guard,
    ReadChannel,
    Relation,
    Sink,
    ToyArtifact,
    ValidationError,
    VarRef,
    VarSpec,
)

TOP_KEYS = (
    "artifact",
    "ssckg",
    "candidates",
    "ground_truth",
    "context",
    "benign_traces",
    "config_overrides",
)


@dataclass
class CaseManifest:
    case_id: str
    partition: str
    artifact: ToyArtifact
    ssckg: SSCKG
    alerts: list[dict]
    ground_truth: dict
    omega: ContextHints
    benign_traces: list[dict]
    config_overrides: dict = field(default_factory=dict)
    source: str = ""


def _operand(raw, spec: VarSpec | None, rel: str):
    if isinstance(raw, Mapping) and "ref" in raw:
        return VarRef(raw["ref"], int(raw.get("offset", 0)))
    enc = spec.encode if spec is not None else (lambda x: x)
    if rel in ("in-range", "nin-range"):
        return (enc(raw[0]), enc(raw[1]))
    if rel in ("in-set", "nin-set"):
        return frozenset(enc(x) for x in raw)
    return enc(raw)


def parse_cond(raw: Mapping | None, vmap: Mapping[str, VarSpec]) -> Cond | None:
    if raw is None:
        return None
    var = raw["var"]
    if var not in vmap:
        raise ValidationError(f"condition names undeclared variable {var!r}")
    return Cond(var, raw["rel"], _operand(raw["operand"], vmap[var], raw["rel"]))


def parse_atom(raw: Mapping) -> ConstraintAtom:
    """Atoms keep literal operands (enum names included); lowering encodes them."""
    op = raw.get("operand")
    rel = raw["relation"]
    if isinstance(op, Mapping) and "ref" in op:
        op = VarRef(op["ref"], int(op.get("offset", 0)))
    elif isinstance(op, list):
        op = tuple(op)
    return ConstraintAtom(raw["var"], rel, op, raw.get("family", "path"))


def _instr(raw: Mapping, vmap):
    op = raw["op"]
    if op == "assign":
        return Assign(
            raw["target"],
            value=raw.get("value"),
            source=raw.get("source"),
            offset=int(raw.get("offset", 0)),
        )
    if op == "branch":
        return Branch(parse_cond(raw["cond"], vmap), raw.get("target"))
    if op == "read":
        return ReadChannel(raw["channel"])
    if op == "sink":
        return Sink(raw["id"], raw["kind"], parse_cond(raw["trigger"], vmap))
    if op == "guard":
        box = Box.of({k: [vmap[k].encode(x) for x in v] for k, v in raw["pred"].items()})
        return Guard(box, raw["target"])
    raise ValidationError(f"unknown instruction {op!r}")


def parse_artifact(raw: Mapping) -> ToyArtifact:
    variables = tuple(
        VarSpec(
            name=v["name"],
            kind=v.get("kind", "int"),
            lo=int(v.get("lo", 0)),
            hi=int(v.get("hi", 0)),
            values=tuple(v.get("values", ())),
            role=v.get("role", "input"),
            family=v.get("family", "io" if v.get("role", "input") == "input" else "runtime"),
            nominal=tuple(v["nominal"]) if v.get("nominal") is not None else None,
        )
        for v in raw["variables"]
    )
    vmap = {v.name: v for v in variables}
    channels = []
    for ch in raw.get("channels", []):
        fsm = None
        if ch.get("fsm"):
            f = ch["fsm"]
            fsm = FSM(tuple(f["states"]), f["initial"], tuple(tuple(t) for t in f["transitions"]))
        channels.append(ChannelSpec(ch["name"], tuple(ch["fields"]), ch.get("state_var"), fsm))
    blocks = tuple(
        Block(
            b["id"],
            tuple(_instr(i, vmap) for i in b.get("instrs", [])),
            frozenset(b.get("tags", [])),
            tuple(b.get("labels", [])),
        )
        for b in raw["blocks"]
    )
    edges = tuple(Edge(e["src"], e["dst"], parse_cond(e.get("guard"), vmap)) for e in raw["edges"])
    entry = raw.get("entry") or next((b.id for b in blocks if b.tags), blocks[0].id)
    return ToyArtifact(
        blocks=blocks,
        edges=edges,
        availability=Availability(raw["availability"]),
        variables=variables,
        channels=tuple(channels),
        observables=frozenset(raw.get("observables", [])),
        entry=entry,
        scan_slack=int(raw.get("scan_slack", 64)),
        invariants=tuple(parse_atom(a) for a in raw.get("invariants", [])),
        template_overrides=dict(raw.get("template_overrides", {})),
    )


def parse_ssckg(raw: Mapping) -> SSCKG:
    ents = tuple(Entity(e["id"], e.get("label", ""), float(e.get("rho", 0.0))) for e in raw["entities"])
    rels = tuple(
        Relation(r["src"], r["dst"], r["type"], bool(r.get("risk", True)))
        for r in raw.get("relations", [])
    )
    phi = {k: frozenset(v) for k, v in raw.get("phi", {}).items()}
    return SSCKG(ents, rels, phi)


def parse_context(raw: Mapping | None) -> ContextHints:
    raw = raw or {}
    kw: dict[str, Any] = {}
    for fam in STATE_FAMILIES:
        h = raw.get(fam)
        if h is not None:
            kw[fam] = HintRecord(
                tuple(parse_atom(dict(a, family=a.get("family", fam))) for a in h.get("atoms", [])),
                float(h.get("evidence", 1.0)),
            )
    rp = raw.get("replay") or {}
    kw["replay"] = ReplayHint(bool(rp.get("enforcement_point", False)), bool(rp.get("harness", False)))
    kw["art"] = dict(raw.get("art", {}))
    return ContextHints(**kw)


def _encode_trace(tr: Mapping, art: ToyArtifact) -> dict:
    vmap = art.var_map()
    state = {k: vmap[k].encode(v) for k, v in tr.get("state", {}).items()}
    msgs = []
    for m in tr.get("messages", []):
        ch = art.channel(m["channel"])
        out = {"channel": m["channel"], "fields": {k: vmap[k].encode(v) for k, v in m.get("fields", {}).items()}}
        sv = vmap.get(ch.state_var) if ch.state_var else None
        for key in ("fsm", "next"):
            if key in m and sv is not None:
                out[key] = sv.encode(m[key])
        msgs.append(out)
    return {"state": state, "messages": msgs}


def parse_case(raw: Mapping, source: str = "") -> CaseManifest:
    missing = [k for k in ("artifact", "ssckg", "candidates") if k not in raw]
    if missing:
        raise ValidationError(f"manifest lacks {', '.join(missing)}")
    art = parse_artifact(raw["artifact"])
    return CaseManifest(
        case_id=str(raw.get("case_id", Path(source).stem if source else "case")),
        partition=str(raw.get("partition", "")),
        artifact=art,
        ssckg=parse_ssckg(raw["ssckg"]),
        alerts=[dict(a) for a in raw["candidates"]],
        ground_truth=dict(raw.get("ground_truth", {})),
        omega=parse_context(raw.get("context")),
        benign_traces=[_encode_trace(t, art) for t in raw.get("benign_traces", [])],
        config_overrides=dict(raw.get("config_overrides", {})),
        source=source,
    )


def load_case(path: str | Path) -> CaseManifest:
    p = Path(path)
    with p.open() as fh:
        raw = json.load(fh)
    return parse_case(raw, str(p))


def suite_paths(suite: str | Path) -> list[Path]:
    return sorted(Path(suite).glob("*.json"))


def bundled_suite_dir() -> Path:
    from importlib import resources

    return Path(str(resources.files("scara").joinpath("data/suite")))
