"""Remedy synthesis across the three tiers.

Tier 1 installs a drop policy on a protocol channel, Tier 2 inserts a guard
block in front of a block on the witness walk and Tier 3 edits the sink block
(or the reading block) with a template from a fixed library. Tier-1 and
Tier-2 predicates are the interval hull of the exact projection of the
witness constraints, which is what a range-comparison gate can express; the
hull may over-approximate, and rejection feedback carves benign points back
out of it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence, Union

from scara.caca import Candidate, Config
from scara.constraints import ConstraintAtom, domain_atoms, project_observables, solve
from scara.model import (
    Assign,
    Availability,
    Box,
    BoxDNF,
    Branch,
    Cond,
    ReadChannel,
    Sink,
    ToyArtifact,
    VarRef,
)
from scara.osva import ReachabilityResult, prior_atoms
from scara.paths import Walk, defined_before


class TierInfeasible(Exception):
    pass


@dataclass(frozen=True)
class RejectionConstraint:
    kind: str  # reachability | replay | coverage | side_effect
    detail: Mapping[str, Any] = field(default_factory=dict, hash=False, compare=False)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "detail": _jsonable(self.detail)}


@dataclass(frozen=True)
class Policy:
    channel: str
    gate: BoxDNF


@dataclass(frozen=True)
class GuardPatch:
    block: str
    pred: BoxDNF
    exact: BoxDNF
    sink_block: str


@dataclass(frozen=True)
class SourcePatch:
    template: str
    target: str
    params: Mapping[str, Any]
    edits: tuple[tuple[str, tuple], ...]
    introduces: Mapping | None = None


Payload = Union[Policy, GuardPatch, SourcePatch]


@dataclass(frozen=True)
class Remedy:
    tier: int
    payload: Payload
    iteration: int = 1
    advisory: bool = False
    preserve: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        p = self.payload
        d: dict[str, Any] = {"tier": self.tier, "iteration": self.iteration, "advisory": self.advisory}
        if isinstance(p, Policy):
            d["policy"] = {"channel": p.channel, "gate": dnf_to_json(p.gate)}
        elif isinstance(p, GuardPatch):
            d["guard"] = {
                "block": p.block,
                "pred": dnf_to_json(p.pred),
                "exact": dnf_to_json(p.exact),
            }
        else:
            d["source"] = {
                "template": p.template,
                "target": p.target,
                "params": _jsonable(p.params),
            }
        if self.preserve:
            d["preserve"] = list(self.preserve)
        return d


# ------------------------------------------------------------- box helpers


def _jsonable(x):
    if isinstance(x, Mapping):
        return {str(k): _jsonable(v) for k, v in sorted(x.items(), key=lambda kv: str(kv[0]))}
    if isinstance(x, (frozenset, set)):
        return sorted(_jsonable(v) for v in x)
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, VarRef):
        return {"ref": x.name, "offset": x.offset}
    return x


def dnf_to_json(d: BoxDNF) -> list[dict]:
    return [{v: sorted(s) for v, s in b.items} for b in d.boxes]


def _intervals(values: Iterable[int]) -> list[tuple[int, int]]:
    vals = sorted(values)
    out: list[tuple[int, int]] = []
    for v in vals:
        if out and v == out[-1][1] + 1:
            out[-1] = (out[-1][0], v)
        else:
            out.append((v, v))
    return out


def render_box(b: Box, enums: Mapping[str, Sequence[str]] | None = None) -> str:
    """Rule text for one box; enum-typed variables print their value names."""
    if not b.items:
        return "true"
    parts = []
    for v, s in b.items:
        if enums and v in enums:
            names = enums[v]
            parts.append(f"{v} in {{{', '.join(names[i] for i in sorted(s))}}}")
            continue
        iv = " | ".join(f"{lo}" if lo == hi else f"{lo}..{hi}" for lo, hi in _intervals(s))
        parts.append(f"{v} in [{iv}]")
    return " and ".join(parts)


def render_policy(
    case_id: str, cand_id: str, r: Remedy, enums: Mapping[str, Sequence[str]] | None = None
) -> str:
    """Standalone rule document for a Tier-1 policy."""
    p = r.payload
    assert isinstance(p, Policy)
    lines = [
        f"# drop rule for {cand_id} ({case_id})",
        f"channel {p.channel}",
        f"advisory {'yes' if r.advisory else 'no'}",
    ]
    for b in p.gate.boxes:
        lines.append(f"drop when {render_box(b, enums)}")
    return "\n".join(lines) + "\n"


def guard_cost(pred: BoxDNF) -> int:
    """Comparisons a range-check guard needs: two per interval per variable."""
    return sum(2 * len(_intervals(s)) for b in pred.boxes for _, s in b.items)


def hull(p: BoxDNF, domains: Mapping[str, Sequence[int]]) -> Box:
    """Interval hull of a projection, leaving out variables it does not bound."""
    out = {}
    for v in p.vars:
        if any(v not in b.vars for b in p.boxes):
            continue
        vals = set().union(*(b.as_dict()[v] for b in p.boxes))
        lo, hi = min(vals), max(vals)
        span = frozenset(x for x in domains[v] if lo <= x <= hi)
        if span != frozenset(domains[v]):
            out[v] = span
    return Box.of(out)


def subtract_point(d: BoxDNF, point: Mapping[str, int], domains) -> BoxDNF:
    """Remove a single point (over ``point``'s variables) from every box."""
    keys = sorted(point)
    out: list[Box] = []
    for b in d.boxes:
        bd = b.as_dict()
        if not all(k not in bd or point[k] in bd[k] for k in keys):
            out.append(b)
            continue
        if any(v not in point for v in bd):
            out.append(b)  # the point does not pin every box variable
            continue
        for i, k in enumerate(keys):
            piece = dict(bd)
            for j in keys[:i]:
                piece[j] = frozenset([point[j]])
            base = bd.get(k, frozenset(domains[k]))
            piece[k] = base - {point[k]}
            if piece[k] and all(piece.values()):
                out.append(Box.of(piece))
    return BoxDNF(tuple(out))


# ------------------------------------------------------------------ deltas


@dataclass
class DeltaView:
    excluded: list[dict] = field(default_factory=list)
    readmit: list[dict] = field(default_factory=list)
    shift: int = 0
    preserve: set[str] = field(default_factory=set)
    transitions: list[tuple] = field(default_factory=list)


def _point_key(p: Mapping) -> tuple:
    return tuple(sorted(p.items()))


def digest(deltas: Sequence[RejectionConstraint], gate_vars: Iterable[str] | None = None) -> DeltaView:
    view = DeltaView()
    gv = set(gate_vars) if gate_vars is not None else None

    def restrict(p):
        return {k: v for k, v in p.items() if gv is None or k in gv}

    for d in deltas:
        if d.kind == "side_effect":
            for p in d.detail.get("points", []):
                q = restrict(p)
                if q and _point_key(q) not in {_point_key(x) for x in view.excluded}:
                    view.excluded.append(q)
            view.transitions += [tuple(t) for t in d.detail.get("transitions", [])]
        elif d.kind in ("reachability", "replay"):
            p = d.detail.get("point")
            q = restrict(p) if p else {}
            keys = {_point_key(x) for x in view.excluded}
            if q and _point_key(q) in keys:
                view.readmit.append(q)
            else:
                view.shift += 1
        elif d.kind == "coverage":
            view.shift += 1
            view.preserve.update(d.detail.get("must_remain_reachable", []))
    rk = {_point_key(x) for x in view.readmit}
    view.excluded = [p for p in view.excluded if _point_key(p) not in rk]
    return view


def _gate(atoms, gate_vars, domains, view: DeltaView) -> tuple[BoxDNF, BoxDNF]:
    exact = project_observables(atoms, gate_vars, domains)
    if exact.is_empty():
        raise TierInfeasible("projection is empty: nothing to guard")
    h = hull(exact, domains)
    if not h.items:
        raise TierInfeasible("projection spans every observable value: constant gate")
    gate = BoxDNF((h,))
    for p in view.excluded:
        gate = subtract_point(gate, p, domains)
    if gate.is_empty():
        raise TierInfeasible("feedback excluded the whole gate")
    return gate, exact


# ------------------------------------------------------------------- tier 1


def _first_channel(walk: Walk | None, b: ToyArtifact) -> str | None:
    if walk is not None and walk.reads:
        return walk.reads[0][1]
    for blk in b.blocks:
        for ins in blk.instrs:
            if isinstance(ins, ReadChannel):
                return ins.channel
    return None


def synth_tier1(
    c: Candidate,
    witness: ReachabilityResult | None,
    b: ToyArtifact,
    deltas: Sequence[RejectionConstraint] = (),
    enforcement_point: bool = True,
) -> Remedy:
    """Drop policy on the channel the witness walk reads first.

    With ``witness=None`` the gate is derived from the candidate's prior
    atoms alone and flagged advisory.
    """
    if not enforcement_point:
        raise TierInfeasible("no enforcement point")
    walk = witness.witness_walk if witness is not None else None
    chan = _first_channel(walk, b)
    if chan is None:
        raise TierInfeasible("no channel read on the witness walk")
    ch = b.channel(chan)
    domains = b.domains()
    gate_vars = [f for f in ch.fields if f in domains]
    if ch.state_var and ch.state_var in domains:
        gate_vars.append(ch.state_var)
    if witness is not None:
        atoms = list(witness.witness_atoms)
    else:
        atoms = prior_atoms(c, b) + domain_atoms(b)
    view = digest(deltas, gate_vars)
    gate, _ = _gate(atoms, gate_vars, domains, view)
    return Remedy(1, Policy(chan, gate), advisory=witness is None)


# ------------------------------------------------------------------- tier 2


def synth_tier2(
    c: Candidate,
    witness: ReachabilityResult,
    b: ToyArtifact,
    deltas: Sequence[RejectionConstraint] = (),
) -> Remedy:
    if b.availability == Availability.POLICY_ONLY:
        raise TierInfeasible("artifact is not rewritable")
    walk = witness.witness_walk
    domains = b.domains()
    atom_vars = {v for a in witness.witness_atoms for v in a.vars}
    obs = [v for v in domains if v in b.observables and v in atom_vars]
    if not obs:
        raise TierInfeasible("no observable variable constrains the witness")
    view = digest(deltas, obs)
    gate, exact = _gate(list(witness.witness_atoms), obs, domains, view)
    psi = set(gate.vars) | set(exact.vars)
    defined = defined_before(walk, b)
    spots = [i for i, d in enumerate(defined) if psi <= d]
    if not spots:
        raise TierInfeasible("no block on the witness walk observes every guard variable")
    if view.shift >= len(spots):
        raise TierInfeasible("feedback shifted the guard past the sink block")
    at = walk.blocks[spots[view.shift]]
    sink_block = walk.blocks[-1]
    return Remedy(2, GuardPatch(at, gate, exact, sink_block))


# ------------------------------------------------------------------- tier 3

TEMPLATE_ORDER = (
    "bounds-check-insert",
    "length-recompute",
    "input-clamp",
    "state-precondition",
    "null-guard",
)

TEMPLATES_BY_KIND = {
    "buffer-write": ("bounds-check-insert", "length-recompute", "input-clamp", "state-precondition"),
    "buffer-read": ("bounds-check-insert", "length-recompute", "input-clamp", "state-precondition"),
    "integer-overflow": ("bounds-check-insert", "input-clamp"),
    "null-deref": ("null-guard", "state-precondition"),
    "state-violation": ("state-precondition", "bounds-check-insert"),
}


def _sink_position(b: ToyArtifact, sink_id: str) -> tuple[str, int, Sink]:
    for blk in b.blocks:
        for i, ins in enumerate(blk.instrs):
            if isinstance(ins, Sink) and ins.id == sink_id:
                return blk.id, i, ins
    raise TierInfeasible(f"sink {sink_id!r} not found")


def _insert(instrs: tuple, at: int, new) -> tuple:
    return instrs[:at] + (new,) + instrs[at:]


def _safe_bound(atoms, var, domains, budget) -> int | None:
    """Largest value ``u`` such that the atoms plus ``var <= u`` are unsatisfiable."""
    dom = list(domains[var])
    probe = lambda u: solve(list(atoms) + [ConstraintAtom(var, "le", u)], budget, domains=domains)  # noqa: E731
    if probe(dom[0]).status != "Unsat":
        return None
    lo, hi = 0, len(dom) - 1
    if probe(dom[hi]).status == "Unsat":
        return None  # the witness class is empty
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if probe(dom[mid]).status == "Unsat":
            lo = mid
        else:
            hi = mid
    return dom[lo]


def _template(
    name: str, b: ToyArtifact, witness: ReachabilityResult, cfg: Config
) -> SourcePatch | None:
    walk = witness.witness_walk
    sbid, k, sink = _sink_position(b, walk.sink)
    blk = b.block(sbid)
    trig = sink.trigger
    vmap = b.var_map()
    domains = b.domains()
    intro = (b.template_overrides or {}).get(name, {}).get("introduces")
    if name in ("bounds-check-insert", "null-guard"):
        edits = ((sbid, _insert(blk.instrs, k, Branch(trig, None))),)
        return SourcePatch(name, sbid, {"cond": _cond_json(trig)}, edits, intro)
    if name == "length-recompute":
        spec = vmap.get(trig.var)
        if spec is None or spec.role != "local" or trig.rel not in ("gt", "ge"):
            return None
        dec = 1 if trig.rel == "ge" else 0
        if isinstance(trig.operand, VarRef):
            new = Assign(trig.var, source=trig.operand.name, offset=trig.operand.offset - dec)
        else:
            new = Assign(trig.var, value=int(trig.operand) - dec)
        edits = ((sbid, _insert(blk.instrs, k, new)),)
        return SourcePatch(name, sbid, {"local": trig.var}, edits, intro)
    if name == "input-clamp":
        trig_atom = walk.atoms[-1]
        for var in trig_atom.vars:
            spec = vmap.get(var)
            if spec is None or spec.role != "input":
                continue
            bound = _safe_bound(witness.witness_atoms, var, domains, cfg.t_total)
            if bound is None:
                continue
            for rb, chan in walk.reads:
                if var in b.channel(chan).fields:
                    rblk = b.block(rb)
                    pos = next(
                        i for i, ins in enumerate(rblk.instrs)
                        if isinstance(ins, ReadChannel) and ins.channel == chan
                    )
                    new = Branch(Cond(var, "gt", bound), None)
                    edits = ((rb, _insert(rblk.instrs, pos + 1, new)),)
                    return SourcePatch(name, rb, {"field": var, "safe_bound": bound}, edits, intro)
        return None
    if name == "state-precondition":
        path_vars = [v for a in walk.atoms for v in a.vars]
        for var in dict.fromkeys(path_vars):
            spec = vmap.get(var)
            if spec is None or spec.role != "state":
                continue
            proj = project_observables(witness.witness_atoms, [var], domains)
            if proj.is_empty() or not all(bx.items for bx in proj.boxes):
                continue
            states = frozenset().union(*(bx.as_dict()[var] for bx in proj.boxes))
            new = Branch(Cond(var, "in-set", states), None)
            edits = ((sbid, (new,) + blk.instrs),)
            return SourcePatch(name, sbid, {"state_var": var, "states": sorted(states)}, edits, intro)
        return None
    return None


def _cond_json(c: Cond) -> dict:
    return {"var": c.var, "rel": c.rel, "operand": _jsonable(c.operand)}


def synth_tier3(
    c: Candidate,
    witness: ReachabilityResult,
    b: ToyArtifact,
    g,
    deltas: Sequence[RejectionConstraint] = (),
    k_candidates: int = 5,
    cfg: Config | None = None,
) -> list[Remedy]:
    """Up to ``k_candidates`` template patches, each carrying the entities
    that must stay reachable."""
    if b.availability != Availability.SOURCE_AVAILABLE:
        raise TierInfeasible("source is not available")
    cfg = cfg or Config()
    _, _, sink = _sink_position(b, witness.witness_walk.sink)
    names = TEMPLATES_BY_KIND.get(sink.kind, ())
    if not names:
        raise TierInfeasible(f"no template for sink kind {sink.kind!r}")
    view = digest(deltas)
    from scara.cva import apply_remedy, rebuild_ssckg
    from scara.model import reachable_entities

    preserve = tuple(sorted(set(reachable_entities(g, b)) - set(witness.vuln_entities)))
    out = []
    for name in names:
        patch = _template(name, b, witness, cfg)
        if patch is None:
            continue
        r = Remedy(3, patch, preserve=preserve)
        if view.preserve:
            b2 = apply_remedy(b, r)
            kept = reachable_entities(rebuild_ssckg(b2, g), b2)
            if not view.preserve <= kept:
                continue
        out.append(r)
        if len(out) == k_candidates:
            break
    if not out:
        raise TierInfeasible("no template applies")
    return out


def witness_class(witness: ReachabilityResult, b: ToyArtifact, cap: int = 4096):
    """Models of the witness constraint set (the inputs a guard must stop)."""
    from scara.constraints import enumerate_models

    return enumerate_models(list(witness.witness_atoms), b.domains(), cap)


__all__ = [
    "GuardPatch",
    "Policy",
    "RejectionConstraint",
    "Remedy",
    "SourcePatch",
    "TierInfeasible",
    "synth_tier1",
    "synth_tier2",
    "synth_tier3",
]
