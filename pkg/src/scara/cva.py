"""Closed-loop validation of a remedy: apply it, re-verify, measure coverage,
replay the witness and run the tier-specific side-effect checks."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Mapping, Sequence

from scara.caca import Candidate, Config
from scara.constraints import lower_atom
from scara.interp import STEP_BOUND, run, run_trace
from scara.model import (
    SSCKG,
    Block,
    Branch,
    Edge,
    Entity,
    Guard,
    ToyArtifact,
    reachable_entities,
    validate_case,
)
from scara.osva import ReachabilityResult, sink_reachability, verify
from scara.paths import live_blocks
from scara.rsa import (
    GuardPatch,
    Policy,
    RejectionConstraint,
    Remedy,
    SourcePatch,
    guard_cost,
    witness_class,
)

REPLAY_STATUSES = ("Confirmed", "Unavailable", "Failed", "NotApplicable")


class ApplyError(ValueError):
    pass


@dataclass
class ReplayOutcome:
    status: str
    trace: list[str] = field(default_factory=list)
    sink_reached: bool = False
    reason: str = ""

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class EvidenceCertificate:
    tier: int
    post_label: str
    bcp: float
    side_effects: dict
    replay: str
    displacement: list[str] = field(default_factory=list)
    nvr: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class Validation:
    accepted: bool
    certificate: EvidenceCertificate | None = None
    delta: RejectionConstraint | None = None
    gates: list[str] = field(default_factory=list)
    bcp: float | None = None
    artifact: ToyArtifact | None = None
    graph: SSCKG | None = None
    post: ReachabilityResult | None = None

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"accepted": self.accepted, "gates": list(self.gates)}
        if self.certificate is not None:
            d["certificate"] = self.certificate.to_dict()
        if self.delta is not None:
            d["delta"] = self.delta.to_dict()
        if self.bcp is not None:
            d["bcp"] = self.bcp
        return d


# ------------------------------------------------------------------ apply


def _fresh(ids: set[str], base: str) -> str:
    cand, n = base, 1
    while cand in ids:
        n += 1
        cand = f"{base}{n}"
    return cand


def _retarget(blocks, edges, old: str, new: str):
    nb = []
    for blk in blocks:
        ins = []
        for x in blk.instrs:
            if isinstance(x, Branch) and x.target == old:
                x = Branch(x.cond, new)
            elif isinstance(x, Guard) and x.target == old:
                x = Guard(x.pred, new)
            ins.append(x)
        nb.append(dataclasses.replace(blk, instrs=tuple(ins)))
    ne = [Edge(e.src, new if e.dst == old else e.dst, e.guard) for e in edges]
    return nb, ne


def _apply_guard(b: ToyArtifact, p: GuardPatch) -> ToyArtifact:
    ids = {blk.id for blk in b.blocks}
    if p.block not in ids or p.sink_block not in ids:
        raise ApplyError(f"insertion point {p.block!r} vanished")
    gid = _fresh(ids, f"{p.block}.guard")
    hid = _fresh(ids | {gid}, f"{p.block}.handler")
    blocks, edges = _retarget(b.blocks, b.edges, p.block, gid)
    guard = Block(gid, tuple(Guard(bx, hid) for bx in p.pred.boxes))
    handler = Block(hid, ())
    edges = list(edges) + [Edge(gid, p.block)]
    edges += [Edge(hid, e.dst, e.guard) for e in b.edges if e.src == p.sink_block]
    return dataclasses.replace(
        b,
        blocks=tuple(blocks) + (guard, handler),
        edges=tuple(edges),
        entry=gid if b.entry == p.block else b.entry,
        inherits=b.inherits + ((gid, p.block), (hid, p.block)),
    )


def _apply_source(b: ToyArtifact, p: SourcePatch) -> ToyArtifact:
    bmap = b.block_map()
    for bid, _ in p.edits:
        if bid not in bmap:
            raise ApplyError(f"template target {bid!r} vanished")
    edits = dict(p.edits)
    blocks = tuple(
        dataclasses.replace(blk, instrs=edits[blk.id]) if blk.id in edits else blk
        for blk in b.blocks
    )
    intro = b.introduced
    if p.introduces:
        intro = intro + ((dict(p.introduces), p.target),)
    return dataclasses.replace(b, blocks=blocks, introduced=intro)


def eliminate_dead(b: ToyArtifact, b_new: ToyArtifact) -> ToyArtifact:
    """Delete blocks that were live in ``b`` but are dead in ``b_new``."""
    dead = (live_blocks(b) - live_blocks(b_new)) & {blk.id for blk in b_new.blocks}
    if not dead:
        return b_new
    blocks = []
    for blk in b_new.blocks:
        if blk.id in dead:
            continue
        ins = tuple(
            x
            for x in blk.instrs
            if not (isinstance(x, (Branch, Guard)) and x.target in dead)
        )
        blocks.append(dataclasses.replace(blk, instrs=ins))
    edges = tuple(e for e in b_new.edges if e.src not in dead and e.dst not in dead)
    return dataclasses.replace(b_new, blocks=tuple(blocks), edges=edges)


def apply_remedy(b: ToyArtifact, r: Remedy) -> ToyArtifact:
    p = r.payload
    if isinstance(p, Policy):
        try:
            b.channel(p.channel)
        except KeyError as exc:
            raise ApplyError(f"unknown channel {p.channel!r}") from exc
        chans = tuple(
            dataclasses.replace(ch, policy=p.gate) if ch.name == p.channel else ch
            for ch in b.channels
        )
        return dataclasses.replace(b, channels=chans)
    if isinstance(p, GuardPatch):
        return eliminate_dead(b, _apply_guard(b, p))
    if isinstance(p, SourcePatch):
        return eliminate_dead(b, _apply_source(b, p))
    raise ApplyError(f"unknown payload {type(p).__name__}")


# ---------------------------------------------------------------- rebuild


def rebuild_ssckg(b_prime: ToyArtifact, g: SSCKG) -> SSCKG:
    ids = {blk.id for blk in b_prime.blocks}
    phi: dict[str, frozenset] = {}
    for e in g.entities:
        keep = set(g.phi.get(e.id, ())) & ids
        for new, old in b_prime.inherits:
            if new in ids and old in g.phi.get(e.id, ()):
                keep.add(new)
        phi[e.id] = frozenset(keep)
    # entities that never owned a block stay; those that lost every block go
    entities = [e for e in g.entities if phi[e.id] or not g.phi.get(e.id)]
    for rec, target in b_prime.introduced:
        if target in ids and rec["id"] not in phi:
            entities.append(Entity(rec["id"], rec.get("label", ""), float(rec.get("rho", 0.0))))
            phi[rec["id"]] = frozenset([target])
    alive = {e.id for e in entities}
    rels = tuple(r for r in g.relations if r.src in alive and r.dst in alive)
    return SSCKG(tuple(entities), rels, {k: v for k, v in phi.items() if k in alive})



# -------------------------------------------------------------------- bcp


def bcp_fraction(
    g: SSCKG, b: ToyArtifact, g_prime: SSCKG, b_prime: ToyArtifact, vuln: Sequence[str]
) -> Fraction:
    base = reachable_entities(g, b) - set(vuln)
    if not base:
        return Fraction(1)
    kept = reachable_entities(g_prime, b_prime) & base
    return Fraction(len(kept), len(base))


def bcp(g: SSCKG, b: ToyArtifact, g_prime: SSCKG, b_prime: ToyArtifact, vuln: Sequence[str]) -> float:
    """Share of the non-vulnerable reachable entities still reachable."""
    return float(bcp_fraction(g, b, g_prime, b_prime, vuln))


# ----------------------------------------------------------------- replay


def replay(
    b_prime: ToyArtifact, witness: Mapping, sink_id: str, harness: bool = True
) -> ReplayOutcome:
    if not harness:
        return ReplayOutcome("Unavailable")
    declared = b_prime.var_map()
    for part in ("inputs", "state"):
        for k in witness.get(part, {}):
            if k not in declared:
                return ReplayOutcome("Failed", reason=f"undeclared variable {k!r}")
    res = run(b_prime, witness.get("inputs", {}), witness.get("state", {}))
    if res.status == "bound":
        return ReplayOutcome("Failed", res.trace, False, f"step bound {STEP_BOUND} reached")
    reached = res.sink == sink_id
    return ReplayOutcome("Failed" if reached else "Confirmed", res.trace, reached)


# ----------------------------------------------------------- side effects


def _message_point(artifact: ToyArtifact, msg: Mapping) -> dict:
    ch = artifact.channel(msg["channel"])
    pt = {f: int(msg.get("fields", {}).get(f, artifact.var_map()[f].minimum)) for f in ch.fields}
    if ch.state_var is not None and "fsm" in msg:
        pt[ch.state_var] = int(msg["fsm"])
    return pt


def side_effect_checks(
    tier: int,
    b: ToyArtifact,
    b_prime: ToyArtifact,
    r: Remedy,
    benign_traces: Sequence[Mapping],
    cfg: Config | None = None,
    witness: ReachabilityResult | None = None,
    g_prime: SSCKG | None = None,
) -> dict[str, dict]:
    cfg = cfg or Config()
    out: dict[str, dict] = {}
    if tier == 1:
        blocked, points, transitions = 0, [], []
        for tr in benign_traces:
            res = run_trace(b_prime, tr)
            if res.dropped:
                blocked += 1
            for i in res.dropped:
                msg = tr["messages"][i]
                points.append(_message_point(b_prime, msg))
                if "fsm" in msg and "next" in msg and msg["fsm"] != msg["next"]:
                    transitions.append((msg["fsm"], msg["next"], _message_point(b_prime, msg)))
        rate = blocked / len(benign_traces) if benign_traces else 0.0
        ok = rate <= cfg.tau_block
        out["false_blocking"] = {"pass": ok, "metric": rate, "points": [] if ok else points}
        out["fsm_conformance"] = {
            "pass": not transitions,
            "metric": len(transitions),
            "transitions": [[a, c] for a, c, _ in transitions],
            "points": [p for _, _, p in transitions],
        }
    elif tier == 2:
        p = r.payload
        assert isinstance(p, GuardPatch)
        guard_ids = {new for new, old in b_prime.inherits if new.startswith(f"{p.block}.guard")}
        obs = [v for v in b_prime.domains() if v in b_prime.observables]
        over = []
        for tr in benign_traces:
            for run_res in run_trace(b_prime, tr).runs:
                for bid, env in run_res.guard_hits:
                    if bid in guard_ids and not p.exact.matches(env):
                        pt = {v: env[v] for v in obs}
                        if pt not in over:
                            over.append(pt)
        out["overblocking"] = {"pass": not over, "metric": len(over), "points": over}
        missed = []
        if witness is not None:
            models, complete = witness_class(witness, b)
            sink = witness.witness_walk.sink
            roles = b.var_map()
            for m in models:
                ins = {k: v for k, v in m.items() if roles[k].role == "input"}
                st = {k: v for k, v in m.items() if roles[k].role == "state"}
                if run(b_prime, ins, st).sink == sink:
                    missed.append(m)
            out["underblocking"] = {
                "pass": not missed, "metric": len(missed), "checked": len(models),
                "complete": complete,
            }
        cost = guard_cost(p.pred)
        out["timing"] = {"pass": cost <= b_prime.scan_slack, "metric": cost,
                         "slack": b_prime.scan_slack}
    else:
        viol = validate_case(b_prime, g_prime) if g_prime is not None else []
        out["well_formed"] = {"pass": not viol, "metric": len(viol),
                              "violations": [v.kind for v in viol]}
        inv = [lower_atom(a, b_prime) for a in b_prime.invariants]
        bad = 0
        for tr in benign_traces:
            final = run_trace(b_prime, tr).final_env
            if not all(a.holds(final) for a in inv):
                bad += 1
        out["domain_invariants"] = {"pass": bad == 0, "metric": bad}
    return out


# ----------------------------------------------------------- extra checks


def displacement_check(
    b_prime: ToyArtifact,
    g: SSCKG,
    c: Candidate,
    neighbors: Sequence[str],
    b: ToyArtifact | None = None,
    budget: int = 300_000,
) -> list[str]:
    """Neighbour sinks that are satisfiable on ``b_prime`` but were not on ``b``."""
    out = []
    present = b_prime.sinks()
    for sid in neighbors:
        if sid not in present:
            continue
        if sink_reachability(b_prime, c, sid, budget) != "Sat":
            continue
        if b is not None and sid in b.sinks() and sink_reachability(b, c, sid, budget) == "Sat":
            continue
        out.append(sid)
    return out


def nvr_check(g_prime: SSCKG, g: SSCKG, cfg: Config) -> list[str]:
    old = set(g.ids)
    return sorted(e.id for e in g_prime.entities if e.id not in old and e.rho >= cfg.tau_risk)


# ---------------------------------------------------------------- validate


def replay_required(label: str, harness: bool) -> bool:
    return label == "SatRelaxed" or harness


def validate(
    b: ToyArtifact,
    g: SSCKG,
    c: Candidate,
    r: Remedy,
    result: ReachabilityResult,
    cfg: Config,
    harness: bool = False,
    benign_traces: Sequence[Mapping] = (),
) -> Validation:
    """Ordered gates: reachability, replay, coverage, side effects."""
    b2 = apply_remedy(b, r)
    g2 = rebuild_ssckg(b2, g)
    v = Validation(False, artifact=b2, graph=g2)
    v.gates.append("reachability")
    post = verify(b2, g, c, cfg)
    v.post = post
    if post.label != "Unsat":
        detail: dict[str, Any] = {"post_label": post.label}
        if post.witness is not None:
            detail["point"] = {**post.witness["inputs"], **post.witness["state"]}
        v.delta = RejectionConstraint("reachability", detail)
        return v
    sink = result.witness_walk.sink
    rstatus = "Unavailable"
    if replay_required(result.label, harness):
        v.gates.append("replay")
        out = replay(b2, result.witness, sink, harness=True)
        rstatus = out.status
        if out.status != "Confirmed":
            point = {**result.witness["inputs"], **result.witness["state"]}
            v.delta = RejectionConstraint("replay", {"status": out.status, "point": point})
            return v
    v.gates.append("coverage")
    frac = bcp_fraction(g, b, g2, b2, result.vuln_entities)
    v.bcp = float(frac)
    if float(frac) < cfg.tau_cov:
        lost = sorted((reachable_entities(g, b) - set(result.vuln_entities)) - reachable_entities(g2, b2))
        v.delta = RejectionConstraint(
            "coverage", {"bcp": float(frac), "must_remain_reachable": lost}
        )
        return v
    v.gates.append("side_effect")
    checks = side_effect_checks(r.tier, b, b2, r, benign_traces, cfg, result, g2)
    failed = {k: x for k, x in checks.items() if not x["pass"]}
    if failed:
        points, transitions = [], []
        for x in failed.values():
            for p in x.get("points", []):
                if p not in points:
                    points.append(p)
            transitions += x.get("transitions", [])
        v.delta = RejectionConstraint(
            "side_effect",
            {"failed": sorted(failed), "points": points, "transitions": transitions},
        )
        return v
    disp = displacement_check(b2, g, c, result.neighbors, b, cfg.t_total)
    v.accepted = True
    v.certificate = EvidenceCertificate(
        r.tier, post.label, float(frac), checks, rstatus, disp, nvr_check(g2, g, cfg)
    )
    return v
