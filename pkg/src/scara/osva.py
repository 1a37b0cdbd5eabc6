"""Operational reachability verification of one candidate.

Walks from the artifact entry through a source block to a sink in the sink
entity are scored against the entity-level path, the best ``beam_b`` receive
solver budget in proportion to a softmax of their scores, and a strict pass
solves each of them in turn. If none is satisfiable, one prior family is
relaxed and the explored walks are tried again under a shared budget.
"""

from __future__ import annotations

import math
from collections import Counter, deque
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Protocol, Sequence

import numpy as np

from scara.caca import Candidate, Config
from scara.constraints import (
    ConstraintAtom,
    NothingToRelax,
    domain_atoms,
    lower_atom,
    relax,
    solve,
    to_sexpr,
)
from scara.model import SSCKG, STATE_FAMILIES, ToyArtifact
from scara.paths import Walk, enumerate_walks

LABELS = ("SatStrict", "SatRelaxed", "Unsat", "Unknown")


@lru_cache(maxsize=1)
def label_vocabulary() -> tuple[str, ...]:
    text = resources.files("scara").joinpath("data/labels.txt").read_text()
    return tuple(line.strip() for line in text.splitlines() if line.strip())


class Embedder(Protocol):
    def embed(self, labels: Sequence[str]) -> np.ndarray: ...


class TermFrequencyEmbedder:
    """Counts of each vocabulary label; unknown labels are ignored."""

    def __init__(self, vocab: Sequence[str] | None = None):
        self.vocab = tuple(vocab) if vocab is not None else label_vocabulary()
        self.index = {t: i for i, t in enumerate(self.vocab)}

    def embed(self, labels: Sequence[str]) -> np.ndarray:
        vec = np.zeros(len(self.vocab))
        for t in labels:
            i = self.index.get(t)
            if i is not None:
                vec[i] += 1.0
        return vec


def score_path(p: Sequence[str], p_ssckg: Sequence[str], embedder: Embedder | None = None) -> float:
    """Cosine similarity of the two label sequences' embeddings.

    An empty sequence (or an all-zero embedding) scores a neutral 0.
    """
    if not p or not p_ssckg:
        return 0.0
    emb = embedder or TermFrequencyEmbedder()
    a, b = emb.embed(p), emb.embed(p_ssckg)
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def mapped_score(raw: float) -> float:
    return (raw + 1.0) / 2.0


def allocate_budget(scores: Sequence[float], t_total: int, tau_p: float) -> list[int]:
    """Softmax shares of ``t_total``, floored, remainder to the top path."""
    if not scores:
        raise ValueError("at least one path is needed")
    top = max(scores)
    w = [math.exp((s - top) / tau_p) for s in scores]
    z = sum(w)
    shares = [int(math.floor(t_total * x / z)) for x in w]
    best = max(range(len(scores)), key=lambda i: (scores[i], -i))
    shares[best] += t_total - sum(shares)
    return shares


@dataclass
class ScoredPath:
    walk: Walk
    raw_score: float
    mapped_score: float
    budget_units: int = 0

    @property
    def blocks(self) -> tuple[str, ...]:
        return self.walk.blocks


@dataclass
class PathRecord:
    blocks: list[str]
    exits: list[str]
    raw_score: float
    mapped_score: float
    budget: int
    strict: str = ""
    strict_units: int = 0
    refuting: list[str] = field(default_factory=list)
    relaxed: str = ""
    relaxed_units: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ReachabilityResult:
    label: str
    witness: dict | None = None  # {"inputs": {...}, "state": {...}}
    reason: str | None = None
    relaxed_family: str | None = None
    refuting_families: list[str] = field(default_factory=list)
    paths: list[PathRecord] = field(default_factory=list)
    ranked_walks: list[list[str]] = field(default_factory=list)
    witness_walk: Walk | None = None
    witness_atoms: tuple[ConstraintAtom, ...] = ()
    vuln_entities: list[str] = field(default_factory=list)
    neighbors: list[str] = field(default_factory=list)
    units_to_first_sat: int | None = None
    units_spent: int = 0
    solver_queries: int = 0
    budget_total: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def is_sat(self) -> bool:
        return self.label in ("SatStrict", "SatRelaxed")

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "witness": self.witness,
            "reason": self.reason,
            "relaxed_family": self.relaxed_family,
            "refuting_families": list(self.refuting_families),
            "paths": [p.to_dict() for p in self.paths],
            "ranked_walks": [list(w) for w in self.ranked_walks],
            "witness_path": list(self.witness_walk.blocks) if self.witness_walk else None,
            "witness_atoms": [to_sexpr(a) for a in self.witness_atoms],
            "vuln_entities": list(self.vuln_entities),
            "neighbors": list(self.neighbors),
            "units_to_first_sat": self.units_to_first_sat,
            "units_spent": self.units_spent,
            "solver_queries": self.solver_queries,
            "budget_total": self.budget_total,
            "notes": list(self.notes),
        }


# ------------------------------------------------------------------ helpers


def entity_path(g: SSCKG, src: str, snk: str) -> list[str]:
    """Shortest risk-relevant entity path ``src -> snk`` (BFS, id order)."""
    adj = g.risk_adjacency()
    prev: dict[str, str | None] = {src: None}
    todo = deque([src])
    while todo:
        v = todo.popleft()
        if v == snk:
            break
        for w in sorted(adj.get(v, ())):
            if w not in prev:
                prev[w] = v
                todo.append(w)
    if snk not in prev:
        return [src] if src == snk else [src, snk]
    out = []
    cur: str | None = snk
    while cur is not None:
        out.append(cur)
        cur = prev[cur]
    return out[::-1]


def block_labels(g: SSCKG, b: ToyArtifact, blocks: Sequence[str]) -> list[str]:
    bmap = b.block_map()
    ent = {e.id: e for e in g.entities}
    out: list[str] = []
    for bid in blocks:
        blk = bmap[bid]
        if blk.labels:
            out.extend(blk.labels)
        else:
            out.extend(ent[e].label for e in g.block_entities(bid))
    return out


def model_split(b: ToyArtifact, model: dict) -> dict:
    roles = {v.name: v.role for v in b.variables}
    return {
        "inputs": {k: int(v) for k, v in sorted(model.items()) if roles.get(k) == "input"},
        "state": {k: int(v) for k, v in sorted(model.items()) if roles.get(k) == "state"},
    }


def prior_atoms(c: Candidate, b: ToyArtifact) -> list[ConstraintAtom]:
    return [lower_atom(a, b) for a in c.s_prior.all_atoms()]


def attribute_refutation(
    atoms: Sequence[ConstraintAtom], budget: int, domains, counter: list[int] | None = None
) -> list[str]:
    """Greedy deletion: a family stays only if removing it makes the rest solvable."""
    order = [f for f in STATE_FAMILIES] + ["path"]
    keep = [f for f in order if any(a.family == f for a in atoms)]
    for fam in list(keep):
        trial = [a for a in atoms if a.family in keep and a.family != fam]
        v = solve(trial, budget, domains=domains)
        if counter is not None:
            counter[0] += 1
        if v.status == "Unsat":
            keep.remove(fam)
    return keep


def _primary(families: Sequence[str]) -> str:
    for f in families:
        if f != "path":
            return f
    return "path"


def rank_walks(
    g: SSCKG, b: ToyArtifact, c: Candidate, walks: Sequence[Walk], embedder: Embedder | None = None
) -> list[ScoredPath]:
    ref = [g.entity(e).label for e in entity_path(g, c.src, c.snk)]
    scored = []
    for w in walks:
        raw = score_path(block_labels(g, b, w.blocks), ref, embedder)
        scored.append(ScoredPath(w, raw, mapped_score(raw)))
    scored.sort(key=lambda s: (-s.raw_score, len(s.walk.blocks), s.walk.key))
    return scored


def _targets(g: SSCKG, b: ToyArtifact, c: Candidate) -> tuple[set[str], set[str]]:
    ids = {blk.id for blk in b.blocks}
    src_blocks = set(g.phi.get(c.src, ())) & ids
    snk_blocks = set(g.phi.get(c.snk, ())) & ids
    sinks = {sid for sid, (bid, _) in b.sinks().items() if bid in snk_blocks}
    return src_blocks, sinks


def _preimage_deleted(g: SSCKG, b: ToyArtifact, c: Candidate) -> bool:
    """True when the graph maps src and snk to blocks but the artifact has lost
    every block on one side (dead-code elimination after a remedy)."""
    ids = {blk.id for blk in b.blocks}
    src_pre, snk_pre = set(g.phi.get(c.src, ())), set(g.phi.get(c.snk, ()))
    if not src_pre or not snk_pre:
        return False
    if not src_pre & ids or not snk_pre & ids:
        return True
    return False


def project_paths(
    g: SSCKG, b: ToyArtifact, c: Candidate, beam_b: int, embedder: Embedder | None = None
) -> list[ScoredPath]:
    """Scored walks for the candidate, best ``beam_b`` first."""
    src_blocks, sinks = _targets(g, b, c)
    if not src_blocks or not sinks:
        return []
    ws = enumerate_walks(b, sinks, src_blocks)
    return rank_walks(g, b, c, ws.walks, embedder)[:beam_b]


# ------------------------------------------------------------------- verify


def verify(
    b: ToyArtifact,
    g: SSCKG,
    c: Candidate,
    cfg: Config,
    embedder: Embedder | None = None,
) -> ReachabilityResult:
    src_blocks, sinks = _targets(g, b, c)
    all_sinks = b.sinks()
    neighbors = sorted(s for s in all_sinks if s not in sinks)
    if not src_blocks or not sinks:
        if _preimage_deleted(g, b, c):
            # a remedy removed the source or sink code outright: nothing left to reach
            return ReachabilityResult(
                "Unsat", reason="path", refuting_families=["path"], neighbors=neighbors,
                notes=["source or sink blocks were removed"],
            )
        return ReachabilityResult(
            "Unknown", reason="model-gap", neighbors=neighbors, notes=["no source/sink preimage"]
        )
    ws = enumerate_walks(b, sinks, src_blocks)
    if not ws.walks:
        if ws.truncated:
            return ReachabilityResult(
                "Unknown", reason="model-gap", neighbors=neighbors, notes=[f"cap hit: {ws.cap_hit}"]
            )
        return ReachabilityResult(
            "Unsat", reason="path", refuting_families=["path"], neighbors=neighbors,
            notes=["no control-flow walk reaches the sink"],
        )
    ranked = rank_walks(g, b, c, ws.walks, embedder)
    beam = ranked[: cfg.beam_b]
    budgets = allocate_budget([p.mapped_score for p in beam], cfg.t_total, cfg.tau_p)
    domains = b.domains()
    extra = prior_atoms(c, b) + domain_atoms(b)
    res = ReachabilityResult(
        "Unknown",
        ranked_walks=[list(p.blocks) for p in ranked],
        neighbors=neighbors,
        budget_total=sum(budgets),
    )
    if ws.truncated:
        res.notes.append(f"cap hit: {ws.cap_hit}")
    queries = [0]
    strict_status = []
    for sp, bud in zip(beam, budgets):
        sp.budget_units = bud
        atoms = list(sp.walk.atoms) + extra
        v = solve(atoms, bud, seed=cfg.seed, domains=domains)
        queries[0] += 1
        res.units_spent += v.units_spent
        rec = PathRecord(
            list(sp.blocks), list(sp.walk.exits), sp.raw_score, sp.mapped_score, bud,
            strict=v.status, strict_units=v.units_spent,
        )
        res.paths.append(rec)
        strict_status.append(v.status)
        if v.status == "Sat":
            res.label = "SatStrict"
            res.units_to_first_sat = res.units_spent
            _set_witness(res, b, g, sp.walk, atoms, v.model)
            res.solver_queries = queries[0]
            return res
        if v.status == "Unsat":
            rec.refuting = attribute_refutation(atoms, cfg.t_total, domains)
    # relaxed pass over the explored walks, sharing one budget
    all_refuted = all(s == "Unsat" for s in strict_status)
    complete = not ws.truncated and len(beam) == len(ranked)
    fam = None
    remaining = cfg.t_relaxed
    relaxed_status = []
    try:
        _, fam = relax(extra, c.s_prior)
    except NothingToRelax:
        res.notes.append("nothing to relax")
    if fam is not None:
        res.relaxed_family = fam
        for sp, rec in zip(beam, res.paths):
            atoms = [a for a in list(sp.walk.atoms) + extra if a.family != fam]
            v = solve(atoms, remaining, seed=cfg.seed, domains=domains)
            queries[0] += 1
            remaining -= v.units_spent
            res.units_spent += v.units_spent
            rec.relaxed, rec.relaxed_units = v.status, v.units_spent
            relaxed_status.append(v.status)
            if v.status == "Sat":
                res.label = "SatRelaxed"
                res.reason = fam
                _set_witness(res, b, g, sp.walk, atoms, v.model)
                res.solver_queries = queries[0]
                return res
    res.solver_queries = queries[0]
    relaxed_refuted = fam is None or all(s == "Unsat" for s in relaxed_status)
    if all_refuted and relaxed_refuted and complete:
        res.label = "Unsat"
        fams = [f for rec in res.paths for f in rec.refuting]
        primaries = Counter(_primary(rec.refuting) for rec in res.paths)
        order = list(STATE_FAMILIES) + ["path"]
        res.reason = min(primaries, key=lambda f: (-primaries[f], order.index(f)))
        res.refuting_families = [f for f in order if f in set(fams)]
        return res
    res.label = "Unknown"
    if not complete:
        res.reason = "model-gap"
        res.notes.append(f"{len(ranked) - len(beam)} walk(s) beyond the beam were not explored")
    else:
        res.reason = "timeout"
    return res


def _set_witness(res: ReachabilityResult, b, g, walk: Walk, atoms, model) -> None:
    res.witness = model_split(b, model)
    res.witness_walk = walk
    res.witness_atoms = tuple(atoms)
    on_path = set(walk.blocks)
    res.vuln_entities = sorted(e.id for e in g.entities if set(g.phi.get(e.id, ())) & on_path)


def sink_reachability(
    b: ToyArtifact, c: Candidate, sink_id: str, budget: int
) -> str:
    """Strict solve of any walk from the entry firing ``sink_id`` under the prior."""
    ws = enumerate_walks(b, {sink_id})
    domains = b.domains()
    extra = prior_atoms(c, b) + domain_atoms(b)
    seen_unknown = ws.truncated
    for w in ws.walks:
        v = solve(list(w.atoms) + extra, budget, domains=domains)
        if v.status == "Sat":
            return "Sat"
        if v.status == "Unknown":
            seen_unknown = True
    return "Unknown" if seen_unknown else "Unsat"
