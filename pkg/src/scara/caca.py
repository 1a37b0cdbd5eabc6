"""Candidate acquisition: alert normalisation, prior operational state,
graph-centrality ranking and the availability tier map."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Mapping

import numpy as np

from scara import kernels
from scara.constraints import ConstraintAtom, OperationalStatePrior
from scara.model import SSCKG, STATE_FAMILIES, Availability, ToyArtifact

# Relation type of an alert -> prior families that receive default atoms.
ROUTING: dict[str, tuple[str, ...]] = {
    "protocol-interaction": ("proto",),
    "mmio": ("io", "runtime"),
    "io": ("io", "runtime"),
    "data-flow": ("io",),
    "control-dep": ("runtime",),
    "shared-mem": ("component", "runtime"),
    "ipc": ("component",),
    "cross-component-call": ("component", "time"),
}

ROUTED_EVIDENCE = 0.5


@dataclass(frozen=True)
class Config:
    alpha: float = 0.6
    tau_p: float = 0.5
    t_total: int = 300_000
    t_relaxed: int = 150_000
    tau_cov: float = 0.95
    tau_block: float = 0.05
    k_iters: int = 3
    beam_b: int = 8
    tau_risk: float = 0.7
    seed: int = 42
    feedback: bool = True
    k_candidates: int = 5

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.tau_p <= 0:
            raise ValueError("tau_p must be positive")
        if self.t_total <= 0 or self.t_relaxed <= 0:
            raise ValueError("budgets must be positive")
        if self.k_iters < 1:
            raise ValueError("k_iters must be at least 1")
        if self.beam_b < 1:
            raise ValueError("beam_b must be at least 1")

    def with_overrides(self, overrides: Mapping[str, Any] | None) -> "Config":
        if not overrides:
            return self
        names = {f.name: f.type for f in dataclasses.fields(self)}
        clean = {}
        for k, v in overrides.items():
            if k not in names:
                raise ValueError(f"unknown config field {k!r}")
            clean[k] = _coerce(getattr(self, k), v)
        return dataclasses.replace(self, **clean)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _coerce(current, value):
    if isinstance(current, bool):
        if isinstance(value, str):
            return value.strip().lower() in ("1", "true", "yes", "on")
        return bool(value)
    if isinstance(current, int):
        return int(value)
    if isinstance(current, float):
        return float(value)
    return value


@dataclass(frozen=True)
class HintRecord:
    atoms: tuple[ConstraintAtom, ...] = ()
    evidence: float = 1.0


@dataclass(frozen=True)
class ReplayHint:
    enforcement_point: bool = False
    harness: bool = False


@dataclass(frozen=True)
class ContextHints:
    """Per-dimension hints; a family is ``None`` when nothing is known."""

    env: HintRecord | None = None
    io: HintRecord | None = None
    proto: HintRecord | None = None
    runtime: HintRecord | None = None
    component: HintRecord | None = None
    time: HintRecord | None = None
    replay: ReplayHint = field(default_factory=ReplayHint)
    art: Mapping = field(default_factory=dict)

    def __post_init__(self):
        for f in STATE_FAMILIES:
            h = getattr(self, f)
            if h is not None and not 0.0 <= h.evidence <= 1.0:
                raise ValueError(f"evidence of {f} outside [0, 1]")


@dataclass(frozen=True)
class Candidate:
    v: str
    src: str
    snk: str
    rho: float
    s_prior: OperationalStatePrior = field(compare=False, hash=False)
    relation_types: tuple[str, ...] = ()
    source_tool: str = ""

    @property
    def id(self) -> str:
        return f"{self.v}:{self.src}->{self.snk}"


@dataclass(frozen=True)
class NARow:
    alert: Mapping
    reason: str


def tier_set(a: Availability | str) -> frozenset[int]:
    a = Availability(a)
    return {
        Availability.POLICY_ONLY: frozenset({1}),
        Availability.BINARY_REWRITABLE: frozenset({1, 2}),
        Availability.SOURCE_AVAILABLE: frozenset({1, 2, 3}),
    }[a]


def _map_entity(name, g: SSCKG) -> str | None:
    ids = set(g.ids)
    if name in ids:
        return name
    owners = sorted(e for e in ids if name in g.phi.get(e, ()))
    return owners[0] if owners else None


def build_prior(
    routed: Iterable[str], b: ToyArtifact, omega: ContextHints
) -> OperationalStatePrior:
    """Hint atoms for every family plus default atoms for routed families."""
    routed = set(routed)
    atoms: dict[str, tuple] = {}
    evidence: dict[str, float] = {}
    for fam in STATE_FAMILIES:
        hint = getattr(omega, fam)
        fam_atoms = list(hint.atoms) if hint else []
        defaults: list[ConstraintAtom] = []
        if fam in routed:
            if fam == "proto":
                for ch in b.channels:
                    if ch.state_var and ch.fsm:
                        defaults.append(
                            ConstraintAtom(ch.state_var, "fsm-precedes", (ch.fsm.initial,), "proto")
                        )
            else:
                for v in b.variables:
                    if v.role != "local" and v.family == fam and v.nominal is not None:
                        defaults.append(
                            ConstraintAtom(v.name, "in-range", tuple(v.nominal), fam)
                        )
        for d in defaults:
            if d not in fam_atoms:
                fam_atoms.append(d)
        atoms[fam] = tuple(fam_atoms)
        if hint is not None:
            evidence[fam] = hint.evidence
        elif defaults:
            evidence[fam] = ROUTED_EVIDENCE
        else:
            evidence[fam] = 1.0
    return OperationalStatePrior(atoms, evidence)


def normalize_with_na(
    alerts: Iterable[Mapping], g: SSCKG, b: ToyArtifact, omega: ContextHints
) -> tuple[list[Candidate], list[NARow]]:
    merged: dict[tuple, dict] = {}
    na: list[NARow] = []
    for al in alerts:
        v = _map_entity(al.get("entity_or_block"), g)
        src = _map_entity(al.get("src"), g)
        snk = _map_entity(al.get("snk"), g)
        missing = [k for k, x in (("entity_or_block", v), ("src", src), ("snk", snk)) if x is None]
        if missing:
            na.append(NARow(dict(al), "unmappable " + ", ".join(missing)))
            continue
        try:
            rho = float(al.get("rho", 0.0))
        except (TypeError, ValueError):
            na.append(NARow(dict(al), "rho is not a number"))
            continue
        if not 0.0 <= rho <= 1.0:
            na.append(NARow(dict(al), "rho outside [0, 1]"))
            continue
        key = (v, src, snk)
        rel = str(al.get("relation_type", ""))
        slot = merged.setdefault(key, {"rho": rho, "rels": [], "tool": al.get("source_tool", "")})
        slot["rho"] = max(slot["rho"], rho)
        if rel and rel not in slot["rels"]:
            slot["rels"].append(rel)
    out = []
    for (v, src, snk), slot in merged.items():
        rels = tuple(sorted(slot["rels"]))
        routed = {f for r in rels for f in ROUTING.get(r, ())}
        prior = build_prior(routed, b, omega)
        out.append(Candidate(v, src, snk, slot["rho"], prior, rels, str(slot["tool"])))
    out.sort(key=lambda c: c.id)
    return out, na


def normalize(
    alerts: Iterable[Mapping], g: SSCKG, b: ToyArtifact, omega: ContextHints
) -> list[Candidate]:
    """One candidate per distinct (entity, source, sink); see :func:`normalize_with_na`."""
    return normalize_with_na(alerts, g, b, omega)[0]


def as_alerts(cands: Iterable[Candidate]) -> list[dict]:
    """Re-encode candidates as raw alerts (one per relation type)."""
    out = []
    for c in cands:
        for rel in c.relation_types or ("",):
            out.append(
                {
                    "source_tool": c.source_tool,
                    "entity_or_block": c.v,
                    "relation_type": rel,
                    "src": c.src,
                    "snk": c.snk,
                    "rho": c.rho,
                }
            )
    return out


# -------------------------------------------------------------- centrality


def _csr(g: SSCKG) -> tuple[np.ndarray, np.ndarray, list[str]]:
    ids = g.ids
    pos = {e: i for i, e in enumerate(ids)}
    adj = g.risk_adjacency()
    indptr = [0]
    indices: list[int] = []
    for e in ids:
        indices.extend(pos[w] for w in adj[e])
        indptr.append(len(indices))
    return np.array(indptr, dtype=np.int64), np.array(indices, dtype=np.int64), ids


def centrality_fractions(g: SSCKG) -> dict[str, Fraction]:
    """Exact normalised betweenness for every entity."""
    n = len(g.entities)
    if n <= 1:
        return {e: Fraction(0) for e in g.ids}
    indptr, indices, ids = _csr(g)
    dist, sigma = kernels.all_pairs_sigma(indptr, indices, n)
    dist = dist.tolist()
    sigma = sigma.tolist()
    norm = n * (n - 1)
    out = {}
    for v in range(n):
        total = Fraction(0)
        for s in range(n):
            if s == v or dist[s][v] < 0:
                continue
            for t in range(n):
                if t == v or t == s or dist[v][t] < 0 or dist[s][t] < 0:
                    continue
                if dist[s][v] + dist[v][t] == dist[s][t]:
                    total += Fraction(sigma[s][v] * sigma[v][t], sigma[s][t])
        out[ids[v]] = total / norm
    return out


def sem_centrality(g: SSCKG, v: str) -> float:
    if v not in set(g.ids):
        raise KeyError(v)
    return float(centrality_fractions(g)[v])


def rank_scores(cands: Iterable[Candidate], g: SSCKG, cfg: Config) -> dict[str, float]:
    cent = centrality_fractions(g)
    return {
        c.id: cfg.alpha * c.rho + (1.0 - cfg.alpha) * float(cent.get(c.v, 0)) for c in cands
    }


def rank(cands: list[Candidate], g: SSCKG, cfg: Config) -> list[Candidate]:
    """Descending by ``alpha*rho + (1-alpha)*centrality``; ties by candidate id."""
    scores = rank_scores(cands, g, cfg)
    return sorted(cands, key=lambda c: (-scores[c.id], c.id))
