"""Toy artifact IR, the behavioural entity graph and the block-membership map.

A :class:`ToyArtifact` is a small block graph standing in for a stripped
binary. An :class:`SSCKG` groups its blocks into behavioural entities and
links those entities with typed relations. ``phi`` maps each entity to the
blocks that implement it.

All values here are frozen; remedies produce new artifacts through
:func:`dataclasses.replace` rather than mutation.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Union

RISK_RELATIONS = frozenset(
    {
        "data-flow",
        "control-dep",
        "shared-mem",
        "ipc",
        "protocol-interaction",
        "cross-component-call",
    }
)

ENTRY_TAGS = frozenset(
    {
        "exported",
        "network-handler",
        "protocol-handler",
        "firmware-service-entry",
        "task-root",
        "startup-routine",
        "scan-root",
    }
)

SINK_KINDS = frozenset(
    {"buffer-write", "buffer-read", "integer-overflow", "null-deref", "state-violation"}
)

STATE_FAMILIES = ("env", "io", "proto", "runtime", "component", "time")
ALL_FAMILIES = ("path",) + STATE_FAMILIES

RELATIONS = ("eq", "neq", "le", "ge", "lt", "gt", "in-range", "in-set")


class Availability(str, Enum):
    POLICY_ONLY = "policy-only"
    BINARY_REWRITABLE = "binary-rewritable"
    SOURCE_AVAILABLE = "source-available"


class ValidationError(ValueError):
    """Raised when a case is structurally unusable."""


# ---------------------------------------------------------------- variables


@dataclass(frozen=True)
class VarSpec:
    """A bounded variable.

    ``role`` is ``input`` (a channel-message field), ``state`` (part of the
    operational state) or ``local`` (a scratch value computed by Assign).
    Enum variables store the index of their value name.
    """

    name: str
    kind: str = "int"
    lo: int = 0
    hi: int = 0
    values: tuple = ()
    role: str = "input"
    family: str = "io"
    nominal: tuple[int, int] | None = None

    def domain(self) -> tuple[int, ...]:
        if self.kind == "bool":
            return (0, 1)
        if self.kind == "enum":
            return tuple(range(len(self.values)))
        if self.values:
            return tuple(sorted(int(v) for v in self.values))
        if self.hi < self.lo:
            raise ValidationError(f"variable {self.name!r} has an empty domain")
        return tuple(range(self.lo, self.hi + 1))

    def encode(self, value) -> int:
        """Map a literal (enum names included) onto the stored integer."""
        if self.kind == "enum" and isinstance(value, str):
            try:
                return list(self.values).index(value)
            except ValueError as exc:
                raise ValidationError(f"{value!r} is not a value of {self.name!r}") from exc
        if isinstance(value, bool):
            return int(value)
        return int(value)

    @property
    def minimum(self) -> int:
        return self.domain()[0]


# --------------------------------------------------------------- conditions


@dataclass(frozen=True)
class VarRef:
    """Operand referring to another variable, optionally shifted."""

    name: str
    offset: int = 0


Operand = Union[int, tuple, VarRef]


@dataclass(frozen=True)
class Cond:
    """``var rel operand``. Ranges are inclusive ``(lo, hi)`` pairs."""

    var: str
    rel: str
    operand: Operand

    def holds(self, env: Mapping[str, int]) -> bool:
        return eval_relation(env[self.var], self.rel, self.operand, env)


NEGATED = {
    "eq": "neq",
    "neq": "eq",
    "le": "gt",
    "gt": "le",
    "ge": "lt",
    "lt": "ge",
    "in-range": "nin-range",
    "nin-range": "in-range",
    "in-set": "nin-set",
    "nin-set": "in-set",
}


def eval_relation(x: int, rel: str, operand, env: Mapping[str, int] | None = None) -> bool:
    if isinstance(operand, VarRef):
        if env is None:
            raise KeyError(operand.name)
        y = env[operand.name] + operand.offset
    else:
        y = operand
    if rel == "eq":
        return x == y
    if rel == "neq":
        return x != y
    if rel == "le":
        return x <= y
    if rel == "ge":
        return x >= y
    if rel == "lt":
        return x < y
    if rel == "gt":
        return x > y
    if rel == "in-range":
        return y[0] <= x <= y[1]
    if rel == "nin-range":
        return not (y[0] <= x <= y[1])
    if rel == "in-set":
        return x in y
    if rel == "nin-set":
        return x not in y
    raise ValueError(f"unknown relation {rel!r}")


# ---------------------------------------------------------------- box DNF


@dataclass(frozen=True)
class Box:
    """Conjunction ``x_v in S_v`` over the listed variables."""

    items: tuple[tuple[str, frozenset], ...]

    @classmethod
    def of(cls, mapping: Mapping[str, Iterable[int]]) -> "Box":
        return cls(tuple(sorted((k, frozenset(int(x) for x in v)) for k, v in mapping.items())))

    def as_dict(self) -> dict[str, frozenset]:
        return dict(self.items)

    @property
    def vars(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.items)

    def matches(self, env: Mapping[str, int]) -> bool:
        return all(env[k] in s for k, s in self.items)

    def is_empty(self) -> bool:
        return any(not s for _, s in self.items)


@dataclass(frozen=True)
class BoxDNF:
    """Disjunction of boxes; the empty disjunction never matches."""

    boxes: tuple[Box, ...] = ()

    def matches(self, env: Mapping[str, int]) -> bool:
        return any(b.matches(env) for b in self.boxes)

    @property
    def vars(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for b in self.boxes:
            for v in b.vars:
                seen.setdefault(v, None)
        return tuple(seen)

    def is_empty(self) -> bool:
        return not self.boxes


# ------------------------------------------------------------ instructions


@dataclass(frozen=True)
class Assign:
    """``target := value`` or ``target := source + offset``."""

    target: str
    value: int | None = None
    source: str | None = None
    offset: int = 0


@dataclass(frozen=True)
class Branch:
    """Jump to ``target`` when ``cond`` holds; ``target=None`` ends the run."""

    cond: Cond
    target: str | None = None


@dataclass(frozen=True)
class ReadChannel:
    channel: str


@dataclass(frozen=True)
class Sink:
    id: str
    kind: str
    trigger: Cond


@dataclass(frozen=True)
class Guard:
    """Divert to ``target`` when the single-box predicate matches."""

    pred: Box
    target: str


Instr = Union[Assign, Branch, ReadChannel, Sink, Guard]


@dataclass(frozen=True)
class Block:
    id: str
    instrs: tuple = ()
    tags: frozenset = frozenset()
    labels: tuple[str, ...] = ()


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    guard: Cond | None = None


@dataclass(frozen=True)
class FSM:
    states: tuple[str, ...]
    initial: str
    transitions: tuple[tuple[str, str], ...]

    def reachable_from(self, starts: Iterable[str]) -> frozenset[str]:
        seen = set(starts)
        todo = deque(seen)
        while todo:
            q = todo.popleft()
            for a, b in self.transitions:
                if a == q and b not in seen:
                    seen.add(b)
                    todo.append(b)
        return frozenset(seen)


@dataclass(frozen=True)
class ChannelSpec:
    """A protocol channel: message fields, the FSM state variable and an
    optional drop policy installed by a Tier-1 remedy."""

    name: str
    fields: tuple[str, ...]
    state_var: str | None = None
    fsm: FSM | None = None
    policy: BoxDNF | None = None


@dataclass(frozen=True)
class ToyArtifact:
    blocks: tuple[Block, ...]
    edges: tuple[Edge, ...]
    availability: Availability
    variables: tuple[VarSpec, ...]
    channels: tuple[ChannelSpec, ...] = ()
    observables: frozenset = frozenset()
    entry: str = ""
    scan_slack: int = 64
    invariants: tuple = ()
    template_overrides: Mapping = field(default_factory=dict)
    # Bookkeeping for remedies: new block id -> block whose entities it joins,
    # and entity records introduced by a source template.
    inherits: tuple[tuple[str, str], ...] = ()
    introduced: tuple = ()

    def block(self, bid: str) -> Block:
        return self.block_map()[bid]

    def block_map(self) -> dict[str, Block]:
        return {b.id: b for b in self.blocks}

    def var_map(self) -> dict[str, VarSpec]:
        return {v.name: v for v in self.variables}

    def channel(self, name: str) -> ChannelSpec:
        for ch in self.channels:
            if ch.name == name:
                return ch
        raise KeyError(name)

    def out_edges(self, bid: str) -> list[Edge]:
        return [e for e in self.edges if e.src == bid]

    def sinks(self) -> dict[str, tuple[str, Sink]]:
        """Sink id -> (block id, instruction)."""
        out = {}
        for b in self.blocks:
            for ins in b.instrs:
                if isinstance(ins, Sink):
                    out[ins.id] = (b.id, ins)
        return out

    def domains(self) -> dict[str, tuple[int, ...]]:
        """Domains of the solver-visible (input and state) variables."""
        return {v.name: v.domain() for v in self.variables if v.role != "local"}


# --------------------------------------------------------------- the graph


@dataclass(frozen=True)
class Entity:
    id: str
    label: str
    rho: float


@dataclass(frozen=True)
class Relation:
    src: str
    dst: str
    type: str
    risk: bool = True


@dataclass(frozen=True)
class SSCKG:
    entities: tuple[Entity, ...]
    relations: tuple[Relation, ...]
    phi: Mapping[str, frozenset]

    def entity(self, eid: str) -> Entity:
        for e in self.entities:
            if e.id == eid:
                return e
        raise KeyError(eid)

    @property
    def ids(self) -> list[str]:
        return [e.id for e in self.entities]

    def risk_adjacency(self) -> dict[str, list[str]]:
        """Directed adjacency over risk-relevant relations, duplicates removed."""
        adj: dict[str, list[str]] = {e.id: [] for e in self.entities}
        for r in self.relations:
            if r.risk and r.src in adj and r.dst in adj and r.dst not in adj[r.src]:
                adj[r.src].append(r.dst)
        return adj

    def block_entities(self, bid: str) -> list[str]:
        return [e.id for e in self.entities if bid in self.phi.get(e.id, ())]


def entry_entities(g: SSCKG, b: ToyArtifact) -> set[str]:
    """Entities owning at least one entry-tagged block."""
    blocks = b.block_map()
    out = set()
    for e in g.entities:
        for bid in g.phi.get(e.id, ()):
            if bid not in blocks:
                raise ValidationError(f"phi of {e.id!r} names missing block {bid!r}")
            if blocks[bid].tags & ENTRY_TAGS:
                out.add(e.id)
                break
    return out


def reachable_entities(g: SSCKG, b: ToyArtifact) -> set[str]:
    """Closure of the entry entities over risk-relevant relations."""
    adj = g.risk_adjacency()
    seen = set(entry_entities(g, b))
    todo = deque(sorted(seen))
    while todo:
        v = todo.popleft()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                todo.append(w)
    return seen


# -------------------------------------------------------------- validation


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str


def _cond_vars(c: Cond) -> list[str]:
    out = [c.var]
    if isinstance(c.operand, VarRef):
        out.append(c.operand.name)
    return out


def validate_case(b: ToyArtifact, g: SSCKG) -> list[Violation]:
    """Collect every broken invariant; never raises."""
    out: list[Violation] = []
    ids = [blk.id for blk in b.blocks]
    idset = set(ids)
    if len(ids) != len(idset):
        out.append(Violation("DuplicateBlock", "block ids are not unique"))
    for e in b.edges:
        for end in (e.src, e.dst):
            if end not in idset:
                out.append(Violation("DanglingEdge", f"{e.src}->{e.dst} names {end!r}"))
    if not any(blk.tags & ENTRY_TAGS for blk in b.blocks):
        out.append(Violation("NoEntry", "no block carries an entry tag"))
    if b.entry and b.entry not in idset:
        out.append(Violation("DanglingEntry", f"entry {b.entry!r} is not a block"))
    declared = set(b.var_map())
    chans = {c.name for c in b.channels}
    for blk in b.blocks:
        for ins in blk.instrs:
            used: list[str] = []
            if isinstance(ins, Sink):
                if ins.kind not in SINK_KINDS:
                    out.append(Violation("BadSinkKind", f"{ins.id}: {ins.kind!r}"))
                used = _cond_vars(ins.trigger)
            elif isinstance(ins, Guard):
                for v in ins.pred.vars:
                    if v not in b.observables:
                        out.append(Violation("UnobservableGuard", f"{blk.id}: {v}"))
                if ins.target not in idset:
                    out.append(Violation("DanglingTarget", f"{blk.id} -> {ins.target}"))
                used = list(ins.pred.vars)
            elif isinstance(ins, Branch):
                if ins.target is not None and ins.target not in idset:
                    out.append(Violation("DanglingTarget", f"{blk.id} -> {ins.target}"))
                used = _cond_vars(ins.cond)
            elif isinstance(ins, Assign):
                used = [ins.target] + ([ins.source] if ins.source else [])
            elif isinstance(ins, ReadChannel):
                if ins.channel not in chans:
                    out.append(Violation("UnknownChannel", f"{blk.id}: {ins.channel}"))
            for v in used:
                if v not in declared:
                    out.append(Violation("UndeclaredVariable", f"{blk.id}: {v}"))
    for e in g.entities:
        if not 0.0 <= e.rho <= 1.0:
            out.append(Violation("RiskOutOfRange", f"{e.id}: rho={e.rho}"))
        if e.id not in g.phi:
            out.append(Violation("PhiNotTotal", f"{e.id} has no phi entry"))
    for eid, blks in g.phi.items():
        for bid in blks:
            if bid not in idset:
                out.append(Violation("DanglingPhi", f"{eid} -> {bid}"))
    ent_ids = set(g.ids)
    for r in g.relations:
        if r.risk and r.type not in RISK_RELATIONS:
            out.append(Violation("BadRiskRelation", f"{r.src}->{r.dst}: {r.type}"))
        if r.src not in ent_ids or r.dst not in ent_ids:
            out.append(Violation("DanglingRelation", f"{r.src}->{r.dst}"))
    return out
