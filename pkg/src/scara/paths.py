"""Symbolic walks through a toy artifact.

A walk is an acyclic sequence of blocks starting at the artifact entry, where
each step records *which* exit of the block was taken (a branch, a guard, a
control-flow edge or, at the end, a sink firing). Locals are tracked as affine
copies of input/state variables, so every condition along the walk becomes an
atom over solver-visible variables.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from scara.constraints import ConstraintAtom, solve
from scara.model import (
    Assign,
    Box,
    Branch,
    Cond,
    Guard,
    ReadChannel,
    Sink,
    ToyArtifact,
    VarRef,
    eval_relation,
)

_FLIP = {"eq": "eq", "neq": "neq", "le": "ge", "ge": "le", "lt": "gt", "gt": "lt"}
_TRUE = ConstraintAtom("", "true")
_FALSE = ConstraintAtom("", "false")

# A symbolic value: ("var", name, offset) or ("const", value).
Sym = tuple


@dataclass(frozen=True)
class Exit:
    kind: str  # branch | guard | edge | sink
    target: str  # destination block id, or sink id for kind == "sink"
    atoms: tuple[ConstraintAtom, ...]
    subst: tuple


@dataclass(frozen=True)
class Walk:
    blocks: tuple[str, ...]
    exits: tuple[str, ...]
    atoms: tuple[ConstraintAtom, ...]
    sink: str | None = None
    reads: tuple[tuple[str, str], ...] = ()  # (block id, channel) in walk order

    @property
    def key(self) -> tuple:
        return (self.blocks, self.exits)


@dataclass
class WalkSet:
    walks: list[Walk] = field(default_factory=list)
    truncated: bool = False
    cap_hit: str = ""


class _Sym:
    def __init__(self, artifact: ToyArtifact):
        self.vars = artifact.var_map()

    def initial(self) -> dict[str, Sym]:
        return {n: ("const", v.minimum) for n, v in self.vars.items() if v.role == "local"}

    def value(self, name: str, subst: dict, offset: int = 0) -> Sym:
        if name in subst:
            s = subst[name]
            if s[0] == "const":
                return ("const", s[1] + offset)
            return ("var", s[1], s[2] + offset)
        return ("var", name, offset)

    def cond(self, c: Cond, subst: dict) -> ConstraintAtom:
        lhs = self.value(c.var, subst)
        op = c.operand
        if isinstance(op, VarRef):
            rhs = self.value(op.name, subst, op.offset)
            if rhs[0] == "const":
                return self._lit(lhs, c.rel, rhs[1])
            if lhs[0] == "const":
                # k rel y + o  <=>  y flip(rel) k - o
                return ConstraintAtom(rhs[1], _FLIP[c.rel], lhs[1] - rhs[2])
            if lhs[1] == rhs[1]:
                return _TRUE if eval_relation(lhs[2], c.rel, rhs[2]) else _FALSE
            return ConstraintAtom(lhs[1], c.rel, VarRef(rhs[1], rhs[2] - lhs[2]))
        return self._lit(lhs, c.rel, op)

    @staticmethod
    def _lit(lhs: Sym, rel: str, op) -> ConstraintAtom:
        if lhs[0] == "const":
            return _TRUE if eval_relation(lhs[1], rel, op) else _FALSE
        name, off = lhs[1], lhs[2]
        if off:
            if rel in ("in-range", "nin-range"):
                op = (op[0] - off, op[1] - off)
            elif rel in ("in-set", "nin-set"):
                op = frozenset(x - off for x in op)
            else:
                op = op - off
        return ConstraintAtom(name, rel, op)

    def box(self, box: Box, subst: dict) -> Box | None:
        """Rewrite a box over solver-visible variables; None if it never matches."""
        acc: dict[str, frozenset] = {}
        for v, s in box.items:
            sym = self.value(v, subst)
            if sym[0] == "const":
                if sym[1] not in s:
                    return None
                continue
            shifted = frozenset(x - sym[2] for x in s)
            acc[sym[1]] = acc[sym[1]] & shifted if sym[1] in acc else shifted
        return Box.of(acc)


def _box_taken(box: Box | None) -> list[ConstraintAtom]:
    if box is None:
        return [_FALSE]
    return [ConstraintAtom(v, "in-set", frozenset(s)) for v, s in box.items]


def _box_not_taken(box: Box | None) -> list[ConstraintAtom]:
    if box is None:
        return []
    return [ConstraintAtom("", "not-in-box", box)]


def scan_block(artifact: ToyArtifact, bid: str, subst: dict, sym: _Sym | None = None):
    """All exits of block ``bid`` given the incoming substitution.

    Returns ``(exits, reads)`` where ``reads`` lists the channels consumed.
    """
    sym = sym or _Sym(artifact)
    block = artifact.block(bid)
    subst = dict(subst)
    prefix: list[ConstraintAtom] = []
    exits: list[Exit] = []
    reads: list[str] = []

    def freeze(d):
        return tuple(sorted(d.items()))

    for ins in block.instrs:
        if isinstance(ins, Assign):
            if ins.source is not None:
                subst[ins.target] = sym.value(ins.source, subst, ins.offset)
            else:
                subst[ins.target] = ("const", int(ins.value))
        elif isinstance(ins, Branch):
            a = sym.cond(ins.cond, subst)
            if ins.target is not None:
                exits.append(Exit("branch", ins.target, tuple(prefix + [a]), freeze(subst)))
            prefix.append(a.negate())
        elif isinstance(ins, Guard):
            bx = sym.box(ins.pred, subst)
            exits.append(Exit("guard", ins.target, tuple(prefix + _box_taken(bx)), freeze(subst)))
            prefix += _box_not_taken(bx)
        elif isinstance(ins, ReadChannel):
            reads.append(ins.channel)
            ch = artifact.channel(ins.channel)
            if ch.policy is not None:
                for pb in ch.policy.boxes:
                    prefix += _box_not_taken(sym.box(pb, subst))
        elif isinstance(ins, Sink):
            a = sym.cond(ins.trigger, subst)
            exits.append(Exit("sink", ins.id, tuple(prefix + [a]), freeze(subst)))
            prefix.append(a.negate())
    earlier: list[ConstraintAtom] = []
    for e in artifact.out_edges(bid):
        if e.guard is None:
            exits.append(Exit("edge", e.dst, tuple(prefix + earlier), freeze(subst)))
            break
        a = sym.cond(e.guard, subst)
        exits.append(Exit("edge", e.dst, tuple(prefix + earlier + [a]), freeze(subst)))
        earlier.append(a.negate())
    return exits, reads


def _trivially_false(atoms: Iterable[ConstraintAtom]) -> bool:
    return any(a.relation == "false" for a in atoms)


def enumerate_walks(
    artifact: ToyArtifact,
    targets: set[str],
    must_visit: set[str] | None = None,
    max_walks: int = 5000,
) -> WalkSet:
    """Acyclic walks from the entry that end by firing one of ``targets``.

    ``must_visit`` (if given) requires the walk to pass through one of those
    blocks. Walks longer than twice the block count are cut, as are walks
    beyond ``max_walks``; either event marks the set truncated.
    """
    sym = _Sym(artifact)
    cap = 2 * len(artifact.blocks)
    out = WalkSet()

    def dfs(bid, blocks, exits, atoms, subst, reads):
        if len(out.walks) >= max_walks:
            out.truncated, out.cap_hit = True, "walk-count"
            return
        if len(blocks) > cap:
            out.truncated, out.cap_hit = True, "length"
            return
        exs, rd = scan_block(artifact, bid, subst, sym)
        reads = reads + tuple((bid, c) for c in rd)
        visited = must_visit is None or any(b in must_visit for b in blocks)
        for ex in exs:
            new_atoms = atoms + ex.atoms
            if _trivially_false(ex.atoms):
                continue
            if ex.kind == "sink":
                if ex.target in targets and visited:
                    out.walks.append(
                        Walk(blocks, exits + (f"sink:{ex.target}",), new_atoms, ex.target, reads)
                    )
                continue
            if ex.target in blocks:
                continue
            dfs(
                ex.target,
                blocks + (ex.target,),
                exits + (f"{ex.kind}:{ex.target}",),
                new_atoms,
                dict(ex.subst),
                reads,
            )

    start = artifact.entry
    dfs(start, (start,), (), (), sym.initial(), ())
    return out


def walk_for_blocks(artifact: ToyArtifact, blocks: list[str]) -> Walk:
    """The walk along ``blocks`` taking the first exit that leads onward.

    If the last block holds a sink the walk ends by firing the first one.
    """
    if not blocks:
        raise ValueError("empty path")
    bmap = artifact.block_map()
    for bid in blocks:
        if bid not in bmap:
            raise ValueError(f"path names missing block {bid!r}")
    sym = _Sym(artifact)
    subst = sym.initial()
    atoms: tuple = ()
    exits: tuple = ()
    reads: tuple = ()
    sink = None
    for i, bid in enumerate(blocks):
        exs, rd = scan_block(artifact, bid, subst, sym)
        reads += tuple((bid, c) for c in rd)
        if i + 1 < len(blocks):
            nxt = blocks[i + 1]
            ex = next((x for x in exs if x.kind != "sink" and x.target == nxt), None)
            if ex is None:
                raise ValueError(f"{bid} -> {nxt} is not a transition")
            atoms += ex.atoms
            exits += (f"{ex.kind}:{nxt}",)
            subst = dict(ex.subst)
        else:
            ex = next((x for x in exs if x.kind == "sink"), None)
            if ex is not None:
                atoms += ex.atoms
                exits += (f"sink:{ex.target}",)
                sink = ex.target
    return Walk(tuple(blocks), exits, atoms, sink, reads)


def live_blocks(artifact: ToyArtifact, budget: int = 1_000_000) -> set[str]:
    """Blocks reached by at least one satisfiable (or undecided) walk prefix."""
    sym = _Sym(artifact)
    domains = artifact.domains()
    live: set[str] = set()

    def dfs(bid, blocks, atoms, subst):
        verdict = solve(list(atoms), budget, domains=domains)
        if verdict.status == "Unsat":
            return
        live.add(bid)
        exs, _ = scan_block(artifact, bid, subst, sym)
        for ex in exs:
            if ex.kind == "sink" or ex.target in blocks or _trivially_false(ex.atoms):
                continue
            dfs(ex.target, blocks | {ex.target}, atoms + ex.atoms, dict(ex.subst))

    dfs(artifact.entry, frozenset([artifact.entry]), (), sym.initial())
    return live


def defined_before(walk: Walk, artifact: ToyArtifact) -> list[set[str]]:
    """For each walk position, the variables already defined on entry to it.

    State variables are always defined; a message field becomes defined once a
    block strictly earlier on the walk has read its channel; a local once an
    earlier block has assigned it.
    """
    vmap = artifact.var_map()
    always = {n for n, v in vmap.items() if v.role == "state"}
    cur = set(always)
    out = []
    for bid in walk.blocks:
        out.append(set(cur))
        for ins in artifact.block(bid).instrs:
            if isinstance(ins, ReadChannel):
                cur.update(artifact.channel(ins.channel).fields)
            elif isinstance(ins, Assign):
                cur.add(ins.target)
    return out
