"""Constraint atoms over bounded domains and a budgeted enumeration solver.

The solver first prunes each variable's domain with the unary atoms, which
costs nothing. Variables tied together by a binary atom or a multi-variable
clause are then enumerated in mixed-radix order, and every leaf evaluated
costs one budget unit. When no variable needs enumerating, the pruned minima
form the model and the single model check costs one unit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from scara import kernels
from scara.model import (
    ALL_FAMILIES,
    NEGATED,
    STATE_FAMILIES,
    Box,
    BoxDNF,
    Cond,
    VarRef,
    eval_relation,
)

Domains = Mapping[str, Sequence[int]]

_BINARY_OPS = {"eq": 0, "neq": 1, "le": 2, "ge": 3, "lt": 4, "gt": 5}


class EncodingError(ValueError):
    """An atom names a variable without a declared finite domain."""


class DegenerateProjection(ValueError):
    """Projection requested over no variables."""


class NothingToRelax(ValueError):
    """Only path atoms are present."""


class ProjectionTooLarge(RuntimeError):
    pass


@dataclass(frozen=True)
class ConstraintAtom:
    """``var relation operand`` tagged with the family it came from.

    Besides the public relations, three internal forms occur:
    ``not-in-box`` (operand is a :class:`Box`; true when some listed variable
    falls outside its set), ``false`` and ``true``.
    """

    var: str
    relation: str
    operand: object = None
    family: str = "path"

    @property
    def vars(self) -> tuple[str, ...]:
        if self.relation == "not-in-box":
            return self.operand.vars
        if self.relation in ("false", "true"):
            return ()
        if isinstance(self.operand, VarRef):
            return (self.var, self.operand.name)
        return (self.var,)

    def holds(self, env: Mapping[str, int]) -> bool:
        if self.relation == "true":
            return True
        if self.relation == "false":
            return False
        if self.relation == "not-in-box":
            return not self.operand.matches(env)
        if self.relation == "fsm-precedes":
            raise ValueError("fsm-precedes atoms must be lowered before evaluation")
        return eval_relation(env[self.var], self.relation, self.operand, env)

    def negate(self) -> "ConstraintAtom":
        if self.relation == "true":
            return ConstraintAtom("", "false", None, self.family)
        if self.relation == "false":
            return ConstraintAtom("", "true", None, self.family)
        if self.relation in NEGATED:
            return ConstraintAtom(self.var, NEGATED[self.relation], self.operand, self.family)
        raise ValueError(f"cannot negate {self.relation!r}")


def atom_from_cond(c: Cond, family: str = "path") -> ConstraintAtom:
    return ConstraintAtom(c.var, c.rel, c.operand, family)


def in_box_atoms(box: Box, family: str = "path") -> list[ConstraintAtom]:
    return [ConstraintAtom(v, "in-set", frozenset(s), family) for v, s in box.items]


def not_in_box(box: Box, family: str = "path") -> ConstraintAtom:
    return ConstraintAtom("", "not-in-box", box, family)


def to_sexpr(a: ConstraintAtom) -> str:
    """Debug rendering, e.g. ``(path gt len (ref cap 0))``."""

    def op(x) -> str:
        if isinstance(x, VarRef):
            return f"(ref {x.name} {x.offset})"
        if isinstance(x, Box):
            inner = " ".join(f"({v} {' '.join(map(str, sorted(s)))})" for v, s in x.items)
            return f"(box {inner})"
        if isinstance(x, (tuple, list, frozenset, set)):
            vals = sorted(x) if isinstance(x, (frozenset, set)) else list(x)
            return "(" + " ".join(str(v) for v in vals) + ")"
        return str(x)

    if a.relation in ("true", "false"):
        return f"({a.family} {a.relation})"
    if a.relation == "not-in-box":
        return f"({a.family} not-in-box {op(a.operand)})"
    return f"({a.family} {a.relation} {a.var} {op(a.operand)})"


# ------------------------------------------------------------ state prior


@dataclass
class OperationalStatePrior:
    """Per-family prior atoms with an evidence score for each family."""

    atoms: dict[str, tuple[ConstraintAtom, ...]] = field(
        default_factory=lambda: {f: () for f in STATE_FAMILIES}
    )
    evidence: dict[str, float] = field(default_factory=lambda: {f: 1.0 for f in STATE_FAMILIES})

    def __post_init__(self):
        if set(self.atoms) != set(STATE_FAMILIES) or set(self.evidence) != set(STATE_FAMILIES):
            raise ValueError("prior families must be exactly " + ", ".join(STATE_FAMILIES))

    def all_atoms(self) -> list[ConstraintAtom]:
        return [a for f in STATE_FAMILIES for a in self.atoms[f]]


# ------------------------------------------------------------------ solver


@dataclass(frozen=True)
class SolveVerdict:
    status: str  # "Sat" | "Unsat" | "Unknown"
    units_spent: int
    model: dict | None = None


@dataclass
class _Compiled:
    names: list[str]
    pruned: dict[str, np.ndarray]
    binaries: list[tuple[str, str, int, int]]
    clauses: list[list[tuple[str, frozenset]]]
    refuted: bool = False

    def enumerated(self) -> list[str]:
        used = set()
        for a, b, _, _ in self.binaries:
            used.update((a, b))
        for cl in self.clauses:
            used.update(v for v, _ in cl)
        return [n for n in self.names if n in used]


def _unary_mask(vals: np.ndarray, rel: str, operand) -> np.ndarray:
    if rel == "eq":
        return vals == operand
    if rel == "neq":
        return vals != operand
    if rel == "le":
        return vals <= operand
    if rel == "ge":
        return vals >= operand
    if rel == "lt":
        return vals < operand
    if rel == "gt":
        return vals > operand
    if rel == "in-range":
        return (vals >= operand[0]) & (vals <= operand[1])
    if rel == "nin-range":
        return (vals < operand[0]) | (vals > operand[1])
    if rel == "in-set":
        return np.isin(vals, np.fromiter(operand, dtype=np.int64, count=len(operand)))
    if rel == "nin-set":
        return ~np.isin(vals, np.fromiter(operand, dtype=np.int64, count=len(operand)))
    raise EncodingError(f"relation {rel!r} cannot be solved directly")


def _compile(atoms: Iterable[ConstraintAtom], domains: Domains) -> _Compiled:
    names = list(domains)
    pruned = {n: np.asarray(domains[n], dtype=np.int64) for n in names}
    comp = _Compiled(names, pruned, [], [])
    for a in atoms:
        for v in a.vars:
            if v not in pruned:
                raise EncodingError(f"undeclared variable {v!r}")
        rel = a.relation
        if rel == "true":
            continue
        if rel == "false":
            comp.refuted = True
            continue
        if rel == "fsm-precedes":
            raise EncodingError("fsm-precedes atoms must be lowered by encode()")
        if rel == "not-in-box":
            items = a.operand.items
            if any(not s for _, s in items):
                continue  # an empty box never matches, so the clause is true
            if not items:
                comp.refuted = True
                continue
            if len(items) == 1:
                v, s = items[0]
                comp.pruned[v] = pruned[v][_unary_mask(pruned[v], "nin-set", s)]
                continue
            comp.clauses.append(list(items))
            continue
        if isinstance(a.operand, VarRef):
            if rel not in _BINARY_OPS:
                raise EncodingError(f"relation {rel!r} takes a literal operand")
            if a.operand.name == a.var:
                vals = pruned[a.var]
                keep = _unary_mask(vals, rel, vals + a.operand.offset)
                comp.pruned[a.var] = vals[keep]
            else:
                comp.binaries.append((a.var, a.operand.name, _BINARY_OPS[rel], a.operand.offset))
            continue
        vals = pruned[a.var]
        comp.pruned[a.var] = vals[_unary_mask(vals, rel, a.operand)]
    if any(len(v) == 0 for v in comp.pruned.values()):
        comp.refuted = True
    return comp


@dataclass
class _Problem:
    enum: list[str]
    sizes: np.ndarray
    strides: np.ndarray
    total: int
    args: tuple


def _problem(comp: _Compiled) -> _Problem:
    enum = comp.enumerated()
    pos = {n: i for i, n in enumerate(enum)}
    sizes = np.array([len(comp.pruned[n]) for n in enum], dtype=np.int64)
    strides, total = kernels.strides_for(sizes)
    vals_off = np.zeros(len(enum), dtype=np.int64)
    if len(enum):
        vals_off[1:] = np.cumsum(sizes)[:-1]
    vals_flat = (
        np.concatenate([comp.pruned[n] for n in enum]) if enum else np.zeros(0, dtype=np.int64)
    )
    nb = len(comp.binaries)
    bin_a = np.array([pos[a] for a, _, _, _ in comp.binaries], dtype=np.int64).reshape(nb)
    bin_b = np.array([pos[b] for _, b, _, _ in comp.binaries], dtype=np.int64).reshape(nb)
    bin_op = np.array([o for _, _, o, _ in comp.binaries], dtype=np.int64).reshape(nb)
    bin_off = np.array([f for _, _, _, f in comp.binaries], dtype=np.int64).reshape(nb)
    cstart, clen, evar, eoff, masks = [], [], [], [], []
    moff = 0
    for cl in comp.clauses:
        cstart.append(len(evar))
        clen.append(len(cl))
        for v, s in cl:
            evar.append(pos[v])
            eoff.append(moff)
            m = np.isin(comp.pruned[v], np.fromiter(s, dtype=np.int64, count=len(s)))
            masks.append(m.astype(np.uint8))
            moff += len(m)
    i64 = lambda xs: np.array(xs, dtype=np.int64).reshape(len(xs))  # noqa: E731
    mask_flat = np.concatenate(masks) if masks else np.zeros(0, dtype=np.uint8)
    args = (
        sizes,
        strides,
        vals_flat,
        vals_off,
        bin_a,
        bin_b,
        bin_op,
        bin_off,
        i64(cstart),
        i64(clen),
        i64(evar),
        i64(eoff),
        mask_flat,
    )
    return _Problem(enum, sizes, strides, total, args)


def _digits(index: int, prob: _Problem) -> list[int]:
    return [int((index // int(s)) % int(n)) for s, n in zip(prob.strides, prob.sizes)]


def _model(comp: _Compiled, prob: _Problem, index: int) -> dict[str, int]:
    model = {n: int(comp.pruned[n][0]) for n in comp.names}
    for n, d in zip(prob.enum, _digits(index, prob)):
        model[n] = int(comp.pruned[n][d])
    return model


def solve(
    atoms: Sequence[ConstraintAtom],
    budget_units: int,
    seed: int = 0,
    domains: Domains | None = None,
) -> SolveVerdict:
    """Decide the conjunction of ``atoms`` within ``budget_units`` leaf checks.

    ``seed`` is accepted for interface stability; the visiting order is fixed,
    so results depend on the atoms and the budget alone.
    """
    del seed
    if domains is None:
        raise EncodingError("solve() needs the declared domains")
    comp = _compile(atoms, domains)
    if comp.refuted:
        return SolveVerdict("Unsat", 0)
    if budget_units < 1:
        return SolveVerdict("Unknown", 0)
    prob = _problem(comp)
    if not prob.enum:
        return SolveVerdict("Sat", 1, _model(comp, prob, 0))
    limit = min(int(budget_units), prob.total)
    found, units = kernels.first_leaf(*prob.args, 0, limit)
    found, units = int(found), int(units)
    if found >= 0:
        model = _model(comp, prob, found)
        return SolveVerdict("Sat", units, model)
    if limit == prob.total:
        return SolveVerdict("Unsat", units)
    return SolveVerdict("Unknown", units)


def check_model(atoms: Iterable[ConstraintAtom], model: Mapping[str, int]) -> bool:
    return all(a.holds(model) for a in atoms)


def enumerate_models(
    atoms: Sequence[ConstraintAtom], domains: Domains, cap: int = 1 << 12
) -> tuple[list[dict[str, int]], bool]:
    """Up to ``cap`` models in enumeration order and whether the list is complete.

    Variables outside the enumerated set take every value of their pruned
    domain, so the listing is the full model set of the conjunction.
    """
    comp = _compile(atoms, domains)
    if comp.refuted:
        return [], True
    prob = _problem(comp)
    free = [n for n in comp.names if n not in prob.enum]
    if prob.enum:
        idx, n, complete = kernels.all_leaves(*prob.args, prob.total, cap)
        cores = [_model(comp, prob, int(i)) for i in idx[: int(n)]]
    else:
        cores, complete = [_model(comp, prob, 0)], True
    out: list[dict[str, int]] = []
    for core in cores:
        stack = [dict(core)]
        for v in free:
            stack = [dict(m, **{v: int(x)}) for m in stack for x in comp.pruned[v]]
            if len(stack) > cap:
                break
        for m in stack:
            if len(out) == cap:
                return out, False
            out.append(m)
    return out, complete


# -------------------------------------------------------------- projection


def _merge_boxes(boxes: list[dict[str, frozenset]], order: list[str]) -> list[dict[str, frozenset]]:
    changed = True
    while changed and len(boxes) > 1:
        changed = False
        for v in order:
            groups: dict[tuple, dict[str, frozenset]] = {}
            for bx in boxes:
                key = tuple((u, bx[u]) for u in order if u != v)
                if key in groups:
                    merged = groups[key][v] | bx[v]
                    if merged != groups[key][v]:
                        groups[key] = dict(groups[key], **{v: merged})
                    changed = True
                else:
                    groups[key] = bx
            boxes = list(groups.values())
    return boxes


def project_observables(
    atoms: Sequence[ConstraintAtom],
    obs: Iterable[str],
    domains: Domains,
    cap: int = 1 << 20,
) -> BoxDNF:
    """Exact existential projection of the atoms onto ``obs``.

    A variable whose set covers its whole declared domain is left out of the
    box, so a tautology projects to a single unconstrained box.
    """
    order = [v for v in domains if v in set(obs)]
    missing = set(obs) - set(order)
    if missing:
        raise EncodingError(f"undeclared variable(s) {sorted(missing)}")
    if not order:
        raise DegenerateProjection("no observable variables to project onto")
    comp = _compile(atoms, domains)
    if comp.refuted:
        return BoxDNF(())
    prob = _problem(comp)
    obs_e = [v for v in order if v in prob.enum]
    obs_n = [v for v in order if v not in prob.enum]
    free_sets = {v: frozenset(int(x) for x in comp.pruned[v]) for v in obs_n}
    if prob.enum:
        idx, n, complete = kernels.all_leaves(*prob.args, prob.total, cap)
        if not complete:
            raise ProjectionTooLarge(f"more than {cap} models")
        idx = idx[: int(n)]
        if len(idx) == 0:
            return BoxDNF(())
        pos = [prob.enum.index(v) for v in obs_e]
        points = set()
        for i in idx:
            d = _digits(int(i), prob)
            points.add(tuple(int(comp.pruned[v][d[p]]) for v, p in zip(obs_e, pos)))
        boxes = [
            dict(free_sets, **{v: frozenset([x]) for v, x in zip(obs_e, pt)})
            for pt in sorted(points)
        ]
    else:
        boxes = [dict(free_sets)]
    boxes = _merge_boxes(boxes, order)
    full = {v: frozenset(domains[v]) for v in order}
    out = []
    for bx in boxes:
        out.append(Box.of({v: s for v, s in bx.items() if s != full[v]}))
    return BoxDNF(tuple(sorted(set(out), key=_box_key)))


def _box_key(b: Box):
    return tuple((v, tuple(sorted(s))) for v, s in b.items)


# -------------------------------------------------------------- relaxation

_RELAX_ORDER = {f: i for i, f in enumerate(STATE_FAMILIES)}


def relax(
    atoms: Sequence[ConstraintAtom], prior: OperationalStatePrior
) -> tuple[list[ConstraintAtom], str]:
    """Drop every atom of the present family with the lowest evidence."""
    present = sorted({a.family for a in atoms if a.family != "path"}, key=_RELAX_ORDER.get)
    if not present:
        raise NothingToRelax("only path atoms are present")
    fam = min(present, key=lambda f: (prior.evidence.get(f, 1.0), _RELAX_ORDER[f]))
    return [a for a in atoms if a.family != fam], fam


def families_of(atoms: Iterable[ConstraintAtom]) -> list[str]:
    fams = {a.family for a in atoms}
    return [f for f in ALL_FAMILIES if f in fams]


# ----------------------------------------------------------------- lowering


def lower_atom(a: ConstraintAtom, artifact) -> ConstraintAtom:
    """Translate enum names to indices and fsm-precedes to a state set."""
    vmap = artifact.var_map()
    if a.relation in ("true", "false", "not-in-box"):
        return a
    if a.var not in vmap:
        raise EncodingError(f"undeclared variable {a.var!r}")
    spec = vmap[a.var]
    if a.relation == "fsm-precedes":
        if a.family not in ("proto", "runtime"):
            raise EncodingError("fsm-precedes is only legal in the proto and runtime families")
        chan = next((c for c in artifact.channels if c.state_var == a.var and c.fsm), None)
        if chan is None:
            raise EncodingError(f"{a.var!r} is not the state variable of a protocol channel")
        fsm = chan.fsm
        starts = [a.operand] if isinstance(a.operand, str) else list(a.operand)
        live = fsm.reachable_from([fsm.initial])
        reach = fsm.reachable_from([q for q in starts if q in live])
        idx = frozenset(spec.encode(q) for q in reach)
        return ConstraintAtom(a.var, "in-set", idx, a.family)
    op = a.operand
    if isinstance(op, VarRef):
        return a
    if a.relation in ("in-set", "nin-set"):
        op = frozenset(spec.encode(x) for x in op)
    elif a.relation in ("in-range", "nin-range"):
        op = (spec.encode(op[0]), spec.encode(op[1]))
    else:
        op = spec.encode(op)
    return ConstraintAtom(a.var, a.relation, op, a.family)


def domain_atoms(artifact) -> list[ConstraintAtom]:
    """Declared domain bounds of the solver-visible variables.

    They are tautologies over the declared domains and are tagged ``path`` so
    that relaxation and refutation attribution never single them out.
    """
    out = []
    for v in artifact.variables:
        if v.role == "local":
            continue
        dom = v.domain()
        if v.kind == "int" and not v.values:
            out.append(ConstraintAtom(v.name, "in-range", (dom[0], dom[-1]), "path"))
        else:
            out.append(ConstraintAtom(v.name, "in-set", frozenset(dom), "path"))
    return out


def encode(prior: OperationalStatePrior, b, path) -> list[ConstraintAtom]:
    """Path atoms of ``path`` followed by the prior atoms and domain bounds.

    ``path`` is either a list of block ids or a :class:`scara.paths.Walk`.
    """
    from scara.paths import Walk, walk_for_blocks

    walk = path if isinstance(path, Walk) else walk_for_blocks(b, list(path))
    atoms = list(walk.atoms)
    atoms += [lower_atom(a, b) for a in prior.all_atoms()]
    atoms += domain_atoms(b)
    return atoms
