"""Per-case orchestration: normalise, rank, verify, route and run the bounded
synthesis/validation loop with tier fallback."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from scara.caca import Candidate, Config, normalize_with_na, rank, tier_set
from scara.cva import Validation, validate
from scara.manifest import CaseManifest
from scara.model import ToyArtifact, validate_case
from scara.osva import ReachabilityResult, verify
from scara.rsa import (
    TEMPLATE_ORDER,
    Policy,
    RejectionConstraint,
    Remedy,
    TierInfeasible,
    render_policy,
    synth_tier1,
    synth_tier2,
    synth_tier3,
)

FINAL_STATES = (
    "VerifiedRemediation",
    "ResolvedFalsePositive",
    "UnconfirmedCandidate",
    "UnresolvedOrAdvisory",
    "RemediationFailed",
)


@dataclass
class TraceStep:
    tier: int
    iteration: int
    remedy: dict
    outcome: dict  # {"epsilon": ...} or {"delta": ...}
    candidates: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = {"tier": self.tier, "iteration": self.iteration, "remedy": self.remedy, **self.outcome}
        if self.candidates:
            d["candidates"] = self.candidates
        return d


@dataclass
class CaseOutcome:
    candidate_id: str
    final_state: str
    detail: dict = field(default_factory=dict)
    trace: list[TraceStep] = field(default_factory=list)
    verification: ReachabilityResult | None = None
    remedy: Remedy | None = None
    advisory: Remedy | None = None
    notes: list[str] = field(default_factory=list)
    # kept in memory for checks; never serialised
    accepted_artifact: ToyArtifact | None = None

    @property
    def label(self) -> str:
        return self.verification.label if self.verification else "Unknown"

    def to_dict(self) -> dict:
        return {
            "candidate": self.candidate_id,
            "final_state": self.final_state,
            "label": self.label,
            "detail": self.detail,
            "trace": [s.to_dict() for s in self.trace],
            "verification": self.verification.to_dict() if self.verification else None,
            "remedy": self.remedy.to_dict() if self.remedy else None,
            "advisory": self.advisory.to_dict() if self.advisory else None,
            "notes": list(self.notes),
        }


@dataclass
class CaseReport:
    case_id: str
    partition: str
    outcomes: list[CaseOutcome] = field(default_factory=list)
    na_rows: list[dict] = field(default_factory=list)
    error: str | None = None
    config: dict = field(default_factory=dict)
    # enum value names per variable, used only when rendering rule files
    enums: dict = field(default_factory=dict, repr=False)

    def outcome_for(self, cand_id: str | None) -> CaseOutcome | None:
        for o in self.outcomes:
            if o.candidate_id == cand_id:
                return o
        return self.outcomes[0] if self.outcomes else None

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "partition": self.partition,
            "outcomes": [o.to_dict() for o in self.outcomes],
            "na_rows": self.na_rows,
            "error": self.error,
            "config": self.config,
        }


def _step(tier: int, it: int, r: Remedy, v: Validation) -> TraceStep:
    if v.accepted:
        out: dict[str, Any] = {"epsilon": v.certificate.to_dict()}
    else:
        out = {"delta": v.delta.to_dict()}
    out["gates"] = list(v.gates)
    return TraceStep(tier, it, r.to_dict(), out)


def rsa_cva_loop(
    b: ToyArtifact,
    g,
    c: Candidate,
    witness: ReachabilityResult,
    label: str,
    tiers,
    cfg: Config,
    enforcement_point: bool = False,
    harness: bool = False,
    benign_traces=(),
) -> CaseOutcome:
    if label not in ("SatStrict", "SatRelaxed"):
        raise ValueError("remedies are only synthesised for satisfiable candidates")
    out = CaseOutcome(c.id, "RemediationFailed", verification=witness)
    last_delta: RejectionConstraint | None = None
    for tier in sorted(tiers, reverse=True):
        if tier == 3:
            try:
                cands = synth_tier3(c, witness, b, g, (), cfg.k_candidates, cfg)
            except TierInfeasible as exc:
                out.notes.append(f"tier 3 infeasible: {exc}")
                continue
            vals = [
                validate(b, g, c, r, witness, cfg, harness, benign_traces) for r in cands
            ]
            ok = [(r, v) for r, v in zip(cands, vals) if v.accepted]
            details = [
                {"template": r.payload.template, **v.to_dict()} for r, v in zip(cands, vals)
            ]
            if ok:
                r, v = min(
                    ok, key=lambda rv: (-rv[1].bcp, TEMPLATE_ORDER.index(rv[0].payload.template))
                )
                step = _step(3, 1, r, v)
                step.candidates = details
                out.trace.append(step)
                return _verified(out, 3, r, v)
            step = _step(3, 1, cands[0], vals[0])
            step.candidates = details
            out.trace.append(step)
            last_delta = vals[0].delta
            continue
        deltas: list[RejectionConstraint] = []
        for it in range(1, cfg.k_iters + 1):
            try:
                if tier == 2:
                    r = synth_tier2(c, witness, b, deltas)
                else:
                    r = synth_tier1(c, witness, b, deltas, enforcement_point)
            except TierInfeasible as exc:
                out.notes.append(f"tier {tier} infeasible at iteration {it}: {exc}")
                break
            r = Remedy(r.tier, r.payload, it, r.advisory, r.preserve)
            v = validate(b, g, c, r, witness, cfg, harness, benign_traces)
            out.trace.append(_step(tier, it, r, v))
            if v.accepted:
                return _verified(out, tier, r, v)
            last_delta = v.delta
            if cfg.feedback:
                deltas.append(v.delta)
    if enforcement_point:
        try:
            adv = synth_tier1(c, witness, b, (), True)
            out.advisory = Remedy(1, adv.payload, 0, True)
            out.final_state = "UnresolvedOrAdvisory"
            out.detail = {"advisory": True, "last_delta": last_delta.to_dict() if last_delta else None}
            return out
        except TierInfeasible as exc:
            out.notes.append(f"advisory infeasible: {exc}")
    out.final_state = "RemediationFailed"
    out.detail = {"last_delta": last_delta.to_dict() if last_delta else None}
    return out


def _verified(out: CaseOutcome, tier: int, r: Remedy, v: Validation) -> CaseOutcome:
    out.final_state = "VerifiedRemediation"
    out.remedy = r
    out.detail = {"tier": tier, "epsilon": v.certificate.to_dict()}
    out.accepted_artifact = v.artifact
    return out


def route(
    case: CaseManifest, c: Candidate, res: ReachabilityResult, cfg: Config
) -> CaseOutcome:
    b, g, omega = case.artifact, case.ssckg, case.omega
    if res.label == "Unsat":
        return CaseOutcome(
            c.id,
            "ResolvedFalsePositive",
            {"reason": res.reason, "refuting_families": res.refuting_families},
            verification=res,
        )
    if res.label == "Unknown":
        out = CaseOutcome(c.id, "UnresolvedOrAdvisory", {"reason": res.reason}, verification=res)
        if omega.replay.enforcement_point:
            try:
                out.advisory = synth_tier1(c, None, b, (), True)
                out.detail["advisory"] = True
            except TierInfeasible as exc:
                out.notes.append(f"advisory infeasible: {exc}")
        return out
    if res.label == "SatRelaxed" and not omega.replay.harness:
        return CaseOutcome(
            c.id,
            "UnconfirmedCandidate",
            {"witness": res.witness, "relaxed_family": res.relaxed_family},
            verification=res,
        )
    return rsa_cva_loop(
        b, g, c, res, res.label, tier_set(b.availability), cfg,
        omega.replay.enforcement_point, omega.replay.harness, case.benign_traces,
    )


def case_config(
    case: CaseManifest, file_overrides: dict | None = None, cli_overrides: dict | None = None
) -> Config:
    """Defaults < manifest overrides < config file < command line."""
    cfg = Config().with_overrides(case.config_overrides)
    return cfg.with_overrides(file_overrides or {}).with_overrides(cli_overrides or {})


def run_case(case: CaseManifest, cfg: Config) -> CaseReport:
    rep = CaseReport(case.case_id, case.partition, config=cfg.to_dict())
    rep.enums = {v.name: v.values for v in case.artifact.variables if v.kind == "enum"}
    violations = validate_case(case.artifact, case.ssckg)
    if violations:
        rep.error = "; ".join(f"{v.kind}: {v.detail}" for v in violations)
        return rep
    cands, na = normalize_with_na(case.alerts, case.ssckg, case.artifact, case.omega)
    rep.na_rows = [{"alert": dict(n.alert), "reason": n.reason} for n in na]
    for c in rank(cands, case.ssckg, cfg):
        res = verify(case.artifact, case.ssckg, c, cfg)
        rep.outcomes.append(route(case, c, res, cfg))
    return rep


def policy_documents(rep: CaseReport) -> dict[str, str]:
    """Rule documents for every Tier-1 policy (accepted or advisory)."""
    out = {}
    for o in rep.outcomes:
        for r in (o.remedy, o.advisory):
            if r is not None and isinstance(r.payload, Policy):
                name = f"{rep.case_id}__{o.candidate_id}".replace(":", "_").replace(">", "")
                out[name + (".advisory" if r.advisory else "") + ".rule"] = render_policy(
                    rep.case_id, o.candidate_id, r, rep.enums
                )
    return out
