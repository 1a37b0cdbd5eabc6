"""Suite runner, metric suite and report emission.

Outcomes are scored against the per-case ground truth. A SatStrict label, or
a SatRelaxed label whose witness replays to the sink on the unremediated
artifact, counts as a positive prediction. Unsat counts as negative. Unknown
and unconfirmed SatRelaxed verdicts are reported separately as the unknown
rate and never enter the four confusion counts.
"""

from __future__ import annotations

import json
import logging
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from scara.controller import CaseReport, case_config, policy_documents, run_case
from scara.cva import replay
from scara.manifest import CaseManifest, load_case, suite_paths

log = logging.getLogger(__name__)

DEFAULT_KS = (1, 3, 5, 10, 20, 50)
REPORT_VERSION = 1


# ------------------------------------------------------------------ metrics


@dataclass(frozen=True)
class Confusion:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0
    unknown: int = 0
    excluded: int = 0

    @staticmethod
    def _ratio(num: int, den: int) -> float:
        return num / den if den else 0.0

    @property
    def precision(self) -> float:
        return self._ratio(self.tp, self.tp + self.fp)

    @property
    def recall(self) -> float:
        return self._ratio(self.tp, self.tp + self.fn)

    @property
    def fpr(self) -> float:
        return self._ratio(self.fp, self.fp + self.tn)

    @property
    def fnr(self) -> float:
        return self._ratio(self.fn, self.fn + self.tp)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn + self.unknown

    @property
    def unknown_rate(self) -> float:
        return self._ratio(self.unknown, self.total)

    def to_dict(self) -> dict:
        return {
            "TP": self.tp,
            "FP": self.fp,
            "TN": self.tn,
            "FN": self.fn,
            "unknown": self.unknown,
            "excluded": self.excluded,
            "precision": self.precision,
            "recall": self.recall,
            "fpr": self.fpr,
            "fnr": self.fnr,
            "unknown_rate": self.unknown_rate,
        }


def confusion(predictions: Iterable[str], truths: Iterable[str | None]) -> Confusion:
    """Score predicted classes against ground truth.

    ``predictions`` holds ``"reachable"``, ``"infeasible"`` or ``"unknown"``
    per case. ``truths`` holds ``"reachable"`` or ``"infeasible"``. Any other
    truth value (missing or designed-unknown) with a definite prediction is
    excluded with a warning.
    """
    tp = fp = tn = fn = unk = exc = 0
    for pred, truth in zip(predictions, truths, strict=True):
        if pred == "unknown":
            unk += 1
        elif truth not in ("reachable", "infeasible"):
            log.warning("case without a decisive ground-truth label excluded from scoring")
            exc += 1
        elif pred == "reachable":
            if truth == "reachable":
                tp += 1
            else:
                fp += 1
        elif pred == "infeasible":
            if truth == "infeasible":
                tn += 1
            else:
                fn += 1
        else:
            raise ValueError(f"unknown prediction class {pred!r}")
    return Confusion(tp, fp, tn, fn, unk, exc)


def best_rank(ranked: Sequence[Sequence[str]], truth: Iterable[Sequence[str]]) -> int | None:
    """1-based rank of the first ranked path that matches a ground-truth path."""
    wanted = {tuple(p) for p in truth}
    for i, p in enumerate(ranked, start=1):
        if tuple(p) in wanted:
            return i
    return None


def recall_at_k(ranks: Iterable[int | None], ks: Sequence[int] = DEFAULT_KS) -> dict[int, float]:
    """Fraction of cases whose best ground-truth rank is at most K.

    ``None`` means no ground-truth path was ranked at all (a miss at every K).
    """
    ranks = list(ranks)
    if not ranks:
        return {k: 0.0 for k in ks}
    return {k: sum(1 for r in ranks if r is not None and r <= k) / len(ranks) for k in ks}


def cliffs_delta(xs: Sequence[float], ys: Sequence[float]) -> float:
    if not xs or not ys:
        raise ValueError("cliffs_delta needs two non-empty samples")
    gt = lt = 0
    for x in xs:
        for y in ys:
            if x > y:
                gt += 1
            elif x < y:
                lt += 1
    return (gt - lt) / (len(xs) * len(ys))


# ------------------------------------------------------------- per case


@dataclass
class CaseRecord:
    case_id: str
    partition: str
    truth: str | None
    label: str
    predicted: str
    final_state: str
    confirmed: bool
    tier: int | None
    iterations: int
    rank: int | None
    units_to_first_sat: int | None
    solver_queries: int
    report: CaseReport
    has_truth_paths: bool = False

    def summary(self) -> dict:
        return {
            "case_id": self.case_id,
            "partition": self.partition,
            "truth": self.truth,
            "label": self.label,
            "predicted": self.predicted,
            "final_state": self.final_state,
            "confirmed": self.confirmed,
            "tier": self.tier,
            "iterations": self.iterations,
            "rank": self.rank,
            "units_to_first_sat": self.units_to_first_sat,
            "solver_queries": self.solver_queries,
        }


def _witness_reaches_sink(case: CaseManifest, outcome) -> bool:
    res = outcome.verification
    if res is None or res.witness is None or res.witness_walk is None:
        return False
    sink = res.witness_walk.sink
    return bool(sink) and replay(case.artifact, res.witness, sink, True).sink_reached


def record_for(case: CaseManifest, rep: CaseReport) -> CaseRecord:
    gt = case.ground_truth or {}
    o = rep.outcome_for(gt.get("candidate"))
    if o is None:
        label, state, confirmed, tier, iters, rank, u, q = "Unknown", "error", False, None, 0, None, None, 0
    else:
        label = o.label
        state = o.final_state
        confirmed = label == "SatStrict" or (
            label == "SatRelaxed" and case.omega.replay.harness and _witness_reaches_sink(case, o)
        )
        tier = o.remedy.tier if o.remedy is not None and state == "VerifiedRemediation" else None
        iters = len(o.trace)
        v = o.verification
        rank = best_rank(v.ranked_walks, gt.get("vulnerable_paths", [])) if v else None
        u = v.units_to_first_sat if v else None
        q = v.solver_queries if v else 0
    if label == "Unsat":
        pred = "infeasible"
    elif label in ("SatStrict", "SatRelaxed") and confirmed:
        pred = "reachable"
    else:
        pred = "unknown"
    return CaseRecord(
        rep.case_id, rep.partition, gt.get("label"), label, pred, state, confirmed,
        tier, iters, rank, u, q, rep, bool(gt.get("vulnerable_paths")),
    )


def _run_one(args) -> tuple[CaseManifest, CaseReport]:
    path, file_over, cli_over = args
    case = load_case(path)
    cfg = case_config(case, file_over, cli_over)
    return case, run_case(case, cfg)


# ---------------------------------------------------------------- suite


@dataclass
class SuiteResult:
    records: list[CaseRecord] = field(default_factory=list)
    wall_clock_s: float | None = None

    @property
    def reports(self) -> list[CaseReport]:
        return [r.report for r in self.records]

    def subset(self, partition: str | None) -> list[CaseRecord]:
        return [r for r in self.records if partition is None or r.partition == partition]

    def partitions(self) -> list[str]:
        return sorted({r.partition for r in self.records})

    def confusion(self, partition: str | None = None) -> Confusion:
        rs = self.subset(partition)
        return confusion([r.predicted for r in rs], [r.truth for r in rs])

    def label_mix(self, partition: str | None = None) -> dict[str, float]:
        rs = self.subset(partition)
        n = len(rs)
        counts = Counter(r.label for r in rs)
        return {lab: (counts[lab] / n if n else 0.0) for lab in ("SatStrict", "SatRelaxed", "Unsat", "Unknown")}

    def remediation(self, partition: str | None = None) -> dict:
        rs = self.subset(partition)
        strict = [r for r in rs if r.label == "SatStrict"]
        per_tier = {t: sum(1 for r in strict if r.tier == t) for t in (1, 2, 3)}
        verified = sum(per_tier.values())
        states = Counter(r.final_state for r in rs)
        return {
            "sat_strict_denominator": len(strict),
            "verified_over_sat_strict": verified,
            "success_rate": verified / len(strict) if strict else 0.0,
            "per_tier": {str(t): c for t, c in per_tier.items()},
            "final_states": dict(sorted(states.items())),
            "mean_iterations": (sum(r.iterations for r in strict) / len(strict)) if strict else 0.0,
        }

    def recall_table(self, partition: str | None = None, ks: Sequence[int] = DEFAULT_KS) -> dict[int, float]:
        rs = [r for r in self.subset(partition) if r.has_truth_paths]
        return recall_at_k([r.rank for r in rs], ks)

    def timing(self, partition: str | None = None) -> dict:
        rs = self.subset(partition)
        firsts = [r.units_to_first_sat for r in rs if r.label == "SatStrict" and r.units_to_first_sat is not None]
        confirmed = [r for r in rs if r.predicted == "reachable"]
        return {
            "mean_units_to_first_sat_strict": sum(firsts) / len(firsts) if firsts else 0.0,
            "max_units_to_first_sat_strict": max(firsts) if firsts else 0,
            "solver_queries_per_confirmed_path": (
                sum(r.solver_queries for r in confirmed) / len(confirmed) if confirmed else 0.0
            ),
            "solver_queries_total": sum(r.solver_queries for r in rs),
        }

    def summary(self, partition: str | None = None) -> dict:
        return {
            "cases": len(self.subset(partition)),
            "verification": self.confusion(partition).to_dict(),
            "label_mix": self.label_mix(partition),
            "remediation": self.remediation(partition),
            "recall_at_k": {str(k): v for k, v in self.recall_table(partition).items()},
            "diagnostics": self.timing(partition),
        }


def run_suite(
    suite: str | Path | Sequence[str | Path],
    file_overrides: Mapping | None = None,
    cli_overrides: Mapping | None = None,
    workers: int = 1,
) -> SuiteResult:
    """Run every manifest in ``suite`` (a directory or a list of files).

    Cases are independent, so ``workers > 1`` fans them out to a process pool.
    Records are merged in case-id order whatever order the workers finish in.
    """
    if isinstance(suite, (str, Path)):
        paths = suite_paths(suite)
    else:
        paths = [Path(p) for p in suite]
    jobs = [(str(p), dict(file_overrides or {}), dict(cli_overrides or {})) for p in paths]
    t0 = time.perf_counter()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(_run_one, jobs))
    else:
        done = [_run_one(j) for j in jobs]
    records = sorted((record_for(c, r) for c, r in done), key=lambda r: r.case_id)
    return SuiteResult(records, time.perf_counter() - t0)


# --------------------------------------------------------------- reports


def report_json(result: SuiteResult, wall_clock: bool = False) -> str:
    doc = {
        "version": REPORT_VERSION,
        "summary": {
            "all": result.summary(),
            "partitions": {p: result.summary(p) for p in result.partitions()},
        },
        "cases": [dict(r.summary(), report=r.report.to_dict()) for r in result.records],
    }
    if wall_clock and result.wall_clock_s is not None:
        doc["wall_clock_s"] = round(result.wall_clock_s, 3)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _pct(x: float) -> str:
    return f"{100 * x:6.1f}%"


def report_text(result: SuiteResult) -> str:
    cols = result.partitions() + ["all"]
    sums = {c: result.summary(None if c == "all" else c) for c in cols}
    width = max(12, *(len(c) + 2 for c in cols))
    lines: list[str] = []

    def row(name: str, fn) -> None:
        lines.append(f"  {name:<34}" + "".join(f"{fn(sums[c]):>{width}}" for c in cols))

    lines.append(f"  {'':<34}" + "".join(f"{c:>{width}}" for c in cols))
    lines.append("Verification")
    row("cases", lambda s: str(s["cases"]))
    for key in ("TP", "FP", "TN", "FN", "unknown"):
        row(key, lambda s, k=key: str(s["verification"][k]))
    for key in ("precision", "recall", "fpr", "fnr", "unknown_rate"):
        row(key, lambda s, k=key: _pct(s["verification"][k]))
    lines.append("Label mix")
    for key in ("SatStrict", "SatRelaxed", "Unsat", "Unknown"):
        row(key, lambda s, k=key: _pct(s["label_mix"][k]))
    lines.append("Remediation")
    row("SatStrict denominator", lambda s: str(s["remediation"]["sat_strict_denominator"]))
    row("verified", lambda s: str(s["remediation"]["verified_over_sat_strict"]))
    row("success rate", lambda s: _pct(s["remediation"]["success_rate"]))
    for t in ("3", "2", "1"):
        row(f"tier {t} accepted", lambda s, t=t: str(s["remediation"]["per_tier"][t]))
    row("mean trace length", lambda s: f"{s['remediation']['mean_iterations']:.2f}")
    lines.append("Diagnostics")
    for k in ("1", "3", "10"):
        row(f"Recall@{k}", lambda s, k=k: _pct(s["recall_at_k"][k]))
    row("mean units to first SatStrict", lambda s: f"{s['diagnostics']['mean_units_to_first_sat_strict']:.1f}")
    row("solver queries / confirmed path", lambda s: f"{s['diagnostics']['solver_queries_per_confirmed_path']:.2f}")
    lines.append("")
    lines.append("Per case")
    for r in result.records:
        tier = f"T{r.tier}" if r.tier else "-"
        lines.append(
            f"  {r.case_id:<12} {r.partition:<9} truth={str(r.truth):<10} {r.label:<11} "
            f"{r.final_state:<22} {tier:<3} trace={r.iterations}"
        )
    return "\n".join(lines) + "\n"


def write_report(result: SuiteResult, out_dir: str | Path, wall_clock: bool = False) -> Path:
    """Write report.json, summary.txt, Tier-1 rule files and ε certificates."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report_json(result, wall_clock))
    (out / "summary.txt").write_text(report_text(result))
    rules = out / "policies"
    certs = out / "certificates"
    for d in (rules, certs):
        d.mkdir(exist_ok=True)
        for old in d.iterdir():
            old.unlink()
    for rep in result.reports:
        for name, text in policy_documents(rep).items():
            (rules / name).write_text(text)
        for o in rep.outcomes:
            eps = o.detail.get("epsilon") if o.final_state == "VerifiedRemediation" else None
            if eps is not None:
                name = f"{rep.case_id}__{o.candidate_id}".replace(":", "_").replace(">", "")
                doc = {"case_id": rep.case_id, "candidate": o.candidate_id, "epsilon": eps,
                       "remedy": o.remedy.to_dict() if o.remedy else None}
                (certs / f"{name}.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return out


def load_report(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())



__all__ = [
    "Confusion",
    "confusion",
    "best_rank",
    "recall_at_k",
    "cliffs_delta",
    "CaseRecord",
    "record_for",
    "SuiteResult",
    "run_suite",
    "report_json",
    "report_text",
    "write_report",
    "load_report",
    "DEFAULT_KS",
]
