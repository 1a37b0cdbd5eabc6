"""Command-line entry point (``scara``).

Exit codes: 0 on a clean run, 1 when a case fails to validate or run, 2 on
usage errors (click's own convention for bad options is kept).
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from scara import bench as bench_mod
from scara.caca import Config, normalize_with_na
from scara.controller import case_config, policy_documents, route, run_case
from scara.manifest import bundled_suite_dir, load_case, suite_paths
from scara.model import ValidationError, validate_case
from scara.osva import verify as osva_verify


def _read_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise click.UsageError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise click.UsageError("config file must hold a JSON object")
    unknown = set(data) - set(Config().to_dict())
    if unknown:
        raise click.UsageError(f"unknown config field(s): {', '.join(sorted(unknown))}")
    return data


def _cli_overrides(seed: int | None, no_feedback: bool) -> dict:
    out: dict = {}
    if seed is not None:
        out["seed"] = seed
    if no_feedback:
        out["feedback"] = False
    return out


def _load(manifest: str):
    try:
        return load_case(manifest)
    except (ValidationError, KeyError, ValueError) as exc:
        click.echo(f"error: cannot load {manifest}: {exc}", err=True)
        sys.exit(1)


def _echo_json(doc) -> None:
    click.echo(json.dumps(doc, indent=2, sort_keys=True))


def _config(case, config_path, seed, no_feedback) -> Config:
    try:
        return case_config(case, _read_config(config_path), _cli_overrides(seed, no_feedback))
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc


def _find_candidate(case, cand_id: str):
    violations = validate_case(case.artifact, case.ssckg)
    if violations:
        click.echo("error: " + "; ".join(f"{v.kind}: {v.detail}" for v in violations), err=True)
        sys.exit(1)
    cands, _ = normalize_with_na(case.alerts, case.ssckg, case.artifact, case.omega)
    for c in cands:
        if c.id == cand_id:
            return c
    known = ", ".join(c.id for c in cands) or "none"
    raise click.UsageError(f"no candidate {cand_id!r} in manifest (known: {known})")


seed_opt = click.option("--seed", type=int, default=None, help="Override the configured seed.")
config_opt = click.option(
    "--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
    help="JSON file overriding Config fields.",
)
feedback_opt = click.option("--no-feedback", is_flag=True, help="Disable rejection-constraint feedback.")
manifest_opt = click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False))


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose: bool) -> None:
    """Candidate verification and remediation over toy block-graph artifacts."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, stream=sys.stderr)


@main.command()
@manifest_opt
@seed_opt
@config_opt
@feedback_opt
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Also write rule files here.")
def run(manifest, seed, config_path, no_feedback, out):
    """Run the full pipeline on one case manifest."""
    case = _load(manifest)
    rep = run_case(case, _config(case, config_path, seed, no_feedback))
    _echo_json(rep.to_dict())
    if out:
        d = Path(out)
        d.mkdir(parents=True, exist_ok=True)
        for name, text in policy_documents(rep).items():
            (d / name).write_text(text)
    sys.exit(1 if rep.error else 0)


@main.command()
@click.option("--suite", type=click.Path(exists=True, file_okay=False), default=None,
              help="Directory of manifests (default: the bundled suite).")
@click.option("--report", "report_dir", required=True, type=click.Path(file_okay=False))
@seed_opt
@config_opt
@feedback_opt
@click.option("--workers", type=click.IntRange(min=1), default=1)
@click.option("--wall-clock", is_flag=True, help="Record informational wall-clock time in the JSON report.")
def bench(suite, report_dir, seed, config_path, no_feedback, workers, wall_clock):
    """Run a suite and write the JSON report, summary table, rules and certificates."""
    suite_dir = Path(suite) if suite else bundled_suite_dir()
    result = bench_mod.run_suite(
        suite_dir, _read_config(config_path), _cli_overrides(seed, no_feedback), workers
    )
    bench_mod.write_report(result, report_dir, wall_clock)
    click.echo(bench_mod.report_text(result), nl=False)
    errors = [r.case_id for r in result.records if r.report.error]
    if errors:
        click.echo(f"case errors: {', '.join(errors)}", err=True)
    sys.exit(1 if errors else 0)


@main.command()
@manifest_opt
@click.option("--candidate", "cand_id", required=True)
@seed_opt
@config_opt
def verify(manifest, cand_id, seed, config_path):
    """Reachability verification only, for one candidate."""
    case = _load(manifest)
    cfg = _config(case, config_path, seed, False)
    res = osva_verify(case.artifact, case.ssckg, _find_candidate(case, cand_id), cfg)
    _echo_json(res.to_dict())


@main.command()
@manifest_opt
@click.option("--candidate", "cand_id", required=True)
@seed_opt
@config_opt
@feedback_opt
def remediate(manifest, cand_id, seed, config_path, no_feedback):
    """Verification plus the remediation loop, for one candidate."""
    case = _load(manifest)
    cfg = _config(case, config_path, seed, no_feedback)
    c = _find_candidate(case, cand_id)
    outcome = route(case, c, osva_verify(case.artifact, case.ssckg, c, cfg), cfg)
    _echo_json(outcome.to_dict())


@main.command("validate-suite")
@click.option("--suite", type=click.Path(exists=True, file_okay=False), default=None)
def validate_suite(suite):
    """Lint every manifest in a suite directory."""
    suite_dir = Path(suite) if suite else bundled_suite_dir()
    bad = 0
    paths = suite_paths(suite_dir)
    for p in paths:
        try:
            case = load_case(p)
        except (ValidationError, KeyError, ValueError, TypeError) as exc:
            click.echo(f"{p.name}: FAIL load: {exc}")
            bad += 1
            continue
        problems = [f"{v.kind}: {v.detail}" for v in validate_case(case.artifact, case.ssckg)]
        if problems:
            bad += 1
            click.echo(f"{p.name}: FAIL " + "; ".join(problems))
        else:
            click.echo(f"{p.name}: ok")
    click.echo(f"{len(paths) - bad}/{len(paths)} manifests valid")
    sys.exit(1 if bad else 0)


if __name__ == "__main__":  # pragma: no cover
    main()
