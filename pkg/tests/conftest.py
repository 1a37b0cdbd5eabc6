from __future__ import annotations

import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from scara.caca import Config  # noqa: E402
from scara.controller import case_config, run_case  # noqa: E402
from scara.manifest import bundled_suite_dir, load_case, parse_case, suite_paths  # noqa: E402

SUITE = bundled_suite_dir()

# criterion number -> (passed, one-line description); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def suite_dir() -> Path:
    return SUITE


def bundled(case_id: str):
    return load_case(SUITE / f"{case_id}.json")


def gt_candidate(case):
    """The ground-truth candidate of a bundled case, freshly normalised."""
    from scara.caca import normalize

    cands = normalize(case.alerts, case.ssckg, case.artifact, case.omega)
    want = case.ground_truth.get("candidate")
    return next(c for c in cands if c.id == want)


def bundled_raw(case_id: str) -> dict:
    return json.loads((SUITE / f"{case_id}.json").read_text())


def reparse(raw: dict):
    return parse_case(raw, "inline")


@pytest.fixture(scope="session")
def suite_cases():
    return {p.stem: load_case(p) for p in suite_paths(SUITE)}


@pytest.fixture(scope="session")
def suite_reports(suite_cases):
    """One default-config run of every bundled case."""
    return {cid: run_case(c, case_config(c)) for cid, c in suite_cases.items()}


@pytest.fixture
def cfg() -> Config:
    return Config()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, desc = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {desc}")
