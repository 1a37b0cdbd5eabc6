"""Time the numba kernels against their numpy fallbacks.

Run with ``python3 benchmarks/bench_kernels.py``. Both backends are called
directly, so the ``SCARA_DISABLE_NUMBA`` flag does not matter here; the
end-to-end section runs the bundled suite once per flag value in a
subprocess to show the effect on the whole pipeline.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from scara import kernels
from scara.constraints import ConstraintAtom, _compile, _problem
from scara.model import VarRef


def _timed(fn, *args, repeat: int = 3) -> tuple[float, object]:
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def leaf_problem(size: int):
    """A cyclic strict ordering x < y < z < x: Unsat, so every leaf is visited."""
    atoms = [
        ConstraintAtom("x", "lt", VarRef("y", 0)),
        ConstraintAtom("y", "lt", VarRef("z", 0)),
        ConstraintAtom("z", "lt", VarRef("x", 0)),
    ]
    domains = {n: range(size) for n in "xyz"}
    return _problem(_compile(atoms, domains))


def random_csr(n: int, p: float, seed: int):
    rng = np.random.default_rng(seed)
    adj = rng.random((n, n)) < p
    np.fill_diagonal(adj, False)
    indptr = np.zeros(n + 1, dtype=np.int64)
    indptr[1:] = np.cumsum(adj.sum(axis=1))
    indices = np.nonzero(adj)[1].astype(np.int64)
    return indptr, indices, n


def bench_leaves(sizes) -> list[tuple[str, float, float]]:
    rows = []
    for size in sizes:
        prob = leaf_problem(size)
        # warm the jit cache outside the timed region
        kernels.first_leaf_numba(*prob.args, 0, 8)
        t_nb, r_nb = _timed(kernels.first_leaf_numba, *prob.args, 0, prob.total)
        t_np, r_np = _timed(kernels.first_leaf_numpy, *prob.args, 0, prob.total)
        assert tuple(r_nb) == tuple(r_np)
        rows.append((f"first_leaf {prob.total:>10,d} leaves", t_nb, t_np))
    return rows


def bench_sigma(ns) -> list[tuple[str, float, float]]:
    rows = []
    kernels.all_pairs_sigma_numba(*random_csr(4, 0.5, 0))
    for n in ns:
        g = random_csr(n, 0.05, n)
        t_nb, (d1, s1) = _timed(kernels.all_pairs_sigma_numba, *g)
        t_np, (d2, s2) = _timed(kernels.all_pairs_sigma_numpy, *g)
        assert (d1 == d2).all() and (s1 == s2).all()
        rows.append((f"all_pairs_sigma n={n:<4d}", t_nb, t_np))
    return rows


def bench_suite() -> list[tuple[str, float, float]]:
    code = "from scara.bench import run_suite; from scara.manifest import bundled_suite_dir; run_suite(bundled_suite_dir())"
    times = {}
    for flag in ("0", "1"):
        env = dict(os.environ, SCARA_DISABLE_NUMBA=flag)
        t0 = time.perf_counter()
        subprocess.run([sys.executable, "-c", code], env=env, check=True)
        times[flag] = time.perf_counter() - t0
    return [("bundled suite (process)", times["0"], times["1"])]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--quick", action="store_true", help="smaller inputs")
    ap.add_argument("--no-suite", action="store_true", help="skip the end-to-end run")
    args = ap.parse_args(argv)
    sizes = (40, 80) if args.quick else (50, 100, 200)
    ns = (50, 150) if args.quick else (50, 200, 400)
    rows = bench_leaves(sizes) + bench_sigma(ns)
    if not args.no_suite:
        rows += bench_suite()
    print(f"{'kernel':<34}{'numba s':>10}{'numpy s':>10}{'speedup':>9}")
    for name, t_nb, t_np in rows:
        print(f"{name:<34}{t_nb:>10.4f}{t_np:>10.4f}{t_np / t_nb:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
