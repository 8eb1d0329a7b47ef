"""Backend benchmark: numba-compiled kernels against the numpy fallback.

Runs the same fused solver loops under ``ZOMD_BACKEND=numba`` and
``ZOMD_BACKEND=numpy`` in fresh subprocesses (the backend is chosen at
import time, so comparing them in-process is not possible) and prints a
table of wall-clock times and speedups.

Usage::

    python -m zomd.bench [--steps 20000] [--dim 16] [--repeat 3]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
from typing import Optional, Sequence

_CASES = ("bandit-1pt/simplex", "bandit-2pt/l1-ball", "first-order/euclidean-ball")

_WORKER = r"""
import json
import sys
import time

import numpy as np

import zomd.kernels as K
from zomd import (
    EnvConfig,
    NoiseModel,
    SmoothingConfig,
    SolverConfig,
    StepSchedule,
    ball_geometry,
    build_environment,
    l1_ball_geometry,
    run_online,
    simplex_geometry,
)

steps, dim, repeat = (int(tok) for tok in sys.argv[1:4])

def build(case):
    mu = 0.05
    if case == "bandit-1pt/simplex":
        geom = simplex_geometry(dim, mu0=mu)
        env_cfg = EnvConfig(
            family="expert-linear",
            noise=NoiseModel(kind="additive-gaussian", sd=0.1),
        )
        cfg = SolverConfig(
            geom=geom,
            schedule=StepSchedule(kind="constant", alpha=0.01),
            n_steps=steps,
            mode="bandit-1pt",
            smoothing=SmoothingConfig(mu=mu, m=1, n=dim),
        )
    elif case == "bandit-2pt/l1-ball":
        geom = l1_ball_geometry(dim, mu0=mu)
        env_cfg = EnvConfig(
            family="smoothed-distance",
            center=(0.4,) + (0.0,) * (dim - 1),
            noise=NoiseModel(kind="none", bias="worst-direction", delta=1e-4),
        )
        cfg = SolverConfig(
            geom=geom,
            schedule=StepSchedule(kind="constant", alpha=0.01),
            n_steps=steps,
            mode="bandit-2pt",
            smoothing=SmoothingConfig(mu=mu, m=2, n=dim),
        )
    else:
        geom = ball_geometry(dim, radius=1.0)
        env_cfg = EnvConfig(
            family="fixed-quadratic",
            center=(0.3,) + (0.0,) * (dim - 1),
            noise=NoiseModel(kind="additive-gaussian", sd=0.1),
        )
        cfg = SolverConfig(
            geom=geom,
            schedule=StepSchedule.strongly_convex(2.0),
            n_steps=steps,
            mode="first-order",
        )
    return geom, env_cfg, cfg

results = {}
for case in json.loads(sys.argv[4]):
    geom, env_cfg, cfg = build(case)
    # Warm-up run compiles the kernels on the numba backend.
    env = build_environment(env_cfg, geom, 1)
    run_online(env, cfg, 2)
    best = float("inf")
    for r in range(repeat):
        env = build_environment(env_cfg, geom, 1)
        t0 = time.perf_counter()
        run_online(env, cfg, 2)
        best = min(best, time.perf_counter() - t0)
    results[case] = best
print(json.dumps({"backend": K.BACKEND, "times": results}))
"""


def _run_backend(backend: str, steps: int, dim: int, repeat: int) -> dict:
    env = dict(os.environ)
    env["ZOMD_BACKEND"] = backend
    proc = subprocess.run(
        [sys.executable, "-c", _WORKER, str(steps), str(dim), str(repeat), json.dumps(list(_CASES))],
        env=env,
        capture_output=True,
        text=True,
    )
    if proc.returncode != 0:
        raise RuntimeError(
            f"benchmark worker ({backend}) failed:\n{proc.stderr}"
        )
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=20_000)
    parser.add_argument("--dim", type=int, default=16)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    print(f"steps={args.steps} dim={args.dim} repeat={args.repeat} (best of repeats)")
    rows = []
    reports = {}
    for backend in ("numpy", "numba"):
        try:
            reports[backend] = _run_backend(backend, args.steps, args.dim, args.repeat)
        except RuntimeError as exc:
            print(f"{backend}: unavailable ({exc})")
    if "numpy" not in reports:
        return 1
    for case in _CASES:
        t_np = reports["numpy"]["times"][case]
        if "numba" in reports:
            t_nb = reports["numba"]["times"][case]
            rows.append((case, t_np, t_nb, t_np / t_nb))
        else:
            rows.append((case, t_np, float("nan"), float("nan")))
    width = max(len(c) for c in _CASES)
    print(f"{'case':<{width}}  {'numpy [s]':>10}  {'numba [s]':>10}  {'speedup':>8}")
    for case, t_np, t_nb, sp in rows:
        print(f"{case:<{width}}  {t_np:>10.4f}  {t_nb:>10.4f}  {sp:>8.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
