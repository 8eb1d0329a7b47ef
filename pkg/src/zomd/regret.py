"""Regret measurement: hindsight comparators, Monte-Carlo runs, rate fits.

The quantity measured everywhere is the pseudo-regret of a run,

    (1/N) sum_k f_k(x^k)  -  min_{x in Q} (1/N) sum_k f_k(x),

with exact (noise-free) losses.  :func:`hindsight_optimum` produces the
comparator -- by closed form when the environment knows one, otherwise by
a deterministic projected-gradient polish -- and certifies it with an
exact linear-minimization (Frank-Wolfe) duality gap.  A comparator whose
gap certificate fails is returned flagged, never silently.

:func:`monte_carlo_regret` repeats independent runs from a spawned seed
tree (replica i's seeds depend only on the master seed and i, not on the
replica count or the number of workers), aggregates mean / standard error
/ quantiles, and records whether mean + 2 stderr clears the theoretical
bound it was given.  :func:`fit_rate` turns a horizon sweep into a
log-log slope for comparing measured decay against theoretical rates.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import geometry as geo
from .environments import EnvConfig, build_environment
from .errors import ValidationError
from .estimators import SmoothingConfig
from .geometry import GeometrySpec
from .solver import RunRecord, SolverConfig, StepSchedule, run_online

__all__ = [
    "HindsightResult",
    "ExperimentSpec",
    "ReplicaResult",
    "RegretReport",
    "RateFit",
    "hindsight_optimum",
    "pseudo_regret",
    "theoretical_bound",
    "measured_second_moment",
    "monte_carlo_regret",
    "fit_rate",
]

#: Duality-gap level below which a comparator counts as certified.
GAP_TOL = 1e-6


@dataclass
class HindsightResult:
    """Best fixed point in hindsight with its certificate.

    ``residual`` is the Frank-Wolfe duality gap of the average loss at
    ``x_star`` (exact linear minimization over the domain); ``converged``
    says whether it clears :data:`GAP_TOL`.
    """

    x_star: np.ndarray
    value: float
    residual: float
    converged: bool
    method: str


def _fw_gap(env, geom: GeometrySpec, x: np.ndarray) -> float:
    g = env.average_gradient(x)
    _, lin = geo.linear_minimizer(geom, g)
    return float(np.dot(g, x)) - lin


def hindsight_optimum(env, geom: GeometrySpec, method: str = "auto") -> HindsightResult:
    """Minimize the average revealed loss over the domain.

    ``method``: ``auto`` uses the environment's closed form when available
    and falls back to the numeric polish; ``closed`` / ``numeric`` force
    one path.  The numeric path runs deterministic projected gradient
    descent (no randomness) and reports its duality gap; non-convergence
    flags the result instead of raising.
    """
    if method not in ("auto", "closed", "numeric"):
        raise ValidationError(f"unknown method {method!r}")
    if method != "numeric":
        closed = env.hindsight_closed_form()
        if closed is not None:
            x_star, value = closed
            gap = _fw_gap(env, geom, x_star)
            return HindsightResult(
                x_star=x_star,
                value=float(value),
                residual=gap,
                converged=gap <= GAP_TOL,
                method="closed",
            )
        if method == "closed":
            raise ValidationError("environment has no closed-form comparator")
    c = env.constants
    x = geo.start_point(geom)
    lip = c.M2 if math.isfinite(c.M2) and c.M2 > 0.0 else 1.0
    if c.gamma2 > 0.0 and math.isfinite(c.L2) and c.L2 > 0.0:
        # Strongly convex and smooth: constant step 1/L2 converges linearly.
        n_inner = 10_000
        step = 1.0 / c.L2
        for _ in range(n_inner):
            x = geo.project(geom, x - step * env.average_gradient(x))
    else:
        # Averaged projected subgradient descent with a sqrt horizon step.
        n_inner = 100_000
        diam = 2.0 * geom.radius if geom.domain == "euclidean-ball" else 2.0
        step = diam / (lip * math.sqrt(n_inner))
        best_x = x.copy()
        best_val = env.average_loss(x)
        acc = np.zeros_like(x)
        for t in range(n_inner):
            x = geo.project(geom, x - step * env.average_gradient(x))
            acc += x
            if (t + 1) % 1000 == 0:
                cand = acc / (t + 1)
                val = env.average_loss(cand)
                if val < best_val:
                    best_val = val
                    best_x = cand
        x = best_x
    value = env.average_loss(x)
    gap = _fw_gap(env, geom, x)
    return HindsightResult(
        x_star=x,
        value=float(value),
        residual=gap,
        converged=gap <= GAP_TOL,
        method="numeric",
    )


def pseudo_regret(record: RunRecord, comparator_value: float) -> float:
    """Average exact loss along the run minus the comparator's average loss."""
    return float(record.losses.mean()) - float(comparator_value)


def theoretical_bound(
    regime: str,
    m2_bound: float,
    r2: float,
    n_steps: int,
    sigma: float = 0.0,
    gamma2: float = 0.0,
) -> float:
    """Mean-regret bound of the tuned schedules.

    Constant schedule: M R sqrt(2/N) + sigma.  Strongly convex schedule:
    M^2 (1 + ln N) / (2 gamma2 N) + sigma.  ``sigma`` is the drift allowance
    for biased readings.
    """
    if regime == "convex":
        return math.sqrt(m2_bound) * math.sqrt(r2) * math.sqrt(2.0 / n_steps) + sigma
    if regime != "strongly-convex":
        raise ValidationError(f"unknown regime {regime!r}")
    if not (gamma2 > 0.0):
        raise ValidationError("strongly-convex bound needs gamma2 > 0")
    return m2_bound * (1.0 + math.log(n_steps)) / (2.0 * gamma2 * n_steps) + sigma


def measured_second_moment(records: Sequence[RunRecord], geom: GeometrySpec) -> float:
    """Largest per-run mean of ||g_k||_q^2 over the given records.

    In first-order mode the reading is the gradient itself; in bandit
    modes the estimate is reconstructed from the stored readings and
    directions.
    """
    worst = 0.0
    q = geom.q
    for rec in records:
        if rec.mode == "first-order":
            g = rec.readings
        else:
            # Reconstruct (n/mu) * diff * e; the stored query points give mu.
            diff = rec.readings[:, 0]
            if rec.readings.shape[1] == 2:
                diff = rec.readings[:, 0] - rec.readings[:, 1]
            offs = rec.query_points[:, 0, :] - rec.iterates
            mu = float(np.linalg.norm(offs[0]))
            g = (geom.n / mu * diff)[:, None] * rec.directions
        if math.isinf(q):
            norms = np.max(np.abs(g), axis=1)
        else:
            norms = np.sum(np.abs(g) ** q, axis=1) ** (1.0 / q)
        worst = max(worst, float(np.mean(norms**2)))
    return worst


@dataclass(frozen=True)
class ExperimentSpec:
    """One measurable experiment: environment, solver, and its bound."""

    geom: GeometrySpec
    env: EnvConfig
    mode: str
    n_steps: int
    schedule: StepSchedule
    smoothing: Optional[SmoothingConfig] = None
    bound: float = math.nan
    allow_fast: bool = True

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            geom=self.geom,
            schedule=self.schedule,
            n_steps=self.n_steps,
            mode=self.mode,
            smoothing=self.smoothing,
        )


@dataclass
class ReplicaResult:
    """Per-replica measurement used by the aggregate report."""

    regret: float
    comparator_value: float
    comparator_converged: bool
    x_star: np.ndarray
    mean_loss: float
    dist_mean: float
    dist_final: float
    wall_ms: float


@dataclass
class RegretReport:
    """Aggregate of a Monte-Carlo regret experiment.

    ``regrets`` are per-replica pseudo-regrets; the distance diagnostics
    summarize ||x^k - x_star||_2 along each run (mean over steps, final
    step).  ``bound_satisfied`` is mean + 2 stderr <= bound.
    """

    spec: ExperimentSpec
    master_seed: int
    replicas: int
    regrets: np.ndarray
    mean: float
    stderr: float
    q05: float
    q50: float
    q95: float
    bound: float
    bound_satisfied: bool
    comparator_values: np.ndarray
    comparators_converged: bool
    x_star_sample: np.ndarray
    mean_losses: np.ndarray
    dist_means: np.ndarray
    dist_finals: np.ndarray
    wall_ms: float


def _replica_seeds(master_seed: int, idx: int) -> tuple:
    """Child seed sequences for replica ``idx``: (environment, directions).

    Spawned from the master so replica i's streams depend only on
    (master_seed, i); workers recompute them independently.
    """
    child = np.random.SeedSequence(master_seed).spawn(idx + 1)[idx]
    env_ss, dir_ss = child.spawn(2)
    return env_ss, dir_ss


def _run_replica(spec: ExperimentSpec, master_seed: int, idx: int) -> ReplicaResult:
    env_ss, dir_ss = _replica_seeds(master_seed, idx)
    env = build_environment(spec.env, spec.geom, env_ss)
    rng = np.random.default_rng(dir_ss)
    t0 = time.perf_counter()
    rec = run_online(env, spec.solver_config(), rng, allow_fast=spec.allow_fast)
    wall = (time.perf_counter() - t0) * 1e3
    hs = hindsight_optimum(env, spec.geom)
    dists = np.linalg.norm(rec.iterates - hs.x_star, axis=1)
    return ReplicaResult(
        regret=pseudo_regret(rec, hs.value),
        comparator_value=hs.value,
        comparator_converged=hs.converged,
        x_star=hs.x_star,
        mean_loss=float(rec.losses.mean()),
        dist_mean=float(dists.mean()),
        dist_final=float(dists[-1]),
        wall_ms=wall,
    )


def monte_carlo_regret(
    spec: ExperimentSpec,
    replicas: int,
    master_seed: int,
    jobs: int = 1,
) -> RegretReport:
    """Repeat the experiment over independent replicas and aggregate.

    Results are independent of ``jobs`` (parallelism only reorders the
    work, never the seed tree or the aggregation order).
    """
    if replicas < 2:
        raise ValidationError("replicas must be >= 2 to report a standard error")
    t0 = time.perf_counter()
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(
                pool.map(
                    _run_replica,
                    [spec] * replicas,
                    [master_seed] * replicas,
                    range(replicas),
                )
            )
    else:
        results = [_run_replica(spec, master_seed, i) for i in range(replicas)]
    regrets = np.array([r.regret for r in results])
    mean = float(regrets.mean())
    stderr = float(regrets.std(ddof=1) / math.sqrt(replicas))
    q05, q50, q95 = (float(v) for v in np.quantile(regrets, [0.05, 0.5, 0.95]))
    bound = float(spec.bound)
    satisfied = bool(math.isfinite(bound) and mean + 2.0 * stderr <= bound)
    wall = (time.perf_counter() - t0) * 1e3
    return RegretReport(
        spec=spec,
        master_seed=master_seed,
        replicas=replicas,
        regrets=regrets,
        mean=mean,
        stderr=stderr,
        q05=q05,
        q50=q50,
        q95=q95,
        bound=bound,
        bound_satisfied=satisfied,
        comparator_values=np.array([r.comparator_value for r in results]),
        comparators_converged=all(r.comparator_converged for r in results),
        x_star_sample=results[0].x_star,
        mean_losses=np.array([r.mean_loss for r in results]),
        dist_means=np.array([r.dist_mean for r in results]),
        dist_finals=np.array([r.dist_final for r in results]),
        wall_ms=wall,
    )


@dataclass
class RateFit:
    """Least-squares fit of log(regret) against log(N).

    ``slope`` is the fitted decay exponent (e.g. -0.5 for a sqrt rate),
    ``stderr`` its standard error, ``excluded`` the indices of points
    dropped for non-positive regret.
    """

    slope: float
    stderr: float
    intercept: float
    n_used: int
    excluded: tuple[int, ...]


def fit_rate(points: Sequence[tuple[float, float]]) -> RateFit:
    """Fit log r = intercept + slope * log N by least squares.

    ``points`` are (N, mean regret) pairs: at least 4, spanning at least
    two decades in N.  Non-positive regrets cannot enter the log fit;
    they are excluded and flagged in the result.
    """
    pts = [(float(n), float(r)) for n, r in points]
    if len(pts) < 4:
        raise ValidationError("fit_rate needs at least 4 points")
    ns = np.array([p[0] for p in pts])
    if ns.min() <= 0.0:
        raise ValidationError("horizons must be positive")
    if ns.max() / ns.min() < 100.0:
        raise ValidationError("horizons must span at least two decades")
    excluded = tuple(i for i, p in enumerate(pts) if p[1] <= 0.0)
    used = [(n, r) for n, r in pts if r > 0.0]
    if len(used) < 2:
        raise ValidationError("fewer than 2 positive regrets; cannot fit a rate")
    x = np.log(np.array([u[0] for u in used]))
    y = np.log(np.array([u[1] for u in used]))
    k = len(used)
    xm = x - x.mean()
    sxx = float(np.dot(xm, xm))
    slope = float(np.dot(xm, y) / sxx)
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    if k > 2:
        se = math.sqrt(float(np.dot(resid, resid)) / (k - 2) / sxx)
    else:
        se = math.nan
    return RateFit(
        slope=slope,
        stderr=se,
        intercept=intercept,
        n_used=k,
        excluded=excluded,
    )
