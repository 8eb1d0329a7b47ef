"""Mirror-descent solver over an online environment.

Three feedback modes share one loop:

* ``first-order``: query the gradient oracle at the iterate;
* ``bandit-1pt``:  one value reading per step, one-point estimate;
* ``bandit-2pt``:  two value readings per step, two-point estimate.

Per step k the solver reveals f_k, records the iterate, queries, and (while
steps remain) mirror-steps with ``alpha_k * g``.  Exact losses are filled
into the record after the loop from the environment's measurement
interface, so the update path never touches them.

When the environment can pregenerate its randomness (see
:meth:`zomd.environments.OnlineEnvironment.fast_plan`) and ``allow_fast``
is set, the whole loop runs inside a fused kernel from
:mod:`zomd.kernels`; the step-by-step path and the fused path consume
their random streams identically and produce the same trajectories up to
floating-point associativity.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import estimators as est
from . import geometry as geo
from . import kernels
from .environments import OnlineEnvironment
from .errors import ValidationError
from .estimators import SmoothingConfig
from .geometry import GeometrySpec

__all__ = [
    "MODES",
    "StepSchedule",
    "SolverConfig",
    "RunRecord",
    "run_online",
    "average_iterate",
]

MODES = ("first-order", "bandit-1pt", "bandit-2pt")


@dataclass(frozen=True)
class StepSchedule:
    """Step-size rule: constant alpha, or alpha_k = 1 / (gamma2 * k).

    The constant rule tuned for horizon N with gradient second moment
    bounded by M^2 and prox radius R^2 is alpha = (R / M) * sqrt(2 / N);
    use :meth:`constant_for`.  The decreasing rule is for losses that are
    gamma2-strongly convex in l2 and requires the squared-l2 geometry.
    """

    kind: str
    alpha: float = 0.0
    gamma2: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("constant", "strongly-convex"):
            raise ValidationError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "constant":
            if not (self.alpha > 0.0 and math.isfinite(self.alpha)):
                raise ValidationError("constant schedule needs alpha > 0")
        else:
            if not (self.gamma2 > 0.0 and math.isfinite(self.gamma2)):
                raise ValidationError("strongly-convex schedule needs gamma2 > 0")

    @staticmethod
    def constant_for(r2: float, m2_bound: float, n_steps: int) -> "StepSchedule":
        """Constant schedule alpha = (R / M) * sqrt(2 / N)."""
        if not (r2 > 0.0 and m2_bound > 0.0 and n_steps >= 1):
            raise ValidationError("constant_for needs r2 > 0, m2_bound > 0, N >= 1")
        alpha = math.sqrt(r2 / m2_bound) * math.sqrt(2.0 / n_steps)
        return StepSchedule(kind="constant", alpha=alpha)

    @staticmethod
    def strongly_convex(gamma2: float) -> "StepSchedule":
        """Decreasing schedule alpha_k = 1 / (gamma2 * k)."""
        return StepSchedule(kind="strongly-convex", gamma2=gamma2)

    def alpha_at(self, k: int) -> float:
        """Step size used at step k (1-based)."""
        if k < 1:
            raise ValidationError("steps are 1-based")
        if self.kind == "constant":
            return self.alpha
        return 1.0 / (self.gamma2 * k)

    def alphas(self, n_steps: int) -> np.ndarray:
        """Vector of step sizes for steps 1 .. N."""
        if self.kind == "constant":
            return np.full(n_steps, self.alpha)
        return 1.0 / (self.gamma2 * np.arange(1, n_steps + 1))


@dataclass(frozen=True)
class SolverConfig:
    """Everything the solver needs besides the environment and the RNG.

    ``m2_bound`` is the gradient-reading second-moment bound the constant
    schedule was tuned against; it is carried for bookkeeping and bound
    reporting and may be NaN when the schedule was supplied directly.
    """

    geom: GeometrySpec
    schedule: StepSchedule
    n_steps: int
    mode: str
    smoothing: Optional[SmoothingConfig] = None
    m2_bound: float = math.nan

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValidationError(f"unknown mode {self.mode!r}")
        if self.n_steps < 1:
            raise ValidationError("n_steps must be >= 1")
        if self.mode == "first-order":
            if self.smoothing is not None:
                raise ValidationError("first-order mode takes no smoothing config")
        else:
            if self.smoothing is None:
                raise ValidationError(f"{self.mode} needs a smoothing config")
            want_m = 1 if self.mode == "bandit-1pt" else 2
            if self.smoothing.m != want_m:
                raise ValidationError(
                    f"{self.mode} needs m = {want_m}, got {self.smoothing.m}"
                )
            if self.smoothing.n != self.geom.n:
                raise ValidationError("smoothing dimension does not match geometry")
            if self.smoothing.mu > self.geom.mu0 + 1e-12:
                raise ValidationError(
                    f"mu = {self.smoothing.mu:g} exceeds the geometry's query "
                    f"margin mu0 = {self.geom.mu0:g}"
                )
        if self.schedule.kind == "strongly-convex" and self.geom.p != 2.0:
            raise ValidationError(
                "the strongly-convex schedule requires the p = 2 geometry"
            )


@dataclass
class RunRecord:
    """Everything measured during one run.

    ``iterates`` has one row per step; ``losses`` holds the exact
    (noise-free) f_k(x^k), filled by the environment's measurement
    interface after the run; ``readings`` holds raw oracle output (one
    gradient row per step in first-order mode, m value readings per step
    in bandit modes); ``query_points[k]`` are the points shown to the
    oracle at step k; ``directions`` are the unit query directions (bandit
    modes only).  ``wall_ms`` is the wall-clock duration of the loop.
    """

    mode: str
    iterates: np.ndarray
    losses: np.ndarray
    readings: np.ndarray
    query_points: np.ndarray
    directions: Optional[np.ndarray]
    alphas: np.ndarray
    seed: Optional[int]
    wall_ms: float

    def __post_init__(self) -> None:
        n_steps = self.iterates.shape[0]
        for name in ("losses", "readings", "query_points", "alphas"):
            arr = getattr(self, name)
            if arr.shape[0] != n_steps:
                raise ValidationError(
                    f"record field {name} has {arr.shape[0]} rows, expected {n_steps}"
                )
        if self.directions is not None and self.directions.shape[0] != n_steps:
            raise ValidationError("record field directions length mismatch")

    @property
    def n_steps(self) -> int:
        return self.iterates.shape[0]


def average_iterate(record: RunRecord) -> np.ndarray:
    """Average of the recorded iterates (the solver's reported point)."""
    return record.iterates.mean(axis=0)


def _seed_of(rng) -> Optional[int]:
    return rng if isinstance(rng, (int, np.integer)) else None


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def run_online(
    env: OnlineEnvironment,
    cfg: SolverConfig,
    rng,
    allow_fast: bool = True,
) -> RunRecord:
    """Run mirror descent for ``cfg.n_steps`` steps against ``env``.

    ``rng`` is a seed or a numpy Generator; bandit modes consume n
    standard normals per step from it for the query direction.  A fresh
    environment is required (one environment instance per run).
    """
    if env.geom != cfg.geom:
        raise ValidationError("environment and solver geometry differ")
    if env.revealed != 0:
        raise ValidationError("run_online needs a fresh environment")
    if cfg.mode != "first-order" and not math.isfinite(env.constants.B):
        raise ValidationError("bandit modes need a finite value bound B")
    if cfg.mode == "first-order" and env.noise.kind == "multiplicative":
        raise ValidationError(
            "multiplicative noise is defined for value readings only"
        )
    seed = _seed_of(rng)
    gen = _as_generator(rng)
    n_steps = cfg.n_steps
    geom = cfg.geom
    alphas = cfg.schedule.alphas(n_steps)

    plan = env.fast_plan(cfg.mode, n_steps) if allow_fast else None
    t0 = time.perf_counter()
    if plan is not None:
        a_exp = geom.a if geom.prox == "squared-la" else 2.0
        x0 = geo.start_point(geom)
        if plan.kind == "fo-scripted":
            xs = kernels.fo_scripted_run(
                x0, plan.readings, alphas, geom._code, geom.radius, a_exp,
                geo.FLOOR, geo.LA_BISECT_TOL,
            )
            readings = plan.readings
            query_points = xs[:, None, :]
            directions = None
        elif plan.kind == "fo-state":
            xs, readings = kernels.fo_state_run(
                x0, plan.center, plan.curv, plan.offsets, alphas, geom._code,
                geom.radius, a_exp, geo.FLOOR, geo.LA_BISECT_TOL,
            )
            query_points = xs[:, None, :]
            directions = None
        else:
            m = cfg.smoothing.m
            dirs = kernels.sphere_rows(gen.standard_normal((n_steps, geom.n)))
            xs, readings, _biases = kernels.bandit_run(
                x0,
                dirs,
                plan.xis,
                alphas,
                cfg.smoothing.mu,
                m,
                plan.family_code,
                plan.loss_rows,
                plan.center,
                plan.scale,
                plan.smooth,
                plan.noise_code,
                plan.noise_sd,
                plan.bias_code,
                plan.delta,
                geom._code,
                geom.radius,
                a_exp,
                geo.FLOOR,
                geo.LA_BISECT_TOL,
            )
            directions = dirs
            query_points = np.empty((n_steps, m, geom.n))
            query_points[:, 0, :] = xs + cfg.smoothing.mu * dirs
            if m == 2:
                query_points[:, 1, :] = xs
        wall_ms = (time.perf_counter() - t0) * 1e3
        losses = env.exact_losses(xs)
        return RunRecord(
            mode=cfg.mode,
            iterates=xs,
            losses=losses,
            readings=readings,
            query_points=query_points,
            directions=directions,
            alphas=alphas,
            seed=seed,
            wall_ms=wall_ms,
        )

    # Step-by-step reference path.
    x = geo.start_point(geom)
    iterates = np.empty((n_steps, geom.n))
    if cfg.mode == "first-order":
        readings = np.empty((n_steps, geom.n))
        query_points = iterates[:, None, :]
        directions = None
        for k in range(1, n_steps + 1):
            env.reveal(k, x)
            env.observe_iterate(k, x)
            iterates[k - 1] = x
            g = env.query_gradient(k, x)
            readings[k - 1] = g
            if k < n_steps:
                x = geo.mirror_step(geom, x, alphas[k - 1] * g)
    else:
        m = cfg.smoothing.m
        readings = np.empty((n_steps, m))
        query_points = np.empty((n_steps, m, geom.n))
        directions = np.empty((n_steps, geom.n))
        estimate = est.one_point_estimate if m == 1 else est.two_point_estimate
        for k in range(1, n_steps + 1):
            env.reveal(k)
            env.observe_iterate(k, x)
            iterates[k - 1] = x
            e = est.sample_sphere(gen, geom.n)
            res = estimate(env.query_value, k, x, cfg.smoothing, e)
            directions[k - 1] = e
            readings[k - 1] = res.raw_values
            query_points[k - 1, 0] = x + cfg.smoothing.mu * e
            if m == 2:
                query_points[k - 1, 1] = x
            if k < n_steps:
                x = geo.mirror_step(geom, x, alphas[k - 1] * res.g)
    wall_ms = (time.perf_counter() - t0) * 1e3
    losses = env.exact_losses(iterates)
    return RunRecord(
        mode=cfg.mode,
        iterates=iterates,
        losses=losses,
        readings=readings,
        query_points=query_points,
        directions=directions,
        alphas=alphas,
        seed=seed,
        wall_ms=wall_ms,
    )
