"""Gradient estimation from one or two function-value readings per step.

Given a value oracle and a smoothing radius ``mu``, the estimators query the
oracle along a random unit direction ``e`` and return

* one-point:  g = (n / mu) * f~(x + mu e) * e
* two-point:  g = (n / mu) * (f~(x + mu e) - f~(x)) * e

where both readings of the two-point estimator share the same noise
realization (the oracle contract: reading index 1 draws the step's noise,
reading index 2 reuses it).  Directions are uniform on the unit sphere;
:func:`sample_ball` draws uniformly from the unit ball for smoothing
diagnostics.  Both estimators are unbiased for a gradient of the smoothed
function f^mu(x) = E f(x + mu b), b uniform in the ball.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidGradientError, ValidationError

__all__ = [
    "SmoothingConfig",
    "GradientEstimate",
    "sample_sphere",
    "sample_ball",
    "one_point_estimate",
    "two_point_estimate",
    "smoothed_value",
]

#: A value oracle: (step, point, reading_index) -> float.
ValueOracle = Callable[[int, np.ndarray, int], float]


@dataclass(frozen=True)
class SmoothingConfig:
    """Smoothing radius and per-step query count for bandit feedback.

    ``mu`` must be positive and ``m`` is 1 or 2.  The solver additionally
    checks ``mu`` against the geometry's query margin ``mu0``.
    """

    mu: float
    m: int
    n: int

    def __post_init__(self) -> None:
        if not (self.mu > 0.0 and math.isfinite(self.mu)):
            raise ValidationError(f"mu must be positive and finite, got {self.mu!r}")
        if self.m not in (1, 2):
            raise ValidationError(f"m must be 1 or 2, got {self.m!r}")
        if not isinstance(self.n, int) or self.n < 1:
            raise ValidationError(f"n must be a positive integer, got {self.n!r}")


@dataclass(frozen=True)
class GradientEstimate:
    """One gradient estimate: the vector, its direction, and raw readings.

    ``g`` is collinear with ``e`` by construction; ``raw_values`` holds the
    oracle readings in query order (one or two values).
    """

    g: np.ndarray
    e: np.ndarray
    raw_values: tuple[float, ...]


def sample_sphere(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniform draw from the unit sphere: normalized standard normals.

    Consumes exactly ``n`` standard-normal variates from ``rng``.
    """
    z = rng.standard_normal(n)
    nrm = float(np.linalg.norm(z))
    if nrm == 0.0:  # probability zero; retry keeps the contract total
        return sample_sphere(rng, n)
    return z / nrm

def sample_ball(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniform draw from the unit ball: sphere point scaled by U^(1/n).

    Consumes ``n`` standard normals followed by one uniform variate.
    """
    e = sample_sphere(rng, n)
    u = float(rng.uniform())
    return e * u ** (1.0 / n)


def _check_estimate(g: np.ndarray) -> None:
    if not np.all(np.isfinite(g)):
        raise InvalidGradientError("gradient estimate has non-finite entries")


def one_point_estimate(
    oracle: ValueOracle,
    k: int,
    x: np.ndarray,
    cfg: SmoothingConfig,
    e: np.ndarray,
) -> GradientEstimate:
    """One-point estimate g = (n / mu) * f~(x + mu e) * e."""
    if cfg.m != 1:
        raise ValidationError("one_point_estimate requires m = 1")
    v = float(oracle(k, x + cfg.mu * e, 1))
    g = (cfg.n / cfg.mu * v) * e
    _check_estimate(g)
    return GradientEstimate(g=g, e=e, raw_values=(v,))


def two_point_estimate(
    oracle: ValueOracle,
    k: int,
    x: np.ndarray,
    cfg: SmoothingConfig,
    e: np.ndarray,
) -> GradientEstimate:
    """Two-point estimate g = (n / mu) * (f~(x + mu e) - f~(x)) * e.

    The perturbed point is queried first (reading index 1, which draws the
    step's noise), then the base point (reading index 2, same noise).
    """
    if cfg.m != 2:
        raise ValidationError("two_point_estimate requires m = 2")
    v1 = float(oracle(k, x + cfg.mu * e, 1))
    v0 = float(oracle(k, x, 2))
    g = (cfg.n / cfg.mu * (v1 - v0)) * e
    _check_estimate(g)
    return GradientEstimate(g=g, e=e, raw_values=(v1, v0))


def smoothed_value(
    oracle_noiseless: Callable[[np.ndarray], float],
    x: np.ndarray,
    mu: float,
    samples: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Monte-Carlo estimate of f^mu(x) = E f(x + mu b), b uniform in the ball.

    Returns ``(mean, stderr)``.  The draws are a deterministic function of
    ``rng``'s state, so two calls with identically seeded generators use
    identical perturbations -- which makes finite differences of this
    function across nearby ``x`` values variance-free.
    """
    if samples < 2:
        raise ValidationError("samples must be >= 2 to report a standard error")
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    z = rng.standard_normal((samples, n))
    z /= np.sqrt(np.sum(z * z, axis=1)).reshape(-1, 1)
    u = rng.uniform(size=samples) ** (1.0 / n)
    pts = x + mu * z * u.reshape(-1, 1)
    vals = np.empty(samples)
    for i in range(samples):
        vals[i] = float(oracle_noiseless(pts[i]))
    mean = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(samples))
    return mean, stderr
