"""Feasible sets, prox functions, and mirror steps.

A :class:`GeometrySpec` pins down the triple the solver works in: the
feasible set ``Q``, the prox function ``d`` generating Bregman divergences,
and the primal norm exponent ``p`` whose dual exponent ``q`` measures
gradients.  Three pairings are supported:

==============  ===============  =====================================
domain          prox             notes
==============  ===============  =====================================
simplex         entropy          d(x) = ln(n) + sum x_i ln x_i, p = 1
euclidean-ball  squared-l2       d(x) = ||x||_2^2 / 2, p = 2
l1-ball         squared-la       d(x) = ||x||_a^2 / (2(a-1)), p = 1,
                                 a = 2 ln(n) / (2 ln(n) - 1), n >= 3
==============  ===============  =====================================

Each prox function is 1-strongly convex with respect to the norm named by
its pairing (l1, l2, and la respectively), and ``r2`` bounds ``d`` over the
domain, so ``sqrt(2 * r2)`` bounds the Bregman radius from the start point.

Module-level operations take the spec as their first argument and validate
inputs; the inner numeric work is delegated to :mod:`zomd.kernels`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import kernels
from .errors import (
    GeometryError,
    GradientUndefinedError,
    InvalidGradientError,
    InvalidPointError,
)

__all__ = [
    "DOMAINS",
    "PROXES",
    "FLOOR",
    "MEMBERSHIP_TOL",
    "GeometrySpec",
    "simplex_geometry",
    "ball_geometry",
    "l1_ball_geometry",
    "prox_value",
    "prox_gradient",
    "bregman",
    "start_point",
    "mirror_step",
    "dual_norm",
    "contains",
    "project",
    "distance_to_domain",
    "in_query_region",
    "linear_minimizer",
    "primal_diameter",
    "max_distance_from",
    "project_simplex",
    "project_l1_ball",
]

DOMAINS = ("simplex", "euclidean-ball", "l1-ball")
PROXES = ("entropy", "squared-l2", "squared-la")

_PAIRINGS = {
    ("simplex", "entropy"),
    ("euclidean-ball", "squared-l2"),
    ("l1-ball", "squared-la"),
}

#: Coordinate floor applied by the entropy mirror step.
FLOOR = 1e-12
#: Absolute tolerance for feasible-set membership checks.
MEMBERSHIP_TOL = 1e-9
#: Width at which the l1-ball bisection stops.
LA_BISECT_TOL = 1e-12

_GEOM_CODES = {
    "entropy": kernels.GEOM_ENTROPY,
    "squared-l2": kernels.GEOM_L2_BALL,
    "squared-la": kernels.GEOM_LA_BALL,
}


@dataclass(frozen=True)
class GeometrySpec:
    """Domain / prox / norm triple the solver operates in.

    Parameters
    ----------
    n:
        Ambient dimension, at least 2 (at least 3 for ``squared-la``,
        whose exponent ``a = 2 ln(n) / (2 ln(n) - 1)`` needs ``ln n >= 1``
        to stay in ``(1, 2]``).
    domain:
        One of ``simplex``, ``euclidean-ball``, ``l1-ball``.
    prox:
        One of ``entropy``, ``squared-l2``, ``squared-la``; must form a
        supported pairing with ``domain``.
    p:
        Primal norm exponent in ``[1, 2]``.  Gradients are measured in the
        dual norm with exponent ``q = p / (p - 1)`` (``q = inf`` for
        ``p = 1``).
    mu0:
        Oracle margin: values may be queried anywhere within Euclidean
        distance ``mu0`` of the domain.
    radius:
        Radius of the Euclidean ball; the simplex and the l1 ball are
        fixed at radius 1.
    """

    n: int
    domain: str
    prox: str
    p: float
    mu0: float = 0.0
    radius: float = 1.0

    def __post_init__(self) -> None:
        if self.domain not in DOMAINS:
            raise GeometryError(f"unknown domain {self.domain!r}")
        if self.prox not in PROXES:
            raise GeometryError(f"unknown prox {self.prox!r}")
        if (self.domain, self.prox) not in _PAIRINGS:
            raise GeometryError(
                f"unsupported pairing ({self.domain!r}, {self.prox!r})"
            )
        if not isinstance(self.n, int) or self.n < 2:
            raise GeometryError(f"dimension must be an integer >= 2, got {self.n!r}")
        if self.prox == "squared-la" and math.log(self.n) < 1.0:
            raise GeometryError(
                "squared-la requires n >= 3 so its exponent stays in (1, 2]"
            )
        if not (1.0 <= self.p <= 2.0):
            raise GeometryError(f"p must lie in [1, 2], got {self.p!r}")
        if not (self.mu0 >= 0.0):
            raise GeometryError(f"mu0 must be >= 0, got {self.mu0!r}")
        if self.domain == "euclidean-ball":
            if not (self.radius > 0.0 and math.isfinite(self.radius)):
                raise GeometryError(f"radius must be positive, got {self.radius!r}")
        elif self.radius != 1.0:
            raise GeometryError(f"{self.domain} has fixed radius 1")

    @cached_property
    def q(self) -> float:
        """Dual norm exponent: q = p / (p - 1), with q = inf when p = 1."""
        if self.p == 1.0:
            return math.inf
        return self.p / (self.p - 1.0)

    @cached_property
    def a(self) -> float:
        """Exponent of the squared-la prox; only defined for that prox."""
        if self.prox != "squared-la":
            raise GeometryError(f"prox {self.prox!r} has no la exponent")
        ln = math.log(self.n)
        return 2.0 * ln / (2.0 * ln - 1.0)

    @cached_property
    def r2(self) -> float:
        """Upper bound on the prox function over the domain.

        entropy: ln(n), attained at a vertex.  squared-l2: radius^2 / 2 on
        the sphere.  squared-la: the maximum of a norm over the l1 ball is
        attained at an extreme point, i.e. a signed vertex, where
        d(+-e_i) = 1 / (2(a-1)); a fixed-seed boundary sample double-checks
        that no sampled point exceeds the vertex value.
        """
        if self.prox == "entropy":
            return math.log(self.n)
        if self.prox == "squared-l2":
            return self.radius**2 / 2.0
        a = self.a
        best = 1.0 / (2.0 * (a - 1.0))
        rng = np.random.default_rng(20240801)
        for _ in range(8):
            w = rng.dirichlet(np.ones(self.n), size=256)
            signs = np.where(rng.random((256, self.n)) < 0.5, -1.0, 1.0)
            pts = w * signs
            vals = np.sum(np.abs(pts) ** a, axis=1) ** (2.0 / a) / (2.0 * (a - 1.0))
            best = max(best, float(vals.max()))
        return best

    @cached_property
    def _code(self) -> int:
        return _GEOM_CODES[self.prox]


def simplex_geometry(n: int, mu0: float = 0.0) -> GeometrySpec:
    """Probability simplex with the entropy prox and p = 1."""
    return GeometrySpec(n=n, domain="simplex", prox="entropy", p=1.0, mu0=mu0)


def ball_geometry(n: int, radius: float = 1.0, mu0: float = 0.0) -> GeometrySpec:
    """Euclidean ball with the squared-l2 prox and p = 2."""
    return GeometrySpec(
        n=n, domain="euclidean-ball", prox="squared-l2", p=2.0, mu0=mu0, radius=radius
    )


def l1_ball_geometry(n: int, mu0: float = 0.0) -> GeometrySpec:
    """Unit l1 ball with the squared-la prox and p = 1."""
    return GeometrySpec(n=n, domain="l1-ball", prox="squared-la", p=1.0, mu0=mu0)


# ---------------------------------------------------------------------------
# Validation helpers
# ---------------------------------------------------------------------------


def _as_vector(geom: GeometrySpec, x) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.shape != (geom.n,):
        raise InvalidPointError(f"expected shape ({geom.n},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidPointError("point has non-finite entries")
    return x


def contains(geom: GeometrySpec, x, tol: float = MEMBERSHIP_TOL) -> bool:
    """Whether ``x`` lies in the domain up to absolute tolerance ``tol``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (geom.n,) or not np.all(np.isfinite(x)):
        return False
    if geom.domain == "simplex":
        return bool(np.all(x >= -tol) and abs(float(x.sum()) - 1.0) <= tol)
    if geom.domain == "euclidean-ball":
        return bool(float(np.linalg.norm(x)) <= geom.radius + tol)
    return bool(float(np.abs(x).sum()) <= 1.0 + tol)


def _require_member(geom: GeometrySpec, x, tol: float = MEMBERSHIP_TOL) -> np.ndarray:
    x = _as_vector(geom, x)
    if not contains(geom, x, tol):
        raise InvalidPointError(f"point is not in the {geom.domain} (tol={tol:g})")
    return x


# ---------------------------------------------------------------------------
# Prox function and Bregman divergence
# ---------------------------------------------------------------------------


def prox_value(geom: GeometrySpec, x) -> float:
    """Value of the prox function ``d`` at a feasible point (always >= 0)."""
    x = _require_member(geom, x)
    if geom.prox == "entropy":
        pos = x[x > 0.0]
        val = math.log(geom.n) + float(np.sum(pos * np.log(pos)))
    elif geom.prox == "squared-l2":
        val = 0.5 * float(np.dot(x, x))
    else:
        a = geom.a
        val = float(np.sum(np.abs(x) ** a) ** (2.0 / a)) / (2.0 * (a - 1.0))
    return max(val, 0.0)


def prox_gradient(geom: GeometrySpec, x) -> np.ndarray:
    """Gradient of the prox function at ``x``.

    For the entropy prox the gradient only exists at strictly positive
    points; elsewhere a :class:`GradientUndefinedError` is raised.
    """
    x = _require_member(geom, x)
    if geom.prox == "entropy":
        if np.any(x <= 0.0):
            raise GradientUndefinedError(
                "entropy gradient needs strictly positive coordinates"
            )
        return np.log(x) + 1.0
    if geom.prox == "squared-l2":
        return x.copy()
    return kernels.la_grad(x, geom.a)


def bregman(geom: GeometrySpec, x, y) -> float:
    """Bregman divergence V_x(y) = d(y) - d(x) - <grad d(x), y - x>.

    On the simplex with the entropy prox this is the KL divergence of ``y``
    from ``x``.  The squared-l2 case is computed in its algebraically equal
    form ``||y - x||_2^2 / 2``.
    """
    x = _require_member(geom, x)
    y = _require_member(geom, y)
    if geom.prox == "squared-l2":
        diff = y - x
        return 0.5 * float(np.dot(diff, diff))
    gx = prox_gradient(geom, x)
    dx = prox_value(geom, x)
    dy = prox_value(geom, y)
    return dy - dx - float(np.dot(gx, y - x))


def start_point(geom: GeometrySpec) -> np.ndarray:
    """Minimizer of the prox function over the domain.

    Uniform distribution for the simplex, the origin for both balls.
    """
    if geom.domain == "simplex":
        return np.full(geom.n, 1.0 / geom.n)
    return np.zeros(geom.n)


# ---------------------------------------------------------------------------
# Mirror step
# ---------------------------------------------------------------------------


def mirror_step(geom: GeometrySpec, x, g) -> np.ndarray:
    """One mirror-descent step: argmin_{y in Q} { <g, y> + V_x(y) }.

    ``g`` must already include the step size.  The result is feasible and
    solves the variational optimality condition to within 1e-8 in function
    value; for the entropy prox every coordinate of the result is at least
    :data:`FLOOR`, so the next step's prox gradient always exists.
    """
    x = _require_member(geom, x)
    g = np.ascontiguousarray(g, dtype=np.float64)
    if g.shape != (geom.n,):
        raise InvalidGradientError(f"expected shape ({geom.n},), got {g.shape}")
    if not np.all(np.isfinite(g)):
        raise InvalidGradientError("gradient has non-finite entries")
    if geom.prox == "entropy" and np.any(x <= 0.0):
        raise InvalidPointError(
            "entropy mirror step needs a strictly positive current point"
        )
    return kernels.apply_step(
        x, g, geom._code, geom.radius, geom.a if geom.prox == "squared-la" else 2.0,
        FLOOR, LA_BISECT_TOL,
    )


def dual_norm(geom: GeometrySpec, g) -> float:
    """Norm of ``g`` in the dual exponent q = p / (p - 1)."""
    g = np.ascontiguousarray(g, dtype=np.float64)
    if not np.all(np.isfinite(g)):
        raise InvalidGradientError("gradient has non-finite entries")
    q = geom.q
    if math.isinf(q):
        return float(np.max(np.abs(g)))
    if q == 2.0:
        return float(np.linalg.norm(g))
    return float(np.sum(np.abs(g) ** q) ** (1.0 / q))


# ---------------------------------------------------------------------------
# Euclidean projections and query-region checks
# ---------------------------------------------------------------------------


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    v = np.asarray(v, dtype=np.float64)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, v.size + 1)
    cond = u - css / ks > 0.0
    rho = int(np.nonzero(cond)[0][-1])
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def project_l1_ball(v: np.ndarray, radius: float = 1.0) -> np.ndarray:
    """Euclidean projection onto the l1 ball of the given radius."""
    v = np.asarray(v, dtype=np.float64)
    if np.abs(v).sum() <= radius:
        return v.copy()
    w = project_simplex(np.abs(v) / radius) * radius
    return np.sign(v) * w


def project(geom: GeometrySpec, v) -> np.ndarray:
    """Euclidean projection of an arbitrary vector onto the domain."""
    v = np.ascontiguousarray(v, dtype=np.float64)
    if v.shape != (geom.n,):
        raise InvalidPointError(f"expected shape ({geom.n},), got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InvalidPointError("point has non-finite entries")
    if geom.domain == "simplex":
        return project_simplex(v)
    if geom.domain == "euclidean-ball":
        nrm = float(np.linalg.norm(v))
        if nrm <= geom.radius:
            return v.copy()
        return v * (geom.radius / nrm)
    return project_l1_ball(v)


def distance_to_domain(geom: GeometrySpec, v) -> float:
    """Euclidean distance from ``v`` to the domain."""
    v = np.ascontiguousarray(v, dtype=np.float64)
    return float(np.linalg.norm(v - project(geom, v)))


def in_query_region(geom: GeometrySpec, v, tol: float = MEMBERSHIP_TOL) -> bool:
    """Whether ``v`` is within Euclidean distance ``mu0`` of the domain."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (geom.n,) or not np.all(np.isfinite(v)):
        return False
    return distance_to_domain(geom, v) <= geom.mu0 + tol


def linear_minimizer(geom: GeometrySpec, s) -> tuple[np.ndarray, float]:
    """Exact minimizer of <s, z> over the domain, with its value.

    Used for Frank-Wolfe style optimality certificates: the duality gap of
    a feasible y is <s, y> minus the returned value.
    """
    s = np.ascontiguousarray(s, dtype=np.float64)
    if s.shape != (geom.n,):
        raise InvalidGradientError(f"expected shape ({geom.n},), got {s.shape}")
    if geom.domain == "simplex":
        j = int(np.argmin(s))
        z = np.zeros(geom.n)
        z[j] = 1.0
        return z, float(s[j])
    if geom.domain == "euclidean-ball":
        nrm = float(np.linalg.norm(s))
        if nrm == 0.0:
            return np.zeros(geom.n), 0.0
        z = -(geom.radius / nrm) * s
        return z, -geom.radius * nrm
    j = int(np.argmax(np.abs(s)))
    z = np.zeros(geom.n)
    z[j] = -math.copysign(1.0, s[j])
    return z, -float(abs(s[j]))


def primal_diameter(geom: GeometrySpec) -> float:
    """Upper bound on ||x - y||_p over the domain.

    The simplex and the l1 ball have l1 diameter 2 (and ||.||_p <= ||.||_1
    for p >= 1, so 2 covers every supported p); the Euclidean ball has l2
    diameter 2 * radius.
    """
    if geom.domain == "euclidean-ball":
        return 2.0 * geom.radius
    return 2.0


def max_distance_from(geom: GeometrySpec, c, margin: float = 0.0) -> float:
    """Maximum Euclidean distance from ``c`` to the domain inflated by ``margin``.

    The domain is a polytope or a ball, so the maximum over the domain is
    attained at an extreme point; inflating by a Euclidean margin adds at
    most ``margin`` because the distance function is 1-Lipschitz.
    """
    c = np.ascontiguousarray(c, dtype=np.float64)
    if c.shape != (geom.n,):
        raise InvalidPointError(f"expected shape ({geom.n},), got {c.shape}")
    if geom.domain == "euclidean-ball":
        base = geom.radius + float(np.linalg.norm(c))
    elif geom.domain == "simplex":
        sq = float(np.dot(c, c))
        best = 0.0
        for j in range(geom.n):
            best = max(best, sq - 2.0 * float(c[j]) + 1.0)
        base = math.sqrt(best)
    else:
        sq = float(np.dot(c, c))
        best = 0.0
        for j in range(geom.n):
            best = max(best, sq + 2.0 * abs(float(c[j])) + 1.0)
        base = math.sqrt(best)
    return base + margin
