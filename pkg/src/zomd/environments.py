"""Online loss environments with value/gradient oracles and audit constants.

An environment owns the loss sequence f_1, f_2, ... and everything random
about it: the script that generates losses, the observation noise, and the
bounded adversarial bias added to readings.  The solver interacts through a
strict protocol::

    for k = 1 .. N:
        env.reveal(k, x)            # x passed in first-order mode only
        env.observe_iterate(k, x)
        ... query_value / query_gradient at step k ...

Revealing step k freezes f_k; oracles answer only for the current step.
Exact (noise- and bias-free) losses are available through
:meth:`OnlineEnvironment.exact_value` / :meth:`exact_losses` for
measurement, never for the update path.

Noise kinds for value readings: ``none``, ``additive-gaussian``
(reading = f + sd * xi), ``multiplicative`` (reading = f * (1 + sd * xi)),
with one xi drawn per step and shared by both readings of a two-point
query.  Bias policies: ``zero``; ``constant-sign`` (every reading shifted
by +delta); ``worst-direction`` (the perturbed reading shifted by
+delta * s_k and the base reading by -delta * s_k, with s_k the sign of the
inner product between the query direction and the last iterate movement --
the policy that pushes the resulting gradient estimate against progress).
All policies respect the discipline |reading - noisy value| <= delta.

Each environment publishes :class:`FunctionClassConstants` -- sup bounds
over the query region that the tuning chain consumes -- and, when its loss
script and noise are expressible as pregenerated arrays, a
:class:`FastPlan` that lets the solver run the whole loop inside a fused
kernel while drawing exactly the same random variates the step-by-step
path would.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import geometry as geo
from . import kernels
from .errors import (
    DomainViolationError,
    InvalidPointError,
    ValidationError,
)
from .geometry import GeometrySpec

__all__ = [
    "NOISE_KINDS",
    "BIAS_POLICIES",
    "FAMILIES",
    "EXPERT_SCRIPTS",
    "FunctionClassConstants",
    "NoiseModel",
    "EnvConfig",
    "FastPlan",
    "OnlineEnvironment",
    "ExpertLinearEnvironment",
    "FixedQuadraticEnvironment",
    "SmoothedDistanceEnvironment",
    "AdaptiveLinearEnvironment",
    "build_environment",
    "load_loss_matrix",
]

NOISE_KINDS = ("none", "additive-gaussian", "multiplicative")
BIAS_POLICIES = ("zero", "constant-sign", "worst-direction")
FAMILIES = (
    "expert-linear",
    "fixed-quadratic",
    "smoothed-distance",
    "adaptive-linear",
)
EXPERT_SCRIPTS = ("iid-uniform", "drifting", "file")

_NOISE_CODES = {
    "none": kernels.NOISE_NONE,
    "additive-gaussian": kernels.NOISE_ADDITIVE,
    "multiplicative": kernels.NOISE_MULTIPLICATIVE,
}
_BIAS_CODES = {
    "zero": kernels.BIAS_ZERO,
    "constant-sign": kernels.BIAS_CONSTANT,
    "worst-direction": kernels.BIAS_WORST_DIRECTION,
}


@dataclass(frozen=True)
class FunctionClassConstants:
    """Sup bounds over the query region, as used by the tuning chain.

    ``M2``: Lipschitz constant in the l2 norm.  ``Mr`` / ``r``: Lipschitz
    constant in an lr norm natural to the family (r = 1 for linear losses
    on the simplex, r = 2 otherwise).  ``L2``: gradient Lipschitz constant
    (0 for linear losses, inf when unknown).  ``gamma2``: strong convexity
    modulus in l2 (0 when merely convex).  ``B``: second-moment bound on a
    single value reading, sqrt(E reading^2) <= B, including noise and bias.
    """

    M2: float
    Mr: float
    r: float
    L2: float
    gamma2: float
    B: float


@dataclass(frozen=True)
class NoiseModel:
    """Observation noise kind/level plus bias policy/budget."""

    kind: str = "none"
    sd: float = 0.0
    bias: str = "zero"
    delta: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in NOISE_KINDS:
            raise ValidationError(f"unknown noise kind {self.kind!r}")
        if self.bias not in BIAS_POLICIES:
            raise ValidationError(f"unknown bias policy {self.bias!r}")
        if not (self.sd >= 0.0 and math.isfinite(self.sd)):
            raise ValidationError(f"noise sd must be finite and >= 0, got {self.sd!r}")
        if not (self.delta >= 0.0 and math.isfinite(self.delta)):
            raise ValidationError(f"delta must be finite and >= 0, got {self.delta!r}")
        if self.kind == "none" and self.sd != 0.0:
            raise ValidationError("noise kind 'none' requires sd = 0")
        if self.bias == "zero" and self.delta != 0.0:
            raise ValidationError("bias policy 'zero' requires delta = 0")


@dataclass(frozen=True)
class EnvConfig:
    """Declarative description of an environment; picklable and hashable."""

    family: str
    noise: NoiseModel = NoiseModel()
    script: str = "iid-uniform"
    loss_bound: float = 1.0
    center: Optional[tuple[float, ...]] = None
    scale: float = 1.0
    smooth: float = 0.5
    drift_period: int = 500
    losses_path: Optional[str] = None

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown family {self.family!r}")
        if self.script not in EXPERT_SCRIPTS:
            raise ValidationError(f"unknown script {self.script!r}")
        if not (self.loss_bound > 0.0 and math.isfinite(self.loss_bound)):
            raise ValidationError("loss_bound must be positive and finite")
        if not (self.scale > 0.0 and math.isfinite(self.scale)):
            raise ValidationError("scale must be positive and finite")
        if not (self.smooth > 0.0 and math.isfinite(self.smooth)):
            raise ValidationError("smooth must be positive and finite")
        if self.drift_period < 1:
            raise ValidationError("drift_period must be >= 1")
        if self.script == "file" and self.losses_path is None and self.family == "expert-linear":
            # A matrix may still be handed to build_environment directly.
            pass


@dataclass
class FastPlan:
    """Pregenerated arrays that let a fused kernel replay the run.

    ``kind`` is ``fo-scripted`` (readings precomputed), ``fo-state``
    (reading = curv * (x - center) + offsets[k]), or ``bandit`` (loss
    family evaluated inside the kernel).  Arrays are generated from the
    environment's own random streams in the same order the step-by-step
    path would consume them.
    """

    kind: str
    n_steps: int
    readings: Optional[np.ndarray] = None
    offsets: Optional[np.ndarray] = None
    center: np.ndarray = field(default_factory=lambda: np.zeros(1))
    curv: float = 0.0
    family_code: int = 0
    loss_rows: Optional[np.ndarray] = None
    scale: float = 1.0
    smooth: float = 1.0
    noise_code: int = 0
    noise_sd: float = 0.0
    bias_code: int = 0
    delta: float = 0.0
    xis: Optional[np.ndarray] = None


def load_loss_matrix(path: str, n: Optional[int] = None) -> np.ndarray:
    """Load a loss script: plain text, one row per step, one column per coordinate."""
    rows = np.loadtxt(path, dtype=np.float64, ndmin=2)
    if rows.ndim != 2 or rows.size == 0:
        raise ValidationError(f"loss file {path!r} is not a non-empty matrix")
    if not np.all(np.isfinite(rows)):
        raise ValidationError(f"loss file {path!r} has non-finite entries")
    if n is not None and rows.shape[1] != n:
        raise ValidationError(
            f"loss file {path!r} has {rows.shape[1]} columns, expected {n}"
        )
    return rows


def _seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


class OnlineEnvironment:
    """Base class: protocol state, noise/bias application, audit constants."""

    family: str = "abstract"

    def __init__(self, geom: GeometrySpec, noise: NoiseModel, seed) -> None:
        self.geom = geom
        self.noise = noise
        ss = _seed_sequence(seed)
        s_script, s_noise = ss.spawn(2)
        self._script_rng = np.random.default_rng(s_script)
        self._noise_rng = np.random.default_rng(s_noise)
        self._k = 0
        self._x_curr = geo.start_point(geom)
        self._x_prev = self._x_curr.copy()
        self._xi = 0.0
        self._worst_sign = 1.0
        self._consumed = False
        self._cfg: Optional[EnvConfig] = None

    # -- protocol ----------------------------------------------------------

    @property
    def revealed(self) -> int:
        """Number of steps revealed so far."""
        return self._k

    def reveal(self, k: int, current_x=None) -> None:
        """Freeze the loss of step ``k``; steps must arrive in order.

        ``current_x`` is the iterate x^k and may be passed in first-order
        mode only; adaptive families use it (or, failing that, the last
        observed iterate) to build f_k.  Scripted families ignore it.
        """
        if self._consumed:
            raise ValidationError("environment was consumed by a fast-path run")
        if k != self._k + 1:
            raise ValidationError(f"expected reveal of step {self._k + 1}, got {k}")
        self._reveal_impl(k, current_x)
        self._k = k

    def observe_iterate(self, k: int, x) -> None:
        """Record the iterate x^k (used by adversarial bias and adaptivity)."""
        if k != self._k:
            raise ValidationError(f"observe_iterate({k}) outside revealed step {self._k}")
        x = np.ascontiguousarray(x, dtype=np.float64)
        self._x_prev = self._x_curr
        self._x_curr = x.copy()

    def query_value(self, k: int, x, reading_index: int = 1) -> float:
        """Noisy, possibly biased reading of f_k at ``x``.

        ``x`` may lie anywhere within Euclidean distance mu0 of the domain.
        Reading index 1 draws the step's noise variate; reading index 2
        (the base point of a two-point query) reuses it.
        """
        if k != self._k:
            raise ValidationError(f"query_value({k}) outside revealed step {self._k}")
        if reading_index not in (1, 2):
            raise ValidationError("reading_index must be 1 or 2")
        xq = np.ascontiguousarray(x, dtype=np.float64)
        if not geo.in_query_region(self.geom, xq):
            raise DomainViolationError(
                "value query outside the mu0 neighborhood of the domain"
            )
        val = self._value(k, xq)
        if reading_index == 1 and self.noise.kind != "none":
            self._xi = float(self._noise_rng.standard_normal())
        if self.noise.kind == "none":
            noisy = val
        elif self.noise.kind == "additive-gaussian":
            noisy = val + self.noise.sd * self._xi
        else:
            noisy = val * (1.0 + self.noise.sd * self._xi)
        return noisy + self._value_bias(xq, reading_index)

    def query_gradient(self, k: int, x) -> np.ndarray:
        """Noisy, possibly biased gradient of f_k at a feasible ``x``."""
        if k != self._k:
            raise ValidationError(f"query_gradient({k}) outside revealed step {self._k}")
        if self.noise.kind == "multiplicative":
            raise ValidationError(
                "multiplicative noise is defined for value readings only"
            )
        x = np.ascontiguousarray(x, dtype=np.float64)
        if not geo.contains(self.geom, x):
            raise DomainViolationError("gradient query outside the domain")
        g = self._gradient(k, x)
        if self.noise.kind == "additive-gaussian":
            g = g + self.noise.sd * self._noise_rng.standard_normal(self.geom.n)
        b = self._gradient_bias()
        if b is not None:
            g = g + b
        return g

    def _value_bias(self, xq: np.ndarray, reading_index: int) -> float:
        policy = self.noise.bias
        if policy == "zero":
            return 0.0
        if policy == "constant-sign":
            return self.noise.delta
        if reading_index == 1:
            t = float(np.dot(xq - self._x_curr, self._x_curr - self._x_prev))
            self._worst_sign = 1.0 if t >= 0.0 else -1.0
            return self.noise.delta * self._worst_sign
        return -self.noise.delta * self._worst_sign

    def _gradient_bias(self) -> Optional[np.ndarray]:
        policy = self.noise.bias
        if policy == "zero":
            return None
        if policy == "constant-sign":
            u = np.ones(self.geom.n)
        else:
            u = self._x_curr - self._x_prev
            if not np.any(u):
                u = np.ones(self.geom.n)
        q = self.geom.q
        if math.isinf(q):
            u = np.where(u >= 0.0, 1.0, -1.0)
        else:
            u = u / float(np.sum(np.abs(u) ** q) ** (1.0 / q))
        return self.noise.delta * u

    # -- measurement interface (never used by the update path) --------------

    def exact_value(self, k: int, x) -> float:
        """Noise- and bias-free f_k(x) for any already revealed step."""
        if not (1 <= k <= self._k):
            raise ValidationError(f"step {k} has not been revealed")
        x = np.ascontiguousarray(x, dtype=np.float64)
        if not geo.in_query_region(self.geom, x):
            raise InvalidPointError("exact_value outside the query region")
        return self._value(k, x)

    def exact_losses(self, xs: np.ndarray) -> np.ndarray:
        """Vector of f_k(xs[k-1]) for k = 1 .. len(xs); for measurement."""
        xs = np.ascontiguousarray(xs, dtype=np.float64)
        if xs.ndim != 2 or xs.shape[0] > self._k or xs.shape[1] != self.geom.n:
            raise ValidationError("iterate matrix does not match revealed steps")
        return self._batch_values(xs)

    def average_loss(self, z) -> float:
        """Average of the revealed losses at the fixed point ``z``."""
        if self._k == 0:
            raise ValidationError("no steps revealed yet")
        z = np.ascontiguousarray(z, dtype=np.float64)
        if not geo.in_query_region(self.geom, z):
            raise InvalidPointError("average_loss outside the query region")
        return self._average_value(z)

    def average_gradient(self, z) -> np.ndarray:
        """Gradient of the average revealed loss at ``z`` (measurement only)."""
        if self._k == 0:
            raise ValidationError("no steps revealed yet")
        z = np.ascontiguousarray(z, dtype=np.float64)
        return self._average_gradient_impl(z)

    def clone(self, seed) -> "OnlineEnvironment":
        """Fresh environment with the same configuration and a new seed."""
        if self._cfg is None:
            raise ValidationError("environment was not built from an EnvConfig")
        matrix = getattr(self, "_matrix", None)
        if matrix is not None and self._cfg.losses_path is None:
            return build_environment(self._cfg, self.geom, seed, losses=matrix)
        return build_environment(self._cfg, self.geom, seed)

    # -- family hooks --------------------------------------------------------

    def _reveal_impl(self, k: int, current_x) -> None:
        raise NotImplementedError

    def _value(self, k: int, x: np.ndarray) -> float:
        raise NotImplementedError

    def _gradient(self, k: int, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _batch_values(self, xs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _average_value(self, z: np.ndarray) -> float:
        raise NotImplementedError

    def _average_gradient_impl(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def constants(self) -> FunctionClassConstants:
        raise NotImplementedError

    def hindsight_closed_form(self) -> Optional[tuple[np.ndarray, float]]:
        """Exact minimizer of the average revealed loss, when known."""
        return None

    def fast_plan(self, mode: str, n_steps: int) -> Optional[FastPlan]:
        """Pregenerate a fused-kernel plan, or None when not expressible.

        Consumes the environment: its random streams advance exactly as a
        step-by-step run of ``n_steps`` steps would, and the protocol
        methods refuse further reveals.
        """
        return None

    # -- shared helpers ------------------------------------------------------

    def _mark_pregenerated(self, n_steps: int) -> None:
        self._consumed = True
        self._k = n_steps

    def gradient_second_moment_bound(self, q: float) -> float:
        """Bound on E ||gradient reading||_q^2 over the query region.

        Uses ||v||_q <= ||v||_2 for q >= 2: the mean reading is within
        delta (dual norm <= l2 budget) of a gradient bounded by M2, and
        additive coordinate noise contributes sd^2 * n.
        """
        c = self.constants
        delta_g = 0.0 if self.noise.bias == "zero" else self.noise.delta
        sd = self.noise.sd if self.noise.kind == "additive-gaussian" else 0.0
        if q < 2.0:
            raise ValidationError("gradient readings are measured with q >= 2")
        return (c.M2 + delta_g) ** 2 + sd**2 * self.geom.n


def _value_noise_bound(F: float, noise: NoiseModel) -> float:
    """sqrt(E reading^2) given |f| <= F, by the L2 triangle inequality."""
    if noise.kind == "none":
        base = F
    elif noise.kind == "additive-gaussian":
        base = math.sqrt(F**2 + noise.sd**2)
    else:
        base = F * math.sqrt(1.0 + noise.sd**2)
    return base + noise.delta


class ExpertLinearEnvironment(OnlineEnvironment):
    """Linear losses f_k(x) = <l_k, x> from a script.

    Scripts: ``iid-uniform`` draws every coefficient uniformly from
    [0, loss_bound]; ``drifting`` keeps coefficients in
    [0.45, 0.55] * loss_bound except a drifting favored coordinate held in
    [0.05, 0.15] * loss_bound that advances every ``drift_period`` steps;
    ``file`` replays a fixed matrix.
    """

    family = "expert-linear"

    def __init__(
        self,
        geom: GeometrySpec,
        noise: NoiseModel,
        seed,
        script: str = "iid-uniform",
        loss_bound: float = 1.0,
        drift_period: int = 500,
        matrix: Optional[np.ndarray] = None,
    ) -> None:
        super().__init__(geom, noise, seed)
        if script not in EXPERT_SCRIPTS:
            raise ValidationError(f"unknown script {script!r}")
        if script == "file":
            if matrix is None:
                raise ValidationError("script 'file' needs a loss matrix")
            matrix = np.ascontiguousarray(matrix, dtype=np.float64)
            if matrix.ndim != 2 or matrix.shape[1] != geom.n:
                raise ValidationError(
                    f"loss matrix must have {geom.n} columns, got {matrix.shape}"
                )
        self._script = script
        self._M = float(loss_bound)
        self._period = int(drift_period)
        self._matrix = matrix
        self._rows: list[np.ndarray] = []
        self._rows_arr: Optional[np.ndarray] = None
        if script == "file":
            mmax = float(np.abs(matrix).max())
            m2 = float(np.sqrt((matrix**2).sum(axis=1)).max())
        else:
            mmax = self._M
            m2 = self._M * math.sqrt(geom.n)
        # Query points are a simplex point plus a Euclidean perturbation of
        # norm <= mu0: |<l, x>| <= max_i |l_i| + ||l||_2 * mu0.
        F = mmax + m2 * geom.mu0
        self._constants = FunctionClassConstants(
            M2=m2,
            Mr=mmax,
            r=1.0,
            L2=0.0,
            gamma2=0.0,
            B=_value_noise_bound(F, noise),
        )

    def _script_row(self, k: int) -> np.ndarray:
        if self._script == "iid-uniform":
            return self._script_rng.uniform(0.0, self._M, self.geom.n)
        if self._script == "drifting":
            u = self._script_rng.uniform(0.0, 1.0, self.geom.n)
            row = self._M * (0.45 + 0.1 * u)
            best = ((k - 1) // self._period) % self.geom.n
            row[best] = self._M * (0.05 + 0.1 * u[best])
            return row
        if k > self._matrix.shape[0]:
            raise ValidationError(
                f"loss file has {self._matrix.shape[0]} rows, step {k} requested"
            )
        return self._matrix[k - 1]

    def _reveal_impl(self, k: int, current_x) -> None:
        self._rows.append(self._script_row(k))

    def _row_matrix(self) -> np.ndarray:
        if self._rows_arr is not None:
            return self._rows_arr[: self._k]
        return np.asarray(self._rows)

    def _value(self, k: int, x: np.ndarray) -> float:
        if self._rows_arr is not None:
            return float(np.dot(self._rows_arr[k - 1], x))
        return float(np.dot(self._rows[k - 1], x))

    def _gradient(self, k: int, x: np.ndarray) -> np.ndarray:
        if self._rows_arr is not None:
            return self._rows_arr[k - 1].copy()
        return self._rows[k - 1].copy()

    def _batch_values(self, xs: np.ndarray) -> np.ndarray:
        rows = self._row_matrix()[: xs.shape[0]]
        return np.einsum("ij,ij->i", rows, xs)

    def _average_value(self, z: np.ndarray) -> float:
        return float(np.dot(self._row_matrix().mean(axis=0), z))

    def _average_gradient_impl(self, z: np.ndarray) -> np.ndarray:
        return self._row_matrix().mean(axis=0)

    @property
    def constants(self) -> FunctionClassConstants:
        return self._constants

    def hindsight_closed_form(self) -> Optional[tuple[np.ndarray, float]]:
        if self._k == 0:
            return None
        lbar = self._row_matrix().mean(axis=0)
        return geo.linear_minimizer(self.geom, lbar)

    def fast_plan(self, mode: str, n_steps: int) -> Optional[FastPlan]:
        if self._k != 0 or self._consumed:
            raise ValidationError("fast_plan needs a fresh environment")
        if self._script == "file" and n_steps > self._matrix.shape[0]:
            raise ValidationError(
                f"loss file has {self._matrix.shape[0]} rows, {n_steps} steps requested"
            )
        if self._script == "iid-uniform":
            rows = self._script_rng.uniform(0.0, self._M, (n_steps, self.geom.n))
        elif self._script == "drifting":
            u = self._script_rng.uniform(0.0, 1.0, (n_steps, self.geom.n))
            rows = self._M * (0.45 + 0.1 * u)
            idx = (np.arange(n_steps) // self._period) % self.geom.n
            sel = (np.arange(n_steps), idx)
            rows[sel] = self._M * (0.05 + 0.1 * u[sel])
        else:
            rows = self._matrix[:n_steps].copy()
        rows = np.ascontiguousarray(rows)
        if mode == "first-order":
            if self.noise.bias == "worst-direction":
                return None  # bias depends on the iterate history
            readings = rows.copy()
            if self.noise.kind == "multiplicative":
                raise ValidationError(
                    "multiplicative noise is defined for value readings only"
                )
            if self.noise.kind == "additive-gaussian":
                readings += self.noise.sd * self._noise_rng.standard_normal(
                    (n_steps, self.geom.n)
                )
            b = self._gradient_bias()
            if b is not None:
                readings += b
            self._rows_arr = rows
            self._mark_pregenerated(n_steps)
            return FastPlan(kind="fo-scripted", n_steps=n_steps, readings=readings)
        if self.noise.kind != "none":
            xis = self._noise_rng.standard_normal(n_steps)
        else:
            xis = np.zeros(n_steps)
        self._rows_arr = rows
        self._mark_pregenerated(n_steps)
        return FastPlan(
            kind="bandit",
            n_steps=n_steps,
            family_code=kernels.FAMILY_LINEAR,
            loss_rows=rows,
            center=np.zeros(self.geom.n),
            noise_code=_NOISE_CODES[self.noise.kind],
            noise_sd=self.noise.sd,
            bias_code=_BIAS_CODES[self.noise.bias],
            delta=self.noise.delta,
            xis=xis,
        )


class _FixedEnvironment(OnlineEnvironment):
    """Shared plumbing for time-invariant losses f_k = f."""

    def _reveal_impl(self, k: int, current_x) -> None:
        pass

    def _batch_values(self, xs: np.ndarray) -> np.ndarray:
        return self._value_many(xs)

    def _average_value(self, z: np.ndarray) -> float:
        return self._value(self._k, z)

    def _average_gradient_impl(self, z: np.ndarray) -> np.ndarray:
        return self._gradient(self._k, z)

    def _value_many(self, xs: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class FixedQuadraticEnvironment(_FixedEnvironment):
    """Fixed strongly convex loss f(x) = scale * ||x - center||_2^2."""

    family = "fixed-quadratic"

    def __init__(
        self,
        geom: GeometrySpec,
        noise: NoiseModel,
        seed,
        center: Optional[np.ndarray] = None,
        scale: float = 1.0,
    ) -> None:
        super().__init__(geom, noise, seed)
        if center is None:
            center = np.zeros(geom.n)
        self._c = np.ascontiguousarray(center, dtype=np.float64)
        if self._c.shape != (geom.n,):
            raise ValidationError(f"center must have shape ({geom.n},)")
        self._s = float(scale)
        maxd = geo.max_distance_from(geom, self._c, geom.mu0)
        F = self._s * maxd**2
        self._constants = FunctionClassConstants(
            M2=2.0 * self._s * maxd,
            Mr=2.0 * self._s * maxd,
            r=2.0,
            L2=2.0 * self._s,
            gamma2=2.0 * self._s,
            B=_value_noise_bound(F, noise),
        )

    def _value(self, k: int, x: np.ndarray) -> float:
        d = x - self._c
        return self._s * float(np.dot(d, d))

    def _value_many(self, xs: np.ndarray) -> np.ndarray:
        d = xs - self._c
        return self._s * np.sum(d * d, axis=1)

    def _gradient(self, k: int, x: np.ndarray) -> np.ndarray:
        return 2.0 * self._s * (x - self._c)

    @property
    def constants(self) -> FunctionClassConstants:
        return self._constants

    def hindsight_closed_form(self) -> Optional[tuple[np.ndarray, float]]:
        xstar = geo.project(self.geom, self._c)
        return xstar, self._value(max(self._k, 1), xstar)

    def fast_plan(self, mode: str, n_steps: int) -> Optional[FastPlan]:
        if self._k != 0 or self._consumed:
            raise ValidationError("fast_plan needs a fresh environment")
        if mode == "first-order":
            if self.noise.bias == "worst-direction":
                return None
            offsets = np.zeros((n_steps, self.geom.n))
            if self.noise.kind == "multiplicative":
                raise ValidationError(
                    "multiplicative noise is defined for value readings only"
                )
            if self.noise.kind == "additive-gaussian":
                offsets += self.noise.sd * self._noise_rng.standard_normal(
                    (n_steps, self.geom.n)
                )
            b = self._gradient_bias()
            if b is not None:
                offsets += b
            self._mark_pregenerated(n_steps)
            return FastPlan(
                kind="fo-state",
                n_steps=n_steps,
                offsets=offsets,
                center=self._c,
                curv=2.0 * self._s,
            )
        if self.noise.kind != "none":
            xis = self._noise_rng.standard_normal(n_steps)
        else:
            xis = np.zeros(n_steps)
        self._mark_pregenerated(n_steps)
        return FastPlan(
            kind="bandit",
            n_steps=n_steps,
            family_code=kernels.FAMILY_QUADRATIC,
            loss_rows=np.zeros((1, self.geom.n)),
            center=self._c,
            scale=self._s,
            noise_code=_NOISE_CODES[self.noise.kind],
            noise_sd=self.noise.sd,
            bias_code=_BIAS_CODES[self.noise.bias],
            delta=self.noise.delta,
            xis=xis,
        )


class SmoothedDistanceEnvironment(_FixedEnvironment):
    """Fixed convex loss f(x) = scale * (sqrt(smooth^2 + ||x - c||^2) - smooth).

    Lipschitz in l2 with constant ``scale`` and gradient-Lipschitz with
    constant ``scale / smooth``, but not strongly convex: a smooth stand-in
    for a distance-like objective.
    """

    family = "smoothed-distance"

    def __init__(
        self,
        geom: GeometrySpec,
        noise: NoiseModel,
        seed,
        center: Optional[np.ndarray] = None,
        scale: float = 1.0,
        smooth: float = 0.5,
    ) -> None:
        super().__init__(geom, noise, seed)
        if center is None:
            center = np.zeros(geom.n)
        self._c = np.ascontiguousarray(center, dtype=np.float64)
        if self._c.shape != (geom.n,):
            raise ValidationError(f"center must have shape ({geom.n},)")
        self._s = float(scale)
        self._h = float(smooth)
        maxd = geo.max_distance_from(geom, self._c, geom.mu0)
        F = self._s * (math.sqrt(self._h**2 + maxd**2) - self._h)
        self._constants = FunctionClassConstants(
            M2=self._s,
            Mr=self._s,
            r=2.0,
            L2=self._s / self._h,
            gamma2=0.0,
            B=_value_noise_bound(F, noise),
        )

    def _value(self, k: int, x: np.ndarray) -> float:
        d = x - self._c
        return self._s * (math.sqrt(self._h**2 + float(np.dot(d, d))) - self._h)

    def _value_many(self, xs: np.ndarray) -> np.ndarray:
        d = xs - self._c
        return self._s * (np.sqrt(self._h**2 + np.sum(d * d, axis=1)) - self._h)

    def _gradient(self, k: int, x: np.ndarray) -> np.ndarray:
        d = x - self._c
        return self._s * d / math.sqrt(self._h**2 + float(np.dot(d, d)))

    @property
    def constants(self) -> FunctionClassConstants:
        return self._constants

    def hindsight_closed_form(self) -> Optional[tuple[np.ndarray, float]]:
        xstar = geo.project(self.geom, self._c)
        return xstar, self._value(max(self._k, 1), xstar)

    def fast_plan(self, mode: str, n_steps: int) -> Optional[FastPlan]:
        if self._k != 0 or self._consumed:
            raise ValidationError("fast_plan needs a fresh environment")
        if mode == "first-order":
            return None  # gradient is not affine in the iterate
        if self.noise.kind != "none":
            xis = self._noise_rng.standard_normal(n_steps)
        else:
            xis = np.zeros(n_steps)
        self._mark_pregenerated(n_steps)
        return FastPlan(
            kind="bandit",
            n_steps=n_steps,
            family_code=kernels.FAMILY_SMOOTHED_DISTANCE,
            loss_rows=np.zeros((1, self.geom.n)),
            center=self._c,
            scale=self._s,
            smooth=self._h,
            noise_code=_NOISE_CODES[self.noise.kind],
            noise_sd=self.noise.sd,
            bias_code=_BIAS_CODES[self.noise.bias],
            delta=self.noise.delta,
            xis=xis,
        )


class AdaptiveLinearEnvironment(ExpertLinearEnvironment):
    """Adaptive adversary: f_k(x) = loss_bound * x_j with j the largest
    coordinate of the most recent iterate it is allowed to see.

    In first-order mode that is x^k (passed to :meth:`reveal`); in bandit
    modes only x^{k-1} (the last observed iterate) -- query directions are
    never visible.  Ties break to the lowest index; before any iterate is
    observed, the start point is used.
    """

    family = "adaptive-linear"

    def __init__(
        self,
        geom: GeometrySpec,
        noise: NoiseModel,
        seed,
        loss_bound: float = 1.0,
    ) -> None:
        super().__init__(
            geom, noise, seed, script="iid-uniform", loss_bound=loss_bound
        )
        F = loss_bound * (1.0 + geom.mu0)
        self._constants = FunctionClassConstants(
            M2=loss_bound,
            Mr=loss_bound,
            r=1.0,
            L2=0.0,
            gamma2=0.0,
            B=_value_noise_bound(F, self.noise),
        )

    def _reveal_impl(self, k: int, current_x) -> None:
        target = self._x_curr if current_x is None else np.asarray(current_x)
        row = np.zeros(self.geom.n)
        row[int(np.argmax(target))] = self._M
        self._rows.append(row)

    def fast_plan(self, mode: str, n_steps: int) -> Optional[FastPlan]:
        return None  # the loss depends on the iterate history


def build_environment(
    cfg: EnvConfig, geom: GeometrySpec, seed, losses: Optional[np.ndarray] = None
) -> OnlineEnvironment:
    """Construct the environment described by ``cfg`` on geometry ``geom``."""
    center = None if cfg.center is None else np.asarray(cfg.center, dtype=np.float64)
    if cfg.family == "expert-linear":
        matrix = losses
        if matrix is None and cfg.losses_path is not None:
            matrix = load_loss_matrix(cfg.losses_path, geom.n)
        script = cfg.script
        if matrix is not None:
            script = "file"
        env: OnlineEnvironment = ExpertLinearEnvironment(
            geom,
            cfg.noise,
            seed,
            script=script,
            loss_bound=cfg.loss_bound,
            drift_period=cfg.drift_period,
            matrix=matrix,
        )
    elif cfg.family == "fixed-quadratic":
        env = FixedQuadraticEnvironment(
            geom, cfg.noise, seed, center=center, scale=cfg.scale
        )
    elif cfg.family == "smoothed-distance":
        env = SmoothedDistanceEnvironment(
            geom, cfg.noise, seed, center=center, scale=cfg.scale, smooth=cfg.smooth
        )
    elif cfg.family == "adaptive-linear":
        env = AdaptiveLinearEnvironment(
            geom, cfg.noise, seed, loss_bound=cfg.loss_bound
        )
    else:  # pragma: no cover - EnvConfig validates the family
        raise ValidationError(f"unknown family {cfg.family!r}")
    env._cfg = replace(cfg, script=env._script if hasattr(env, "_script") else cfg.script)
    return env
