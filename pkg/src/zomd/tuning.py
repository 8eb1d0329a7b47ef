"""Accuracy-driven parameter selection for bandit mirror descent.

Given a target mean-regret accuracy ``epsilon``, the chain picks, in order:

1. the smoothing radius ``mu`` -- as large as the smoothing error budget
   epsilon/2 allows (via the value-Lipschitz constant M2 and/or the
   gradient-Lipschitz constant L2), capped for two-point estimators so the
   simplified second-moment bounds apply, and capped by the query margin;
2. the tolerable reading bias ``delta_max`` -- so the bias-induced drift
   sigma = (2m) * delta * R * sqrt(n) / mu stays within epsilon/4;
3. the gradient-estimate second moment bound ``M2_bound`` for the chosen
   estimator and dual exponent q;
4. the horizon ``N`` -- for merely convex losses the smallest N with
   M R sqrt(2/N) <= epsilon/4, i.e. ceil(32 M^2 R^2 / epsilon^2); for
   gamma2-strongly convex losses the smallest N with
   M^2 (1 + ln N) / (2 gamma2 N) <= epsilon/4.

The total guarantee then splits as epsilon/4 (optimization) + epsilon/4
(bias drift) + epsilon/2 (smoothing), so the tuned run's mean regret
bound is M R sqrt(2/N) + sigma <= epsilon/2 against the smoothed losses
and epsilon overall.  :func:`table_order` reports the resulting order of
N as a power profile in epsilon, n, and the class constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .environments import FunctionClassConstants
from .errors import UntunableError, ValidationError

__all__ = [
    "REGIMES",
    "TuningInput",
    "TuningOutput",
    "TableCell",
    "choose_mu",
    "delta_max",
    "bound_M2",
    "choose_N",
    "sigma_budget",
    "tune",
    "table_order",
]

REGIMES = ("convex", "strongly-convex")


@dataclass(frozen=True)
class TuningInput:
    """Inputs the chain consumes.

    ``q`` is the dual norm exponent gradients are measured in: 2, inf, or
    a finite value in (2, 2 ln n] (one-point estimator only).  ``r2``
    bounds the prox function over the domain; ``mu0`` caps the smoothing
    radius (the oracle's query margin).  ``constants`` may carry inf for
    unknown entries; the chain uses what is finite and reports
    :class:`UntunableError` when that is not enough.
    """

    epsilon: float
    n: int
    q: float
    m: int
    r2: float
    constants: FunctionClassConstants
    regime: str
    mu0: float = math.inf

    def __post_init__(self) -> None:
        if not (self.epsilon > 0.0 and math.isfinite(self.epsilon)):
            raise ValidationError("epsilon must be positive and finite")
        if self.n < 2:
            raise ValidationError("n must be >= 2")
        if self.m not in (1, 2):
            raise ValidationError("m must be 1 or 2")
        if not (self.r2 > 0.0 and math.isfinite(self.r2)):
            raise ValidationError("r2 must be positive and finite")
        if self.regime not in REGIMES:
            raise ValidationError(f"unknown regime {self.regime!r}")
        if not (self.q >= 2.0):
            raise ValidationError("q must be >= 2 (q = inf allowed)")
        if self.m == 2 and not (self.q == 2.0 or math.isinf(self.q)):
            raise ValidationError("the two-point bounds need q = 2 or q = inf")
        if (
            self.m == 1
            and math.isfinite(self.q)
            and self.q > 2.0
            and self.q > 2.0 * math.log(self.n)
        ):
            raise ValidationError(
                "finite q above 2 ln n is dominated by q = inf; pass q = inf"
            )
        if self.regime == "strongly-convex":
            if self.q != 2.0:
                raise ValidationError("the strongly-convex regime requires q = 2")
            g2 = self.constants.gamma2
            if not (g2 > 0.0 and math.isfinite(g2)):
                raise ValidationError(
                    "the strongly-convex regime needs a finite gamma2 > 0"
                )
        if not (self.mu0 > 0.0):
            raise ValidationError("mu0 must be positive (inf for no cap)")


@dataclass(frozen=True)
class TuningOutput:
    """Chain output: parameters plus the bound pieces they certify."""

    mu: float
    delta_max: float
    m2_bound: float
    sigma: float
    n_steps: int
    alpha: float
    schedule_kind: str
    cell: "TableCell"


@dataclass(frozen=True)
class TableCell:
    """Power profile of the horizon: N = O(prefactor * product of powers).

    ``eps_exp`` is the exponent of epsilon (negative), ``n_exp`` the
    exponent of the dimension, and ``const_exps`` names the class
    constants entering the prefactor with their powers.  ``log_factor``
    marks the extra (1 + ln N) of the strongly convex horizon rule.
    """

    label: str
    eps_exp: float
    n_exp: float
    const_exps: tuple[tuple[str, float], ...]
    log_factor: bool


def _finite(v: float) -> bool:
    return math.isfinite(v) and v > 0.0


def choose_mu(inp: TuningInput) -> float:
    """Largest smoothing radius the epsilon/2 smoothing budget allows.

    The smoothed loss is within min(M2 * mu, L2 * mu^2 / 2) of the true
    loss (uniformly), so mu <= max(eps / (2 M2), sqrt(eps / L2)) keeps the
    two-sided smoothing cost within eps/2.  Two-point estimators
    additionally cap mu so the simplified second-moment bound holds, and
    mu never exceeds the query margin mu0.
    """
    c = inp.constants
    have_m2 = _finite(c.M2)
    have_l2 = math.isfinite(c.L2)  # L2 = 0 (linear losses) means no smoothing error
    if not have_m2 and not have_l2:
        raise UntunableError("choose_mu needs a finite M2 or L2")
    branches = []
    if have_m2:
        branches.append(inp.epsilon / (2.0 * c.M2))
    if have_l2:
        branches.append(math.inf if c.L2 == 0.0 else math.sqrt(inp.epsilon / c.L2))
    mu = max(branches)
    if inp.m == 2:
        if not have_m2:
            raise UntunableError("the two-point chain needs a finite M2")
        if not (have_l2 and c.L2 > 0.0):
            raise UntunableError(
                "the two-point chain needs a finite L2 > 0 for its curvature cap"
            )
        if inp.q == 2.0:
            cap = (c.M2 / c.L2) * math.sqrt(4.0 / (3.0 * inp.n))
        else:
            cap = (c.M2 / c.L2) * math.sqrt(1.0 / (6.0 * inp.n))
        mu = min(mu, cap)
    mu = min(mu, inp.mu0)
    if not _finite(mu):
        raise UntunableError(
            "mu is unbounded (no smoothing cost and no mu0 cap); provide mu0"
        )
    return mu


def delta_max(inp: TuningInput, mu: float) -> float:
    """Largest reading bias whose regret drift stays within epsilon/4.

    The bias drift is sigma = (2m) * delta * R * sqrt(n) / mu, so the cap
    is eps * mu / (8 R sqrt(n)) for one-point and eps * mu / (16 R sqrt(n))
    for two-point estimators; the two-point cap also keeps the simplified
    second-moment bound valid (delta <= M2 * mu / sqrt(12 n) for q = 2,
    M2 * mu / sqrt(96 n) for q = inf).
    """
    if not (mu > 0.0 and math.isfinite(mu)):
        raise ValidationError("delta_max needs a finite mu > 0")
    r = math.sqrt(inp.r2)
    rt_n = math.sqrt(inp.n)
    if inp.m == 1:
        return inp.epsilon * mu / (8.0 * r * rt_n)
    cap_sigma = inp.epsilon * mu / (16.0 * r * rt_n)
    c = inp.constants
    if not _finite(c.M2):
        raise UntunableError("the two-point chain needs a finite M2")
    if inp.q == 2.0:
        cap_moment = c.M2 * mu / math.sqrt(12.0 * inp.n)
    else:
        cap_moment = c.M2 * mu / math.sqrt(96.0 * inp.n)
    return min(cap_sigma, cap_moment)


def bound_M2(inp: TuningInput, mu: float, delta: float) -> float:
    """Second-moment bound E ||g||_q^2 <= M^2 for the chosen estimator.

    One-point: (q-1) * n^(1+2/q) * B^2 / mu^2 for finite q (n^2 B^2/mu^2
    at q = 2), and 4 n ln(n) B^2 / mu^2 for q = inf.  Two-point: the
    three-term bound 3 n M2^2 + (3/4) n^2 L2^2 mu^2 + 12 n^2 delta^2/mu^2
    (q = 2) or 4 ln(n) M2^2 + 3 n ln(n) L2^2 mu^2 + 48 n ln(n) delta^2/mu^2
    (q = inf), replaced by the simplified 5 n M2^2 / 5 ln(n) M2^2 whenever
    the mu and delta caps that justify it hold.
    """
    if not (mu > 0.0 and math.isfinite(mu)):
        raise ValidationError("bound_M2 needs a finite mu > 0")
    if not (0.0 <= delta and math.isfinite(delta)):
        raise ValidationError("bound_M2 needs a finite delta >= 0")
    c = inp.constants
    n = inp.n
    if inp.m == 1:
        if not _finite(c.B):
            raise UntunableError("the one-point bound needs a finite value bound B")
        if math.isinf(inp.q):
            if n < 2:
                raise UntunableError("the q = inf bound needs n >= 2")
            return 4.0 * n * math.log(n) * c.B**2 / mu**2
        return (inp.q - 1.0) * n ** (1.0 + 2.0 / inp.q) * c.B**2 / mu**2
    if not (_finite(c.M2) and math.isfinite(c.L2) and c.L2 > 0.0):
        raise UntunableError("the two-point bound needs finite M2 and L2 > 0")
    slack = 1.0 + 1e-12
    if inp.q == 2.0:
        three = 3.0 * n * c.M2**2 + 0.75 * n**2 * c.L2**2 * mu**2 \
            + 12.0 * n**2 * delta**2 / mu**2
        ok = mu <= (c.M2 / c.L2) * math.sqrt(4.0 / (3.0 * n)) * slack and \
            delta <= c.M2 * mu / math.sqrt(12.0 * n) * slack
        simple = 5.0 * n * c.M2**2
    else:
        ln = math.log(n)
        three = 4.0 * ln * c.M2**2 + 3.0 * n * ln * c.L2**2 * mu**2 \
            + 48.0 * n * ln * delta**2 / mu**2
        ok = mu <= (c.M2 / c.L2) * math.sqrt(1.0 / (6.0 * n)) * slack and \
            delta <= c.M2 * mu / math.sqrt(96.0 * n) * slack
        simple = 5.0 * ln * c.M2**2
    return min(three, simple) if ok else three


def sigma_budget(inp: TuningInput, mu: float, delta: float) -> float:
    """Regret drift caused by reading bias: (2m) * delta * R * sqrt(n) / mu."""
    return 2.0 * inp.m * delta * math.sqrt(inp.r2) * math.sqrt(inp.n) / mu


def choose_N(inp: TuningInput, m2_bound: float) -> int:
    """Smallest horizon whose optimization term is within epsilon/4.

    Convex: M R sqrt(2/N) <= eps/4, i.e. N = ceil(32 M^2 R^2 / eps^2).
    Strongly convex: smallest N with M^2 (1+ln N) / (2 gamma2 N) <= eps/4,
    found by doubling then integer bisection (the left side decreases).
    """
    if not _finite(m2_bound):
        raise UntunableError("choose_N needs a finite positive M^2 bound")
    if inp.regime == "convex":
        return max(1, math.ceil(32.0 * m2_bound * inp.r2 / inp.epsilon**2))
    g2 = inp.constants.gamma2
    target = inp.epsilon / 4.0

    def term(n_steps: int) -> float:
        return m2_bound * (1.0 + math.log(n_steps)) / (2.0 * g2 * n_steps)

    if term(1) <= target:
        return 1
    hi = 2
    while term(hi) > target:
        hi *= 2
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if term(mid) <= target:
            hi = mid
        else:
            lo = mid
    return hi


def tune(inp: TuningInput) -> TuningOutput:
    """Run the whole chain and cross-check the budget split it promises."""
    mu = choose_mu(inp)
    delta = delta_max(inp, mu)
    m2b = bound_M2(inp, mu, delta)
    sigma = sigma_budget(inp, mu, delta)
    n_steps = choose_N(inp, m2b)
    if sigma > inp.epsilon / 4.0 + 1e-9 * inp.epsilon:
        raise UntunableError("internal: bias drift exceeds its epsilon/4 budget")
    if inp.regime == "convex":
        opt = math.sqrt(m2b) * math.sqrt(inp.r2) * math.sqrt(2.0 / n_steps)
        alpha = math.sqrt(inp.r2 / m2b) * math.sqrt(2.0 / n_steps)
        kind = "constant"
    else:
        opt = m2b * (1.0 + math.log(n_steps)) / (2.0 * inp.constants.gamma2 * n_steps)
        alpha = math.nan
        kind = "strongly-convex"
    if opt > inp.epsilon / 4.0 + 1e-9 * inp.epsilon:
        raise UntunableError("internal: optimization term exceeds its budget")
    return TuningOutput(
        mu=mu,
        delta_max=delta,
        m2_bound=m2b,
        sigma=sigma,
        n_steps=n_steps,
        alpha=alpha,
        schedule_kind=kind,
        cell=table_order(inp),
    )


def table_order(inp: TuningInput) -> TableCell:
    """Power profile of the tuned horizon in epsilon, n, and the constants.

    The profile depends on the estimator (m), the regime, and which class
    constants drive the smoothing radius: for one-point estimators the mu
    branch actually attained (value-Lipschitz vs curvature), for two-point
    estimators the curvature cap.  Strongly convex cells carry an extra
    (1 + ln N) factor, flagged rather than folded into the exponent.
    """
    c = inp.constants
    nexp_q = 1.0 + 2.0 / inp.q if math.isfinite(inp.q) else 1.0
    sc = inp.regime == "strongly-convex"
    if inp.m == 1:
        if not _finite(c.B):
            raise UntunableError("one-point cells need a finite value bound B")
        have_m2 = _finite(c.M2)
        have_l2 = math.isfinite(c.L2) and c.L2 > 0.0
        if not have_m2 and not have_l2:
            raise UntunableError("one-point cells need a finite M2 or L2 > 0")
        if have_m2 and have_l2:
            lip_branch = inp.epsilon / (2.0 * c.M2) >= math.sqrt(inp.epsilon / c.L2)
        else:
            lip_branch = have_m2
        if lip_branch:
            if sc:
                return TableCell(
                    label="one-point, value-Lipschitz, strongly convex",
                    eps_exp=-3.0,
                    n_exp=2.0,
                    const_exps=(("B", 2.0), ("M2", 2.0), ("gamma2", -1.0)),
                    log_factor=True,
                )
            return TableCell(
                label="one-point, value-Lipschitz, convex",
                eps_exp=-4.0,
                n_exp=nexp_q,
                const_exps=(("B", 2.0), ("M2", 2.0), ("r2", 1.0)),
                log_factor=False,
            )
        if sc:
            return TableCell(
                label="one-point, curvature-smoothed, strongly convex",
                eps_exp=-2.0,
                n_exp=2.0,
                const_exps=(("B", 2.0), ("L2", 1.0), ("gamma2", -1.0)),
                log_factor=True,
            )
        return TableCell(
            label="one-point, curvature-smoothed, convex",
            eps_exp=-3.0,
            n_exp=nexp_q,
            const_exps=(("B", 2.0), ("L2", 1.0), ("r2", 1.0)),
            log_factor=False,
        )
    if not (_finite(c.M2) and math.isfinite(c.L2) and c.L2 > 0.0):
        raise UntunableError("two-point cells need finite M2 and L2 > 0")
    if sc:
        return TableCell(
            label="two-point, strongly convex",
            eps_exp=-1.0,
            n_exp=1.0 if math.isinf(inp.q) else 2.0 - 2.0 / inp.q,
            const_exps=(("M2", 2.0), ("gamma2", -1.0)),
            log_factor=True,
        )
    return TableCell(
        label="two-point, convex",
        eps_exp=-2.0,
        n_exp=2.0 / inp.q if math.isfinite(inp.q) else 0.0,
        const_exps=(("M2", 2.0), ("r2", 1.0)),
        log_factor=False,
    )
