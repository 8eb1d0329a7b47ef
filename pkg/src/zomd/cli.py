"""Command-line interface: tune, run, sweep, verify-estimator.

Configuration is a plain-text file of ``key = value`` lines; blank lines
and ``#`` comments (whole-line or trailing) are ignored, later keys win,
and the flags ``--seed``, ``--jobs``, ``--out``, ``--losses`` override the
corresponding keys.  All floating-point output is printed with 17
significant digits, so files parse back to the exact binary values.

Subcommands
-----------
``tune``
    Print the tuned parameters (mu, delta_max, m2_bound, sigma, N, alpha,
    schedule) and the horizon's order profile for a target accuracy.
``run``
    Run a Monte-Carlo regret experiment and emit one CSV with a row per
    replica plus an ``aggregate`` row.
``sweep``
    Repeat ``run`` over a grid of horizons (``sweep_steps``) or target
    accuracies (``sweep_epsilon``), emit one CSV for all cells, and print
    the fitted log-log rate of the aggregate means.
``verify-estimator``
    Monte-Carlo check of the gradient estimators against their
    unbiasedness and second-moment guarantees; exit code 1 if any check
    fails.

The CSV schema for ``run`` and ``sweep`` is fixed::

    run_id, seed, family, geometry, mode, n, N, epsilon, mu, delta,
    replicas, regret_mean, regret_stderr, q05, q50, q95, bound,
    bound_satisfied, wall_ms

Replica rows leave the aggregate-only fields (stderr, quantiles) empty;
fields that do not apply to a mode (mu/delta in first-order runs, epsilon
in explicit-horizon runs) are empty as well.  ``wall_ms`` is 0 unless
``--timing`` is passed, keeping default output byte-deterministic.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from . import geometry as geo
from . import tuning
from .environments import (
    EnvConfig,
    FunctionClassConstants,
    NoiseModel,
    build_environment,
)
from .errors import ZomdError, ValidationError
from .estimators import (
    SmoothingConfig,
    one_point_estimate,
    sample_sphere,
    two_point_estimate,
)
from .geometry import GeometrySpec
from .regret import (
    ExperimentSpec,
    RegretReport,
    fit_rate,
    monte_carlo_regret,
    theoretical_bound,
)
from .solver import StepSchedule

__all__ = ["main", "parse_config", "CSV_COLUMNS"]

CSV_COLUMNS = (
    "run_id",
    "seed",
    "family",
    "geometry",
    "mode",
    "n",
    "N",
    "epsilon",
    "mu",
    "delta",
    "replicas",
    "regret_mean",
    "regret_stderr",
    "q05",
    "q50",
    "q95",
    "bound",
    "bound_satisfied",
    "wall_ms",
)

VERIFY_COLUMNS = (
    "check",
    "m",
    "q",
    "n",
    "samples",
    "empirical",
    "bound",
    "ratio",
    "passed",
)


def _fmt(v) -> str:
    """Serialize one CSV cell: 17 significant digits for floats."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return format(v, ".17g")
    return str(v)


def parse_config(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment, later keys win."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"config line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key:
            raise ValidationError(f"config line {lineno}: empty key")
        out[key] = value
    return out


class _Config:
    """Typed access to the merged key/value configuration."""

    def __init__(self, values: dict[str, str]):
        self.values = values
        self.used: set[str] = set()

    def has(self, key: str) -> bool:
        return key in self.values

    def get(self, key: str, default: Optional[str] = None) -> Optional[str]:
        self.used.add(key)
        return self.values.get(key, default)

    def get_float(self, key: str, default: Optional[float] = None) -> Optional[float]:
        raw = self.get(key)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise ValidationError(f"config key {key!r}: not a number: {raw!r}")

    def get_int(self, key: str, default: Optional[int] = None) -> Optional[int]:
        raw = self.get(key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise ValidationError(f"config key {key!r}: not an integer: {raw!r}")

    def get_bool(self, key: str, default: bool = False) -> bool:
        raw = self.get(key)
        if raw is None:
            return default
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValidationError(f"config key {key!r}: not a boolean: {raw!r}")

    def require(self, key: str) -> str:
        raw = self.get(key)
        if raw is None:
            raise ValidationError(f"config key {key!r} is required")
        return raw

    def get_floats(self, key: str) -> Optional[tuple[float, ...]]:
        raw = self.get(key)
        if raw is None:
            return None
        try:
            return tuple(float(tok) for tok in raw.split(",") if tok.strip())
        except ValueError:
            raise ValidationError(f"config key {key!r}: not a comma list of numbers")


# ---------------------------------------------------------------------------
# Builders from configuration
# ---------------------------------------------------------------------------


def _build_geometry(cfg: _Config, mu0: float) -> GeometrySpec:
    domain = cfg.get("geometry", "simplex")
    n = cfg.get_int("n", 5)
    radius = cfg.get_float("radius", 1.0)
    if domain == "simplex":
        return geo.simplex_geometry(n, mu0=mu0)
    if domain == "euclidean-ball":
        return geo.ball_geometry(n, radius=radius, mu0=mu0)
    if domain == "l1-ball":
        return geo.l1_ball_geometry(n, mu0=mu0)
    raise ValidationError(f"unknown geometry {domain!r}")


def _build_noise(cfg: _Config) -> NoiseModel:
    return NoiseModel(
        kind=cfg.get("noise", "none"),
        sd=cfg.get_float("noise_sd", 0.0),
        bias=cfg.get("bias", "zero"),
        delta=cfg.get_float("delta", 0.0),
    )


def _build_env_config(cfg: _Config, noise: NoiseModel) -> EnvConfig:
    center = cfg.get_floats("center")
    return EnvConfig(
        family=cfg.get("family", "expert-linear"),
        noise=noise,
        script=cfg.get("script", "iid-uniform"),
        loss_bound=cfg.get_float("loss_bound", 1.0),
        center=center,
        scale=cfg.get_float("scale", 1.0),
        smooth=cfg.get_float("smooth", 0.5),
        drift_period=cfg.get_int("drift_period", 500),
        losses_path=cfg.get("losses"),
    )


def _constants_for(cfg: _Config, env_cfg: EnvConfig, geom: GeometrySpec) -> FunctionClassConstants:
    """Environment-declared constants, with per-key config overrides."""
    probe = build_environment(env_cfg, geom, 0)
    c = probe.constants
    overrides = {}
    for key, field_name in (
        ("m2", "M2"),
        ("mr", "Mr"),
        ("lip_r", "r"),
        ("l2", "L2"),
        ("gamma2", "gamma2"),
        ("value_bound", "B"),
    ):
        v = cfg.get_float(key)
        if v is not None:
            overrides[field_name] = v
    return replace(c, **overrides) if overrides else c


def _mode_m(mode: str) -> int:
    return {"bandit-1pt": 1, "bandit-2pt": 2}.get(mode, 0)


def _pick_q(cfg: _Config, geom: GeometrySpec) -> float:
    """Dual exponent for bounds: the geometry's q, or a valid tightening.

    Any q' in [2, q_geom] is admissible because ||.||_{q'} >= ||.||_{q_geom}
    there, so a q'-moment bound covers the geometry's dual norm.
    """
    raw = cfg.get("q")
    if raw is None:
        return geom.q
    qv = math.inf if raw.strip().lower() in ("inf", "infinity") else float(raw)
    if not (2.0 <= qv <= geom.q or (math.isinf(qv) and math.isinf(geom.q))):
        raise ValidationError(
            f"q must lie in [2, {geom.q}] for this geometry, got {raw}"
        )
    return qv


def _smoothing_gap(constants: FunctionClassConstants, mu: float) -> float:
    """Uniform gap between the smoothed and true loss: min(M2 mu, L2 mu^2/2)."""
    gaps = []
    if math.isfinite(constants.M2):
        gaps.append(constants.M2 * mu)
    if math.isfinite(constants.L2):
        gaps.append(0.5 * constants.L2 * mu**2)
    if not gaps:
        raise ValidationError("cannot bound the smoothing gap: no finite M2 or L2")
    return min(gaps)


# ---------------------------------------------------------------------------
# tune
# ---------------------------------------------------------------------------


def _tuned_chain(
    cfg: _Config, mode: str, epsilon: float
) -> tuple[GeometrySpec, FunctionClassConstants, tuning.TuningInput, tuning.TuningOutput]:
    """Run the tuning chain with a self-consistent query region.

    The value bound B is a sup over the mu0-neighborhood of the domain,
    but when no mu0 is configured the natural margin is the tuned mu
    itself.  Two passes resolve the circularity: a provisional pass picks
    mu from constants over the bare domain, the margin is fixed to that mu
    (constants over the enlarged region only grow, so the final mu never
    exceeds the margin), and the final chain runs against constants taken
    over the fixed region.
    """
    m = _mode_m(mode)
    if m == 0:
        raise ValidationError("tuning applies to bandit modes; set mode")
    noise = _build_noise(cfg)
    regime = cfg.get("regime", "convex")
    mu0_key = cfg.get_float("mu0")
    if mu0_key is None:
        geom_pre = _build_geometry(cfg, 0.0)
        const_pre = _constants_for(cfg, _build_env_config(cfg, noise), geom_pre)
        inp_pre = tuning.TuningInput(
            epsilon=epsilon,
            n=geom_pre.n,
            q=_pick_q(cfg, geom_pre),
            m=m,
            r2=cfg.get_float("r2", geom_pre.r2),
            constants=const_pre,
            regime=regime,
            mu0=math.inf,
        )
        mu0 = tuning.choose_mu(inp_pre)
    else:
        mu0 = mu0_key
    geom = _build_geometry(cfg, mu0)
    constants = _constants_for(cfg, _build_env_config(cfg, noise), geom)
    inp = tuning.TuningInput(
        epsilon=epsilon,
        n=geom.n,
        q=_pick_q(cfg, geom),
        m=m,
        r2=cfg.get_float("r2", geom.r2),
        constants=constants,
        regime=regime,
        mu0=mu0,
    )
    return geom, constants, inp, tuning.tune(inp)


def cmd_tune(cfg: _Config, out_path: Optional[str]) -> int:
    mode = cfg.get("mode", "bandit-1pt")
    epsilon = cfg.get_float("epsilon")
    if epsilon is None:
        raise ValidationError("tuning needs the 'epsilon' key")
    _geom, _constants, inp, res = _tuned_chain(cfg, mode, epsilon)
    lines = [
        f"mode = {mode}",
        f"epsilon = {_fmt(inp.epsilon)}",
        f"mu = {_fmt(res.mu)}",
        f"delta_max = {_fmt(res.delta_max)}",
        f"m2_bound = {_fmt(res.m2_bound)}",
        f"sigma = {_fmt(res.sigma)}",
        f"N = {res.n_steps}",
        f"alpha = {_fmt(res.alpha)}",
        f"schedule = {res.schedule_kind}",
        f"cell = {res.cell.label}",
        f"cell_eps_exp = {_fmt(res.cell.eps_exp)}",
        f"cell_n_exp = {_fmt(res.cell.n_exp)}",
        f"cell_constants = "
        + " ".join(f"{name}^{_fmt(p)}" for name, p in res.cell.const_exps),
        f"cell_log_factor = {_fmt(res.cell.log_factor)}",
    ]
    text = "\n".join(lines) + "\n"
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# run / sweep
# ---------------------------------------------------------------------------


def _experiment_from_config(
    cfg: _Config,
    epsilon_override: Optional[float] = None,
    steps_override: Optional[int] = None,
) -> tuple[ExperimentSpec, Optional[float], Optional[float], Optional[float]]:
    """Build an ExperimentSpec; returns (spec, epsilon, mu, delta)."""
    mode = cfg.get("mode", "first-order")
    m = _mode_m(mode)
    epsilon = epsilon_override if epsilon_override is not None else cfg.get_float("epsilon")
    noise = _build_noise(cfg)
    regime = cfg.get("regime", "convex")

    if m > 0:
        mu0_key = cfg.get_float("mu0")
        if epsilon is not None:
            # Tune the full chain at the target accuracy.
            geom, constants, inp, tuned = _tuned_chain(cfg, mode, epsilon)
            mu = cfg.get_float("mu", tuned.mu)
            delta = tuned.delta_max if noise.bias != "zero" else 0.0
            if cfg.has("delta"):
                delta = cfg.get_float("delta")
            n_steps = steps_override or cfg.get_int("steps") or tuned.n_steps
            m2b = tuned.m2_bound
            sigma = tuning.sigma_budget(inp, mu, delta)
            bound = float(epsilon)
        else:
            mu = cfg.get_float("mu")
            if mu is None:
                raise ValidationError("bandit runs need 'mu' (or 'epsilon' to tune)")
            delta = noise.delta
            n_steps = steps_override or cfg.get_int("steps")
            if n_steps is None:
                raise ValidationError("runs need 'steps' (or 'epsilon' to tune)")
            geom = _build_geometry(cfg, mu0_key if mu0_key is not None else mu)
            constants = _constants_for(cfg, _build_env_config(cfg, noise), geom)
            inp = tuning.TuningInput(
                epsilon=1.0,  # placeholder; only the moment bound is used
                n=geom.n,
                q=_pick_q(cfg, geom),
                m=m,
                r2=cfg.get_float("r2", geom.r2),
                constants=constants,
                regime=regime,
                mu0=geom.mu0,
            )
            m2b = tuning.bound_M2(inp, mu, delta)
            sigma = tuning.sigma_budget(inp, mu, delta)
            bound = theoretical_bound(
                regime,
                m2b,
                inp.r2,
                n_steps,
                sigma=sigma,
                gamma2=constants.gamma2,
            ) + _smoothing_gap(constants, mu)
        if mu > geom.mu0 + 1e-12:
            raise ValidationError(
                f"mu = {mu:g} exceeds the query margin mu0 = {geom.mu0:g}"
            )
        smoothing = SmoothingConfig(mu=mu, m=m, n=geom.n)
        r2 = cfg.get_float("r2", geom.r2)
    else:
        if epsilon is not None:
            raise ValidationError(
                "epsilon-driven tuning applies to bandit modes; "
                "first-order runs take explicit 'steps'"
            )
        mu = None
        delta = noise.delta if noise.bias != "zero" else None
        n_steps = steps_override or cfg.get_int("steps")
        if n_steps is None:
            raise ValidationError("runs need 'steps'")
        geom = _build_geometry(cfg, cfg.get_float("mu0", 0.0))
        constants = _constants_for(cfg, _build_env_config(cfg, noise), geom)
        q = _pick_q(cfg, geom)
        probe = build_environment(_build_env_config(cfg, noise), geom, 0)
        m2b = probe.gradient_second_moment_bound(q)
        sigma = noise.delta * geo.primal_diameter(geom)
        r2 = cfg.get_float("r2", geom.r2)
        bound = theoretical_bound(
            regime, m2b, r2, n_steps, sigma=sigma, gamma2=constants.gamma2
        )
        smoothing = None

    env_cfg = _build_env_config(cfg, replace(noise, delta=delta or 0.0))
    if cfg.has("bound"):
        bound = cfg.get_float("bound")
    alpha = cfg.get_float("alpha")
    if regime == "strongly-convex":
        gamma2 = cfg.get_float("gamma2", constants.gamma2)
        schedule = StepSchedule.strongly_convex(gamma2)
    elif alpha is not None:
        schedule = StepSchedule(kind="constant", alpha=alpha)
    else:
        schedule = StepSchedule.constant_for(r2, m2b, n_steps)
    spec = ExperimentSpec(
        geom=geom,
        env=env_cfg,
        mode=mode,
        n_steps=n_steps,
        schedule=schedule,
        smoothing=smoothing,
        bound=bound,
        allow_fast=not cfg.get_bool("no_fast", False),
    )
    return spec, epsilon, mu, delta


def _report_rows(
    report: RegretReport,
    seed: int,
    epsilon: Optional[float],
    mu: Optional[float],
    delta: Optional[float],
    timing: bool,
) -> list[list[str]]:
    spec = report.spec
    base = {
        "seed": seed,
        "family": spec.env.family,
        "geometry": spec.geom.domain,
        "mode": spec.mode,
        "n": spec.geom.n,
        "N": spec.n_steps,
        "epsilon": epsilon,
        "mu": mu,
        "delta": delta,
        "replicas": report.replicas,
        "bound": report.bound if math.isfinite(report.bound) else None,
    }
    rows = []
    for i, r in enumerate(report.regrets):
        row = dict(base)
        row["run_id"] = f"replica-{i:04d}"
        row["regret_mean"] = float(r)
        row["regret_stderr"] = None
        row["q05"] = None
        row["q50"] = None
        row["q95"] = None
        row["bound_satisfied"] = bool(
            math.isfinite(report.bound) and float(r) <= report.bound
        )
        row["wall_ms"] = 0.0
        rows.append(row)
    agg = dict(base)
    agg["run_id"] = "aggregate"
    agg["regret_mean"] = report.mean
    agg["regret_stderr"] = report.stderr
    agg["q05"] = report.q05
    agg["q50"] = report.q50
    agg["q95"] = report.q95
    agg["bound_satisfied"] = report.bound_satisfied
    agg["wall_ms"] = report.wall_ms if timing else 0.0
    rows.append(agg)
    return [[_fmt(row[col]) for col in CSV_COLUMNS] for row in rows]


def _write_csv(rows: list[list[str]], columns: Sequence[str], out_path: Optional[str]) -> None:
    lines = [",".join(columns)]
    lines.extend(",".join(row) for row in rows)
    text = "\n".join(lines) + "\n"
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_run(cfg: _Config, out_path: Optional[str], timing: bool) -> int:
    spec, epsilon, mu, delta = _experiment_from_config(cfg)
    seed = cfg.get_int("seed", 0)
    replicas = cfg.get_int("replicas", 8)
    jobs = cfg.get_int("jobs", 1)
    report = monte_carlo_regret(spec, replicas, seed, jobs=jobs)
    rows = _report_rows(report, seed, epsilon, mu, delta, timing)
    _write_csv(rows, CSV_COLUMNS, out_path)
    if out_path:
        ok = "within bound" if report.bound_satisfied else "bound not certified"
        sys.stdout.write(
            f"N={spec.n_steps} replicas={replicas} "
            f"regret={report.mean:.6g} (+/- {2 * report.stderr:.2g}) "
            f"bound={report.bound:.6g}: {ok}\n"
        )
    return 0


def cmd_sweep(cfg: _Config, out_path: Optional[str], timing: bool) -> int:
    seed = cfg.get_int("seed", 0)
    replicas = cfg.get_int("replicas", 8)
    jobs = cfg.get_int("jobs", 1)
    eps_grid = cfg.get_floats("sweep_epsilon")
    steps_raw = cfg.get("sweep_steps")
    steps_grid = None
    if steps_raw is not None:
        try:
            steps_grid = tuple(int(tok) for tok in steps_raw.split(",") if tok.strip())
        except ValueError:
            raise ValidationError("config key 'sweep_steps': not a comma list of integers")
    if bool(eps_grid) == bool(steps_grid):
        raise ValidationError("sweep needs exactly one of 'sweep_epsilon', 'sweep_steps'")
    grid = eps_grid if eps_grid else steps_grid
    if len(grid) == 0:
        raise ValidationError("sweep grid is empty")
    all_rows: list[list[str]] = []
    fit_points = []
    for cell in grid:
        if eps_grid:
            spec, epsilon, mu, delta = _experiment_from_config(cfg, epsilon_override=float(cell))
        else:
            spec, epsilon, mu, delta = _experiment_from_config(cfg, steps_override=int(cell))
        report = monte_carlo_regret(spec, replicas, seed, jobs=jobs)
        all_rows.extend(_report_rows(report, seed, epsilon, mu, delta, timing))
        fit_points.append((spec.n_steps, report.mean))
    _write_csv(all_rows, CSV_COLUMNS, out_path)
    try:
        fit = fit_rate(fit_points)
        msg = (
            f"fitted rate: slope = {fit.slope:.4f} (stderr {fit.stderr:.4f}, "
            f"{fit.n_used} points"
        )
        if fit.excluded:
            msg += f", excluded {list(fit.excluded)} non-positive"
        msg += ")\n"
    except ValidationError as exc:
        msg = f"fitted rate: unavailable ({exc})\n"
    stream = sys.stdout if out_path else sys.stderr
    stream.write(msg)
    return 0


# ---------------------------------------------------------------------------
# verify-estimator
# ---------------------------------------------------------------------------


def _verify_battery(
    cfg: _Config, m: int, q: float, seed: int
) -> list[dict]:
    """Estimator checks on f(x) = ||x||^2 over the unit ball."""
    n = cfg.get_int("n", 5)
    mu = cfg.get_float("mu", 0.1)
    samples = cfg.get_int("samples", 200_000)
    noise = _build_noise(cfg)
    geom = geo.ball_geometry(n, radius=1.0, mu0=mu)
    env_cfg = EnvConfig(family="fixed-quadratic", noise=noise, center=(0.0,) * n)
    env = build_environment(env_cfg, geom, seed)
    env.reveal(1)
    x0 = np.zeros(n)
    x0[0] = 0.5
    env.observe_iterate(1, x0)
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(3)[2])
    scfg = SmoothingConfig(mu=mu, m=m, n=n)
    gs = np.empty((samples, n))
    estimate = one_point_estimate if m == 1 else two_point_estimate
    for i in range(samples):
        e = sample_sphere(rng, n)
        gs[i] = estimate(env.query_value, 1, x0, scfg, e).g
    checks = []
    # Unbiasedness: for the quadratic, grad of the ball-smoothed loss at x0
    # is exactly 2 * x0 (bias from readings is bounded, not zero, so the
    # tolerance allows 4 standard errors plus the worst-case bias push).
    target = 2.0 * x0
    mean = gs.mean(axis=0)
    se = gs.std(axis=0, ddof=1) / math.sqrt(samples)
    bias_slack = (n / mu) * noise.delta  # |E g - grad| <= (n/mu) * delta * (m)
    if m == 2:
        bias_slack *= 2.0
    dev = float(np.max(np.abs(mean - target) - 4.0 * se))
    checks.append(
        {
            "check": "unbiasedness",
            "m": m,
            "q": q,
            "n": n,
            "samples": samples,
            "empirical": dev,
            "bound": bias_slack,
            "ratio": math.nan if bias_slack == 0.0 else dev / bias_slack,
            "passed": dev <= bias_slack,
        }
    )
    # Second moment: mean ||g||_q^2 against the tuned bound.
    if math.isinf(q):
        norms = np.max(np.abs(gs), axis=1)
    else:
        norms = np.sum(np.abs(gs) ** q, axis=1) ** (1.0 / q)
    emp = float(np.mean(norms**2))
    inp = tuning.TuningInput(
        epsilon=1.0,
        n=n,
        q=q,
        m=m,
        r2=geom.r2,
        constants=env.constants,
        regime="convex",
        mu0=mu,
    )
    bound = tuning.bound_M2(inp, mu, noise.delta)
    checks.append(
        {
            "check": "second-moment",
            "m": m,
            "q": q,
            "n": n,
            "samples": samples,
            "empirical": emp,
            "bound": bound,
            "ratio": emp / bound,
            "passed": emp <= bound,
        }
    )
    return checks


def cmd_verify(cfg: _Config, out_path: Optional[str]) -> int:
    seed = cfg.get_int("seed", 0)
    m_raw = cfg.get("m", "both")
    q_raw = cfg.get("q", "both")
    ms = (1, 2) if m_raw == "both" else (int(m_raw),)
    if q_raw == "both":
        qs: tuple[float, ...] = (2.0, math.inf)
    else:
        qs = (math.inf if q_raw in ("inf", "infinity") else float(q_raw),)
    rows = []
    all_passed = True
    for m in ms:
        if m not in (1, 2):
            raise ValidationError("m must be 1, 2, or both")
        for q in qs:
            for check in _verify_battery(cfg, m, q, seed):
                all_passed &= bool(check["passed"])
                rows.append(
                    [
                        _fmt(check[c]) if c != "q" else ("inf" if math.isinf(check["q"]) else _fmt(check["q"]))
                        for c in VERIFY_COLUMNS
                    ]
                )
    _write_csv(rows, VERIFY_COLUMNS, out_path)
    if out_path:
        sys.stdout.write(
            "all checks passed\n" if all_passed else "some checks FAILED\n"
        )
    return 0 if all_passed else 1


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zomd",
        description="Gradient-free online convex optimization experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("tune", "derive mu, delta, N, and the schedule for a target accuracy"),
        ("run", "Monte-Carlo regret experiment, CSV output"),
        ("sweep", "grid of runs over horizons or accuracies, CSV output"),
        ("verify-estimator", "Monte-Carlo checks of the gradient estimators"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        p.add_argument("--jobs", type=int, help="parallel workers (overrides config)")
        p.add_argument("--out", help="output file (overrides config)")
        p.add_argument("--losses", help="loss matrix file (overrides config)")
        p.add_argument(
            "--timing",
            action="store_true",
            help="record wall-clock times in the output (breaks byte determinism)",
        )
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a single config key (repeatable)",
        )
    return parser


def _merge_config(args: argparse.Namespace) -> _Config:
    values: dict[str, str] = {}
    if args.config:
        with open(args.config) as fh:
            values.update(parse_config(fh.read()))
    for item in args.set:
        values.update(parse_config(item))
    if args.seed is not None:
        values["seed"] = str(args.seed)
    if args.jobs is not None:
        values["jobs"] = str(args.jobs)
    if args.losses is not None:
        values["losses"] = args.losses
    if args.out is not None:
        values["out"] = args.out
    return _Config(values)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merge_config(args)
        out_path = cfg.get("out")
        if args.command == "tune":
            return cmd_tune(cfg, out_path)
        if args.command == "run":
            return cmd_run(cfg, out_path, args.timing)
        if args.command == "sweep":
            return cmd_sweep(cfg, out_path, args.timing)
        return cmd_verify(cfg, out_path)
    except ZomdError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
