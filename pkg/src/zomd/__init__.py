"""Gradient-free online convex optimization with mirror descent.

The package solves online convex problems where the loss of each round can
only be probed through noisy, possibly adversarially biased value readings
(one or two per round), or through a noisy gradient oracle.  It provides:

* three domain/prox geometries (simplex + entropy, Euclidean ball +
  squared l2, l1 ball + squared la) with validated mirror steps
  (:mod:`zomd.geometry`);
* one-point and two-point spherical gradient estimators
  (:mod:`zomd.estimators`);
* scripted, fixed, and adaptive loss environments with noise and bias
  models and auditable class constants (:mod:`zomd.environments`);
* the mirror-descent solver with constant and strongly-convex step
  schedules, running either step-by-step or inside fused kernels
  (:mod:`zomd.solver`, :mod:`zomd.kernels`);
* the accuracy-driven parameter chain mu -> delta -> M^2 -> N
  (:mod:`zomd.tuning`);
* regret measurement: hindsight comparators, Monte-Carlo aggregation,
  and log-log rate fits (:mod:`zomd.regret`);
* a CLI (``zomd tune | run | sweep | verify-estimator``) and a backend
  benchmark (``python -m zomd.bench``).

Quick start::

    import zomd

    geom = zomd.simplex_geometry(10, mu0=0.05)
    env_cfg = zomd.EnvConfig(
        family="expert-linear",
        noise=zomd.NoiseModel(kind="additive-gaussian", sd=0.1),
    )
    spec = zomd.ExperimentSpec(
        geom=geom,
        env=env_cfg,
        mode="bandit-1pt",
        n_steps=10_000,
        schedule=zomd.StepSchedule(kind="constant", alpha=0.002),
        smoothing=zomd.SmoothingConfig(mu=0.05, m=1, n=10),
    )
    report = zomd.monte_carlo_regret(spec, replicas=8, master_seed=0)
    print(report.mean, "+/-", 2 * report.stderr)

Set ``ZOMD_BACKEND=numpy`` to disable the numba kernels (``auto`` picks
numba when available; ``numba`` requires it).
"""

from .environments import (
    EnvConfig,
    FunctionClassConstants,
    NoiseModel,
    OnlineEnvironment,
    build_environment,
    load_loss_matrix,
)
from .errors import (
    DomainViolationError,
    GeometryError,
    GradientUndefinedError,
    InvalidGradientError,
    InvalidPointError,
    UntunableError,
    ValidationError,
    ZomdError,
)
from .estimators import (
    GradientEstimate,
    SmoothingConfig,
    one_point_estimate,
    sample_ball,
    sample_sphere,
    smoothed_value,
    two_point_estimate,
)
from .geometry import (
    GeometrySpec,
    ball_geometry,
    bregman,
    contains,
    distance_to_domain,
    dual_norm,
    in_query_region,
    l1_ball_geometry,
    linear_minimizer,
    max_distance_from,
    mirror_step,
    primal_diameter,
    project,
    project_l1_ball,
    project_simplex,
    prox_gradient,
    prox_value,
    simplex_geometry,
    start_point,
)
from .regret import (
    ExperimentSpec,
    HindsightResult,
    RateFit,
    RegretReport,
    fit_rate,
    hindsight_optimum,
    measured_second_moment,
    monte_carlo_regret,
    pseudo_regret,
    theoretical_bound,
)
from .solver import (
    RunRecord,
    SolverConfig,
    StepSchedule,
    average_iterate,
    run_online,
)
from .tuning import (
    TableCell,
    TuningInput,
    TuningOutput,
    bound_M2,
    choose_N,
    choose_mu,
    delta_max,
    sigma_budget,
    table_order,
    tune,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "ZomdError",
    "GeometryError",
    "InvalidPointError",
    "GradientUndefinedError",
    "InvalidGradientError",
    "DomainViolationError",
    "UntunableError",
    "ValidationError",
    # geometry
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
    "project_simplex",
    "project_l1_ball",
    "distance_to_domain",
    "in_query_region",
    "linear_minimizer",
    "primal_diameter",
    "max_distance_from",
    # estimators
    "SmoothingConfig",
    "GradientEstimate",
    "sample_sphere",
    "sample_ball",
    "one_point_estimate",
    "two_point_estimate",
    "smoothed_value",
    # environments
    "FunctionClassConstants",
    "NoiseModel",
    "EnvConfig",
    "OnlineEnvironment",
    "build_environment",
    "load_loss_matrix",
    # solver
    "StepSchedule",
    "SolverConfig",
    "RunRecord",
    "run_online",
    "average_iterate",
    # tuning
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
    # regret
    "HindsightResult",
    "ExperimentSpec",
    "RegretReport",
    "RateFit",
    "hindsight_optimum",
    "pseudo_regret",
    "theoretical_bound",
    "measured_second_moment",
    "monte_carlo_regret",
    "fit_rate",
]
