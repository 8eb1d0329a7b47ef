"""Hot numerical kernels with a numba backend and a pure-numpy fallback.

Every kernel is written once, as a plain numpy function that is also valid
inside ``numba.njit``.  At import time the module decides which backend to
use:

* ``ZOMD_BACKEND=numba``  -- require numba, fail loudly if it is missing;
* ``ZOMD_BACKEND=numpy``  -- skip compilation, run the plain functions;
* ``ZOMD_BACKEND=auto``   -- use numba when importable, else numpy (default).

The selected backend is exposed as :data:`BACKEND`.  Kernels call each other
through module globals, which numba resolves when it first compiles a
caller, so the same source serves both backends and produces the same
trajectories up to floating-point rounding (both execute identical
statements in identical order; numba may fuse differently at the ulp level).

Kernels assume validated, C-contiguous float64 inputs; argument checking
lives in the higher-level modules that call them.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "BACKEND",
    "NUMBA_ENABLED",
    "GEOM_ENTROPY",
    "GEOM_L2_BALL",
    "GEOM_LA_BALL",
    "FAMILY_LINEAR",
    "FAMILY_QUADRATIC",
    "FAMILY_SMOOTHED_DISTANCE",
    "NOISE_NONE",
    "NOISE_ADDITIVE",
    "NOISE_MULTIPLICATIVE",
    "BIAS_ZERO",
    "BIAS_CONSTANT",
    "BIAS_WORST_DIRECTION",
    "entropy_step",
    "ball_step",
    "la_grad",
    "la_grad_inverse",
    "la_step",
    "sphere_rows",
    "apply_step",
    "family_value",
    "noisy_reading",
    "fo_scripted_run",
    "fo_state_run",
    "bandit_run",
]

# Integer codes shared between the python layer and the jitted kernels.
GEOM_ENTROPY = 0
GEOM_L2_BALL = 1
GEOM_LA_BALL = 2

FAMILY_LINEAR = 0
FAMILY_QUADRATIC = 1
FAMILY_SMOOTHED_DISTANCE = 2

NOISE_NONE = 0
NOISE_ADDITIVE = 1
NOISE_MULTIPLICATIVE = 2

BIAS_ZERO = 0
BIAS_CONSTANT = 1
BIAS_WORST_DIRECTION = 2


def _select_backend() -> tuple[str, bool]:
    choice = os.environ.get("ZOMD_BACKEND", "auto").strip().lower()
    if choice not in ("auto", "numba", "numpy"):
        raise RuntimeError(
            f"ZOMD_BACKEND must be one of 'auto', 'numba', 'numpy'; got {choice!r}"
        )
    if choice == "numpy":
        return "numpy", False
    try:
        import numba  # noqa: F401

        return "numba", True
    except ImportError:
        if choice == "numba":
            raise RuntimeError(
                "ZOMD_BACKEND=numba but numba is not importable"
            ) from None
        return "numpy", False


BACKEND, NUMBA_ENABLED = _select_backend()

if NUMBA_ENABLED:
    from numba import njit as _njit

    def _jit(fn):
        return _njit(cache=True, fastmath=False)(fn)

else:

    def _jit(fn):
        return fn


# ---------------------------------------------------------------------------
# Mirror steps
# ---------------------------------------------------------------------------


def _entropy_step_impl(x, g, floor):
    # Multiplicative-weights update on the simplex.  Shifting g by its
    # minimum leaves the normalized result unchanged and keeps exp() from
    # overflowing; the floor keeps every coordinate strictly positive so the
    # next step's prox gradient exists.
    gs = g - np.min(g)
    y = x * np.exp(-gs)
    y = np.maximum(y, floor)
    y = y / np.sum(y)
    y = np.maximum(y, floor)
    return y


def _ball_step_impl(x, g, radius):
    # Euclidean gradient step followed by projection onto the ball.
    y = x - g
    nrm = np.sqrt(np.sum(y * y))
    if nrm > radius:
        y = y * (radius / nrm)
    return y


def _la_grad_impl(x, a):
    # Gradient of d(x) = ||x||_a^2 / (2(a-1)).
    nrm = np.sum(np.abs(x) ** a) ** (1.0 / a)
    if nrm == 0.0:
        return np.zeros_like(x)
    return (nrm ** (2.0 - a) / (a - 1.0)) * np.sign(x) * np.abs(x) ** (a - 1.0)


def _la_grad_inverse_impl(w, a):
    # Inverse of la_grad: solves grad d(y) = w for y.
    u = np.sign(w) * np.abs(w) ** (1.0 / (a - 1.0))
    nrm = np.sum(np.abs(u) ** a) ** (1.0 / a)
    if nrm == 0.0:
        return np.zeros_like(w)
    return (a - 1.0) * nrm ** (a - 2.0) * u


def _la_step_impl(x, g, a, tol):
    # Mirror step on the l1 ball with prox ||.||_a^2 / (2(a-1)).  The
    # unconstrained minimizer solves grad d(y) = grad d(x) - g; when it
    # leaves the ball, the KKT conditions identify the constrained
    # minimizer as the inverse image of the soft-thresholded dual point,
    # with the threshold chosen so the result lands on the l1 sphere.
    # ||y(lambda)||_1 is non-increasing in lambda, so bisection applies;
    # the upper endpoint is returned because it is the feasible one.
    z = la_grad(x, a) - g
    y = la_grad_inverse(z, a)
    if np.sum(np.abs(y)) <= 1.0:
        return y
    lo = 0.0
    hi = np.max(np.abs(z))
    while hi - lo > tol:
        lam = 0.5 * (lo + hi)
        w = np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)
        y = la_grad_inverse(w, a)
        if np.sum(np.abs(y)) > 1.0:
            lo = lam
        else:
            hi = lam
    w = np.sign(z) * np.maximum(np.abs(z) - hi, 0.0)
    return la_grad_inverse(w, a)


def _apply_step_impl(x, g, geom_code, radius, a, floor, tol):
    if geom_code == 0:
        return entropy_step(x, g, floor)
    elif geom_code == 1:
        return ball_step(x, g, radius)
    else:
        return la_step(x, g, a, tol)


def _sphere_rows_impl(z):
    # Normalize each row of a standard-normal matrix to unit l2 norm,
    # yielding rows uniform on the unit sphere.
    nrm = np.sqrt(np.sum(z * z, axis=1))
    return z / nrm.reshape(-1, 1)


# ---------------------------------------------------------------------------
# Loss-family evaluation
# ---------------------------------------------------------------------------


def _family_value_impl(family_code, loss_rows, k, x, center, scale, smooth):
    if family_code == 0:
        return np.dot(loss_rows[k], x)
    d = x - center
    sq = np.sum(d * d)
    if family_code == 1:
        return scale * sq
    return scale * (np.sqrt(smooth * smooth + sq) - smooth)


def _noisy_reading_impl(value, noise_code, sd, xi):
    if noise_code == 0:
        return value
    elif noise_code == 1:
        return value + sd * xi
    else:
        return value * (1.0 + sd * xi)


# ---------------------------------------------------------------------------
# Fused run loops
# ---------------------------------------------------------------------------


def _fo_scripted_run_impl(x0, readings, alphas, geom_code, radius, a, floor, tol):
    # First-order run whose gradient readings do not depend on the iterate
    # (linear losses: script row plus pregenerated noise/bias).
    n_steps = readings.shape[0]
    n = x0.shape[0]
    xs = np.empty((n_steps, n))
    x = x0.copy()
    for k in range(n_steps):
        xs[k] = x
        if k + 1 < n_steps:
            g = alphas[k] * readings[k]
            x = apply_step(x, g, geom_code, radius, a, floor, tol)
    return xs


def _fo_state_run_impl(
    x0, center, curv, offsets, alphas, geom_code, radius, a, floor, tol
):
    # First-order run with affine state-dependent gradients
    # (quadratic losses): reading_k = curv * (x^k - center) + offsets[k].
    n_steps = offsets.shape[0]
    n = x0.shape[0]
    xs = np.empty((n_steps, n))
    readings = np.empty((n_steps, n))
    x = x0.copy()
    for k in range(n_steps):
        xs[k] = x
        r = curv * (x - center) + offsets[k]
        readings[k] = r
        if k + 1 < n_steps:
            g = alphas[k] * r
            x = apply_step(x, g, geom_code, radius, a, floor, tol)
    return xs, readings


def _bandit_run_impl(
    x0,
    dirs,
    xis,
    alphas,
    mu,
    m,
    family_code,
    loss_rows,
    center,
    scale,
    smooth,
    noise_code,
    noise_sd,
    bias_code,
    delta,
    geom_code,
    radius,
    a,
    floor,
    tol,
):
    # Bandit run: at step k the solver queries x^k + mu * e_k (and, for
    # m = 2, the base point x^k with the same noise draw), forms the
    # estimate g = (n/mu) * diff * e_k, and mirror-steps with alpha_k * g.
    # Bias policies: 1 adds +delta to every reading; 2 adds delta * s_k to
    # the perturbed reading and -delta * s_k to the base reading, where
    # s_k = sign(<e_k, x^k - x^{k-1}>) (sign(0) = +1).
    n_steps = dirs.shape[0]
    n = x0.shape[0]
    xs = np.empty((n_steps, n))
    readings = np.zeros((n_steps, m))
    biases = np.zeros((n_steps, m))
    x = x0.copy()
    xprev = x0.copy()
    nm = n / mu
    for k in range(n_steps):
        xs[k] = x
        e = dirs[k]
        if bias_code == 1:
            b1 = delta
            b2 = delta
        elif bias_code == 2:
            s = 1.0
            if np.dot(e, x - xprev) < 0.0:
                s = -1.0
            b1 = delta * s
            b2 = -delta * s
        else:
            b1 = 0.0
            b2 = 0.0
        xq = x + mu * e
        v1 = family_value(family_code, loss_rows, k, xq, center, scale, smooth)
        v1 = noisy_reading(v1, noise_code, noise_sd, xis[k]) + b1
        readings[k, 0] = v1
        biases[k, 0] = b1
        if m == 2:
            v0 = family_value(family_code, loss_rows, k, x, center, scale, smooth)
            v0 = noisy_reading(v0, noise_code, noise_sd, xis[k]) + b2
            readings[k, 1] = v0
            biases[k, 1] = b2
            diff = v1 - v0
        else:
            diff = v1
        if k + 1 < n_steps:
            g = (nm * diff) * e
            xnext = apply_step(x, alphas[k] * g, geom_code, radius, a, floor, tol)
            xprev = x
            x = xnext
    return xs, readings, biases


# Bind the public names.  The impl bodies reference each other through these
# module globals, so on the numba backend every cross-call resolves to the
# jitted symbol when the caller is first compiled.
entropy_step = _jit(_entropy_step_impl)
ball_step = _jit(_ball_step_impl)
la_grad = _jit(_la_grad_impl)
la_grad_inverse = _jit(_la_grad_inverse_impl)
la_step = _jit(_la_step_impl)
sphere_rows = _jit(_sphere_rows_impl)
apply_step = _jit(_apply_step_impl)
family_value = _jit(_family_value_impl)
noisy_reading = _jit(_noisy_reading_impl)
fo_scripted_run = _jit(_fo_scripted_run_impl)
fo_state_run = _jit(_fo_state_run_impl)
bandit_run = _jit(_bandit_run_impl)
