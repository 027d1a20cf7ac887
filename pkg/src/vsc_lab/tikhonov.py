"""Minimizers of ``||F(x) - y||^p + alpha * Omega(x)`` for each problem kind."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict
from typing import Optional, Sequence

import numpy as np

from .problems import (
    ProblemInstance,
    ProblemKind,
    apply_forward,
    apply_jacobian_adjoint,
    omega,
)

__all__ = [
    "TikhonovSolution",
    "solve_linear_hilbert",
    "soft_threshold",
    "solve_l1",
    "solve_nonlinear",
    "nonlinear_objective",
    "solve",
    "worker_count",
]

ARMIJO_SHRINK = 0.5
ARMIJO_DECREASE = 1e-4


def worker_count() -> int:
    """Thread cap from ``VSC_LAB_THREADS`` (0 or unset means automatic)."""
    raw = os.environ.get("VSC_LAB_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"VSC_LAB_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError("VSC_LAB_THREADS must be nonnegative")
    return n or min(8, os.cpu_count() or 1)


@dataclass
class TikhonovSolution:
    x: np.ndarray
    alpha: float
    residual_norm: float
    omega_value: float
    objective: float
    iterations: int
    converged: bool
    start_index: Optional[int] = None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["x"] = self.x.tolist()
        return out


def _check_alpha(alpha: float) -> None:
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")


def _finish(problem, x, y_obs, alpha, iterations, converged, start_index=None):
    res = float(np.linalg.norm(apply_forward(problem, x) - y_obs))
    om = omega(problem, x)
    return TikhonovSolution(
        x=x, alpha=float(alpha), residual_norm=res, omega_value=om,
        objective=res ** 2 + alpha * om, iterations=int(iterations),
        converged=bool(converged), start_index=start_index,
    )


def solve_linear_hilbert(problem: ProblemInstance, y_obs, alpha: float) -> TikhonovSolution:
    """Spectral-filter solution ``x = V diag(s / (s^2 + alpha)) U^T y``."""
    if problem.kind is not ProblemKind.LINEAR_HILBERT:
        raise ValueError("solve_linear_hilbert needs a LinearHilbert problem")
    _check_alpha(alpha)
    y_obs = np.asarray(y_obs, dtype=float)
    s = problem.sigma
    x = problem.right @ (s * (problem.left.T @ y_obs) / (s ** 2 + alpha))
    return _finish(problem, x, y_obs, alpha, 0, True)


def soft_threshold(v, tau: float) -> np.ndarray:
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def solve_l1(problem: ProblemInstance, y_obs, alpha: float, tol: float = 1e-10,
             max_iter: int = 100_000, x0=None) -> TikhonovSolution:
    """Accelerated proximal gradient (FISTA with adaptive restart).

    Works on the equivalent objective ``0.5||Ax - y||^2 + (alpha/2)||x||_1`` with
    step ``1/L``, ``L = sigma_max^2``. Stops once the fixed-point residual
    ``||x - T(x)||`` of the proximal-gradient map ``T`` drops below ``tol``.
    """
    if problem.kind is not ProblemKind.L1_LINEAR:
        raise ValueError("solve_l1 needs an L1Linear problem")
    if problem.p != 2:
        raise ValueError("solve_l1 supports p = 2 only")
    _check_alpha(alpha)
    if not tol > 0:
        raise ValueError("tol must be positive")
    y_obs = np.asarray(y_obs, dtype=float)
    a = problem.matrix()
    lip = float(problem.sigma.max()) ** 2
    thresh = alpha / (2.0 * lip)

    def grad(z):
        return a.T @ (a @ z - y_obs)

    def smooth_plus_l1(z):
        r = a @ z - y_obs
        return 0.5 * r @ r + 0.5 * alpha * np.abs(z).sum()

    x = np.zeros(problem.n) if x0 is None else np.array(x0, dtype=float)
    z, t = x.copy(), 1.0
    f_old = smooth_plus_l1(x)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        x_new = soft_threshold(z - grad(z) / lip, thresh)
        f_new = smooth_plus_l1(x_new)
        if f_new > f_old and t > 1.0:
            # restart momentum when the objective goes up; a plain step is
            # always accepted so roundoff cannot cause endless restarts
            z, t = x.copy(), 1.0
            continue
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        z = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x, t, f_old = x_new, t_new, f_new
        fp = np.linalg.norm(x - soft_threshold(x - grad(x) / lip, thresh))
        if fp < tol:
            converged = True
            break
    return _finish(problem, x, y_obs, alpha, it, converged)


def nonlinear_objective(problem: ProblemInstance, y_obs, alpha: float, x):
    """Objective value and gradient of the autoconvolution Tikhonov functional."""
    r = apply_forward(problem, x) - y_obs
    value = float(r @ r + alpha * (x @ x))
    grad = 2.0 * apply_jacobian_adjoint(problem, x, r) + 2.0 * alpha * x
    return value, grad


def _gradient_descent(problem, y_obs, alpha, x0, tol, max_iter):
    """Gradient descent with Armijo backtracking from a Barzilai-Borwein trial step.

    Stationarity is declared when ``||grad|| < tol * max(1, f)``; the relative
    scaling keeps the test above the roundoff floor of the gradient.
    """
    x = np.array(x0, dtype=float)
    f, g = nonlinear_objective(problem, y_obs, alpha, x)
    step = 1.0 / max(np.linalg.norm(g), 1.0)
    it = 0

    def stationary():
        return bool(np.linalg.norm(g) < tol * max(1.0, f))

    while it < max_iter and not stationary():
        it += 1
        gnorm2 = float(g @ g)
        while True:
            x_try = x - step * g
            f_try, g_try = nonlinear_objective(problem, y_obs, alpha, x_try)
            if f_try <= f - ARMIJO_DECREASE * step * gnorm2:
                break
            step *= ARMIJO_SHRINK
            if step < 1e-30:
                # line search stalled at roundoff level
                return x, f, it, stationary()
        s, dg = x_try - x, g_try - g
        x, f, g = x_try, f_try, g_try
        sy = float(s @ dg)
        step = float(s @ s) / sy if sy > 0 else 2.0 * step
    return x, f, it, stationary()


def solve_nonlinear(problem: ProblemInstance, y_obs, alpha: float, starts: int = 16,
                    tol: float = 1e-8, max_iter: int = 5000, seed: int = 0,
                    initial: Optional[Sequence] = None) -> TikhonovSolution:
    """Multistart gradient descent for autoconvolution Tikhonov regularization.

    Start points are the explicit ``initial`` vectors (if any), followed by a
    symmetric pair of constant warm starts scaled so that ``||F(x0)|| = ||y_obs||``,
    followed by seeded random draws of the same scale until ``starts`` points
    exist. Ties in the final objective go to the lowest start index.
    """
    if problem.kind is not ProblemKind.AUTOCONVOLUTION:
        raise ValueError("solve_nonlinear needs an Autoconvolution problem")
    _check_alpha(alpha)
    if starts < 1:
        raise ValueError("starts must be at least 1")
    y_obs = np.asarray(y_obs, dtype=float)
    n = problem.n

    points = [np.asarray(p, dtype=float) for p in (initial or [])]
    ones = np.ones(n)
    base = np.linalg.norm(apply_forward(problem, ones))
    c = np.sqrt(np.linalg.norm(y_obs) / base) if base > 0 else 1.0
    rng = np.random.default_rng(seed)
    if len(points) < starts:
        points.append(c * ones)
    if len(points) < starts:
        points.append(-c * ones)
    while len(points) < starts:
        d = rng.standard_normal(n)
        points.append(c * np.sqrt(n) * d / np.linalg.norm(d))

    def run(x0):
        return _gradient_descent(problem, y_obs, alpha, x0, tol, max_iter)

    workers = min(worker_count(), len(points))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, points))
    else:
        results = [run(p) for p in points]

    best = min(range(len(results)), key=lambda i: (results[i][1], i))
    x, _, iters, conv = results[best]
    return _finish(problem, x, y_obs, alpha, iters, conv, start_index=best)


def solve(problem: ProblemInstance, y_obs, alpha: float, **kwargs) -> TikhonovSolution:
    """Dispatch to the solver matching ``problem.kind``."""
    if problem.kind is ProblemKind.LINEAR_HILBERT:
        return solve_linear_hilbert(problem, y_obs, alpha)
    if problem.kind is ProblemKind.L1_LINEAR:
        return solve_l1(problem, y_obs, alpha, **kwargs)
    return solve_nonlinear(problem, y_obs, alpha, **kwargs)
