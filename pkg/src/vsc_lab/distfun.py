"""The distance function ``D_beta(r)``.

For a problem with exact data ``y_dagger`` and penalty value ``Omega_dagger``,

    D_beta(r) = sup_x  beta * E(x) - Omega(x) + Omega_dagger - r * ||F(x) - y_dagger||

measures how far a linear index function ``phi(t) = r t`` is from satisfying
the source inequality. The supremum is taken over the whole space.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq, minimize

from .problems import (
    ErrorKind,
    OmegaKind,
    ProblemInstance,
    apply_forward,
    apply_jacobian_adjoint,
    error_functional,
    omega,
)

__all__ = [
    "DistanceProfile",
    "objective",
    "objective_batch",
    "is_concave_case",
    "maximize_objective",
    "distance_profile",
    "brute_force_distance",
    "default_box_halfwidth",
]

CLAMP_TOL = 1e-10


def _check_beta(beta: float) -> None:
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")


def objective(problem: ProblemInstance, beta: float, r: float, x) -> float:
    """``beta E(x) - Omega(x) + Omega_dagger - r ||F(x) - y_dagger||``."""
    x = np.asarray(x, dtype=float)
    res = np.linalg.norm(apply_forward(problem, x) - problem.y_dagger)
    return (beta * error_functional(problem, x) - omega(problem, x)
            + problem.omega_dagger_value - r * res)


def _forward_batch(problem: ProblemInstance, xs: np.ndarray) -> np.ndarray:
    if problem.is_linear:
        return xs @ problem.matrix().T
    n = problem.n
    out = np.zeros((xs.shape[0], problem.m))
    for i in range(n):
        for j in range(n):
            out[:, i + j] += xs[:, i] * xs[:, j]
    return problem.h * out


def _parts_batch(problem: ProblemInstance, xs: np.ndarray):
    """Per-row ``beta``-free terms ``(E, Omega, residual)`` for a batch of points."""
    xd = problem.x_dagger
    if problem.omega_kind is OmegaKind.NORM1:
        om = np.abs(xs).sum(axis=1)
    else:
        om = np.einsum("ij,ij->i", xs, xs)
    kind = problem.error_kind
    if kind is ErrorKind.SQUARED_NORM_TO_XDAGGER:
        err = ((xs - xd) ** 2).sum(axis=1)
    elif kind is ErrorKind.POINT_TO_SET_SQUARED:
        err = np.minimum(((xs - xd) ** 2).sum(axis=1), ((xs + xd) ** 2).sum(axis=1))
    elif kind is ErrorKind.NORM1_TO_XDAGGER:
        err = np.abs(xs - xd).sum(axis=1)
    else:
        err = np.maximum(om - problem.omega_dagger_value - (xs - xd) @ problem.xi_dagger, 0.0)
    res = np.linalg.norm(_forward_batch(problem, xs) - problem.y_dagger, axis=1)
    return err, om, res


def objective_batch(problem: ProblemInstance, beta: float, r: float, xs) -> np.ndarray:
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    err, om, res = _parts_batch(problem, xs)
    return beta * err - om + problem.omega_dagger_value - r * res


def is_concave_case(problem: ProblemInstance) -> bool:
    """True when the objective is concave and the exact maximizer is available.

    That holds for linear operators with the squared-norm penalty and a
    squared-norm error (or its equal, the Bregman distance with ``xi = 2 x_dagger``).
    """
    if not problem.is_linear or problem.omega_kind is not OmegaKind.SQUARED_NORM2:
        return False
    if problem.error_kind is ErrorKind.SQUARED_NORM_TO_XDAGGER:
        return True
    return (problem.error_kind is ErrorKind.BREGMAN
            and np.allclose(problem.xi_dagger, 2.0 * problem.x_dagger, atol=1e-12))


def _exact_linear_maximizer(problem: ProblemInstance, beta: float, r: float) -> np.ndarray:
    # In right-singular coordinates z the objective is
    #   -(1-beta)|z|^2 - 2 beta <z, c> + beta |c|^2 + ... - r |s (z - c)|,
    # null-space components vanish at the optimum. Away from z = c the
    # stationarity condition with mu = r / |s (z - c)| gives z(mu) in closed
    # form, and mu solves the scalar equation psi(mu) = r with psi increasing.
    c = problem.right.T @ problem.x_dagger
    s = problem.sigma
    a = 2.0 * (1.0 - beta)

    def z_of(mu):
        return c * (mu * s ** 2 - 2.0 * beta) / (a + mu * s ** 2)

    if r == 0.0:
        return problem.right @ z_of(0.0)
    limit = np.linalg.norm(2.0 * c / s)
    if r >= limit:
        return np.array(problem.x_dagger, dtype=float)

    def psi(mu):
        return mu * np.linalg.norm(2.0 * s * c / (a + mu * s ** 2)) - r

    hi = 1.0
    while psi(hi) <= 0.0:
        hi *= 4.0
    lo = hi / 4.0
    while psi(lo) > 0.0 and lo > 1e-300:
        lo /= 4.0
    mu = brentq(psi, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    return problem.right @ z_of(mu)


def _objective_and_gradient(problem, beta, r, x):
    """Value and (a sub)gradient of the objective; point-to-set errors use the
    branch of the nearer solution."""
    xd = problem.x_dagger
    if problem.error_kind is ErrorKind.POINT_TO_SET_SQUARED and x @ xd < 0:
        xd = -xd
    if problem.omega_kind is OmegaKind.NORM1:
        om, d_om = np.abs(x).sum(), np.sign(x)
    else:
        om, d_om = x @ x, 2.0 * x
    kind = problem.error_kind
    if kind in (ErrorKind.SQUARED_NORM_TO_XDAGGER, ErrorKind.POINT_TO_SET_SQUARED):
        d = x - xd
        err, d_err = d @ d, 2.0 * d
    elif kind is ErrorKind.NORM1_TO_XDAGGER:
        err, d_err = np.abs(x - xd).sum(), np.sign(x - xd)
    else:
        err = om - problem.omega_dagger_value - problem.xi_dagger @ (x - xd)
        d_err = d_om - problem.xi_dagger
    resid = apply_forward(problem, x) - problem.y_dagger
    rn = np.linalg.norm(resid)
    d_res = apply_jacobian_adjoint(problem, x, resid) / rn if rn > 0 else np.zeros_like(x)
    value = beta * err - om + problem.omega_dagger_value - r * rn
    return value, beta * d_err - d_om - r * d_res


def default_box_halfwidth(problem: ProblemInstance, beta: float) -> float:
    """Radius containing every point with nonnegative objective for squared norms.

    From ``beta (|x| + |x_dagger|)^2 - |x|^2 + |x_dagger|^2 >= 0``.
    """
    nx = float(np.linalg.norm(problem.x_dagger))
    return max(nx * (1.0 + beta) / (1.0 - beta), 1.0)


def maximize_objective(problem: ProblemInstance, beta: float, r: float,
                       start=None, tol: float = 1e-10, max_iter: int = 2000,
                       starts: int = 8, seed: int = 0):
    """Maximize the objective of ``D_beta(r)`` over the whole space.

    Returns ``(x_hat, value, certified)``. In the concave case the maximizer is
    computed exactly and ``certified`` is True. Otherwise a multistart local
    ascent is run and ``value`` is only a lower bound for ``D_beta(r)``.
    """
    _check_beta(beta)
    if r < 0:
        raise ValueError("r must be nonnegative")
    if is_concave_case(problem):
        x_hat = _exact_linear_maximizer(problem, beta, float(r))
        return x_hat, objective(problem, beta, r, x_hat), True

    xd = np.asarray(problem.x_dagger)
    rng = np.random.default_rng(seed)
    scale = max(np.linalg.norm(xd), 1.0) / np.sqrt(problem.n)
    candidates = [xd.copy(), -beta / (1.0 - beta) * xd]
    candidates += [t * xd for t in (0.25, 0.5, 0.75, 0.9)]
    if start is not None:
        candidates.insert(0, np.asarray(start, dtype=float))
    while len(candidates) < starts:
        candidates.append(xd + 2.0 * scale * rng.standard_normal(problem.n))

    def neg(x):
        v, g = _objective_and_gradient(problem, beta, r, x)
        return -v, -g

    best_x, best_v = xd.copy(), objective(problem, beta, r, xd)
    for x0 in candidates:
        res = minimize(neg, x0, jac=True, method="L-BFGS-B",
                       options={"maxiter": max_iter, "ftol": tol, "gtol": tol})
        v = objective(problem, beta, r, res.x)
        if v > best_v:
            best_x, best_v = res.x, v
    return best_x, best_v, False


@dataclass
class DistanceProfile:
    """Sampled distance function with per-point exactness flags."""

    beta: float
    r_grid: np.ndarray
    values: np.ndarray
    exact: np.ndarray
    maximizers: np.ndarray
    residuals: Optional[np.ndarray] = None

    def __post_init__(self):
        self.r_grid = np.asarray(self.r_grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.exact = np.asarray(self.exact, dtype=bool)
        if self.r_grid.shape != self.values.shape or self.exact.shape != self.values.shape:
            raise ValueError("r_grid, values and exact must have equal length")
        if np.any(np.diff(self.r_grid) <= 0) or np.any(self.r_grid < 0):
            raise ValueError("r_grid must be nonnegative and strictly increasing")
        self.maximizers = np.asarray(self.maximizers, dtype=float)
        if self.residuals is None:
            self.residuals = np.full(self.values.shape, np.nan)
        self.residuals = np.asarray(self.residuals, dtype=float)

    @property
    def certified(self) -> bool:
        return bool(np.all(self.exact))

    @property
    def trivial_vsc(self) -> bool:
        """``D_beta(0) <= 0``: the source inequality holds for any index function."""
        return bool(self.values[0] <= 0.0)

    @property
    def linear_slope(self) -> Optional[float]:
        """Smallest positive ``r`` with ``D_beta(r) < 0``, if any."""
        neg = np.nonzero((self.values < 0.0) & (self.r_grid > 0.0))[0]
        return float(self.r_grid[neg[0]]) if neg.size else None

    @property
    def linear_vsc(self) -> bool:
        return self.linear_slope is not None

    def check_structure(self, mono_slack: float = 1e-9, convex_slack: float = 1e-7):
        """``(monotone, convex)`` checks on the sampled values.

        Convexity is tested through divided differences, so it is meaningful
        on nonuniform grids; only triples of exact points are considered.
        """
        v, r = self.values, self.r_grid
        monotone = bool(np.all(np.diff(v) <= mono_slack))
        if v.size < 3:
            return monotone, True
        slopes = np.diff(v) / np.diff(r)
        second = np.diff(slopes)
        scale = np.maximum(np.abs(slopes[:-1]), 1.0)
        ok = self.exact[:-2] & self.exact[1:-1] & self.exact[2:]
        convex = bool(np.all(second[ok] >= -convex_slack * scale[ok]))
        return monotone, convex

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "D", "exact", "residual_of_maximizer"])
            for r, d, e, res in zip(self.r_grid, self.values, self.exact, self.residuals):
                w.writerow([repr(float(r)), repr(float(d)), int(e), repr(float(res))])

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "r_grid": self.r_grid.tolist(),
            "values": self.values.tolist(),
            "exact": self.exact.tolist(),
            "maximizers": self.maximizers.tolist(),
            "residuals": self.residuals.tolist(),
            "trivial_vsc": self.trivial_vsc,
            "linear_vsc": self.linear_vsc,
            "linear_slope": self.linear_slope,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DistanceProfile":
        return cls(beta=data["beta"], r_grid=data["r_grid"], values=data["values"],
                   exact=data["exact"], maximizers=data["maximizers"],
                   residuals=data.get("residuals"))

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "DistanceProfile":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _r_grid(r_min: float, r_max: float, num_points: int) -> np.ndarray:
    if not 0.0 <= r_min < r_max:
        raise ValueError("need 0 <= r_min < r_max")
    if num_points < 2:
        raise ValueError("num_points must be at least 2")
    if r_min == 0.0:
        return np.linspace(0.0, r_max, num_points)
    return np.concatenate([[0.0], np.geomspace(r_min, r_max, num_points)])


def distance_profile(problem: ProblemInstance, beta: float, r_min: float = 1e-3,
                     r_max: float = 1e4, num_points: int = 60, multistart: int = 8,
                     tol: float = 1e-10, max_iter: int = 2000, seed: int = 0
                     ) -> DistanceProfile:
    """Sample ``D_beta`` on ``{0} U geomspace(r_min, r_max, num_points)``.

    Each point is warm-started from the previous maximizer. For non-certified
    points, every maximizer found anywhere on the grid is then re-evaluated at
    every ``r``; the resulting lower bound is a maximum of affine functions of
    ``r`` and hence convex and nonincreasing, like the true ``D_beta``.
    """
    _check_beta(beta)
    r_grid = _r_grid(r_min, r_max, num_points)
    rng = np.random.default_rng(seed)
    seeds = rng.integers(0, 2 ** 31, size=r_grid.size)
    xs, vals, exact = [], [], []
    start = None
    for r, s in zip(r_grid, seeds):
        x_hat, v, cert = maximize_objective(problem, beta, r, start=start, tol=tol,
                                            max_iter=max_iter, starts=multistart,
                                            seed=int(s))
        xs.append(x_hat)
        vals.append(v)
        exact.append(cert)
        start = x_hat
    xs = np.array(xs)
    vals = np.array(vals, dtype=float)
    exact = np.array(exact, dtype=bool)

    if not np.all(exact):
        err, om, res = _parts_batch(problem, xs)
        base = beta * err - om + problem.omega_dagger_value
        table = base[None, :] - r_grid[:, None] * res[None, :]
        best = np.argmax(table, axis=1)
        improved = (table[np.arange(r_grid.size), best] > vals) & ~exact
        vals = np.where(improved, table[np.arange(r_grid.size), best], vals)
        xs = np.where(improved[:, None], xs[best], xs)

    vals = np.where((vals < 0) & (vals >= -CLAMP_TOL), 0.0, vals)
    residuals = np.linalg.norm(_forward_batch(problem, xs) - problem.y_dagger, axis=1)
    return DistanceProfile(beta=beta, r_grid=r_grid, values=vals, exact=exact,
                           maximizers=xs, residuals=residuals)


def brute_force_distance(problem: ProblemInstance, beta: float, r: float,
                         box_halfwidth: float, points_per_dim: int,
                         refine: int = 0, zoom_cells: int = 10) -> float:
    """Dense-grid maximum of the objective over ``[-b, b]^n``.

    With ``refine > 0`` the grid is re-centred on the best point ``refine``
    times with halfwidth ``zoom_cells`` grid spacings. Every evaluated value
    is an attained objective value, so the result never exceeds ``D_beta(r)``.
    """
    _check_beta(beta)
    n = problem.n
    if n > 3:
        raise ValueError(f"brute force supports n <= 3, got n = {n}")
    if points_per_dim < 2 or points_per_dim ** n > 201 ** 3:
        raise ValueError("points_per_dim must satisfy 2 <= points_per_dim**n <= 201**3")
    center = np.zeros(n)
    half = float(box_halfwidth)
    best_v, best_x = -np.inf, center
    for _ in range(refine + 1):
        axes = [np.linspace(c - half, c + half, points_per_dim) for c in center]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
        vals = objective_batch(problem, beta, r, grid)
        k = int(np.argmax(vals))
        if vals[k] > best_v:
            best_v, best_x = float(vals[k]), grid[k]
        center = best_x
        half = zoom_cells * 2.0 * half / (points_per_dim - 1)
    return best_v
