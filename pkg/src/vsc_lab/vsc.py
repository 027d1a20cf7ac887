"""Checks of the variational source inequality

    beta * E(x) <= Omega(x) - Omega_dagger + phi(||F(x) - y_dagger||)

and of the structural assumptions that make it hold, plus Bregman distances.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from typing import Optional, Sequence

import numpy as np

from .distfun import _parts_batch
from .indexfun import IndexFunction, evaluate
from .problems import OmegaKind, ProblemInstance, error_functional, omega

__all__ = [
    "ViolationReport",
    "default_samples",
    "vsc_gaps",
    "verify_vsc",
    "check_solution_inequality",
    "coercivity_margin",
    "bregman_distance",
    "admissible_beta_bregman",
]

DEFAULT_TOLERANCE = 1e-6
DEFAULT_SCALES = (0.1, 1.0, 10.0)


@dataclass
class ViolationReport:
    num_samples: int
    num_violations: int
    worst_gap: float
    worst_point: np.ndarray
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.num_violations == 0

    def to_dict(self) -> dict:
        out = asdict(self)
        out["worst_point"] = np.asarray(self.worst_point).tolist()
        out["passed"] = self.passed
        return out

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


def default_samples(problem: ProblemInstance, num_samples: int = 10_000,
                    scales: Sequence[float] = DEFAULT_SCALES, seed=0,
                    extra: Optional[Sequence[np.ndarray]] = None) -> np.ndarray:
    """Gaussian clouds around ``x_dagger`` and ``-x_dagger`` at several radii.

    Each cloud has typical distance ``scale * ||x_dagger||`` from its centre
    (``scale`` alone when ``x_dagger = 0``). ``extra`` points such as stored
    maximizers or Tikhonov minimizers are appended unchanged.
    """
    rng = np.random.default_rng(seed)
    xd = np.asarray(problem.x_dagger)
    base = float(np.linalg.norm(xd)) or 1.0
    n = problem.n
    per = np.array_split(np.arange(num_samples), 2 * len(scales))
    blocks = []
    for k, idx in enumerate(per):
        centre = xd if k % 2 == 0 else -xd
        sd = scales[k // 2] * base / np.sqrt(n)
        blocks.append(centre + sd * rng.standard_normal((idx.size, n)))
    if extra is not None and len(extra):
        blocks.append(np.atleast_2d(np.asarray(extra, dtype=float)))
    return np.vstack(blocks)


def vsc_gaps(problem: ProblemInstance, beta: float, phi: IndexFunction, xs) -> np.ndarray:
    """``beta E(x) - Omega(x) + Omega_dagger - phi(||F(x) - y_dagger||)`` per row."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    err, om, res = _parts_batch(problem, xs)
    return beta * err - om + problem.omega_dagger_value - evaluate(phi, res)


def verify_vsc(problem: ProblemInstance, beta: float, phi: IndexFunction, samples,
               tolerance: float = DEFAULT_TOLERANCE) -> ViolationReport:
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    xs = np.atleast_2d(np.asarray(samples, dtype=float))
    if xs.shape[0] == 0 or xs.size == 0:
        raise ValueError("sample set is empty")
    gaps = vsc_gaps(problem, beta, phi, xs)
    k = int(np.argmax(gaps))
    return ViolationReport(
        num_samples=int(xs.shape[0]),
        num_violations=int(np.count_nonzero(gaps > tolerance)),
        worst_gap=float(gaps[k]),
        worst_point=xs[k].copy(),
        tolerance=float(tolerance),
    )


def check_solution_inequality(problem: ProblemInstance, beta: float, solution_samples,
                              slack: float = 1e-10) -> bool:
    """Whether ``beta E(x*) <= Omega(x*) - Omega_dagger`` for all given solutions."""
    od = problem.omega_dagger_value
    return all(
        beta * error_functional(problem, x) <= omega(problem, x) - od + slack
        for x in np.atleast_2d(solution_samples)
    )


def coercivity_margin(problem: ProblemInstance, beta_tilde: float, sample_box: float = 1.0,
                      num_samples: int = 20_000, seed=0, doublings: int = 2,
                      rel_change: float = 0.01):
    """Empirical ``sup_x beta_tilde E(x) - Omega(x)`` under box growth.

    Samples are drawn uniformly from ``[-b, b]^n`` for ``b = sample_box * 2^k``,
    ``k = 0..doublings``, together with the anchors ``0``, ``x_dagger`` and
    ``-x_dagger``. The running supremum is reported; ``bounded_flag`` is set
    when each of the last ``doublings`` box doublings changed it by less than
    ``rel_change`` (relative, with an absolute floor of ``rel_change``).
    """
    rng = np.random.default_rng(seed)
    xd = np.asarray(problem.x_dagger)
    anchors = np.vstack([np.zeros(problem.n), xd, -xd])

    def margin(xs):
        err, om, _ = _parts_batch(problem, xs)
        return beta_tilde * err - om

    sup = float(np.max(margin(anchors)))
    history = []
    for k in range(doublings + 1):
        b = sample_box * 2.0 ** k
        xs = rng.uniform(-b, b, size=(num_samples, problem.n))
        sup = max(sup, float(np.max(margin(xs))))
        history.append(sup)
    changes = np.abs(np.diff(history))
    bounded = bool(np.all(changes < rel_change * np.maximum(np.abs(history[:-1]), 1.0)))
    return sup, bounded


def bregman_distance(omega_kind, x, x_dagger, xi_dagger, atol: float = 1e-10) -> float:
    """``Omega(x) - Omega(x_dagger) - <xi_dagger, x - x_dagger>``.

    Raises ``ValueError`` when ``xi_dagger`` is not a subgradient of the
    penalty at ``x_dagger``.
    """
    kind = OmegaKind(omega_kind)
    x = np.asarray(x, dtype=float)
    xd = np.asarray(x_dagger, dtype=float)
    xi = np.asarray(xi_dagger, dtype=float)
    if not x.shape == xd.shape == xi.shape:
        raise ValueError("x, x_dagger and xi_dagger must have the same shape")
    if kind is OmegaKind.SQUARED_NORM2:
        if not np.allclose(xi, 2.0 * xd, rtol=0.0, atol=atol):
            raise ValueError("xi_dagger must equal 2 x_dagger for the squared norm")
        om = lambda z: float(z @ z)  # noqa: E731
    else:
        on = xd != 0
        if not (np.allclose(xi[on], np.sign(xd[on]), rtol=0.0, atol=atol)
                and np.all(np.abs(xi[~on]) <= 1.0 + atol)):
            raise ValueError("xi_dagger is not a subgradient of the l1 norm at x_dagger")
        om = lambda z: float(np.abs(z).sum())  # noqa: E731
    return om(x) - om(xd) - float(xi @ (x - xd))


def admissible_beta_bregman(c1: float, xi_norm: float) -> float:
    """Upper end ``c1 / (c1 + ||xi||)`` of the admissible ``beta`` range when
    ``Omega(x) >= c1 ||x|| + c2``."""
    if not c1 > 0:
        raise ValueError("c1 must be positive")
    if xi_norm < 0:
        raise ValueError("xi_norm must be nonnegative")
    return c1 / (c1 + xi_norm)
