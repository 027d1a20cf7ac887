"""Discretized inverse problems: forward maps, penalties and error functionals.

Three problem kinds are supported:

* ``LinearHilbert``: ``A = U diag(sigma) V^T`` with squared-norm penalty and
  squared-norm error, possibly with a nontrivial null space.
* ``L1Linear``: an injective matrix with the l1 penalty.
* ``Autoconvolution``: the rectangle-rule discretization of
  ``(F x)(s) = int x(s - t) x(t) dt`` on (0, 1), with solutions ``+-x_dagger``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import null_space

__all__ = [
    "ProblemKind",
    "SolutionSet",
    "OmegaKind",
    "ErrorKind",
    "ProblemInstance",
    "make_linear_hilbert",
    "make_linear_from_matrix",
    "make_l1_linear",
    "make_autoconvolution",
    "make_preset",
    "apply_forward",
    "apply_jacobian_adjoint",
    "omega",
    "error_functional",
    "residual_norm",
    "null_space_basis",
    "sample_solutions",
    "to_dict",
    "from_dict",
    "save_problem",
    "load_problem",
]


class ProblemKind(str, Enum):
    LINEAR_HILBERT = "LinearHilbert"
    L1_LINEAR = "L1Linear"
    AUTOCONVOLUTION = "Autoconvolution"


class SolutionSet(str, Enum):
    SINGLETON = "Singleton"
    PLUS_MINUS_PAIR = "PlusMinusPair"
    AFFINE_NULLSPACE = "AffineNullspace"


class OmegaKind(str, Enum):
    SQUARED_NORM2 = "SquaredNorm2"
    NORM1 = "Norm1"


class ErrorKind(str, Enum):
    SQUARED_NORM_TO_XDAGGER = "SquaredNormToXdagger"
    POINT_TO_SET_SQUARED = "PointToSetSquared"
    NORM1_TO_XDAGGER = "Norm1ToXdagger"
    BREGMAN = "Bregman"


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """An immutable discretized instance of ``F(x) = y_dagger``.

    Linear kinds carry a thin singular system ``(sigma, left, right)`` with
    ``left`` of shape (m, k) and ``right`` of shape (n, k). The autoconvolution
    kind uses the grid step ``h = 1/n`` and leaves the singular system empty.
    """

    kind: ProblemKind
    n: int
    m: int
    x_dagger: np.ndarray
    y_dagger: np.ndarray
    solution_set: SolutionSet
    omega_kind: OmegaKind
    error_kind: ErrorKind
    p: float = 2.0
    sigma: np.ndarray = field(default_factory=lambda: _frozen([]))
    left: Optional[np.ndarray] = None
    right: Optional[np.ndarray] = None
    h: Optional[float] = None
    xi_dagger: Optional[np.ndarray] = None

    @property
    def omega_dagger_value(self) -> float:
        return omega(self, self.x_dagger)

    @property
    def is_linear(self) -> bool:
        return self.kind is not ProblemKind.AUTOCONVOLUTION

    def matrix(self) -> np.ndarray:
        """Dense forward matrix (linear kinds only)."""
        if not self.is_linear:
            raise ValueError("autoconvolution has no matrix representation")
        return (self.left * self.sigma) @ self.right.T


def _check_vector(x, length: int, name: str = "x") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != length:
        raise ValueError(f"{name} must have shape ({length},), got {x.shape}")
    return x


def _default_xi(omega_kind: OmegaKind, x_dagger: np.ndarray) -> np.ndarray:
    if omega_kind is OmegaKind.SQUARED_NORM2:
        return 2.0 * x_dagger
    return np.sign(x_dagger)


def _build_linear(kind, sigma, left, right, x_dagger, solution_set, omega_kind,
                  error_kind, p, xi_dagger) -> ProblemInstance:
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 1 or sigma.size == 0:
        raise ValueError("singular values must be a nonempty list")
    if np.any(sigma <= 0) or not np.all(np.isfinite(sigma)):
        raise ValueError("singular values must be strictly positive and finite")
    x_dagger = np.asarray(x_dagger, dtype=float)
    y_dagger = left @ (sigma * (right.T @ x_dagger))
    error_kind = ErrorKind(error_kind)
    omega_kind = OmegaKind(omega_kind)
    if error_kind is ErrorKind.BREGMAN and xi_dagger is None:
        xi_dagger = _default_xi(omega_kind, x_dagger)
    return ProblemInstance(
        kind=ProblemKind(kind),
        n=right.shape[0],
        m=left.shape[0],
        x_dagger=_frozen(x_dagger),
        y_dagger=_frozen(y_dagger),
        solution_set=SolutionSet(solution_set),
        omega_kind=omega_kind,
        error_kind=error_kind,
        p=float(p),
        sigma=_frozen(sigma),
        left=_frozen(left),
        right=_frozen(right),
        xi_dagger=None if xi_dagger is None else _frozen(xi_dagger),
    )


def _random_orthonormal(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((rows, rows)))
    q = q * np.sign(np.diag(r))
    return q[:, :cols]


def make_linear_hilbert(
    singular_values: Sequence[float],
    source_coeffs: Sequence[float],
    mode: str = "DirectXdagger",
    null_dim: int = 0,
    rotate_seed: Optional[int] = None,
    error_kind: str = "SquaredNormToXdagger",
) -> ProblemInstance:
    """Linear Hilbert-space problem with penalty ``||x||^2``.

    Parameters
    ----------
    singular_values : sequence of float
        Strictly positive singular values ``sigma_i``.
    source_coeffs : sequence of float
        In ``DirectXdagger`` mode, the coefficients of ``x_dagger`` in the right
        singular vectors. In ``SourceElement`` mode, a source element ``w`` and
        ``x_dagger = A^T w``.
    mode : {"DirectXdagger", "SourceElement"}
    null_dim : int
        Extra domain dimensions mapped to zero, so that ``n = len(sigma) +
        null_dim``. ``x_dagger`` is orthogonal to them by construction.
    rotate_seed : int, optional
        If given, the singular vectors are random orthonormal bases instead of
        coordinate vectors.
    """
    sigma = np.asarray(singular_values, dtype=float)
    coeffs = np.asarray(source_coeffs, dtype=float)
    if sigma.ndim != 1 or sigma.size == 0:
        raise ValueError("singular values must be a nonempty list")
    if coeffs.shape != sigma.shape:
        raise ValueError(
            f"source_coeffs length {coeffs.size} does not match "
            f"{sigma.size} singular values"
        )
    if null_dim < 0:
        raise ValueError("null_dim must be nonnegative")
    if mode == "SourceElement":
        range_coeffs = sigma * coeffs
    elif mode == "DirectXdagger":
        range_coeffs = coeffs
    else:
        raise ValueError(f"unknown mode {mode!r}")

    k = sigma.size
    n = k + null_dim
    if rotate_seed is None:
        left = np.eye(k)
        right = np.eye(n)[:, :k]
    else:
        rng = np.random.default_rng(rotate_seed)
        left = _random_orthonormal(k, k, rng)
        right = _random_orthonormal(n, k, rng)
    x_dagger = right @ range_coeffs
    return _build_linear(
        ProblemKind.LINEAR_HILBERT, sigma, left, right, x_dagger,
        SolutionSet.AFFINE_NULLSPACE, OmegaKind.SQUARED_NORM2, error_kind, 2.0, None,
    )


def make_linear_from_matrix(matrix, y, rcond: float = 1e-12) -> ProblemInstance:
    """LinearHilbert instance for a dense matrix; ``x_dagger`` is ``A^+ y``."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    u, s, vt = np.linalg.svd(matrix, full_matrices=False)
    keep = s > rcond * max(s.max(initial=0.0), np.finfo(float).tiny)
    if not np.any(keep):
        raise ValueError("matrix is numerically zero")
    u, s, v = u[:, keep], s[keep], vt[keep].T
    y = _check_vector(y, matrix.shape[0], "y")
    x_dagger = v @ ((u.T @ y) / s)
    return _build_linear(
        ProblemKind.LINEAR_HILBERT, s, u, v, x_dagger, SolutionSet.AFFINE_NULLSPACE,
        OmegaKind.SQUARED_NORM2, ErrorKind.SQUARED_NORM_TO_XDAGGER, 2.0, None,
    )


def make_l1_linear(matrix, x_dagger, error_kind: str = "Norm1ToXdagger",
                   xi_dagger=None, rcond: float = 1e-10) -> ProblemInstance:
    """l1-regularization setting for an injective matrix."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    m, n = matrix.shape
    x_dagger = _check_vector(x_dagger, n, "x_dagger")
    u, s, vt = np.linalg.svd(matrix, full_matrices=False)
    if s.size < n or s.min() <= rcond * s.max():
        raise ValueError("l1 setting requires an injective matrix")
    return _build_linear(
        ProblemKind.L1_LINEAR, s, u, vt.T, x_dagger, SolutionSet.SINGLETON,
        OmegaKind.NORM1, error_kind, 2.0, xi_dagger,
    )


def make_autoconvolution(x_dagger) -> ProblemInstance:
    """Autoconvolution on (0, 1) with ``n = len(x_dagger)`` grid points."""
    x_dagger = np.asarray(x_dagger, dtype=float)
    if x_dagger.ndim != 1 or x_dagger.size == 0:
        raise ValueError("x_dagger must be a nonempty vector")
    n = x_dagger.size
    h = 1.0 / n
    return ProblemInstance(
        kind=ProblemKind.AUTOCONVOLUTION,
        n=n,
        m=2 * n - 1,
        x_dagger=_frozen(x_dagger),
        y_dagger=_frozen(h * np.convolve(x_dagger, x_dagger)),
        solution_set=SolutionSet.PLUS_MINUS_PAIR,
        omega_kind=OmegaKind.SQUARED_NORM2,
        error_kind=ErrorKind.POINT_TO_SET_SQUARED,
        h=h,
    )


def make_preset(name: str, n: int = 50, seed: int = 0) -> ProblemInstance:
    """Named benchmark instances used by the shipped configurations.

    ``linear_hilbert_benchmark``
        ``sigma_i = 1/i`` and ``x_dagger = A^T w`` for a random unit ``w``.
    ``autoconvolution_smooth``
        Autoconvolution with ``x_dagger(s) = 1 + sin(pi s)`` at cell midpoints.
    ``l1_random``
        Square Gaussian matrix with a sparse ``x_dagger``.
    ``zero``
        Linear Hilbert instance with ``x_dagger = 0``.
    """
    rng = np.random.default_rng(seed)
    if name == "linear_hilbert_benchmark":
        w = rng.standard_normal(n)
        w /= np.linalg.norm(w)
        return make_linear_hilbert(1.0 / np.arange(1, n + 1), w, mode="SourceElement")
    if name == "autoconvolution_smooth":
        s = (np.arange(n) + 0.5) / n
        return make_autoconvolution(1.0 + np.sin(np.pi * s))
    if name == "l1_random":
        a = rng.standard_normal((n, n)) / np.sqrt(n)
        x = np.zeros(n)
        support = rng.choice(n, size=max(1, n // 10), replace=False)
        x[support] = rng.standard_normal(support.size)
        return make_l1_linear(a, x)
    if name == "zero":
        return make_linear_hilbert(1.0 / np.arange(1, n + 1), np.zeros(n))
    raise ValueError(f"unknown preset {name!r}")


def apply_forward(problem: ProblemInstance, x) -> np.ndarray:
    x = _check_vector(x, problem.n)
    if problem.kind is ProblemKind.AUTOCONVOLUTION:
        return problem.h * np.convolve(x, x)
    return problem.left @ (problem.sigma * (problem.right.T @ x))


def apply_jacobian_adjoint(problem: ProblemInstance, x, residual) -> np.ndarray:
    """``J(x)^T residual``; for linear kinds ``x`` is ignored."""
    residual = _check_vector(residual, problem.m, "residual")
    if problem.kind is ProblemKind.AUTOCONVOLUTION:
        x = _check_vector(x, problem.n)
        # (J^T r)_j = 2h sum_i r_{i+j} x_i
        return 2.0 * problem.h * np.correlate(residual, x, mode="valid")
    return problem.right @ (problem.sigma * (problem.left.T @ residual))


def residual_norm(problem: ProblemInstance, x, y=None) -> float:
    y = problem.y_dagger if y is None else y
    return float(np.linalg.norm(apply_forward(problem, x) - y))


def omega(problem: ProblemInstance, x) -> float:
    x = _check_vector(x, problem.n)
    if problem.omega_kind is OmegaKind.NORM1:
        return float(np.sum(np.abs(x)))
    return float(x @ x)


def error_functional(problem: ProblemInstance, x) -> float:
    x = _check_vector(x, problem.n)
    xd = problem.x_dagger
    kind = problem.error_kind
    if kind is ErrorKind.SQUARED_NORM_TO_XDAGGER:
        d = x - xd
        return float(d @ d)
    if kind is ErrorKind.POINT_TO_SET_SQUARED:
        dm, dp = x - xd, x + xd
        return float(min(dm @ dm, dp @ dp))
    if kind is ErrorKind.NORM1_TO_XDAGGER:
        return float(np.sum(np.abs(x - xd)))
    value = omega(problem, x) - omega(problem, xd) - float(problem.xi_dagger @ (x - xd))
    return max(value, 0.0)


def null_space_basis(problem: ProblemInstance) -> np.ndarray:
    """Orthonormal basis (n, d) of the null space; ``d = 0`` for injective maps."""
    if not problem.is_linear:
        raise ValueError("null space is only defined for linear kinds")
    if problem.right.shape[1] == problem.n:
        return np.zeros((problem.n, 0))
    return null_space(problem.right.T)


def sample_solutions(problem: ProblemInstance, count: int, rng=None,
                     scale: float = 1.0) -> np.ndarray:
    """Exact solutions of ``F(x) = y_dagger`` from the represented solution set."""
    xd = np.asarray(problem.x_dagger)
    if problem.solution_set is SolutionSet.SINGLETON:
        return xd[None, :].copy()
    if problem.solution_set is SolutionSet.PLUS_MINUS_PAIR:
        return np.stack([xd, -xd])
    rng = np.random.default_rng(rng)
    basis = null_space_basis(problem)
    coeffs = scale * rng.standard_normal((count, basis.shape[1]))
    return np.vstack([xd[None, :], xd + coeffs @ basis.T])


def to_dict(problem: ProblemInstance) -> dict:
    """JSON-ready dictionary; singular vectors are omitted when canonical."""
    out = {
        "kind": problem.kind.value,
        "n": problem.n,
        "m": problem.m,
        "sigma": problem.sigma.tolist(),
        "xdagger": problem.x_dagger.tolist(),
        "omega_kind": problem.omega_kind.value,
        "error_kind": problem.error_kind.value,
        "p": problem.p,
    }
    if problem.is_linear:
        k = problem.sigma.size
        if not np.array_equal(problem.left, np.eye(problem.m)[:, :k]):
            out["left_vectors"] = problem.left.tolist()
        if not np.array_equal(problem.right, np.eye(problem.n)[:, :k]):
            out["right_vectors"] = problem.right.tolist()
    if problem.xi_dagger is not None:
        out["xi_dagger"] = problem.xi_dagger.tolist()
    return out


_DICT_KEYS = {"kind", "n", "m", "sigma", "xdagger", "omega_kind", "error_kind", "p",
              "left_vectors", "right_vectors", "xi_dagger"}


def from_dict(data: dict) -> ProblemInstance:
    unknown = set(data) - _DICT_KEYS
    if unknown:
        raise ValueError(f"unknown problem keys: {sorted(unknown)}")
    kind = ProblemKind(data["kind"])
    x_dagger = np.asarray(data["xdagger"], dtype=float)
    n = int(data.get("n", x_dagger.size))
    if x_dagger.size != n:
        raise ValueError(f"xdagger has length {x_dagger.size}, expected n={n}")
    if kind is ProblemKind.AUTOCONVOLUTION:
        problem = make_autoconvolution(x_dagger)
    else:
        sigma = np.asarray(data["sigma"], dtype=float)
        k = sigma.size
        m = int(data.get("m", k))
        left = np.asarray(data.get("left_vectors", np.eye(m)[:, :k]), dtype=float)
        right = np.asarray(data.get("right_vectors", np.eye(n)[:, :k]), dtype=float)
        if left.shape != (m, k) or right.shape != (n, k):
            raise ValueError("singular vectors do not match n, m and sigma")
        if kind is ProblemKind.L1_LINEAR:
            solution_set, default_omega = SolutionSet.SINGLETON, OmegaKind.NORM1
            if k < n:
                raise ValueError("l1 setting requires an injective operator")
        else:
            solution_set, default_omega = SolutionSet.AFFINE_NULLSPACE, OmegaKind.SQUARED_NORM2
        problem = _build_linear(
            kind, sigma, left, right, x_dagger, solution_set,
            data.get("omega_kind", default_omega.value),
            data.get("error_kind", "SquaredNormToXdagger" if kind is ProblemKind.LINEAR_HILBERT
                     else "Norm1ToXdagger"),
            data.get("p", 2.0), data.get("xi_dagger"),
        )
    if problem.m != int(data.get("m", problem.m)):
        raise ValueError(f"m={data['m']} inconsistent with the operator (m={problem.m})")
    return problem


def save_problem(problem: ProblemInstance, path) -> None:
    with open(path, "w") as fh:
        json.dump(to_dict(problem), fh, indent=2)
        fh.write("\n")


def load_problem(path) -> ProblemInstance:
    with open(path) as fh:
        return from_dict(json.load(fh))
