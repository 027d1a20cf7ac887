"""Concave index functions ``phi(t) = inf_{r >= 0} (D(r) + r t)`` from sampled profiles."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .distfun import DistanceProfile

__all__ = [
    "IndexFunction",
    "NonDecayingProfile",
    "index_from_distance",
    "evaluate",
    "concave_envelope",
    "default_t_grid",
]


class NonDecayingProfile(ValueError):
    """The sampled distance function has not decayed; extend ``r_max``."""


@dataclass
class IndexFunction:
    t_grid: np.ndarray
    values: np.ndarray
    slopes_used: np.ndarray
    trivial: bool = False
    decay_tol: Optional[float] = None

    def __post_init__(self):
        self.t_grid = np.asarray(self.t_grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.slopes_used = np.asarray(self.slopes_used, dtype=float)

    def __call__(self, t):
        return evaluate(self, t)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "phi", "slope"])
            for row in zip(self.t_grid, self.values, self.slopes_used):
                w.writerow([repr(float(v)) for v in row])

    def to_dict(self) -> dict:
        return {
            "t_grid": self.t_grid.tolist(),
            "values": self.values.tolist(),
            "slopes_used": self.slopes_used.tolist(),
            "trivial": self.trivial,
            "decay_tol": self.decay_tol,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "IndexFunction":
        return cls(**data)

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "IndexFunction":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def default_t_grid(y_norm: float, num: int = 50) -> np.ndarray:
    """``0`` followed by ``num`` geometric points spanning ``[1e-6, 10] * y_norm``."""
    scale = y_norm if y_norm > 0 else 1.0
    return np.concatenate([[0.0], np.geomspace(1e-6 * scale, 10.0 * scale, num)])


def _check_sorted(t: np.ndarray) -> None:
    if np.any(np.diff(t) <= 0):
        raise ValueError("abscissae must be strictly increasing")


def _lower_hull(t: np.ndarray, v: np.ndarray) -> list:
    """Indices of the lower convex hull vertices (monotone chain)."""
    hull: list = []
    for i in range(t.size):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (t[b] - t[a]) * (v[i] - v[a]) - (v[b] - v[a]) * (t[i] - t[a])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return hull


def concave_envelope(points, lower: bool = True):
    """Hull of sampled data, evaluated at the input abscissae.

    ``lower=True`` gives the greatest convex minorant (used to repair sampled
    distance functions); ``lower=False`` gives the least concave majorant.
    Returns an array of ``(t, v)`` rows.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    t, v = pts[:, 0], pts[:, 1]
    _check_sorted(t)
    sign = 1.0 if lower else -1.0
    hull = _lower_hull(t, sign * v)
    env = sign * np.interp(t, t[hull], sign * v[hull])
    env = np.minimum(env, v) if lower else np.maximum(env, v)
    return np.column_stack([t, env])


def _line_envelope(r: np.ndarray, d: np.ndarray, t: np.ndarray):
    table = d[None, :] + t[:, None] * r[None, :]
    k = np.argmin(table, axis=1)
    return table[np.arange(t.size), k], r[k]


def _merge_nodes(t_grid: np.ndarray, extra: np.ndarray, gap: float) -> np.ndarray:
    """Add ``extra`` nodes to ``t_grid``, skipping those closer than ``gap`` to a kept node.

    Nearly collinear hull vertices give breakpoints that differ by roundoff;
    keeping them would create slopes that are pure noise.
    """
    nodes = list(t_grid)
    for b in np.sort(extra):
        k = np.searchsorted(nodes, b)
        near = [nodes[j] for j in (k - 1, k) if 0 <= j < len(nodes)]
        if all(abs(b - s) >= gap for s in near):
            nodes.insert(k, float(b))
    return np.asarray(nodes)


def index_from_distance(profile: DistanceProfile, t_grid, decay_tol: Optional[float] = None,
                        trivial_slope: float = 0.0) -> IndexFunction:
    """Lower envelope of the lines ``t -> D(r_j) + r_j t`` over the sampled ``r_j``.

    The returned grid is ``t_grid`` merged with the envelope's breakpoints
    inside ``[0, max(t_grid)]``, so piecewise-linear interpolation of the
    result reproduces the envelope exactly on that range.

    If the profile shows ``D(0) <= 0``, any index function works and
    ``phi(t) = trivial_slope * t`` is returned. If ``D(r) < 0`` for some
    ``r > 0``, the linear function with the smallest such slope is returned.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size < 2 or t_grid[0] != 0.0:
        raise ValueError("t_grid must start at 0 and have at least two points")
    _check_sorted(t_grid)

    if profile.trivial_vsc or profile.linear_vsc:
        slope = trivial_slope if profile.trivial_vsc else profile.linear_slope
        return IndexFunction(t_grid=t_grid, values=slope * t_grid,
                             slopes_used=np.full(t_grid.size, slope), trivial=True,
                             decay_tol=decay_tol)

    r, d = profile.r_grid, profile.values
    if np.any(d < 0):
        raise ValueError("distance values must be nonnegative")
    if decay_tol is None:
        decay_tol = 1e-6 * max(float(d[0]), 1.0)
    if d[-1] > decay_tol:
        raise NonDecayingProfile(
            f"D(r_max) = {d[-1]:.3e} exceeds decay_tol = {decay_tol:.3e}; increase r_max"
        )
    if not profile.certified:
        d = concave_envelope(np.column_stack([r, d]), lower=True)[:, 1]

    hull = _lower_hull(r, d)
    hr, hd = r[hull], d[hull]
    breaks = -np.diff(hd) / np.diff(hr)
    breaks = breaks[(breaks > 0) & (breaks < t_grid[-1])]
    t_all = _merge_nodes(t_grid, breaks, 1e-9 * t_grid[-1])
    values, slopes = _line_envelope(r, d, t_all)
    return IndexFunction(t_grid=t_all, values=values, slopes_used=slopes,
                         trivial=False, decay_tol=float(decay_tol))


def evaluate(phi: IndexFunction, t):
    """Piecewise-linear interpolation, extended linearly past the last node."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("t must be nonnegative")
    tg, vg = phi.t_grid, phi.values
    out = np.interp(t_arr, tg, vg)
    slope = (vg[-1] - vg[-2]) / (tg[-1] - tg[-2])
    out = np.where(t_arr > tg[-1], vg[-1] + slope * (t_arr - tg[-1]), out)
    return float(out) if out.ndim == 0 else out
