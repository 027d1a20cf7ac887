"""Noise sweeps measuring ``E(x_alpha^delta)`` against ``phi(delta)``."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence

import numpy as np

from .indexfun import IndexFunction, evaluate
from .problems import ProblemInstance, error_functional
from .tikhonov import solve

__all__ = [
    "RateReport",
    "add_noise",
    "choose_alpha",
    "run_rate_experiment",
    "fit_exponent",
    "default_deltas",
]

DISCREPANCY_TAU = 1.5
LADDER_FACTOR = 0.5
LADDER_STEPS = 60


def default_deltas(y_norm: float, num: int = 8, hi: float = 1e-1, lo: float = 1e-4) -> np.ndarray:
    scale = y_norm if y_norm > 0 else 1.0
    return np.geomspace(hi * scale, lo * scale, num)


def add_noise(y_dagger, delta: float, seed=None) -> np.ndarray:
    """``y_dagger + delta * u`` with ``u`` uniform on the unit sphere."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    y = np.asarray(y_dagger, dtype=float)
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(y.shape)
    while not np.any(u):
        u = rng.standard_normal(y.shape)
    return y + delta * (u / np.linalg.norm(u))


def choose_alpha(delta: float, p: float, phi: Optional[IndexFunction], rule: str = "APrioriPhi",
                 problem: Optional[ProblemInstance] = None, y_obs=None,
                 tau: float = DISCREPANCY_TAU, solver_kwargs: Optional[dict] = None) -> float:
    """Regularization parameter for noise level ``delta``.

    ``APrioriPhi``: ``alpha = delta^p / phi(delta)``.
    ``Discrepancy``: walk ``alpha_k = ||y_obs||^p * 0.5^k`` and return the first
    ``alpha`` whose Tikhonov solution has residual ``<= tau * delta``.
    """
    if rule == "APrioriPhi":
        if not delta > 0:
            raise ValueError("APrioriPhi needs delta > 0")
        phi_delta = evaluate(phi, delta)
        if phi_delta <= 0:
            raise ValueError(f"degenerate index function: phi({delta}) = {phi_delta}")
        return delta ** p / phi_delta
    if rule == "Discrepancy":
        if problem is None or y_obs is None:
            raise ValueError("Discrepancy needs the problem and the observed data")
        y_obs = np.asarray(y_obs, dtype=float)
        alpha = float(np.linalg.norm(y_obs)) ** p
        if alpha <= 0:
            alpha = 1.0
        for _ in range(LADDER_STEPS):
            sol = solve(problem, y_obs, alpha, **(solver_kwargs or {}))
            if sol.residual_norm <= tau * delta:
                return alpha
            alpha *= LADDER_FACTOR
        raise RuntimeError(f"discrepancy ladder exhausted after {LADDER_STEPS} steps")
    raise ValueError(f"unknown rule {rule!r}")


def fit_exponent(deltas, errors) -> float:
    """Least-squares slope of ``log(errors)`` against ``log(deltas)``."""
    d = np.asarray(deltas, dtype=float)
    e = np.asarray(errors, dtype=float)
    ok = (d > 0) & (e > 0) & np.isfinite(d) & np.isfinite(e)
    if np.count_nonzero(ok) < 3:
        raise ValueError("need at least 3 positive points to fit an exponent")
    slope, _ = np.polyfit(np.log(d[ok]), np.log(e[ok]), 1)
    return float(slope)


@dataclass
class RateReport:
    deltas: np.ndarray
    errors: np.ndarray
    phi_values: np.ndarray
    alphas: np.ndarray
    fitted_exponent: float
    envelope_constant: float
    replicates: int
    seed: int
    failures: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    cells: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ("deltas", "errors", "phi_values", "alphas", "failures"):
            out[key] = np.asarray(getattr(self, key)).tolist()
        return out

    def to_json(self, path) -> None:
        data = self.to_dict()
        data.pop("cells")
        with open(path, "w") as fh:
            json.dump(data, fh, indent=2)
            fh.write("\n")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["delta", "median_error", "phi", "alpha", "failures"])
            for d, e, ph, a, f in zip(self.deltas, self.errors, self.phi_values,
                                      self.alphas, self.failures):
                w.writerow([repr(float(d)), repr(float(e)), repr(float(ph)),
                            repr(float(a)), int(f)])

    def to_long_csv(self, path) -> None:
        """One row per (delta, replicate) cell, for external plotting."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["delta", "replicate", "alpha", "error", "residual", "converged"])
            for c in self.cells:
                w.writerow([repr(c["delta"]), c["replicate"], repr(c["alpha"]),
                            repr(c["error"]), repr(c["residual"]), int(c["converged"])])


def run_rate_experiment(problem: ProblemInstance, beta: float, phi: Optional[IndexFunction],
                        delta_list: Sequence[float], replicates: int = 11,
                        rule: str = "APrioriPhi", seed: int = 0,
                        solver_kwargs: Optional[dict] = None) -> RateReport:
    """Median ``E(x_alpha^delta)`` per noise level over seeded replicates.

    Each ``(delta, replicate)`` cell uses its own seed derived from ``seed``,
    so results do not depend on execution order. Cells whose solver did not
    converge are excluded from the medians and counted in ``failures``.
    ``beta`` does not enter the computation; it is recorded because the
    rate constant scales with ``1/beta``.
    """
    deltas = np.asarray(delta_list, dtype=float)
    if deltas.ndim != 1 or deltas.size == 0 or np.any(deltas <= 0):
        raise ValueError("delta_list must be a nonempty list of positive values")
    if np.any(np.diff(deltas) >= 0):
        raise ValueError("delta_list must be strictly decreasing")
    if replicates < 1:
        raise ValueError("replicates must be at least 1")
    kwargs = dict(solver_kwargs or {})
    children = np.random.SeedSequence(seed).spawn(deltas.size * replicates)

    errors, alphas, failures, cells = [], [], [], []
    for i, delta in enumerate(deltas):
        errs, alps, fails = [], [], 0
        for j in range(replicates):
            rng = np.random.default_rng(children[i * replicates + j])
            y_obs = add_noise(problem.y_dagger, delta, rng)
            alpha = choose_alpha(delta, problem.p, phi, rule, problem, y_obs,
                                 solver_kwargs=kwargs)
            sol = solve(problem, y_obs, alpha, **kwargs)
            err = error_functional(problem, sol.x)
            cells.append({"delta": float(delta), "replicate": j, "alpha": float(alpha),
                          "error": err, "residual": sol.residual_norm,
                          "converged": sol.converged})
            alps.append(alpha)
            if sol.converged:
                errs.append(err)
            else:
                fails += 1
        errors.append(float(np.median(errs)) if errs else np.nan)
        alphas.append(float(np.median(alps)))
        failures.append(fails)

    errors = np.array(errors)
    phi_values = (np.asarray(evaluate(phi, deltas), dtype=float) if phi is not None
                  else np.full(deltas.size, np.nan))
    try:
        exponent = fit_exponent(deltas, errors)
    except ValueError:
        exponent = float("nan")
    ok = np.isfinite(errors) & (phi_values > 0)
    envelope = float(np.max(errors[ok] / phi_values[ok])) if np.any(ok) else float("nan")
    return RateReport(deltas=deltas, errors=errors, phi_values=phi_values,
                      alphas=np.array(alphas), fitted_exponent=exponent,
                      envelope_constant=envelope, replicates=replicates, seed=seed,
                      failures=np.array(failures, dtype=int), cells=cells)
