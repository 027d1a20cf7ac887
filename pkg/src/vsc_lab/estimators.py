"""scikit-learn compatible wrappers.

``TikhonovRegressor`` treats the forward matrix as the design matrix: ``fit(A, y)``
computes the Tikhonov solution ``coef_`` and ``predict(A)`` returns ``A @ coef_``.
``IndexFunctionTransformer`` fits a concave index function to a problem instance
and maps residual levels ``t`` to ``phi(t)``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .distfun import distance_profile
from .indexfun import default_t_grid, evaluate, index_from_distance
from .problems import ProblemInstance, make_l1_linear, make_linear_from_matrix
from .tikhonov import solve_l1, solve_linear_hilbert

__all__ = ["TikhonovRegressor", "IndexFunctionTransformer"]


class TikhonovRegressor(RegressorMixin, BaseEstimator):
    """Tikhonov regularization ``||A x - y||^2 + alpha * Omega(x)``.

    Parameters
    ----------
    alpha : float
        Regularization parameter, must be positive.
    penalty : {"l2", "l1"}
        ``"l2"`` uses ``Omega = ||x||^2`` (exact spectral filter); ``"l1"`` uses
        ``Omega = ||x||_1`` and needs an injective ``A``.
    tol, max_iter :
        Stopping rule of the l1 solver.
    """

    def __init__(self, alpha=1.0, penalty="l2", tol=1e-10, max_iter=100_000):
        self.alpha = alpha
        self.penalty = penalty
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        X, y = validate_data(self, X, y, y_numeric=True)
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.penalty == "l2":
            problem = make_linear_from_matrix(X, y)
            sol = solve_linear_hilbert(problem, y, self.alpha)
        elif self.penalty == "l1":
            problem = make_l1_linear(X, np.zeros(X.shape[1]))
            sol = solve_l1(problem, y, self.alpha, tol=self.tol, max_iter=self.max_iter)
        else:
            raise ValueError(f"penalty must be 'l2' or 'l1', got {self.penalty!r}")
        self.coef_ = sol.x
        self.residual_norm_ = sol.residual_norm
        # the spectral filter is a single direct solve
        self.n_iter_ = max(sol.iterations, 1)
        self.converged_ = sol.converged
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = validate_data(self, X, reset=False)
        return X @ self.coef_


class IndexFunctionTransformer(TransformerMixin, BaseEstimator):
    """Fits ``phi`` for a :class:`ProblemInstance`; ``transform`` evaluates it."""

    def __init__(self, beta=0.5, r_min=1e-3, r_max=1e4, num_points=60, num_t=50,
                 decay_tol=None, multistart=8, seed=0):
        self.beta = beta
        self.r_min = r_min
        self.r_max = r_max
        self.num_points = num_points
        self.num_t = num_t
        self.decay_tol = decay_tol
        self.multistart = multistart
        self.seed = seed

    def fit(self, X, y=None):
        if not isinstance(X, ProblemInstance):
            raise TypeError("IndexFunctionTransformer.fit expects a ProblemInstance")
        self.profile_ = distance_profile(X, self.beta, self.r_min, self.r_max,
                                         self.num_points, multistart=self.multistart,
                                         seed=self.seed)
        t_grid = default_t_grid(float(np.linalg.norm(X.y_dagger)), self.num_t)
        self.index_function_ = index_from_distance(self.profile_, t_grid,
                                                   decay_tol=self.decay_tol)
        return self

    def transform(self, X):
        check_is_fitted(self, "index_function_")
        t = np.asarray(X, dtype=float)
        return evaluate(self.index_function_, t)
