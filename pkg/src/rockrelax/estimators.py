"""scikit-learn style wrappers around the sample-reweighting relaxation.

Rows of ``X`` are standard-normal KKL coordinates of the log-coefficient,
one row per sample.  :class:`SAAControl` fits the optimal control of the
plain sample average.  :class:`RockafellianOutlierFilter` fits the relaxed
problem and flags the samples whose weight the relaxation drives to zero.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, OutlierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .adi import ADIConfig, run_adi
from .lp import deleted_mask
from .mesh import Grid1D
from .objectives import L1ReweightedSAA, SAAObjective1D
from .random_field import KKLCoefficient


class _KKLBase(BaseEstimator):
    def _objective(self, X, probs=None):
        grid = Grid1D(self.n_cells)
        kkl = KKLCoefficient(self.kkl_sigma, X.shape[1])
        n = X.shape[0]
        probs = np.full(n, 1.0 / n) if probs is None else probs
        return SAAObjective1D(grid, kkl(grid.midpoints, X), probs, None, self.alpha)

    def _validate(self, X, reset: bool):
        X = check_array(X, dtype=float, ensure_min_samples=1)
        if reset:
            self.n_features_in_ = X.shape[1]
        elif X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X

    def sample_costs(self, X) -> np.ndarray:
        """``1/2 ||s(xi, z) - 1||^2`` at the fitted control for each row."""
        check_is_fitted(self, "control_")
        X = self._validate(X, reset=False)
        return 0.5 * self._objective(X).misfits(self.control_)

    def predict_state(self, X) -> np.ndarray:
        """Sample-mean state at the fitted control."""
        check_is_fitted(self, "control_")
        X = self._validate(X, reset=False)
        return self._objective(X).expected_state(self.control_)


class SAAControl(_KKLBase):
    """Optimal control of the equally weighted sample average."""

    def __init__(self, n_cells: int = 256, alpha: float = 1e-4, kkl_sigma: float = 0.4,
                 gtol: float = 1e-5):
        self.n_cells = n_cells
        self.alpha = alpha
        self.kkl_sigma = kkl_sigma
        self.gtol = gtol

    def fit(self, X, y=None):
        X = self._validate(X, reset=True)
        obj = self._objective(X)
        self.control_, self.report_ = obj.solve(np.ones(obj.grid.n_nodes), gtol=self.gtol)
        self.nodes_ = obj.grid.nodes
        return self


class RockafellianOutlierFilter(OutlierMixin, _KKLBase):
    """Detects corrupted samples by minimising the l1-penalised relaxation.

    After :meth:`fit`, ``deleted_`` marks training rows whose probability was
    moved to zero.  :meth:`predict` labels new rows ``-1`` when their cost at
    the fitted control reaches ``threshold_``, the smallest cost among the
    deleted training rows.
    """

    def __init__(self, theta: float = 5e-2, n_cells: int = 256, alpha: float = 1e-4,
                 kkl_sigma: float = 0.4, gtol: float = 1e-5, t_tol: float = 1e-5,
                 max_outer: int = 50, stringent_bounds: bool = True):
        self.theta = theta
        self.n_cells = n_cells
        self.alpha = alpha
        self.kkl_sigma = kkl_sigma
        self.gtol = gtol
        self.t_tol = t_tol
        self.max_outer = max_outer
        self.stringent_bounds = stringent_bounds

    def fit(self, X, y=None):
        if self.theta <= 0:
            raise ValueError("theta must be positive")
        X = self._validate(X, reset=True)
        obj = self._objective(X)
        problem = L1ReweightedSAA(obj, self.theta, self.stringent_bounds, gtol=self.gtol)
        res = run_adi(problem, np.ones(obj.grid.n_nodes),
                      ADIConfig(t_tol=self.t_tol, max_outer=self.max_outer))
        self.control_ = res.z
        self.t_ = res.t
        self.weights_ = obj.probs + res.t
        self.deleted_ = deleted_mask(obj.probs, res.t)
        self.adi_trace_ = res.trace
        self.converged_ = res.converged
        self.nodes_ = obj.grid.nodes
        costs = 0.5 * obj.misfits(res.z)
        self.threshold_ = float(costs[self.deleted_].min()) if self.deleted_.any() else np.inf
        return self

    def score_samples(self, X) -> np.ndarray:
        """Negative sample cost; lower means more anomalous."""
        return -self.sample_costs(X)

    def decision_function(self, X) -> np.ndarray:
        return self.score_samples(X) + self.threshold_

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) > 0, 1, -1)

    def fit_predict(self, X, y=None) -> np.ndarray:
        """Labels of the training rows taken directly from the fitted weights."""
        self.fit(X)
        return np.where(self.deleted_, -1, 1)
