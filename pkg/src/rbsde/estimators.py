"""scikit-learn style wrappers around the functional solvers.

``fit`` takes an :class:`~rbsde.solvers.Instance` (or a scenario spec) in
place of a design matrix; ``predict`` reads solution values at lattice
nodes given as ``(step, index)`` rows.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .drivers import DEFAULT_ROOT_TOL
from .exceptions import ConfigurationError, ShapeError
from .paths import DEFAULT_ENUMERATION_CAP, DEFAULT_N_PATHS
from .scenarios import ScenarioSpec, make_instance
from .solvers import Instance, solve_penalized, solve_plain, solve_reflected, solve_snell
from .sweep import penalization_sweep

__all__ = ["BSDESolver", "PenalizationPath"]

_METHODS = {
    "plain": lambda inst, est: solve_plain(inst, est.root_tol, est.max_expand),
    "penalized": lambda inst, est: solve_penalized(inst, est.penalty, est.root_tol, est.max_expand),
    "reflected": lambda inst, est: solve_reflected(inst, est.root_tol, est.max_expand),
    "snell": lambda inst, est: solve_snell(inst, est.root_tol),
}


def _instance(obj):
    if isinstance(obj, Instance):
        return obj
    if isinstance(obj, (ScenarioSpec, str)):
        return make_instance(obj)
    raise ConfigurationError(f"expected an Instance or ScenarioSpec, got {type(obj).__name__}")


def _node_values(field, X):
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[1] != 2:
        raise ShapeError(f"expected (n, 2) array of (step, index) rows, got shape {X.shape}")
    out = np.empty(len(X))
    for k, (i, j) in enumerate(X.astype(int)):
        if not (0 <= i < len(field) and 0 <= j <= i):
            raise ShapeError(f"node ({i}, {j}) is outside the lattice")
        out[k] = field[i][j]
    return out


class BSDESolver(BaseEstimator):
    """Solve one instance by the chosen scheme.

    Fitted attributes: ``solution_``, ``Y_``, ``Z_``, ``K_``, ``value_``.
    """

    def __init__(self, method="reflected", penalty=0.0, root_tol=DEFAULT_ROOT_TOL, max_expand=64):
        self.method = method
        self.penalty = penalty
        self.root_tol = root_tol
        self.max_expand = max_expand

    def fit(self, X, y=None):
        if self.method not in _METHODS:
            raise ConfigurationError(f"method must be one of {sorted(_METHODS)}, got {self.method!r}")
        sol = _METHODS[self.method](_instance(X), self)
        self.solution_ = sol
        self.Y_, self.Z_, self.K_ = sol.Y, sol.Z, sol.K
        self.value_ = sol.value
        return self

    def predict(self, X):
        check_is_fitted(self, "solution_")
        return _node_values(self.Y_, X)


class PenalizationPath(BaseEstimator):
    """Penalization sweep against the reflected reference.

    Fitted attributes: ``solutions_``, ``reference_``, ``report_``.
    """

    def __init__(self, schedule=(4, 16, 64, 256, 1024), p=2.0, mode="auto",
                 n_paths=DEFAULT_N_PATHS, random_state=None,
                 enumeration_cap=DEFAULT_ENUMERATION_CAP, n_jobs=1, root_tol=DEFAULT_ROOT_TOL):
        self.schedule = schedule
        self.p = p
        self.mode = mode
        self.n_paths = n_paths
        self.random_state = random_state
        self.enumeration_cap = enumeration_cap
        self.n_jobs = n_jobs
        self.root_tol = root_tol

    def fit(self, X, y=None):
        res = penalization_sweep(
            _instance(X), self.schedule, p=self.p, mode=self.mode, n_paths=self.n_paths,
            seed=self.random_state, enumeration_cap=self.enumeration_cap, n_jobs=self.n_jobs,
            root_tol=self.root_tol,
        )
        self.solutions_ = res.solutions
        self.reference_ = res.reference
        self.report_ = res.report
        return self

    def predict(self, X):
        """``Y`` of every sweep level at the given nodes, shape ``(levels, n)``."""
        check_is_fitted(self, "solutions_")
        return np.stack([_node_values(s.Y, X) for s in self.solutions_])
