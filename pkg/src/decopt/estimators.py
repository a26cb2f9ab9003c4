"""scikit-learn style wrappers that fit models by decentralized optimization.

Training rows are dealt to ``n_nodes`` simulated agents in contiguous
chunks; agents share a random topology and run one of the shipped solvers.
The fitted coefficient is the average of the node iterates.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.multiclass import unique_labels
from sklearn.utils.validation import check_is_fitted, check_X_y

from .dqm import AdmmConfig, AdmmSolver
from .netnewton import DgdSolver, NetworkNewtonSolver, NnConfig
from .objective import LogisticObjective, PenaltyObjective, QuadraticObjective
from .simharness import StopCriteria, run
from .topology import build_random_topology, metropolis_weights

__all__ = ["ConsensusLogisticRegression", "ConsensusLeastSquares"]

_ADMM = ("dadmm", "dlm", "dqm")
_PENALTY = ("nn", "ann", "dgd")


class _ConsensusEstimator(BaseEstimator):
    def _check_solver(self):
        if self.solver not in _ADMM + _PENALTY:
            raise ValueError(f"solver must be one of {_ADMM + _PENALTY}, got {self.solver!r}")
        if self.n_nodes < 2:
            raise ValueError("n_nodes must be >= 2")

    def _solve(self, locals_):
        top = build_random_topology(self.n_nodes, self.edge_prob, self.random_state)
        stop = StopCriteria(max_iters=self.max_iter, grad_tol=self.tol)
        if self.solver in _ADMM:
            cfg = AdmmConfig(c=self.c, variant=self.solver, rho_lin=self.rho_lin)
            solver = AdmmSolver(top, locals_, cfg)
        else:
            P = PenaltyObjective(metropolis_weights(top), self.alpha, locals_)
            if self.solver == "dgd":
                solver = DgdSolver(P, self.eps)
            else:
                solver = NetworkNewtonSolver(P, NnConfig(K=self.K, eps=self.eps, alpha0=self.alpha,
                                                         adaptive=self.solver == "ann"))
        trace = run(solver, stop)
        state = trace.final_state
        X_nodes = np.asarray(state.x if self.solver in _ADMM else state.y)
        self.node_coefs_ = X_nodes
        self.trace_ = trace
        self.n_iter_ = len(trace)
        self.topology_ = top
        return X_nodes.mean(axis=0)

    def _design(self, X):
        if self.fit_intercept:
            return np.hstack([X, np.ones((X.shape[0], 1))])
        return X

    def _split_coef(self, w):
        if self.fit_intercept:
            self.coef_, self.intercept_ = w[:-1], float(w[-1])
        else:
            self.coef_, self.intercept_ = w, 0.0

    def _chunks(self, n_rows):
        if n_rows < self.n_nodes:
            raise ValueError(f"{n_rows} samples cannot cover {self.n_nodes} nodes")
        return np.array_split(np.arange(n_rows), self.n_nodes)


class ConsensusLogisticRegression(ClassifierMixin, _ConsensusEstimator):
    """Binary ℓ2-regularized logistic regression trained across a simulated network.

    Parameters
    ----------
    n_nodes : int
        Number of agents; each receives a contiguous block of rows.
    edge_prob : float
        Edge probability for the random communication graph.
    solver : {'dqm', 'dadmm', 'dlm', 'nn', 'ann', 'dgd'}
    reg : float
        Per-node ridge coefficient (keeps every local loss strongly convex).
    c, rho_lin : float
        ADMM-family parameters.
    K, eps, alpha : int, float, float
        Penalty-solver parameters (series order, stepsize, penalty weight).
    max_iter : int
    tol : float or None
        Stop once the solver's gradient residual falls below this value.
    fit_intercept : bool
    random_state : int
        Seed for the topology.
    """

    def __init__(self, n_nodes=5, edge_prob=0.5, solver="dqm", reg=1e-3, c=0.7, rho_lin=5.0,
                 K=2, eps=1.0, alpha=1e-2, max_iter=300, tol=1e-10, fit_intercept=True,
                 random_state=0):
        self.n_nodes = n_nodes
        self.edge_prob = edge_prob
        self.solver = solver
        self.reg = reg
        self.c = c
        self.rho_lin = rho_lin
        self.K = K
        self.eps = eps
        self.alpha = alpha
        self.max_iter = max_iter
        self.tol = tol
        self.fit_intercept = fit_intercept
        self.random_state = random_state

    def fit(self, X, y):
        self._check_solver()
        X, y = check_X_y(X, y)
        self.classes_ = unique_labels(y)
        if len(self.classes_) != 2:
            raise ValueError(f"binary labels required, got {len(self.classes_)} classes")
        self.n_features_in_ = X.shape[1]
        signs = np.where(y == self.classes_[1], 1.0, -1.0)
        Xd = self._design(X)
        locals_ = [LogisticObjective(Xd[idx], signs[idx], self.reg) for idx in self._chunks(len(y))]
        self._split_coef(self._solve(locals_))
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise ValueError(f"X must have {self.n_features_in_} features")
        return X @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        s = self.decision_function(X)
        p1 = 1.0 / (1.0 + np.exp(-s))
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        check_is_fitted(self, "coef_")
        return self.classes_[(self.decision_function(X) > 0).astype(int)]


class ConsensusLeastSquares(RegressorMixin, _ConsensusEstimator):
    """Ridge regression whose normal equations are solved across a simulated network.

    Each node holds ``f_i(w) = 1/2 ||X_i w - y_i||^2 + reg/2 ||w||^2``. Parameters
    match :class:`ConsensusLogisticRegression`.
    """

    def __init__(self, n_nodes=5, edge_prob=0.5, solver="dqm", reg=1e-3, c=1.0, rho_lin=5.0,
                 K=2, eps=1.0, alpha=1e-2, max_iter=300, tol=1e-10, fit_intercept=True,
                 random_state=0):
        self.n_nodes = n_nodes
        self.edge_prob = edge_prob
        self.solver = solver
        self.reg = reg
        self.c = c
        self.rho_lin = rho_lin
        self.K = K
        self.eps = eps
        self.alpha = alpha
        self.max_iter = max_iter
        self.tol = tol
        self.fit_intercept = fit_intercept
        self.random_state = random_state

    def fit(self, X, y):
        self._check_solver()
        if not self.reg > 0:
            raise ValueError("reg must be positive so every local problem is strongly convex")
        X, y = check_X_y(X, y, y_numeric=True)
        self.n_features_in_ = X.shape[1]
        Xd = self._design(X)
        p = Xd.shape[1]
        locals_ = []
        for idx in self._chunks(len(y)):
            S, t = Xd[idx], y[idx]
            locals_.append(QuadraticObjective(S.T @ S + self.reg * np.eye(p), -S.T @ t,
                                              0.5 * float(t @ t)))
        self._split_coef(self._solve(locals_))
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise ValueError(f"X must have {self.n_features_in_} features")
        return X @ self.coef_ + self.intercept_
