import numpy as np
import pytest
from scipy.optimize import minimize
from sklearn.base import clone
from sklearn.utils.validation import NotFittedError

from decopt.estimators import ConsensusLeastSquares, ConsensusLogisticRegression


def _classification(seed=0, n=120, p=3):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    w = rng.standard_normal(p)
    y = np.where(X @ w + 0.3 + 0.5 * rng.standard_normal(n) > 0, "yes", "no")
    return X, y


def _pooled_logistic(X, signs, reg, n_nodes):
    """Every node adds reg/2 ||w||^2, so the pooled ridge weight is n_nodes * reg."""
    Xd = np.hstack([X, np.ones((len(X), 1))])

    def f(w):
        return np.sum(np.logaddexp(0.0, -signs * (Xd @ w))) + 0.5 * n_nodes * reg * w @ w

    def g(w):
        s = -signs / (1.0 + np.exp(signs * (Xd @ w)))
        return Xd.T @ s + n_nodes * reg * w

    return minimize(f, np.zeros(Xd.shape[1]), jac=g, method="BFGS", options={"gtol": 1e-12}).x


@pytest.mark.parametrize("solver", ["dqm", "dadmm"])
def test_logistic_matches_pooled_fit(solver):
    X, y = _classification()
    est = ConsensusLogisticRegression(n_nodes=4, solver=solver, reg=1e-2, max_iter=600).fit(X, y)
    w = _pooled_logistic(X, np.where(y == "yes", 1.0, -1.0), 1e-2, 4)
    np.testing.assert_allclose(np.append(est.coef_, est.intercept_), w, atol=1e-6)
    np.testing.assert_array_equal(est.classes_, ["no", "yes"])
    proba = est.predict_proba(X)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)
    assert est.score(X, y) > 0.8
    assert est.node_coefs_.shape == (4, 4)


def test_penalty_solver_classifies():
    X, y = _classification(1)
    est = ConsensusLogisticRegression(n_nodes=3, solver="nn", alpha=0.1, K=2, max_iter=100).fit(X, y)
    assert est.score(X, y) > 0.8
    assert est.n_iter_ <= 100


def test_least_squares_matches_ridge():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((90, 4))
    y = X @ np.array([1.0, -2.0, 0.5, 0.0]) + 0.7 + 0.1 * rng.standard_normal(90)
    est = ConsensusLeastSquares(n_nodes=5, reg=1e-3, max_iter=500).fit(X, y)
    Xd = np.hstack([X, np.ones((90, 1))])
    w = np.linalg.solve(Xd.T @ Xd + 5 * 1e-3 * np.eye(5), Xd.T @ y)
    np.testing.assert_allclose(np.append(est.coef_, est.intercept_), w, atol=1e-7)
    assert est.score(X, y) > 0.99


def test_no_intercept():
    X, y = _classification(3)
    est = ConsensusLogisticRegression(n_nodes=3, fit_intercept=False).fit(X, y)
    assert est.intercept_ == 0.0 and est.coef_.shape == (3,)


def test_parameter_protocol():
    est = ConsensusLogisticRegression(n_nodes=7, solver="dlm", rho_lin=3.0)
    twin = clone(est)
    assert twin.get_params() == est.get_params()
    assert twin.set_params(c=0.5).c == 0.5


def test_validation_errors():
    X, y = _classification()
    with pytest.raises(ValueError, match="solver"):
        ConsensusLogisticRegression(solver="sgd").fit(X, y)
    with pytest.raises(ValueError, match="binary"):
        ConsensusLogisticRegression().fit(X, np.arange(len(X)) % 3)
    with pytest.raises(ValueError, match="cover"):
        ConsensusLogisticRegression(n_nodes=5).fit(X[:3], y[:3])
    with pytest.raises(ValueError, match="reg"):
        ConsensusLeastSquares(reg=0.0).fit(X, np.zeros(len(X)))
    with pytest.raises(NotFittedError):
        ConsensusLogisticRegression().predict(X)
    est = ConsensusLogisticRegression(n_nodes=3).fit(X, y)
    with pytest.raises(ValueError, match="features"):
        est.predict(X[:, :2])
