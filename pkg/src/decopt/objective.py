"""Local objectives, curvature constants and the penalized consensus objective.

The penalized objective over stacked node variables ``y = [y_1; ...; y_n]``
is

    F(y) = 1/2 y^T (I - Z) y + alpha * sum_i f_i(y_i),   Z = W kron I_p,

whose minimizer approaches the consensus optimum as ``alpha -> 0``.
Stacked vectors are stored as ``(n, p)`` arrays; dense matrices use the
node-major flattening ``y.ravel()``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence, Union

import numpy as np
from scipy.special import expit

from .topology import WeightMatrix

__all__ = [
    "QuadraticObjective",
    "LogisticObjective",
    "LocalObjective",
    "CurvatureConstants",
    "PenaltyObjective",
    "NotStronglyConvexError",
    "LineSearchError",
    "evaluate_local",
    "curvature_constants",
    "global_constants",
    "penalty_eval",
    "penalty_hessian",
    "centralized_reference",
    "global_minimizer",
    "aggregate_value",
    "random_quadratics",
    "synthetic_logistic",
    "load_logistic_csv",
    "dump_logistic_csv",
]

SIGMOID_LOG_CUTOFF = 30.0
LOGISTIC_CURVATURE = 1.0 / (6.0 * math.sqrt(3.0))  # max |sigma''|


class NotStronglyConvexError(ValueError):
    pass


class LineSearchError(RuntimeError):
    pass


def _check_dim(x: np.ndarray, p: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (p,):
        raise ValueError(f"expected a vector of dimension {p}, got shape {x.shape}")
    return x


@dataclass(frozen=True)
class QuadraticObjective:
    """``f(x) = 1/2 x^T A x + b^T x + const`` with ``A`` symmetric positive definite."""

    A: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)
    const: float = 0.0

    def __post_init__(self) -> None:
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if A.shape != (b.size, b.size):
            raise ValueError(f"A has shape {A.shape} but b has size {b.size}")
        if not np.allclose(A, A.T, atol=1e-12):
            raise ValueError("A must be symmetric")
        object.__setattr__(self, "A", 0.5 * (A + A.T))
        object.__setattr__(self, "b", b)

    kind = "quadratic"

    @classmethod
    def centered(cls, A, center) -> "QuadraticObjective":
        """``1/2 (x - center)^T A (x - center)``."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        center = np.atleast_1d(np.asarray(center, dtype=float))
        return cls(A, -A @ center, 0.5 * float(center @ A @ center))

    @property
    def p(self) -> int:
        return self.b.size

    def value(self, x) -> float:
        x = _check_dim(x, self.p)
        return float(0.5 * x @ self.A @ x + self.b @ x + self.const)

    def gradient(self, x) -> np.ndarray:
        x = _check_dim(x, self.p)
        return self.A @ x + self.b

    def hessian(self, x) -> np.ndarray:
        _check_dim(x, self.p)
        return self.A.copy()

    def curvature(self) -> "CurvatureConstants":
        eig = np.linalg.eigvalsh(self.A)
        if eig[0] <= 0:
            raise NotStronglyConvexError(f"quadratic has min eigenvalue {eig[0]} <= 0")
        return CurvatureConstants(m=float(eig[0]), M=float(eig[-1]), L=0.0)


def _log1pexp_neg(t: np.ndarray) -> np.ndarray:
    """``log(1 + exp(-t))`` without overflow for large ``|t|``."""
    out = np.empty_like(t)
    big = np.abs(t) > SIGMOID_LOG_CUTOFF
    out[~big] = np.log1p(np.exp(-t[~big]))
    out[big] = np.logaddexp(0.0, -t[big])
    return out


@dataclass(frozen=True)
class LogisticObjective:
    """Sum of logistic losses plus ``reg/2 * ||x||^2``.

    ``samples`` is ``(q, p)``; ``labels`` holds values in ``{-1, +1}``.
    """

    samples: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False)
    reg: float = 0.0

    def __post_init__(self) -> None:
        S = np.atleast_2d(np.asarray(self.samples, dtype=float))
        y = np.atleast_1d(np.asarray(self.labels, dtype=float))
        if S.shape[0] != y.size:
            raise ValueError(f"{S.shape[0]} samples but {y.size} labels")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        if self.reg < 0:
            raise ValueError(f"reg must be >= 0, got {self.reg}")
        object.__setattr__(self, "samples", S)
        object.__setattr__(self, "labels", y)

    kind = "logistic"

    @property
    def p(self) -> int:
        return self.samples.shape[1]

    def _margins(self, x) -> np.ndarray:
        x = _check_dim(x, self.p)
        return self.labels * (self.samples @ x)

    def value(self, x) -> float:
        t = self._margins(x)
        return float(_log1pexp_neg(t).sum() + 0.5 * self.reg * (x @ x))

    def gradient(self, x) -> np.ndarray:
        t = self._margins(x)
        coef = -self.labels * expit(-t)
        return self.samples.T @ coef + self.reg * np.asarray(x, dtype=float)

    def hessian(self, x) -> np.ndarray:
        t = self._margins(x)
        s = expit(t)
        w = s * (1.0 - s)
        H = (self.samples * w[:, None]).T @ self.samples
        return H + self.reg * np.eye(self.p)

    def curvature(self) -> "CurvatureConstants":
        if self.reg <= 0:
            raise NotStronglyConvexError("not strongly convex; set reg > 0")
        norms = np.linalg.norm(self.samples, axis=1)
        return CurvatureConstants(
            m=float(self.reg),
            M=float(self.reg + 0.25 * np.sum(norms**2)),
            L=float(np.sum(norms**3) * LOGISTIC_CURVATURE),
        )


LocalObjective = Union[QuadraticObjective, LogisticObjective]


@dataclass(frozen=True)
class CurvatureConstants:
    """Hessian eigenvalue bounds ``m <= eig <= M`` and Hessian Lipschitz ``L``."""

    m: float
    M: float
    L: float

    def __post_init__(self) -> None:
        if not (0 < self.m <= self.M < math.inf):
            raise ValueError(f"need 0 < m <= M < inf, got m={self.m}, M={self.M}")
        if self.L < 0:
            raise ValueError(f"L must be >= 0, got {self.L}")


def evaluate_local(obj: LocalObjective, x) -> tuple[float, np.ndarray, np.ndarray]:
    """Value, gradient and Hessian of a local objective at ``x``."""
    return obj.value(x), obj.gradient(x), obj.hessian(x)


def curvature_constants(obj: LocalObjective) -> CurvatureConstants:
    return obj.curvature()


def global_constants(locals_: Sequence[LocalObjective]) -> CurvatureConstants:
    """Worst-case constants over all nodes: ``min m_i``, ``max M_i``, ``max L_i``."""
    cs = [o.curvature() for o in locals_]
    return CurvatureConstants(
        m=min(c.m for c in cs), M=max(c.M for c in cs), L=max(c.L for c in cs)
    )


def aggregate_value(locals_: Sequence[LocalObjective], x) -> float:
    """``sum_i f_i(x)`` for a single shared argument."""
    return float(sum(o.value(x) for o in locals_))


@dataclass(frozen=True)
class PenaltyObjective:
    """Penalized consensus objective built from weights and local objectives."""

    weights: WeightMatrix
    alpha: float
    locals: tuple

    def __post_init__(self) -> None:
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        locs = tuple(self.locals)
        if len(locs) != self.weights.n:
            raise ValueError(f"{len(locs)} local objectives for {self.weights.n} nodes")
        ps = {o.p for o in locs}
        if len(ps) != 1:
            raise ValueError(f"local objectives disagree on dimension: {sorted(ps)}")
        object.__setattr__(self, "locals", locs)

    @property
    def n(self) -> int:
        return self.weights.n

    @property
    def p(self) -> int:
        return self.locals[0].p

    @property
    def topology(self):
        return self.weights.topology

    def with_alpha(self, alpha: float) -> "PenaltyObjective":
        return replace(self, alpha=alpha)

    def constants(self) -> CurvatureConstants:
        return global_constants(self.locals)

    def as_blocks(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape == (self.n, self.p):
            return y
        if y.shape == (self.n * self.p,):
            return y.reshape(self.n, self.p)
        raise ValueError(
            f"expected shape ({self.n}, {self.p}) or ({self.n * self.p},), got {y.shape}"
        )

    def local_gradient(self, i: int, y_i, neighbor_values, alpha: float | None = None):
        """Gradient block ``g_i`` from node ``i``'s value and its neighbors' values.

        ``neighbor_values`` maps each ``j`` in ``N_i`` to ``y_j``.
        """
        a = self.alpha if alpha is None else alpha
        w = self.weights.W
        g = (1.0 - w[i, i]) * y_i
        for j in self.topology.neighbors(i):
            g = g - w[i, j] * neighbor_values[j]
        return g + a * self.locals[i].gradient(y_i)

    def consensus_value(self, y) -> float:
        """``1/2 y^T (I - Z) y`` via neighbor sums."""
        Y = self.as_blocks(y)
        w = self.weights.W
        total = 0.0
        for i in range(self.n):
            r = (1.0 - w[i, i]) * Y[i]
            for j in self.topology.neighbors(i):
                r = r - w[i, j] * Y[j]
            total += float(Y[i] @ r)
        return 0.5 * total

    def value(self, y) -> float:
        Y = self.as_blocks(y)
        fsum = sum(o.value(Y[i]) for i, o in enumerate(self.locals))
        return self.consensus_value(Y) + self.alpha * fsum

    def gradient(self, y) -> np.ndarray:
        Y = self.as_blocks(y)
        return np.array(
            [
                self.local_gradient(i, Y[i], {j: Y[j] for j in self.topology.neighbors(i)})
                for i in range(self.n)
            ]
        )

    def hessian(self, y) -> np.ndarray:
        Y = self.as_blocks(y)
        n, p = self.n, self.p
        H = np.eye(n * p) - np.kron(self.weights.W, np.eye(p))
        for i, o in enumerate(self.locals):
            sl = slice(i * p, (i + 1) * p)
            H[sl, sl] += self.alpha * o.hessian(Y[i])
        return 0.5 * (H + H.T)


def penalty_eval(P: PenaltyObjective, y) -> tuple[float, np.ndarray]:
    """``(F(y), g)`` with ``g`` returned as an ``(n, p)`` array."""
    return P.value(y), P.gradient(y)


def penalty_hessian(P: PenaltyObjective, y) -> np.ndarray:
    return P.hessian(y)


def _damped_newton(value, grad, hess, x0, gtol, max_iter=200):
    x = np.array(x0, dtype=float)
    for _ in range(max_iter):
        g = grad(x)
        if np.linalg.norm(g) <= gtol:
            return x
        H = hess(x)
        step = -np.linalg.solve(H, g)
        if np.linalg.norm(step) <= 16 * np.finfo(float).eps * max(1.0, float(np.linalg.norm(x))):
            return x + step  # converged to machine resolution
        slope = float(g @ step)
        f0 = value(x)
        t = 1.0
        slack = 16 * np.finfo(float).eps * max(1.0, abs(f0))
        while value(x + t * step) > f0 + 1e-4 * t * slope + slack:
            t *= 0.5
            if t < 1e-20:
                # at roundoff level the decrease test is meaningless
                if np.linalg.norm(g) <= max(gtol, 1e-10 * max(1.0, abs(f0))):
                    return x
                raise LineSearchError(
                    f"line search failed to decrease the objective (|g| = {np.linalg.norm(g):.3e})"
                )
        x = x + t * step
    g = grad(x)
    if np.linalg.norm(g) <= gtol * 1e3:
        return x
    raise LineSearchError(f"Newton did not converge: |g| = {np.linalg.norm(g):.3e}")


def global_minimizer(locals_: Sequence[LocalObjective], tol: float = 1e-12) -> np.ndarray:
    """Minimizer of ``sum_i f_i(x)`` by damped Newton from zero."""
    p = locals_[0].p
    return _damped_newton(
        lambda x: sum(o.value(x) for o in locals_),
        lambda x: sum(o.gradient(x) for o in locals_),
        lambda x: sum(o.hessian(x) for o in locals_),
        np.zeros(p),
        tol,
    )


def centralized_reference(P: PenaltyObjective, tol: float = 1e-9):
    """Reference solutions computed centrally by damped Newton from zero.

    Returns
    -------
    y_star : ndarray, shape (n, p)
        Minimizer of the penalized objective, to ``|g| <= tol * 1e-3``.
    F_star : float
    x_tilde_star : ndarray, shape (p,)
        Minimizer of ``sum_i f_i``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n, p = P.n, P.p
    y = _damped_newton(
        lambda v: P.value(v.reshape(n, p)),
        lambda v: P.gradient(v.reshape(n, p)).ravel(),
        lambda v: P.hessian(v.reshape(n, p)),
        np.zeros(n * p),
        tol * 1e-3,
    ).reshape(n, p)
    x_tilde = global_minimizer(P.locals, tol * 1e-3)
    return y, P.value(y), x_tilde


# -- instance generators ------------------------------------------------------


def random_quadratics(n: int, p: int, seed: int, cond: float = 10.0,
                      m_low: float = 1.0, spread: float = 1.0) -> list[QuadraticObjective]:
    """Random SPD quadratics with eigenvalues in ``[m_low, m_low * cond]``.

    Linear terms are Gaussian with standard deviation ``spread``.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        Q, _ = np.linalg.qr(rng.standard_normal((p, p)))
        if p == 1:
            eig = np.array([m_low * math.exp(rng.uniform(0, math.log(cond)))])
        else:
            eig = m_low * np.exp(rng.uniform(0, math.log(cond), size=p))
            eig[0], eig[-1] = m_low, m_low * cond
        A = (Q * eig) @ Q.T
        out.append(QuadraticObjective(0.5 * (A + A.T), spread * rng.standard_normal(p)))
    return out


def synthetic_logistic(n: int, q: int, p: int, seed: int, reg: float = 1e-3,
                       scale: float = 1.0, signal: float = 1.0) -> list[LogisticObjective]:
    """Per-node logistic datasets drawn from a planted linear classifier.

    Features are standard normal times ``scale``; labels are Bernoulli with
    probability ``sigmoid(s^T x_true)`` where ``x_true`` is standard normal
    times ``signal``. ``signal = 0`` gives labels independent of the
    features, which keeps small unregularized problems away from
    separability.
    """
    rng = np.random.default_rng(seed)
    x_true = signal * rng.standard_normal(p)
    out = []
    for _ in range(n):
        S = scale * rng.standard_normal((q, p))
        prob = expit(S @ x_true)
        y = np.where(rng.random(q) < prob, 1.0, -1.0)
        out.append(LogisticObjective(S, y, reg))
    return out


def load_logistic_csv(path, n: int, reg: float = 1e-3) -> list[LogisticObjective]:
    """Read ``label, feature_1..feature_p`` rows and deal them to ``n`` nodes.

    Rows are split into ``n`` contiguous chunks of near-equal size.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0] != "label":
            raise ValueError("first CSV column must be 'label'")
        expected = [f"feature_{k}" for k in range(1, len(header))]
        if header[1:] != expected:
            raise ValueError(f"feature columns must be {expected}")
        rows = [[float(v) for v in row] for row in reader if row]
    data = np.array(rows)
    if data.shape[0] < n:
        raise ValueError(f"{data.shape[0]} rows cannot cover {n} nodes")
    return [
        LogisticObjective(chunk[:, 1:], chunk[:, 0], reg)
        for chunk in np.array_split(data, n)
    ]


def dump_logistic_csv(locals_: Sequence[LogisticObjective], path) -> None:
    p = locals_[0].p
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label"] + [f"feature_{k}" for k in range(1, p + 1)])
        for o in locals_:
            for lab, s in zip(o.labels, o.samples):
                w.writerow([repr(float(lab))] + [repr(float(v)) for v in s])
