"""Network Newton-K, its adaptive-penalty variant, and the DGD baseline.

The Hessian of the penalized objective splits as ``H = D - B`` with

    D = alpha * G + 2 (I - Z_d)      (block diagonal)
    B = I - 2 Z_d + Z                 (block neighbor-sparse, PSD)

where ``Z_d`` holds the diagonal blocks of ``Z = W kron I_p``. Truncating
``H^{-1} = D^{-1/2} sum_k (D^{-1/2} B D^{-1/2})^k D^{-1/2}`` after ``K + 1``
terms gives a direction each node refines with ``K`` neighbor exchanges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .objective import CurvatureConstants, PenaltyObjective, centralized_reference
from .simharness import MessageLedger, Network

__all__ = [
    "NnConfig",
    "NnState",
    "AnnBoard",
    "SeriesConstants",
    "splitting_blocks",
    "assemble_splitting",
    "series_constants",
    "nn_direction",
    "nn_step",
    "dgd_step",
    "theorem1_stepsize",
    "ann_round",
    "NetworkNewtonSolver",
    "DgdSolver",
    "ReferenceCache",
]


@dataclass(frozen=True)
class NnConfig:
    """Parameters of NN-K and adaptive NN-K.

    ``tol=None`` means ``1e-3 * ||g_0||``. ``alpha_min`` stops the penalty
    schedule once another division would fall below it.
    """

    K: int = 1
    eps: float = 1.0
    alpha0: float = 1e-2
    tol: float | None = None
    adaptive: bool = False
    alpha_divisor: float = 10.0
    alpha_min: float = 1e-8

    def __post_init__(self) -> None:
        if not (isinstance(self.K, (int, np.integer)) and self.K >= 0):
            raise ValueError(f"K must be a nonnegative integer, got {self.K}")
        if not 0.0 < self.eps <= 1.0:
            raise ValueError(f"eps must lie in (0,1], got {self.eps}")
        if not self.alpha0 > 0:
            raise ValueError(f"alpha0 must be positive, got {self.alpha0}")
        if not self.alpha_divisor > 1:
            raise ValueError(f"alpha_divisor must exceed 1, got {self.alpha_divisor}")
        if self.tol is not None and not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")


@dataclass
class NnState:
    """Per-node iterates of NN-K.

    ``g`` and ``d`` are the gradient and final direction of the last
    completed iteration (both evaluated at ``prev_y``); ``y`` is the
    updated iterate. ``alpha`` is the penalty used by that iteration and by
    the next one.
    """

    t: int
    y: np.ndarray
    alpha: float
    g: np.ndarray
    d: np.ndarray
    prev_y: np.ndarray | None = None
    prev_alpha: float | None = None


@dataclass
class AnnBoard:
    """Signal bits; row ``i`` is node ``i``'s copy of the signal vector."""

    s: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "AnnBoard":
        return cls(np.zeros((n, n), dtype=np.int8))

    def synchronized(self) -> bool:
        return bool(np.all(self.s == self.s[0]))


@dataclass(frozen=True)
class SeriesConstants:
    """Spectral constants of the truncated series for one ``(alpha, K)``.

    ``rho`` uses ``alpha * m``; ``rho_unit_m`` is the same expression with
    ``m`` replaced by 1, the other form in which the constant appears.
    """

    rho: float
    rho_unit_m: float
    lam: float
    Lam: float
    K: int


def series_constants(consts: CurvatureConstants, weights, alpha: float, K: int) -> SeriesConstants:
    """Contraction factor ``rho`` and approximate-inverse bounds ``lam``, ``Lam``."""
    delta, Delta = weights.delta, weights.Delta
    a = 2.0 * (1.0 - delta)
    rho = a / (a + alpha * consts.m)
    rho_unit = a / (a + alpha)
    lam = 1.0 / (a + alpha * consts.M)
    Lam = (1.0 - rho ** (K + 1)) / ((1.0 - rho) * (2.0 * (1.0 - Delta) + alpha * consts.m))
    return SeriesConstants(rho=rho, rho_unit_m=rho_unit, lam=lam, Lam=Lam, K=K)


def splitting_blocks(P: PenaltyObjective, i: int, x_i, alpha: float | None = None):
    """Node ``i``'s row of the splitting: ``D_ii`` and ``{j: B_ij}`` for ``j`` in ``N_i + {i}``."""
    a = P.alpha if alpha is None else alpha
    w = P.weights.W
    p = P.p
    I = np.eye(p)
    D_ii = a * P.locals[i].hessian(x_i) + 2.0 * (1.0 - w[i, i]) * I
    B_row = {i: (1.0 - w[i, i]) * I}
    for j in P.topology.neighbors(i):
        B_row[j] = w[i, j] * I
    return D_ii, B_row


def assemble_splitting(P: PenaltyObjective, y, alpha: float | None = None):
    """Dense ``(D, B)`` of size ``np x np`` at ``y``."""
    Y = P.as_blocks(y)
    n, p = P.n, P.p
    D = np.zeros((n * p, n * p))
    B = np.zeros((n * p, n * p))
    for i in range(n):
        D_ii, row = splitting_blocks(P, i, Y[i], alpha)
        si = slice(i * p, (i + 1) * p)
        D[si, si] = 0.5 * (D_ii + D_ii.T)
        for j, blk in row.items():
            B[si, slice(j * p, (j + 1) * p)] = blk
    return D, B


def _local_inverses(P: PenaltyObjective, Y, alpha, order):
    inv = [None] * P.n
    for i in order:
        D_ii, _ = splitting_blocks(P, i, Y[i], alpha)
        try:
            inv[i] = np.linalg.inv(D_ii)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(f"D_{i}{i} is singular") from exc
    return inv


def _refine(P, Y, g, alpha, K, net: Network):
    w = P.weights.W
    order = net.order
    Dinv = _local_inverses(P, Y, alpha, order)
    d = np.empty_like(g)
    for i in order:
        d[i] = -Dinv[i] @ g[i]
    for _ in range(K):
        views = net.exchange(d)
        new = np.empty_like(d)
        for i in order:
            v = views[i]
            acc = (1.0 - w[i, i]) * v.own - g[i]
            for j in P.topology.neighbors(i):
                acc = acc + w[i, j] * v[j]
            new[i] = Dinv[i] @ acc
        d = new
    return d


def nn_direction(state: NnState, P: PenaltyObjective, K: int, net: Network | None = None):
    """NN-K direction from the gradient stored in ``state`` at ``state.y``.

    Consumes ``K`` neighbor exchanges on ``net`` (a fresh network if omitted).
    """
    net = net if net is not None else Network(P.topology)
    Y = P.as_blocks(state.y)
    g = P.as_blocks(state.g)
    return _refine(P, Y, g, state.alpha, K, net)


def _exchange_gradient(P, Y, alpha, net: Network):
    views = net.exchange(Y)
    g = np.empty_like(Y)
    for i in net.order:
        g[i] = P.local_gradient(i, views[i].own, views[i], alpha)
    return g, views


def ann_round(state: NnState, board: AnnBoard, cfg: NnConfig, grad_norms, net: Network,
              tol: float):
    """Signal exchange and penalty update for one adaptive iteration.

    Nodes whose local gradient norm is ``<= tol`` set their own bit and
    broadcast; receivers copy the bit. When every bit of a row is set the
    node divides ``alpha`` by ``cfg.alpha_divisor`` and clears its row.
    Returns ``(new_alpha, board, changed)``.
    """
    n = board.s.shape[0]
    if state.alpha / cfg.alpha_divisor < cfg.alpha_min:
        # Schedule finished: the floor is reached, so signaling stops.
        return state.alpha, board, False
    s = board.s.copy()
    newly = [i for i in net.order if grad_norms[i] <= tol and s[i, i] == 0]
    for i in newly:
        s[i, i] = 1
    delivered = net.broadcast(newly)
    for i in range(n):
        for j in delivered:
            s[i, j] = 1
    full = [bool(np.all(s[i] == 1)) for i in range(n)]
    if any(full) and not all(full):
        raise RuntimeError("signal vectors fell out of sync")
    alpha = state.alpha
    changed = False
    if all(full):
        s[:] = 0
        candidate = alpha / cfg.alpha_divisor
        if candidate >= cfg.alpha_min:
            alpha, changed = candidate, True
    return alpha, AnnBoard(s), changed


def nn_step(state: NnState, P: PenaltyObjective, cfg: NnConfig, net: Network | None = None,
            board: AnnBoard | None = None, tol: float | None = None) -> NnState:
    """One NN-K iteration: exchange iterates, gradient, optional penalty update, K refinements.

    ``P`` supplies the weights and local objectives; the penalty in force is
    ``state.alpha``.
    """
    net = net if net is not None else Network(P.topology)
    Y = P.as_blocks(state.y)
    alpha = state.alpha
    g, views = _exchange_gradient(P, Y, alpha, net)
    if cfg.adaptive:
        if board is None or tol is None:
            raise ValueError("adaptive NN-K needs a signal board and a tolerance")
        norms = np.linalg.norm(g, axis=1)
        alpha, new_board, changed = ann_round(state, board, cfg, norms, net, tol)
        board.s = new_board.s
        if changed:
            for i in net.order:
                g[i] = P.local_gradient(i, views[i].own, views[i], alpha)
    d = _refine(P, Y, g, alpha, cfg.K, net)
    return NnState(
        t=state.t + 1,
        y=Y + cfg.eps * d,
        alpha=alpha,
        g=g,
        d=d,
        prev_y=Y,
        prev_alpha=alpha,
    )


def dgd_step(state: NnState, P: PenaltyObjective, eps: float, net: Network | None = None) -> NnState:
    """``y <- y - eps * g`` with ``g`` built from neighbor iterates."""
    net = net if net is not None else Network(P.topology)
    Y = P.as_blocks(state.y)
    g, _ = _exchange_gradient(P, Y, state.alpha, net)
    return NnState(t=state.t + 1, y=Y - eps * g, alpha=state.alpha, g=g, d=-g,
                   prev_y=Y, prev_alpha=state.alpha)


def theorem1_stepsize(consts: CurvatureConstants, P: PenaltyObjective, lam: float, Lam: float,
                      F0_gap: float) -> float:
    """Constant stepsize guaranteeing linear decrease of ``F(y_t) - F*``.

    ``eps = min{1, [3 m lam^(5/2) / (L Lam^3 sqrt(F0_gap))]^(1/2)}``; equals 1
    for quadratics (``L = 0``) or a zero initial gap.
    """
    if F0_gap < 0:
        raise ValueError(f"initial optimality gap is negative ({F0_gap}); reference is inconsistent")
    if consts.L == 0 or F0_gap == 0:
        return 1.0
    ratio = 3.0 * consts.m * lam**2.5 / (consts.L * Lam**3 * math.sqrt(F0_gap))
    return min(1.0, math.sqrt(ratio))


class ReferenceCache:
    """Centralized ``y*(alpha)`` and ``F*(alpha)``, computed once per penalty value."""

    def __init__(self, P: PenaltyObjective, tol: float = 1e-9):
        self.P = P
        self.tol = tol
        self._cache: dict[float, tuple[np.ndarray, float]] = {}
        self.x_tilde = None

    def __call__(self, alpha: float):
        if alpha not in self._cache:
            y, F, x = centralized_reference(self.P.with_alpha(alpha), self.tol)
            self._cache[alpha] = (y, F)
            self.x_tilde = x
        return self._cache[alpha]

    def consensus_optimum(self) -> np.ndarray:
        if self.x_tilde is None:
            self(self.P.alpha)
        return self.x_tilde


def _weighted_norm(P, y, alpha, g) -> float:
    """``||D^{-1/2} g||`` with ``D`` block diagonal at ``(y, alpha)``."""
    total = 0.0
    for i in range(P.n):
        D_ii, _ = splitting_blocks(P, i, y[i], alpha)
        total += float(g[i] @ np.linalg.solve(D_ii, g[i]))
    return math.sqrt(max(total, 0.0))


class _PenaltySolverBase:
    """Shared bookkeeping for solvers of the penalized problem."""

    def __init__(self, P: PenaltyObjective, y0=None, reference: ReferenceCache | None = None):
        self.P = P
        self.topology = P.topology
        self.y0 = np.zeros((P.n, P.p)) if y0 is None else P.as_blocks(y0).copy()
        self.reference = reference if reference is not None else ReferenceCache(P)
        self.meta: dict = {}

    def record(self, state: NnState, ledger: MessageLedger) -> dict:
        P = self.P.with_alpha(state.alpha)
        Y = state.y
        F, g = P.value(Y), P.gradient(Y)
        _, F_star = self.reference(state.alpha)
        x_t = self.reference.consensus_optimum()
        y_tilde = np.broadcast_to(x_t, Y.shape)
        den = float(np.linalg.norm(self.y0 - y_tilde))
        num = float(np.linalg.norm(Y - y_tilde))
        prev_y = Y if state.prev_y is None else state.prev_y
        prev_alpha = state.alpha if state.prev_alpha is None else state.prev_alpha
        return {
            "t": state.t,
            "alpha": state.alpha,
            "F": F,
            "F_gap": F - F_star,
            "grad_norm": float(np.linalg.norm(g)),
            "weighted_grad_norm_prev_D": _weighted_norm(self.P, prev_y, prev_alpha, g),
            "weighted_grad_norm_D": _weighted_norm(self.P, Y, state.alpha, g),
            "rel_err": num / den if den > 0 else num,
            "msgs_cum": ledger.total,
            "vector_msgs": ledger.vector_msgs,
            "signal_msgs": ledger.signal_msgs,
        }


class NetworkNewtonSolver(_PenaltySolverBase):
    """NN-K (or adaptive NN-K when ``cfg.adaptive``) driven by :func:`decopt.simharness.run`.

    ``P.alpha`` is ignored in favor of ``cfg.alpha0``.
    """

    def __init__(self, P: PenaltyObjective, cfg: NnConfig, y0=None,
                 reference: ReferenceCache | None = None):
        P = P.with_alpha(cfg.alpha0)
        super().__init__(P, y0, reference)
        self.cfg = cfg
        self.board = AnnBoard.zeros(P.n)
        g0 = P.gradient(self.y0)
        self.tol = cfg.tol if cfg.tol is not None else 1e-3 * float(np.linalg.norm(g0))
        self.meta = {"solver": "ann" if cfg.adaptive else "nn", "K": cfg.K, "eps": cfg.eps,
                     "alpha0": cfg.alpha0, "tol": self.tol}

    def initialize(self) -> NnState:
        z = np.zeros_like(self.y0)
        return NnState(t=0, y=self.y0.copy(), alpha=self.cfg.alpha0, g=z, d=z)

    def step(self, state: NnState, net: Network) -> NnState:
        return nn_step(state, self.P, self.cfg, net, self.board, self.tol)


class DgdSolver(_PenaltySolverBase):
    """Decentralized gradient descent on the penalized objective."""

    def __init__(self, P: PenaltyObjective, eps: float, y0=None,
                 reference: ReferenceCache | None = None):
        super().__init__(P, y0, reference)
        if not eps > 0:
            raise ValueError(f"eps must be positive, got {eps}")
        self.eps = eps
        self.meta = {"solver": "dgd", "eps": eps, "alpha0": P.alpha}

    def initialize(self) -> NnState:
        z = np.zeros_like(self.y0)
        return NnState(t=0, y=self.y0.copy(), alpha=self.P.alpha, g=z, d=z)

    def step(self, state: NnState, net: Network) -> NnState:
        return dgd_step(state, self.P, self.eps, net)
