"""Edge-based decentralized ADMM: exact (DADMM), linearized (DLM), quadratic (DQM).

Starting from ``alpha_0 = -beta_0`` in the column space of ``E_o`` and
``z_0 = E_u x_0 / 2``, all three methods reduce to node-local updates of
``x`` and ``phi = E_o^T alpha``. The edge multipliers ``alpha`` and
auxiliary ``z`` (one block per directed edge, owned by the source node) are
kept only for the energy diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .objective import CurvatureConstants, global_minimizer
from .simharness import MessageLedger, Network
from .topology import IncidenceSet, Topology, build_incidence

__all__ = [
    "AdmmConfig",
    "AdmmState",
    "AdmmReference",
    "EnergyReport",
    "InnerSolveError",
    "BipartiteTopologyError",
    "initial_state",
    "admm_reference",
    "dqm_step",
    "dlm_step",
    "dadmm_step",
    "full_admm_step",
    "energy_report",
    "energy",
    "limit_delta",
    "AdmmSolver",
]

VARIANTS = ("dadmm", "dlm", "dqm")


_ROUNDOFF = 16 * np.finfo(float).eps


class InnerSolveError(RuntimeError):
    pass


class BipartiteTopologyError(ValueError):
    pass


@dataclass(frozen=True)
class AdmmConfig:
    c: float
    variant: str = "dqm"
    rho_lin: float | None = None
    inner_tol: float = 1e-12
    inner_max_iter: int = 100

    def __post_init__(self) -> None:
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.variant == "dlm" and not (self.rho_lin is not None and self.rho_lin > 0):
            raise ValueError("dlm needs rho_lin > 0")


@dataclass
class AdmmState:
    """Iterates of the reduced ADMM recursion.

    Shapes: ``x`` and ``phi`` are ``(n, p)``; ``z`` and ``alpha_mult`` are
    ``(m, p)`` in directed-edge order. ``beta = -alpha_mult`` is implicit.
    """

    k: int
    x: np.ndarray
    z: np.ndarray
    alpha_mult: np.ndarray
    phi: np.ndarray
    prev_x: np.ndarray | None = None

    def multipliers(self) -> np.ndarray:
        """Full stacked ``lambda = [alpha; beta]`` as a flat ``2mp`` vector."""
        a = self.alpha_mult.ravel()
        return np.concatenate([a, -a])


def initial_state(inc: IncidenceSet, x0=None, phi0=None) -> AdmmState:
    """State satisfying the reduced-form start conditions.

    ``alpha_0`` is the minimum-norm solution of ``E_o^T alpha = phi_0``;
    ``phi_0`` must therefore sum to zero across nodes.
    """
    top = inc.topology
    n, m, p = top.n, top.m, inc.p
    x0 = np.zeros((n, p)) if x0 is None else np.asarray(x0, dtype=float).reshape(n, p)
    phi0 = np.zeros((n, p)) if phi0 is None else np.asarray(phi0, dtype=float).reshape(n, p)
    a0, *_ = np.linalg.lstsq(inc.E_o.T, phi0.ravel(), rcond=None)
    if np.linalg.norm(inc.E_o.T @ a0 - phi0.ravel()) > 1e-9 * max(1.0, np.linalg.norm(phi0)):
        raise ValueError("phi0 is not in the range of E_o^T (node blocks must sum to zero)")
    z0 = 0.5 * (inc.E_u @ x0.ravel())
    return AdmmState(k=0, x=x0.copy(), z=z0.reshape(m, p), alpha_mult=a0.reshape(m, p),
                     phi=phi0.copy())


@dataclass(frozen=True)
class AdmmReference:
    """Saddle point ``(x*, z*, alpha*)`` with ``alpha*`` in the column space of ``E_o``."""

    x_star: np.ndarray
    z_star: np.ndarray
    alpha_star: np.ndarray
    x_tilde: np.ndarray


def admm_reference(inc: IncidenceSet, locals_, tol: float = 1e-12) -> AdmmReference:
    x_tilde = global_minimizer(locals_, tol)
    top = inc.topology
    n, m, p = top.n, top.m, inc.p
    x_star = np.tile(x_tilde, (n, 1))
    grad = np.concatenate([o.gradient(x_tilde) for o in locals_])
    a_star = np.linalg.pinv(inc.E_o.T) @ (-grad)
    z_star = 0.5 * (inc.E_u @ x_star.ravel())
    return AdmmReference(x_star, z_star.reshape(m, p), a_star.reshape(m, p), x_tilde)


def _dadmm_local(f, x_start, lin, quad, tol, max_iter):
    """Minimize ``f(x) + lin^T x + quad * ||x||^2`` by damped Newton."""

    def obj(v):
        return f.value(v) + lin @ v + quad * (v @ v)

    x = np.array(x_start, dtype=float)
    p = x.size
    for _ in range(max_iter):
        g = f.gradient(x) + lin + 2.0 * quad * x
        if np.linalg.norm(g) <= tol:
            return x
        H = f.hessian(x) + 2.0 * quad * np.eye(p)
        step = -np.linalg.solve(H, g)
        if getattr(f, "kind", None) == "quadratic":
            return x + step
        if np.linalg.norm(step) <= _ROUNDOFF * max(1.0, float(np.linalg.norm(x))):
            return x + step
        f0, slope, t = obj(x), float(g @ step), 1.0
        slack = _ROUNDOFF * max(1.0, abs(f0))
        while obj(x + t * step) > f0 + 1e-4 * t * slope + slack and t > 1e-12:
            t *= 0.5
        x = x + t * step
    g = f.gradient(x) + lin + 2.0 * quad * x
    if np.linalg.norm(g) <= tol * 10:
        return x
    raise InnerSolveError(
        f"inner Newton did not reach {tol:g} in {max_iter} steps (|g| = {np.linalg.norm(g):.3e})"
    )


def _admm_step(state: AdmmState, top: Topology, locals_, cfg: AdmmConfig, net: Network) -> AdmmState:
    c = cfg.c
    n, p = state.x.shape
    deg = top.degrees
    order = net.order
    I = np.eye(p)

    views = net.exchange(state.x)
    x_new = np.empty_like(state.x)
    for i in order:
        v = views[i]
        xi, f, di = v.own, locals_[i], deg[i]
        nbr_sum = np.zeros(p)
        for j in top.neighbors(i):
            nbr_sum = nbr_sum + v[j]
        if cfg.variant == "dqm":
            Hi = f.hessian(xi)
            rhs = c * di * xi + c * nbr_sum + Hi @ xi - f.gradient(xi) - state.phi[i]
            x_new[i] = np.linalg.solve(2 * c * di * I + Hi, rhs)
        elif cfg.variant == "dlm":
            r = cfg.rho_lin
            rhs = (c * di + r) * xi + c * nbr_sum - f.gradient(xi) - state.phi[i]
            x_new[i] = rhs / (2 * c * di + r)
        else:
            lin = state.phi[i] - c * (di * xi + nbr_sum)
            x_new[i] = _dadmm_local(f, xi, lin, c * di, cfg.inner_tol, cfg.inner_max_iter)

    views = net.exchange(x_new)
    phi = np.empty_like(state.phi)
    z = np.empty_like(state.z)
    a = np.empty_like(state.alpha_mult)
    for i in order:
        v = views[i]
        diff = np.zeros(p)
        for j in top.neighbors(i):
            diff = diff + (v.own - v[j])
        phi[i] = state.phi[i] + c * diff
    # Edge (i, j) belongs to its source i, which now holds x_i and x_j.
    for e, (i, j) in enumerate(top.directed_edges):
        v = views[i]
        a[e] = state.alpha_mult[e] + 0.5 * c * (v.own - v[j])
        z[e] = 0.5 * (v.own + v[j])
    return AdmmState(k=state.k + 1, x=x_new, z=z, alpha_mult=a, phi=phi, prev_x=state.x)


def _require(cfg: AdmmConfig, variant: str) -> None:
    if cfg.variant != variant:
        raise ValueError(f"{variant}_step called with variant {cfg.variant!r}")


def dqm_step(state: AdmmState, inc: IncidenceSet, locals_, cfg: AdmmConfig,
             net: Network | None = None) -> AdmmState:
    """DQM: minimize the second-order model of each ``f_i`` plus the augmented terms.

    Two exchanges per iteration: ``x_k`` for the primal update and
    ``x_{k+1}`` for the dual update.
    """
    _require(cfg, "dqm")
    return _admm_step(state, inc.topology, locals_, cfg, net or Network(inc.topology))


def dlm_step(state: AdmmState, inc: IncidenceSet, locals_, cfg: AdmmConfig,
             net: Network | None = None) -> AdmmState:
    """DLM: linearized ``f`` with proximal coefficient ``cfg.rho_lin``."""
    _require(cfg, "dlm")
    return _admm_step(state, inc.topology, locals_, cfg, net or Network(inc.topology))


def dadmm_step(state: AdmmState, inc: IncidenceSet, locals_, cfg: AdmmConfig,
               net: Network | None = None) -> AdmmState:
    """DADMM: exact local minimization, damped Newton to ``cfg.inner_tol``."""
    _require(cfg, "dadmm")
    return _admm_step(state, inc.topology, locals_, cfg, net or Network(inc.topology))


def full_admm_step(x, z, lam, inc: IncidenceSet, locals_, cfg: AdmmConfig):
    """Dense reference step on the stacked ``(x, z, lambda)`` formulation.

    Solves the x-subproblem from its first-order condition with the full
    matrices ``A = [A_s; A_d]`` and ``B = [-I; -I]``, then the closed-form
    z-update and the multiplier ascent. Used to certify the reduced updates.
    """
    p = inc.p
    A, Bm = inc.A, inc.B_admm
    c = cfg.c
    x = np.asarray(x, dtype=float).ravel()
    n = x.size // p
    blocks = [x[i * p:(i + 1) * p] for i in range(n)]
    grad = np.concatenate([o.gradient(b) for o, b in zip(locals_, blocks)])
    H = np.zeros((n * p, n * p))
    for i, (o, b) in enumerate(zip(locals_, blocks)):
        H[i * p:(i + 1) * p, i * p:(i + 1) * p] = o.hessian(b)
    base = A.T @ lam + c * A.T @ (Bm @ z)
    AtA = A.T @ A
    if cfg.variant == "dqm":
        x_new = np.linalg.solve(H + c * AtA, H @ x - grad - base)
    elif cfg.variant == "dlm":
        r = cfg.rho_lin
        x_new = np.linalg.solve(r * np.eye(n * p) + c * AtA, r * x - grad - base)
    else:
        x_new = x.copy()
        for _ in range(cfg.inner_max_iter):
            xb = [x_new[i * p:(i + 1) * p] for i in range(n)]
            g = np.concatenate([o.gradient(b) for o, b in zip(locals_, xb)]) + base + c * AtA @ x_new
            if np.linalg.norm(g) <= cfg.inner_tol:
                break
            Hn = np.zeros_like(H)
            for i, (o, b) in enumerate(zip(locals_, xb)):
                Hn[i * p:(i + 1) * p, i * p:(i + 1) * p] = o.hessian(b)
            x_new = x_new - np.linalg.solve(Hn + c * AtA, g)
    mp = z.size
    alpha, beta = lam[:mp], lam[mp:]
    z_new = 0.5 * (inc.E_u @ x_new) + (alpha + beta) / (2 * c)
    lam_new = lam + c * (A @ x_new + Bm @ z_new)
    return x_new, z_new, lam_new


def energy(state: AdmmState, ref: AdmmReference, c: float) -> float:
    """``V = c ||z - z*||^2 + ||alpha - alpha*||^2 / c``."""
    dz = state.z - ref.z_star
    da = state.alpha_mult - ref.alpha_star
    return float(c * np.sum(dz * dz) + np.sum(da * da) / c)


def limit_delta(inc: IncidenceSet, consts: CurvatureConstants, c: float, mu: float) -> float:
    """Contraction coefficient approached as the step lengths vanish."""
    go2, Gu2 = inc.gamma_o**2, inc.Gamma_u**2
    first = (mu - 1.0) * go2 / (mu * Gu2)
    second = consts.m / (c / 4.0 * Gu2 + mu / c * consts.M**2 / go2)
    return min(first, second)


@dataclass(frozen=True)
class EnergyReport:
    V: float
    zeta_k: float | None
    delta_k: float | None
    eta: float | None
    limit_delta: float
    hypotheses_ok: bool


def _delta_k(inc, consts, c, zeta, eta, mu, mu_p):
    gu2, Gu2, go2 = inc.gamma_u**2, inc.Gamma_u**2, inc.gamma_o**2
    num1 = c - eta * zeta / gu2
    den1 = (4 * mu_p * mu * zeta**2 / (c * (mu_p - 1) * (mu - 1))) / (gu2 * go2) \
        + mu_p * mu / (mu - 1) * Gu2 / go2
    num2 = consts.m - (zeta / eta if zeta > 0 else 0.0)
    den2 = c / 4 * Gu2 + mu / c * consts.M**2 / go2
    return min(num1 / den1, num2 / den2)


def energy_report(state: AdmmState, reference: AdmmReference, inc: IncidenceSet,
                  consts: CurvatureConstants, cfg: AdmmConfig, mu: float = 2.0,
                  mu_prime: float = 2.0, eta: float | None = None) -> EnergyReport:
    """Energy ``V_k`` and the per-step contraction coefficient ``delta_k``.

    ``zeta_k = min{L/2 ||x_{k+1} - x_k||, 2M}`` uses ``state.prev_x``; for
    the initial state only ``V`` is filled. ``eta`` defaults to the midpoint
    of ``(zeta/m, c gamma_u^2 / zeta)`` (any positive value when ``zeta = 0``).
    """
    if inc.gamma_u <= 0:
        raise BipartiteTopologyError(
            "energy contraction diagnostics require a non-bipartite topology (gamma_u = 0)"
        )
    if not (mu > 1 and mu_prime > 1):
        raise ValueError("mu and mu_prime must exceed 1")
    c = cfg.c
    V = energy(state, reference, c)
    lim = limit_delta(inc, consts, c, mu)
    if state.prev_x is None:
        return EnergyReport(V, None, None, None, lim, True)
    step = float(np.linalg.norm(state.x - state.prev_x))
    zeta = min(consts.L / 2.0 * step, 2.0 * consts.M)
    gu2 = inc.gamma_u**2
    hyp = c > zeta**2 / (consts.m * gu2)
    if zeta > 0:
        lo, hi = zeta / consts.m, c * gu2 / zeta
        if eta is None:
            eta = 0.5 * (lo + hi)
        elif not lo < eta < hi:
            raise ValueError(f"eta={eta} outside admissible interval ({lo:.4g}, {hi:.4g})")
    elif eta is None:
        eta = 1.0
    elif not eta > 0:
        raise ValueError("eta must be positive")
    delta = _delta_k(inc, consts, c, zeta, eta, mu, mu_prime)
    return EnergyReport(V, zeta, delta, eta, lim, bool(hyp))


class AdmmSolver:
    """Harness adapter for DADMM, DLM and DQM.

    Records relative error against the stacked consensus optimum, the KKT
    residual ``||grad f(x) + phi||`` as ``grad_norm``, and the energy ``V``.
    """

    def __init__(self, top: Topology, locals_, cfg: AdmmConfig, x0=None, phi0=None,
                 reference: AdmmReference | None = None):
        self.topology = top
        self.locals = tuple(locals_)
        self.cfg = cfg
        p = self.locals[0].p
        self.inc = build_incidence(top, p)
        self.x0, self.phi0 = x0, phi0
        self.reference = reference if reference is not None else admm_reference(self.inc, self.locals)
        self.f_star = sum(o.value(self.reference.x_tilde) for o in self.locals)
        start = initial_state(self.inc, x0, phi0)
        self._den = float(np.linalg.norm(start.x - self.reference.x_star))
        self.meta = {"solver": cfg.variant, "c": cfg.c, "rho_lin": cfg.rho_lin}

    def initialize(self) -> AdmmState:
        return initial_state(self.inc, self.x0, self.phi0)

    def step(self, state: AdmmState, net: Network) -> AdmmState:
        return _admm_step(state, self.topology, self.locals, self.cfg, net)

    def record(self, state: AdmmState, ledger: MessageLedger) -> dict:
        F = sum(o.value(state.x[i]) for i, o in enumerate(self.locals))
        resid = np.array([o.gradient(state.x[i]) for i, o in enumerate(self.locals)]) + state.phi
        num = float(np.linalg.norm(state.x - self.reference.x_star))
        return {
            "t": state.k,
            "alpha": math.nan,
            "F": F,
            "F_gap": F - self.f_star,
            "grad_norm": float(np.linalg.norm(resid)),
            "weighted_grad_norm_prev_D": math.nan,
            "weighted_grad_norm_D": math.nan,
            "rel_err": num / self._den if self._den > 0 else num,
            "energy": energy(state, self.reference, self.cfg.c),
            "msgs_cum": ledger.total,
            "vector_msgs": ledger.vector_msgs,
            "signal_msgs": ledger.signal_msgs,
        }

