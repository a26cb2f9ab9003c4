"""Numerical certificates for the NN-K spectral bounds and rate claims.

Every measured quantity comes from a dense symmetric eigendecomposition of
an explicitly assembled matrix. Matrix square roots and inverse square roots
go through the same primitive. Intended for desk-scale problems
(``n * p <= 500``).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .netnewton import assemble_splitting, series_constants
from .objective import CurvatureConstants, PenaltyObjective, centralized_reference
from .topology import check_weight_bounds

__all__ = [
    "DESK_CAP",
    "BoundCheck",
    "SpectralReport",
    "RateConstants",
    "Theorem1Check",
    "Lemma3Row",
    "RateReport",
    "sym_eig",
    "sym_power",
    "certify_splitting",
    "rate_constants",
    "check_theorem1",
    "check_lemma3_theorem2",
    "alpha_gap_study",
    "AlphaGapStudy",
    "fitted_linear_rate",
    "gradient_noise_floor",
]

DESK_CAP = 500
SLACK = 1e-8


def sym_eig(M: np.ndarray):
    """Eigenvalues (ascending) and eigenvectors of the symmetric part of ``M``."""
    return np.linalg.eigh(0.5 * (M + M.T))


def sym_power(M: np.ndarray, power: float) -> np.ndarray:
    """``M^power`` for symmetric positive definite ``M``."""
    w, V = sym_eig(M)
    if w[0] <= 0:
        raise np.linalg.LinAlgError(f"matrix is not positive definite (min eig {w[0]:.3e})")
    return (V * w**power) @ V.T


@dataclass(frozen=True)
class BoundCheck:
    """One-sided comparison ``measured >= theoretical`` (kind 'lower') or ``<=`` ('upper')."""

    name: str
    kind: str
    theoretical: float
    measured: float
    tol: float

    @property
    def slack(self) -> float:
        if self.kind == "lower":
            return self.measured - self.theoretical
        return self.theoretical - self.measured

    @property
    def passed(self) -> bool:
        return self.slack >= -self.tol

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "theoretical": self.theoretical,
            "measured": self.measured,
            "slack": self.slack,
            "pass": self.passed,
        }


@dataclass
class SpectralReport:
    """Measured eigenvalue extremes against their theoretical bounds."""

    K: int
    alpha: float
    rho: float
    rho_unit_m: float
    lam: float
    Lam: float
    extremes: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "alpha": self.alpha,
            "rho": self.rho,
            "rho_unit_m": self.rho_unit_m,
            "lambda": self.lam,
            "Lambda": self.Lam,
            "extremes": {k: list(v) for k, v in self.extremes.items()},
            "bounds": [c.to_dict() for c in self.checks],
            "pass": self.passed,
        }


def _pair(name, eigs, low, high, checks, extremes):
    lo, hi = float(eigs[0]), float(eigs[-1])
    tol = SLACK * max(1.0, float(np.max(np.abs(eigs))))
    extremes[name] = (lo, hi)
    if low is not None:
        checks.append(BoundCheck(f"{name}_min", "lower", low, lo, tol))
    if high is not None:
        checks.append(BoundCheck(f"{name}_max", "upper", high, hi, tol))


def certify_splitting(P: PenaltyObjective, y, K: int,
                      consts: CurvatureConstants | None = None) -> SpectralReport:
    """Assemble ``H``, ``D``, ``B`` at ``y`` and check all eigenvalue bounds.

    Checks, with ``a = 2 (1 - delta)``::

        alpha m               <= eig(H)                 <= a + alpha M
        2 (1 - Delta) + alpha m <= eig(D)               <= a + alpha M
        0                     <= eig(B)                 <= a
        0                     <= eig(D^-1/2 B D^-1/2)   <= rho
        0                     <= eig(E)                 <= rho^(K+1)
        lam                   <= eig(approx H^-1)       <= Lam

    ``E = I - R H R`` with ``R`` the PD square root of the truncated-series
    inverse.
    """
    n, p = P.n, P.p
    if n * p > DESK_CAP:
        raise ValueError(
            f"dense certification is capped at n*p <= {DESK_CAP} (got {n * p}); "
            "certify a sampled sub-instance instead"
        )
    consts = consts if consts is not None else P.constants()
    W = P.weights
    a = 2.0 * (1.0 - W.delta)
    alpha = P.alpha
    sc = series_constants(consts, W, alpha, K)

    H = P.hessian(y)
    D, B = assemble_splitting(P, y)
    d_eig, d_vec = sym_eig(D)
    if d_eig[0] <= 0:
        raise np.linalg.LinAlgError(f"D is not positive definite (min eig {d_eig[0]:.3e})")
    D_mhalf = (d_vec / np.sqrt(d_eig)) @ d_vec.T
    S = D_mhalf @ B @ D_mhalf
    S = 0.5 * (S + S.T)
    series = np.eye(n * p)
    term = np.eye(n * p)
    for _ in range(K):
        term = term @ S
        series = series + term
    H_inv_hat = D_mhalf @ series @ D_mhalf
    H_inv_hat = 0.5 * (H_inv_hat + H_inv_hat.T)
    R = sym_power(H_inv_hat, 0.5)
    E = np.eye(n * p) - R @ H @ R

    checks: list = []
    ext: dict = {}
    _pair("H", sym_eig(H)[0], alpha * consts.m, a + alpha * consts.M, checks, ext)
    _pair("D", d_eig, 2.0 * (1.0 - W.Delta) + alpha * consts.m, a + alpha * consts.M, checks, ext)
    _pair("B", sym_eig(B)[0], 0.0, a, checks, ext)
    _pair("DBD", sym_eig(S)[0], 0.0, sc.rho, checks, ext)
    _pair("E", sym_eig(E)[0], 0.0, sc.rho ** (K + 1), checks, ext)
    _pair("H_inv_hat", sym_eig(H_inv_hat)[0], sc.lam, sc.Lam, checks, ext)
    return SpectralReport(K=K, alpha=alpha, rho=sc.rho, rho_unit_m=sc.rho_unit_m,
                          lam=sc.lam, Lam=sc.Lam, extremes=ext, checks=checks)


@dataclass(frozen=True)
class RateConstants:
    zeta: float
    Gamma1: float
    Gamma2: float

    @property
    def status(self) -> str:
        return "ok" if 0.0 < self.zeta < 1.0 else "warning: zeta outside (0,1); stepsize rule not met"


def rate_constants(consts: CurvatureConstants, P: PenaltyObjective, lam: float, Lam: float,
                   eps: float, F0_gap: float) -> RateConstants:
    """Linear-rate constant ``zeta`` and the recursion coefficients ``Gamma1``, ``Gamma2``."""
    alpha, m, L = P.alpha, consts.m, consts.L
    low = 2.0 * (1.0 - P.weights.Delta) + alpha * m
    root_gap = math.sqrt(max(F0_gap, 0.0))
    zeta = (2.0 - eps) * eps * alpha * m * lam - alpha * eps**3 * L * Lam**3 * root_gap / (
        6.0 * lam**1.5
    )
    gamma1 = math.sqrt(alpha * eps * L * Lam) * max(F0_gap, 0.0) ** 0.25 / (lam**0.75 * low)
    gamma2 = alpha * L * Lam**2 / (2.0 * lam * math.sqrt(low))
    return RateConstants(zeta=zeta, Gamma1=gamma1, Gamma2=gamma2)


@dataclass(frozen=True)
class Theorem1Check:
    passed: bool
    worst_iteration: int
    worst_ratio: float
    violations: tuple = ()


def check_theorem1(F_values: Sequence[float], zeta: float, F_star: float,
                   rtol: float = 1e-9) -> Theorem1Check:
    """Check ``F_t - F* <= (1 - zeta)^t (F_0 - F*)`` along a trace.

    The comparison carries the relative factor ``1 + rtol`` plus an absolute
    allowance of 64 ulps of ``|F*|``, the resolution of the difference
    ``F_t - F*`` in double precision.
    """
    F = np.asarray(F_values, dtype=float)
    gaps = F - F_star
    floor = 64 * np.finfo(float).eps * max(1.0, abs(F_star))
    base = max(1.0 - zeta, 0.0)
    worst_t, worst = 0, -math.inf
    bad = []
    for t, gap in enumerate(gaps):
        env = base**t * gaps[0]
        ratio = (gap - floor) / env if env > 0 else (0.0 if gap <= floor else math.inf)
        if ratio > worst:
            worst_t, worst = t, ratio
        if gap > env * (1.0 + rtol) + floor:
            bad.append(t)
    return Theorem1Check(passed=not bad, worst_iteration=worst_t, worst_ratio=float(worst),
                         violations=tuple(bad))


@dataclass(frozen=True)
class Lemma3Row:
    t: int
    norm_t: float
    norm_next: float
    eta: float
    bound: float
    holds: bool
    in_interval: bool
    quad_bound: float | None
    quad_holds: bool | None


@dataclass
class RateReport:
    zeta: float
    Gamma1: float
    Gamma2: float
    t0: int | None
    rows: list
    status: str
    fitted_rate: float | None = None

    @property
    def lemma3_holds(self) -> bool:
        return all(r.holds for r in self.rows)

    @property
    def flagged(self) -> list:
        return [r for r in self.rows if r.in_interval]

    @property
    def quadratic_phase_holds(self) -> bool:
        return all(r.quad_holds for r in self.flagged)

    def to_dict(self) -> dict:
        return {
            "zeta": self.zeta,
            "Gamma1": self.Gamma1,
            "Gamma2": self.Gamma2,
            "t0": self.t0,
            "status": self.status,
            "fitted_rate": self.fitted_rate,
            "lemma3_holds": self.lemma3_holds,
            "flagged_iterations": [r.t for r in self.flagged],
            "quadratic_phase_holds": self.quadratic_phase_holds,
            "rows": [asdict(r) for r in self.rows],
        }


def check_lemma3_theorem2(weighted_norms: Sequence[float], Gamma1: float, Gamma2: float,
                          eps: float, zeta: float, K: int, rho: float,
                          rtol: float = 1e-9, floor: float = 0.0) -> RateReport:
    """Verify the weighted-gradient recursion and its quadratic phase.

    ``weighted_norms[t]`` is ``||D_{t-1}^{-1/2} g_t||`` (index 0 uses
    ``D_0``). For every ``t`` with a successor::

        a_{t+1} <= eta_t a_t + eps^2 Gamma2 a_t^2,
        eta_t = (1 - eps + eps rho^(K+1)) (1 + Gamma1 (1 - zeta)^((t-1)/4)),

    and where ``sqrt(eta)(1 - sqrt(eta)) / (eps^2 Gamma2) <= a_t <
    (1 - sqrt(eta)) / (eps^2 Gamma2)`` the quadratic bound
    ``a_{t+1} <= eps^2 Gamma2 / (1 - sqrt(eta)) a_t^2`` is asserted as well.
    Both comparisons allow a relative ``rtol`` and an absolute ``floor``,
    the resolution at which ``a_{t+1}`` can be evaluated (see
    :func:`gradient_noise_floor`).
    """
    a = np.asarray(weighted_norms, dtype=float)
    lin = 1.0 - eps + eps * rho ** (K + 1)
    base = max(1.0 - zeta, 0.0)
    e2g = eps**2 * Gamma2
    rows = []
    t0 = None
    for t in range(len(a) - 1):
        decay = base ** ((t - 1) / 4.0) if base > 0 else (0.0 if t > 1 else 1.0)
        eta = lin * (1.0 + Gamma1 * decay)
        if t0 is None and eta < 1.0:
            t0 = t
        bound = eta * a[t] + e2g * a[t] ** 2
        holds = bool(a[t + 1] <= bound * (1 + rtol) + floor)
        in_int, qb, qh = False, None, None
        if e2g > 0 and eta < 1.0:
            s = math.sqrt(eta)
            lo, hi = s * (1 - s) / e2g, (1 - s) / e2g
            if lo <= a[t] < hi:
                in_int = True
                qb = e2g / (1 - s) * a[t] ** 2
                qh = bool(a[t + 1] <= qb * (1 + rtol) + floor)
        rows.append(Lemma3Row(t, float(a[t]), float(a[t + 1]), eta, bound, holds, in_int, qb, qh))
    status = "ok"
    if Gamma2 == 0:
        status = "quadratic phase vacuous; linear contraction by rho^(K+1) applies instead"
    elif not 0 < zeta < 1:
        status = "warning: zeta outside (0,1)"
    return RateReport(zeta=zeta, Gamma1=Gamma1, Gamma2=Gamma2, t0=t0, rows=rows, status=status,
                      fitted_rate=fitted_linear_rate(a))


def gradient_noise_floor(P: PenaltyObjective, y, factor: float = 256.0) -> float:
    """Rounding-error scale of ``||D^{-1/2} g||`` evaluated at ``y``.

    The penalized gradient is a difference of terms of size
    ``||y_i|| + sum_j w_ij ||y_j|| + alpha ||grad f_i(y_i)||``; its absolute
    error is a few ulps of that, divided by the smallest possible ``sqrt(D)``.
    """
    Y = P.as_blocks(y)
    W = P.weights.W
    norms = np.linalg.norm(Y, axis=1)
    terms = norms + np.abs(W) @ norms + P.alpha * np.array(
        [np.linalg.norm(f.gradient(Y[i])) for i, f in enumerate(P.locals)]
    )
    d_min = 2.0 * (1.0 - P.weights.Delta) + P.alpha * P.constants().m
    return float(factor * np.finfo(float).eps * np.linalg.norm(terms) / math.sqrt(d_min))


def fitted_linear_rate(values: Sequence[float], floor_ratio: float = 1e-13) -> float | None:
    """Per-iteration factor from a least-squares fit of ``log(values)`` against ``t``.

    Entries below ``floor_ratio * values[0]`` are dropped as roundoff.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 2 or not v[0] > 0:
        return None
    keep = np.isfinite(v) & (v > floor_ratio * v[0])
    t = np.arange(v.size)[keep]
    if t.size < 2:
        return None
    slope = np.polyfit(t, np.log(v[keep]), 1)[0]
    return float(math.exp(slope))


@dataclass
class AlphaGapStudy:
    rho_W: float
    rows: list  # (alpha, gap, gap * (1 - rho_W) / alpha)

    def spread(self, alphas: Sequence[float] | None = None) -> float:
        """``max / min`` of the scaled gap over ``alphas`` (default: smaller half of the grid)."""
        rows = sorted(self.rows, key=lambda r: r[0])
        if alphas is None:
            rows = rows[: max(2, (len(rows) + 1) // 2)]
        else:
            wanted = set(alphas)
            rows = [r for r in rows if r[0] in wanted]
        ratios = [r[2] for r in rows]
        return max(ratios) / min(ratios)

    def bounded(self, factor: float = 10.0, alphas=None) -> bool:
        return self.spread(alphas) <= factor


def alpha_gap_study(P: PenaltyObjective, alphas: Sequence[float], x_tilde=None,
                    tol: float = 1e-10) -> AlphaGapStudy:
    """Distance between ``y*(alpha)`` and the stacked consensus optimum over a grid."""
    if not alphas:
        raise ValueError("alpha grid is empty")
    if any(a <= 0 for a in alphas):
        raise ValueError("alpha values must be positive")
    _, _, rho_w = check_weight_bounds(P.weights)
    rows = []
    for a in alphas:
        y_star, _, xt = centralized_reference(P.with_alpha(a), tol)
        if x_tilde is None:
            x_tilde = xt
        gap = float(np.linalg.norm(y_star - np.broadcast_to(x_tilde, y_star.shape)))
        rows.append((float(a), gap, gap * (1.0 - rho_w) / a))
    return AlphaGapStudy(rho_W=rho_w, rows=rows)
