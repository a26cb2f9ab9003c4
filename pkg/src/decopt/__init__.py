"""Decentralized second-order consensus optimization on simulated networks.

Solvers: Network Newton-K (fixed and adaptive penalty), decentralized
gradient descent, and the edge-based ADMM family (exact, linearized,
quadratically approximated). Diagnostics in :mod:`decopt.spectral` certify
eigenvalue bounds and convergence-rate envelopes numerically.
"""

from .dqm import AdmmConfig, AdmmSolver, admm_reference, energy_report
from .netnewton import DgdSolver, NetworkNewtonSolver, NnConfig, theorem1_stepsize
from .objective import (
    LogisticObjective,
    PenaltyObjective,
    QuadraticObjective,
    centralized_reference,
    random_quadratics,
    synthetic_logistic,
)
from .simharness import LocalityViolation, MessageLedger, StopCriteria, run
from .spectral import certify_splitting, check_theorem1, rate_constants
from .topology import (
    build_incidence,
    build_random_topology,
    check_weight_bounds,
    metropolis_weights,
    path_topology,
)

__version__ = "0.1.0"

__all__ = [
    "AdmmConfig",
    "AdmmSolver",
    "DgdSolver",
    "LocalityViolation",
    "LogisticObjective",
    "MessageLedger",
    "NetworkNewtonSolver",
    "NnConfig",
    "PenaltyObjective",
    "QuadraticObjective",
    "StopCriteria",
    "admm_reference",
    "build_incidence",
    "build_random_topology",
    "centralized_reference",
    "certify_splitting",
    "check_theorem1",
    "check_weight_bounds",
    "energy_report",
    "metropolis_weights",
    "path_topology",
    "random_quadratics",
    "rate_constants",
    "run",
    "synthetic_logistic",
    "theorem1_stepsize",
]
