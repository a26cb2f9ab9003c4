"""Synchronous round-based execution with neighbor-only message delivery.

Solvers never index global state during a round. Each exchange hands every
node a :class:`NodeView` holding the payloads its neighbors sent; reading
any other index raises :class:`LocalityViolation`. Every payload crossing a
directed edge is charged to a :class:`MessageLedger`.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Any, Callable, Protocol, Sequence

import numpy as np

from .topology import Topology

__all__ = [
    "LocalityViolation",
    "NodeView",
    "MessageLedger",
    "Network",
    "StopCriteria",
    "ConvergenceTrace",
    "Solver",
    "run",
    "locality_probe",
]


class LocalityViolation(RuntimeError):
    """A node read a payload it never received."""

    def __init__(self, node: int, round_: int, index: Any):
        self.node = node
        self.round = round_
        self.index = index
        super().__init__(
            f"locality violation: node {node} read index {index!r} in round {round_}, "
            "which is not one of its neighbors"
        )


class NodeView(Mapping):
    """What node ``i`` may see in one round: its own payload and its neighbors'."""

    __slots__ = ("node", "round", "own", "_payloads")

    def __init__(self, node: int, round_: int, own, payloads: dict):
        self.node = node
        self.round = round_
        self.own = own
        self._payloads = payloads

    def __getitem__(self, j):
        try:
            return self._payloads[j]
        except (KeyError, TypeError):
            raise LocalityViolation(self.node, self.round, j) from None

    def __iter__(self):
        return iter(self._payloads)

    def __len__(self) -> int:
        return len(self._payloads)


@dataclass
class MessageLedger:
    """Per-round and cumulative message counts.

    ``vector_msgs`` counts p-vector payloads over directed edges;
    ``signal_msgs`` counts scalar broadcast messages.
    """

    vector_msgs: int = 0
    signal_msgs: int = 0
    per_round: list = field(default_factory=list)

    def charge(self, vector: int = 0, signal: int = 0) -> None:
        self.vector_msgs += vector
        self.signal_msgs += signal
        self.per_round.append((vector, signal))

    @property
    def total(self) -> int:
        return self.vector_msgs + self.signal_msgs


class Network:
    """Barrier-synchronized message transport over a fixed topology.

    Parameters
    ----------
    topology : Topology
    ledger : MessageLedger, optional
    order : sequence of int, optional
        Order in which solvers visit nodes inside a round. Results must not
        depend on it; tests permute it to check that.
    """

    def __init__(self, topology: Topology, ledger: MessageLedger | None = None,
                 order: Sequence[int] | None = None):
        self.topology = topology
        self.ledger = ledger if ledger is not None else MessageLedger()
        if order is None:
            order = range(topology.n)
        order = tuple(int(i) for i in order)
        if sorted(order) != list(range(topology.n)):
            raise ValueError("order must be a permutation of the nodes")
        self.order = order
        self.round = 0

    @property
    def n(self) -> int:
        return self.topology.n

    def exchange(self, payloads: Sequence) -> list[NodeView]:
        """Send each node's payload to all of its neighbors; one round."""
        if len(payloads) != self.n:
            raise ValueError(f"{len(payloads)} payloads for {self.n} nodes")
        self.round += 1
        snap = [np.array(v, dtype=float, copy=True) for v in payloads]
        for v in snap:
            v.setflags(write=False)
        views = [
            NodeView(i, self.round, snap[i], {j: snap[j] for j in self.topology.neighbors(i)})
            for i in range(self.n)
        ]
        self.ledger.charge(vector=self.topology.m)
        return views

    def broadcast(self, senders) -> frozenset:
        """Deliver a scalar signal from each sender to every other node.

        Costs ``n - 1`` signal messages per sender. Delivery completes before
        the senders' round ends.
        """
        senders = frozenset(int(s) for s in senders)
        if senders:
            self.ledger.signal_msgs += (self.n - 1) * len(senders)
            if self.ledger.per_round:
                v, s = self.ledger.per_round[-1]
                self.ledger.per_round[-1] = (v, s + (self.n - 1) * len(senders))
            else:
                self.ledger.per_round.append((0, (self.n - 1) * len(senders)))
        return senders


@dataclass(frozen=True)
class StopCriteria:
    max_iters: int = 1000
    grad_tol: float | None = None
    rel_err_tol: float | None = None

    def __post_init__(self) -> None:
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")


@dataclass
class ConvergenceTrace:
    """Records for the initial state and every completed iteration.

    ``len(trace)`` is the number of iterations performed.
    """

    records: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    final_state: Any = None

    def __len__(self) -> int:
        return max(len(self.records) - 1, 0)

    def column(self, name: str) -> np.ndarray:
        return np.array([r.get(name, math.nan) for r in self.records], dtype=float)

    def iterations_to(self, name: str, threshold: float) -> int | None:
        for r in self.records:
            v = r.get(name)
            if v is not None and v <= threshold:
                return int(r["t"])
        return None


class Solver(Protocol):
    topology: Topology

    def initialize(self) -> Any: ...

    def step(self, state: Any, net: Network) -> Any: ...

    def record(self, state: Any, ledger: MessageLedger) -> dict: ...


def run(solver: Solver, stop: StopCriteria, ledger: MessageLedger | None = None,
        order: Sequence[int] | None = None,
        observer: Callable[[int, Any], None] | None = None) -> ConvergenceTrace:
    """Drive ``solver`` through barrier rounds until a stop criterion fires.

    ``observer(t, state)``, if given, sees the initial state and every
    iterate; it runs outside the network and is not charged messages.
    Raises :class:`LocalityViolation` unchanged if the solver reads a
    non-neighbor payload.
    """
    net = Network(solver.topology, ledger, order)
    state = solver.initialize()
    trace = ConvergenceTrace(meta=dict(getattr(solver, "meta", {})))
    trace.records.append(solver.record(state, net.ledger))
    if observer is not None:
        observer(0, state)
    for t in range(1, stop.max_iters + 1):
        state = solver.step(state, net)
        rec = solver.record(state, net.ledger)
        if observer is not None:
            observer(t, state)
        trace.records.append(rec)
        if stop.grad_tol is not None and rec.get("grad_norm", math.inf) <= stop.grad_tol:
            break
        if stop.rel_err_tol is not None and rec.get("rel_err", math.inf) <= stop.rel_err_tol:
            break
    trace.final_state = state
    trace.meta["signal_latency"] = "same-iteration delivery (synchronous broadcast)"
    return trace


def locality_probe(solver: Solver, iterations: int = 3) -> list[LocalityViolation]:
    """Run a few iterations and report any locality violation.

    An empty list means the solver respected neighbor-only reads.
    """
    try:
        run(solver, StopCriteria(max_iters=iterations))
    except LocalityViolation as exc:
        return [exc]
    return []
