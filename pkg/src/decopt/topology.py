"""Network graphs, consensus weights and edge-incidence machinery.

Nodes are labelled ``0..n-1``. Directed edges are ordered pairs ``(i, j)``
sorted lexicographically; this ordering fixes the row order of the
source/destination incidence matrices.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Topology",
    "WeightMatrix",
    "IncidenceSet",
    "InvalidWeightsError",
    "WeightBoundsViolation",
    "build_random_topology",
    "path_topology",
    "star_topology",
    "complete_topology",
    "topology_from_edges",
    "metropolis_weights",
    "custom_weights",
    "check_weight_bounds",
    "build_incidence",
    "is_bipartite",
    "load_topology",
    "dump_topology",
]

MAX_RESAMPLE = 1000


class InvalidWeightsError(ValueError):
    """Weight matrix is not symmetric, stochastic, or respects the wrong pattern."""


class WeightBoundsViolation(ValueError):
    """Diagonal weights break ``0 <= delta <= w_ii <= Delta < 1``."""


@dataclass(frozen=True)
class Topology:
    """Undirected, connected communication graph.

    Attributes:
        n: Number of nodes.
        adjacency: Sorted neighbor tuple per node.
        directed_edges: All ordered pairs ``(i, j)`` with ``i ~ j``, lexicographic.
        seed: Seed that produced the graph (``None`` for deterministic shapes).
    """

    n: int
    adjacency: tuple[tuple[int, ...], ...]
    directed_edges: tuple[tuple[int, int], ...]
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError(f"topology needs n >= 2, got {self.n}")
        for i, nbrs in enumerate(self.adjacency):
            if i in nbrs:
                raise ValueError(f"self-loop at node {i}")
            for j in nbrs:
                if i not in self.adjacency[j]:
                    raise ValueError(f"asymmetric adjacency between {i} and {j}")
        if not _connected(self.adjacency):
            raise ValueError("topology is not connected")

    @property
    def m(self) -> int:
        """Number of directed edges (twice the undirected edge count)."""
        return len(self.directed_edges)

    @property
    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.adjacency], dtype=int)

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self.adjacency[i]

    def undirected_edges(self) -> list[tuple[int, int]]:
        return [(i, j) for i, j in self.directed_edges if i < j]

    def to_text(self) -> str:
        """Line format: header ``n m seed`` then one ``i j`` per directed edge."""
        seed = -1 if self.seed is None else self.seed
        lines = [f"{self.n} {self.m} {seed}"]
        lines += [f"{i} {j}" for i, j in self.directed_edges]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Topology":
        rows = [ln.split() for ln in text.splitlines() if ln.strip()]
        if not rows or len(rows[0]) != 3:
            raise ValueError("topology header must be 'n m seed'")
        n, m, seed = (int(v) for v in rows[0])
        edges = [(int(a), int(b)) for a, b in rows[1:]]
        if len(edges) != m:
            raise ValueError(f"header announces {m} directed edges, found {len(edges)}")
        edge_set = set(edges)
        for i, j in edges:
            if (j, i) not in edge_set:
                raise ValueError(f"edge ({i}, {j}) has no reverse ({j}, {i})")
        return topology_from_edges(n, [(i, j) for i, j in edges if i < j],
                                   seed=None if seed < 0 else seed)


def _connected(adjacency) -> bool:
    seen = {0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in adjacency[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return len(seen) == len(adjacency)


def topology_from_edges(n: int, edges, seed: int | None = None) -> Topology:
    """Build a topology from undirected edges given as pairs."""
    nbrs: list[set[int]] = [set() for _ in range(n)]
    for i, j in edges:
        if i == j:
            raise ValueError(f"self-loop at node {i}")
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"edge ({i}, {j}) out of range for n={n}")
        nbrs[i].add(j)
        nbrs[j].add(i)
    adjacency = tuple(tuple(sorted(s)) for s in nbrs)
    directed = tuple(sorted((i, j) for i in range(n) for j in adjacency[i]))
    return Topology(n=n, adjacency=adjacency, directed_edges=directed, seed=seed)


def build_random_topology(n: int, p_c: float, seed: int) -> Topology:
    """Erdos-Renyi graph conditioned on connectivity.

    Each pair ``i < j`` (lexicographic) is joined with probability ``p_c``.
    A disconnected sample is discarded and the draw repeated with
    ``seed + 1``, ``seed + 2``, ... for at most 1000 attempts.
    """
    if n < 2:
        raise ValueError(f"random topology needs n >= 2, got {n}")
    if not 0.0 < p_c <= 1.0:
        raise ValueError(f"edge probability must lie in (0, 1], got {p_c}")
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    for attempt in range(MAX_RESAMPLE):
        s = seed + attempt
        draws = np.random.default_rng(s).random(len(pairs))
        edges = [e for e, u in zip(pairs, draws) if u < p_c]
        nbrs: list[list[int]] = [[] for _ in range(n)]
        for i, j in edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        if _connected(nbrs):
            return topology_from_edges(n, edges, seed=s)
    raise RuntimeError(
        f"no connected sample for n={n}, p_c={p_c} in {MAX_RESAMPLE} attempts"
    )


def path_topology(n: int) -> Topology:
    return topology_from_edges(n, [(i, i + 1) for i in range(n - 1)])


def star_topology(n: int) -> Topology:
    """Star with center node 0."""
    return topology_from_edges(n, [(0, j) for j in range(1, n)])


def complete_topology(n: int) -> Topology:
    return topology_from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def is_bipartite(top: Topology) -> bool:
    color = {0: 0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in top.adjacency[u]:
            if v not in color:
                color[v] = 1 - color[u]
                queue.append(v)
            elif color[v] == color[u]:
                return False
    return True


def load_topology(path) -> Topology:
    return Topology.from_text(Path(path).read_text(encoding="utf-8"))


def dump_topology(top: Topology, path) -> None:
    Path(path).write_text(top.to_text(), encoding="utf-8", newline="\n")


@dataclass(frozen=True)
class WeightMatrix:
    """Symmetric doubly-stochastic consensus weights on a topology.

    ``delta`` and ``Delta`` are the smallest and largest diagonal entries.
    """

    topology: Topology
    W: np.ndarray = field(repr=False)
    delta: float = field(init=False)
    Delta: float = field(init=False)

    def __post_init__(self) -> None:
        W = np.array(self.W, dtype=float)
        W.setflags(write=False)
        object.__setattr__(self, "W", W)
        diag = np.diag(W)
        object.__setattr__(self, "delta", float(diag.min()))
        object.__setattr__(self, "Delta", float(diag.max()))

    @property
    def n(self) -> int:
        return self.topology.n

    def weight(self, i: int, j: int) -> float:
        return float(self.W[i, j])


def _validate_structure(top: Topology, W: np.ndarray, atol: float = 1e-10) -> None:
    n = top.n
    if W.shape != (n, n):
        raise InvalidWeightsError(f"W has shape {W.shape}, expected ({n}, {n})")
    if not np.all(np.isfinite(W)):
        raise InvalidWeightsError("W has non-finite entries")
    if np.any(W < 0):
        raise InvalidWeightsError("W has negative entries")
    if not np.allclose(W, W.T, atol=atol, rtol=0):
        raise InvalidWeightsError("W is not symmetric")
    dev = np.abs(W.sum(axis=1) - 1.0).max()
    if dev > atol:
        raise InvalidWeightsError(f"row sums of W deviate from 1 by {dev:.3e}")
    allowed = np.eye(n, dtype=bool)
    for i, nbrs in enumerate(top.adjacency):
        allowed[i, list(nbrs)] = True
    if np.any(W[~allowed] != 0):
        i, j = np.argwhere((W != 0) & ~allowed)[0]
        raise InvalidWeightsError(f"w[{i},{j}] is nonzero but {j} is not a neighbor of {i}")


def metropolis_weights(top: Topology) -> WeightMatrix:
    """Metropolis-Hastings rule ``w_ij = 1 / (1 + max(d_i, d_j))``."""
    n = top.n
    deg = top.degrees
    W = np.zeros((n, n))
    for i, j in top.directed_edges:
        W[i, j] = 1.0 / (1.0 + max(deg[i], deg[j]))
    W[np.diag_indices(n)] = 1.0 - W.sum(axis=1)
    return WeightMatrix(top, W)


def custom_weights(top: Topology, W) -> WeightMatrix:
    """Wrap a user-supplied matrix after checking symmetry, stochasticity and sparsity.

    The diagonal bounds are deliberately not enforced here so that a
    violating matrix can reach :func:`check_weight_bounds` and be reported.
    """
    W = np.asarray(W, dtype=float)
    _validate_structure(top, W)
    return WeightMatrix(top, W)


def check_weight_bounds(W: WeightMatrix) -> tuple[float, float, float]:
    """Return ``(delta, Delta, rho_W)`` after validating the weight assumptions.

    ``rho_W`` is the second largest eigenvalue modulus of ``W``.

    Raises
    ------
    InvalidWeightsError
        If rows do not sum to one within ``1e-10``.
    WeightBoundsViolation
        If ``Delta >= 1`` or ``delta < 0``, or the matrix does not mix
        (``rho_W >= 1``).
    """
    M = W.W
    dev = np.abs(M.sum(axis=1) - 1.0).max()
    if dev > 1e-10:
        raise InvalidWeightsError(f"row sums of W deviate from 1 by {dev:.3e}")
    if W.delta < 0:
        raise WeightBoundsViolation(f"diagonal weight bound violated: delta = {W.delta} < 0")
    if W.Delta >= 1.0:
        raise WeightBoundsViolation(
            "diagonal weight bound violated: require w_ii <= Delta < 1, "
            f"got Delta = {W.Delta}"
        )
    eig = np.linalg.eigvalsh(M)
    moduli = np.sort(np.abs(eig))[::-1]
    rho_w = float(moduli[1])
    if rho_w >= 1.0 - 1e-12:
        raise WeightBoundsViolation(f"W does not mix: second eigenvalue modulus {rho_w}")
    return W.delta, W.Delta, rho_w


@dataclass(frozen=True)
class IncidenceSet:
    """Block incidence matrices of the directed edge list and derived Laplacians."""

    topology: Topology
    p: int
    A_s: np.ndarray = field(repr=False)
    A_d: np.ndarray = field(repr=False)
    E_o: np.ndarray = field(repr=False)
    E_u: np.ndarray = field(repr=False)
    L_o: np.ndarray = field(repr=False)
    L_u: np.ndarray = field(repr=False)
    D_deg: np.ndarray = field(repr=False)
    gamma_u: float
    Gamma_u: float
    gamma_o: float

    @property
    def A(self) -> np.ndarray:
        return np.vstack([self.A_s, self.A_d])

    @property
    def B_admm(self) -> np.ndarray:
        mp = self.A_s.shape[0]
        return -np.vstack([np.eye(mp), np.eye(mp)])


def build_incidence(top: Topology, p: int = 1) -> IncidenceSet:
    """Assemble source/destination block matrices and their spectra.

    Singular values come from a dense SVD. ``gamma_o`` is the smallest
    singular value of ``E_o`` above ``1e-9 * Gamma_o``.
    """
    if p < 1:
        raise ValueError(f"block dimension must be >= 1, got {p}")
    n, m = top.n, top.m
    S = np.zeros((m, n))
    T = np.zeros((m, n))
    for e, (i, j) in enumerate(top.directed_edges):
        S[e, i] = 1.0
        T[e, j] = 1.0
    I_p = np.eye(p)
    A_s = np.kron(S, I_p)
    A_d = np.kron(T, I_p)
    E_o = A_s - A_d
    E_u = A_s + A_d
    L_o = 0.5 * E_o.T @ E_o
    L_u = 0.5 * E_u.T @ E_u
    D_deg = 0.5 * (L_u + L_o)
    sv_u = np.linalg.svd(E_u, compute_uv=False)
    sv_o = np.linalg.svd(E_o, compute_uv=False)
    # E_u has np columns; its min singular value is the n*p-th one.
    gamma_u = float(sv_u[n * p - 1]) if len(sv_u) >= n * p else 0.0
    if gamma_u < 1e-9 * sv_u[0]:
        gamma_u = 0.0
    nonzero = sv_o[sv_o > 1e-9 * sv_o[0]]
    return IncidenceSet(
        topology=top,
        p=p,
        A_s=A_s,
        A_d=A_d,
        E_o=E_o,
        E_u=E_u,
        L_o=L_o,
        L_u=L_u,
        D_deg=D_deg,
        gamma_u=gamma_u,
        Gamma_u=float(sv_u[0]),
        gamma_o=float(nonzero.min()),
    )
