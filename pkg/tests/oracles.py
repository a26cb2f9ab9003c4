"""Independent dense reference computations used to freeze expected values.

Nothing here imports solver code from ``decopt``; everything is rebuilt from
plain matrices so that the tests compare two separate derivations.
"""

from __future__ import annotations

from collections import deque

import numpy as np


def bfs_connected(n, edges):
    adj = {i: set() for i in range(n)}
    for i, j in edges:
        adj[i].add(j)
        adj[j].add(i)
    seen = {0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in adj[u] - seen:
            seen.add(v)
            queue.append(v)
    return len(seen) == n


def metropolis(n, edges):
    deg = np.zeros(n, dtype=int)
    for i, j in edges:
        deg[i] += 1
        deg[j] += 1
    W = np.zeros((n, n))
    for i, j in edges:
        W[i, j] = W[j, i] = 1.0 / (1 + max(deg[i], deg[j]))
    W += np.diag(1.0 - W.sum(axis=1))
    return W


def psd_power(M, power):
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    return (V * w**power) @ V.T


def penalty_matrices(W, A_blocks, alpha):
    """Hessian ``H`` and the splitting ``D``, ``B`` for quadratic locals."""
    n = W.shape[0]
    p = A_blocks[0].shape[0]
    Z = np.kron(W, np.eye(p))
    Zd = np.kron(np.diag(np.diag(W)), np.eye(p))
    G = np.zeros((n * p, n * p))
    for i, A in enumerate(A_blocks):
        G[i * p:(i + 1) * p, i * p:(i + 1) * p] = A
    I = np.eye(n * p)
    H = I - Z + alpha * G
    D = alpha * G + 2 * (I - Zd)
    B = I - 2 * Zd + Z
    return H, D, B


def truncated_inverse(D, B, K):
    Dm = psd_power(D, -0.5)
    S = Dm @ B @ Dm
    acc = np.eye(D.shape[0])
    term = np.eye(D.shape[0])
    for _ in range(K):
        term = term @ S
        acc = acc + term
    return Dm @ acc @ Dm


def quadratic_nn_trace(W, A_blocks, b_blocks, alpha, K, eps, y0, iters):
    """NN-K on quadratic locals, run densely; returns (iterates, F values)."""
    H, D, B = penalty_matrices(W, A_blocks, alpha)
    Hinv = truncated_inverse(D, B, K)
    b = alpha * np.concatenate(b_blocks)
    y = np.asarray(y0, dtype=float).ravel().copy()
    ys, Fs = [y.copy()], [0.5 * y @ H @ y + b @ y]
    for _ in range(iters):
        g = H @ y + b
        y = y - eps * Hinv @ g
        ys.append(y.copy())
        Fs.append(0.5 * y @ H @ y + b @ y)
    return ys, Fs


def incidence(n, directed_edges):
    m = len(directed_edges)
    S = np.zeros((m, n))
    T = np.zeros((m, n))
    for e, (i, j) in enumerate(directed_edges):
        S[e, i] = 1
        T[e, j] = 1
    return S, T


def reduced_dqm_quadratic(n, directed_edges, A_blocks, b_blocks, c, iters):
    """Reduced DQM recursion on quadratics (p = block size) from zeros.

    ``x+ = (2c D + H)^-1 [(c L_u + H) x - grad f(x) - phi]``,
    ``phi+ = phi + c L_o x+``.
    """
    p = A_blocks[0].shape[0]
    S, T = incidence(n, directed_edges)
    Eo = np.kron(S - T, np.eye(p))
    Eu = np.kron(S + T, np.eye(p))
    Lo, Lu = 0.5 * Eo.T @ Eo, 0.5 * Eu.T @ Eu
    Dg = 0.5 * (Lo + Lu)
    Hf = np.zeros((n * p, n * p))
    for i, A in enumerate(A_blocks):
        Hf[i * p:(i + 1) * p, i * p:(i + 1) * p] = A
    b = np.concatenate(b_blocks)
    x = np.zeros(n * p)
    phi = np.zeros(n * p)
    xs = [x.copy()]
    for _ in range(iters):
        grad = Hf @ x + b
        x = np.linalg.solve(2 * c * Dg + Hf, (c * Lu + Hf) @ x - grad - phi)
        phi = phi + c * Lo @ x
        xs.append(x.copy())
    return xs


def logistic_value(S, y, reg, x):
    return float(np.sum(np.log1p(np.exp(-y * (S @ x)))) + 0.5 * reg * x @ x)


def central_gradient(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        g[k] = (f(x + e) - f(x - e)) / (2 * h)
    return g
