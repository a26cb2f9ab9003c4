import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from decopt.netnewton import (
    AnnBoard,
    DgdSolver,
    NetworkNewtonSolver,
    NnConfig,
    NnState,
    ann_round,
    assemble_splitting,
    dgd_step,
    nn_direction,
    nn_step,
    series_constants,
    splitting_blocks,
    theorem1_stepsize,
)
from decopt.objective import CurvatureConstants, PenaltyObjective, random_quadratics, synthetic_logistic
from decopt.simharness import MessageLedger, Network, StopCriteria, run
from decopt.topology import build_random_topology, metropolis_weights, path_topology
from oracles import penalty_matrices, quadratic_nn_trace, truncated_inverse

from conftest import p2_problem


def _state(P, y):
    y = P.as_blocks(np.asarray(y, dtype=float))
    return NnState(t=0, y=y, alpha=P.alpha, g=P.gradient(y), d=np.zeros_like(y))


def test_p2_splitting_blocks(p2):
    D11, row = splitting_blocks(p2, 0, np.zeros(1))
    assert D11[0, 0] == 2.0
    assert row[0][0, 0] == 0.5 and row[1][0, 0] == 0.5
    D, B = assemble_splitting(p2, np.zeros(2))
    np.testing.assert_array_equal(D, 2 * np.eye(2))
    np.testing.assert_array_equal(B, np.full((2, 2), 0.5))
    np.testing.assert_array_equal(D - B, p2.hessian(np.zeros(2)))


@pytest.mark.parametrize("K, expected", [(0, (0.0, 1.0)), (1, (0.25, 1.25)), (60, (0.5, 1.5))])
def test_p2_directions(p2, K, expected):
    d = nn_direction(_state(p2, np.zeros(2)), p2, K)
    np.testing.assert_allclose(d.ravel(), expected, atol=1e-12)


def test_p2_nn_step_and_one_step_newton(p2):
    s = nn_step(_state(p2, np.zeros(2)), p2, NnConfig(K=0, eps=1.0, alpha0=1.0))
    np.testing.assert_allclose(s.y.ravel(), [0.0, 1.0])
    assert p2.value(s.y) == pytest.approx(0.75)
    s = nn_step(_state(p2, np.zeros(2)), p2, NnConfig(K=60, eps=1.0, alpha0=1.0))
    np.testing.assert_allclose(s.y.ravel(), [0.5, 1.5], atol=1e-12)


def test_zero_stepsize_is_rejected():
    with pytest.raises(ValueError, match=r"\(0,1\]"):
        NnConfig(eps=0.0)
    with pytest.raises(ValueError):
        NnConfig(K=-1)
    with pytest.raises(ValueError):
        NnConfig(alpha_divisor=1.0)


def test_p2_dgd_step(p2):
    s = dgd_step(_state(p2, np.zeros(2)), p2, 0.25)
    np.testing.assert_allclose(s.y.ravel(), [0.0, 0.5])
    star = _state(p2, [0.5, 1.5])
    np.testing.assert_allclose(dgd_step(star, p2, 0.5).y.ravel(), [0.5, 1.5], atol=1e-15)


def test_p2_series_constants(p2):
    sc = series_constants(p2.constants(), p2.weights, 1.0, 1)
    assert sc.rho == pytest.approx(0.5)
    assert sc.lam == pytest.approx(0.5)
    assert sc.Lam == pytest.approx(0.75)


def test_stepsize_rule_examples(p2):
    q = CurvatureConstants(1.0, 1.0, 0.0)
    assert theorem1_stepsize(q, p2, 0.5, 0.75, 1.0) == 1.0
    c = CurvatureConstants(1.0, 1.0, 1.0)
    assert theorem1_stepsize(c, p2, 0.5, 0.75, 1.0) == 1.0
    c = CurvatureConstants(1.0, 1.0, 1e6)
    eps = theorem1_stepsize(c, p2, 0.5, 0.75, 1.0)
    assert eps == pytest.approx(math.sqrt(3 * 0.5**2.5 / (1e6 * 0.75**3)), rel=1e-12)
    assert eps == pytest.approx(1.12e-3, rel=5e-3)
    with pytest.raises(ValueError, match="negative"):
        theorem1_stepsize(c, p2, 0.5, 0.75, -1.0)


def test_ledger_counts_per_iteration(p2):
    sol = NetworkNewtonSolver(p2, NnConfig(K=2, eps=1.0, alpha0=1.0))
    ledger = MessageLedger()
    run(sol, StopCriteria(max_iters=1), ledger=ledger)
    assert ledger.vector_msgs == 6


def test_exact_newton_stops_after_one_iteration(p2):
    sol = NetworkNewtonSolver(p2, NnConfig(K=60, eps=1.0, alpha0=1.0))
    trace = run(sol, StopCriteria(max_iters=50, grad_tol=1e-8))
    assert len(trace) == 1


def test_p2_trace_values(p2):
    sol = NetworkNewtonSolver(p2, NnConfig(K=0, eps=1.0, alpha0=1.0))
    trace = run(sol, StopCriteria(max_iters=3))
    np.testing.assert_allclose(trace.column("F"), [2.0, 0.75, 0.5625, 0.515625])
    w = trace.column("weighted_grad_norm_prev_D")
    assert w[0] == pytest.approx(math.sqrt(2))
    assert w[1] == pytest.approx(0.5)


# -- adaptive penalty ----------------------------------------------------------

def test_all_nodes_below_tol_divides_alpha():
    top = path_topology(3)
    net = Network(top)
    st_ = NnState(0, np.zeros((3, 1)), 1.0, np.zeros((3, 1)), np.zeros((3, 1)))
    alpha, board, changed = ann_round(st_, AnnBoard.zeros(3), NnConfig(adaptive=True),
                                      [0.1, 0.1, 0.1], net, tol=0.5)
    assert changed and alpha == pytest.approx(0.1)
    assert not board.s.any()
    assert net.ledger.signal_msgs == 3 * 2


def test_one_node_above_tol_keeps_alpha():
    net = Network(path_topology(3))
    st_ = NnState(0, np.zeros((3, 1)), 1.0, np.zeros((3, 1)), np.zeros((3, 1)))
    alpha, board, changed = ann_round(st_, AnnBoard.zeros(3), NnConfig(adaptive=True),
                                      [0.1, 0.9, 0.1], net, tol=0.5)
    assert not changed and alpha == 1.0
    assert board.synchronized()
    np.testing.assert_array_equal(board.s[0], [1, 0, 1])
    # The remaining node signals next round and completes the vector.
    alpha, board, changed = ann_round(st_, board, NnConfig(adaptive=True), [0.1, 0.1, 0.1],
                                      net, tol=0.5)
    assert changed and alpha == pytest.approx(0.1)
    assert net.ledger.signal_msgs == 3 * 2


def test_infinite_tol_forces_schedule(p2):
    cfg = NnConfig(K=1, eps=1.0, alpha0=1.0, tol=math.inf, adaptive=True, alpha_min=1e-5)
    trace = run(NetworkNewtonSolver(p2, cfg), StopCriteria(max_iters=8))
    alphas = trace.column("alpha")[1:]
    np.testing.assert_allclose(alphas, [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-5, 1e-5, 1e-5], rtol=1e-15)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 500))
def test_adaptive_schedule_is_monotone(seed):
    top = build_random_topology(6, 0.5, seed)
    P = PenaltyObjective(metropolis_weights(top), 1.0, random_quadratics(6, 2, seed))
    cfg = NnConfig(K=1, eps=1.0, alpha0=1.0, tol=0.05, adaptive=True, alpha_min=1e-6)
    a = run(NetworkNewtonSolver(P, cfg), StopCriteria(max_iters=60)).column("alpha")
    for prev, nxt in zip(a, a[1:]):
        assert nxt == prev or nxt == pytest.approx(prev / 10, rel=1e-15)


# -- properties ----------------------------------------------------------------

@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 8), p=st.integers(1, 3), K=st.integers(0, 5),
       alpha=st.sampled_from([0.1, 1.0, 10.0]), seed=st.integers(0, 10_000))
def test_direction_equals_truncated_series(n, p, K, alpha, seed):
    top = build_random_topology(n, 0.5, seed)
    W = metropolis_weights(top)
    locs = random_quadratics(n, p, seed, cond=100)
    P = PenaltyObjective(W, alpha, locs)
    y = np.random.default_rng(seed).standard_normal((n, p))
    s = _state(P, y)
    _, D, B = penalty_matrices(W.W, [o.A for o in locs], alpha)
    expected = -truncated_inverse(D, B, K) @ s.g.ravel()
    net = Network(top)
    d = nn_direction(s, P, K, net)
    np.testing.assert_allclose(d.ravel(), expected, atol=1e-10 * max(1, np.abs(expected).max()))
    assert net.round == K
    assert float(s.g.ravel() @ d.ravel()) < 0


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000), K=st.integers(0, 3))
def test_descent_on_logistic(seed, K):
    top = build_random_topology(5, 0.5, seed)
    P = PenaltyObjective(metropolis_weights(top), 0.5, synthetic_logistic(5, 4, 2, seed, reg=0.01))
    s = _state(P, np.random.default_rng(seed).standard_normal((5, 2)))
    d = nn_direction(s, P, K)
    assert float(s.g.ravel() @ d.ravel()) < 0


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000), K=st.integers(0, 3))
def test_iterates_match_dense_oracle(seed, K):
    n, p = 5, 2
    top = build_random_topology(n, 0.5, seed)
    W = metropolis_weights(top)
    locs = random_quadratics(n, p, seed)
    P = PenaltyObjective(W, 0.3, locs)
    ys, Fs = quadratic_nn_trace(W.W, [o.A for o in locs], [o.b for o in locs], 0.3, K, 0.7,
                                np.zeros(n * p), 6)
    trace = run(NetworkNewtonSolver(P, NnConfig(K=K, eps=0.7, alpha0=0.3)), StopCriteria(max_iters=6))
    const = 0.3 * sum(o.const for o in locs)
    np.testing.assert_allclose(trace.column("F"), np.array(Fs) + const, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(trace.final_state.y.ravel(), ys[-1], atol=1e-10)


def test_dgd_converges_to_penalty_optimum(p2):
    trace = run(DgdSolver(p2, 0.5), StopCriteria(max_iters=200, grad_tol=1e-12))
    np.testing.assert_allclose(trace.final_state.y.ravel(), [0.5, 1.5], atol=1e-11)
    with pytest.raises(ValueError):
        DgdSolver(p2, 0.0)
