import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from decopt.netnewton import NetworkNewtonSolver, NnConfig, series_constants
from decopt.objective import (
    CurvatureConstants,
    PenaltyObjective,
    QuadraticObjective,
    random_quadratics,
)
from decopt.simharness import StopCriteria, run
from decopt.spectral import (
    DESK_CAP,
    alpha_gap_study,
    certify_splitting,
    check_lemma3_theorem2,
    check_theorem1,
    fitted_linear_rate,
    rate_constants,
    sym_power,
)
from decopt.topology import build_random_topology, metropolis_weights, path_topology
from oracles import penalty_matrices, psd_power, truncated_inverse

from conftest import p2_problem


def test_p2_certificate_order_zero(p2):
    rep = certify_splitting(p2, np.zeros(2), K=0)
    assert rep.passed
    assert rep.rho == pytest.approx(0.5, abs=1e-12)
    np.testing.assert_allclose(rep.extremes["DBD"], (0.0, 0.5), atol=1e-12)
    np.testing.assert_allclose(rep.extremes["E"], (0.0, 0.5), atol=1e-12)


def test_p2_certificate_order_one(p2):
    rep = certify_splitting(p2, np.zeros(2), K=1)
    np.testing.assert_allclose(rep.extremes["H_inv_hat"], (0.5, 0.75), atol=1e-12)
    assert (rep.lam, rep.Lam) == pytest.approx((0.5, 0.75), abs=1e-12)
    np.testing.assert_allclose(rep.extremes["E"], (0.0, 0.25), atol=1e-12)


def test_p2_error_matrix_tail(p2):
    rep = certify_splitting(p2, np.zeros(2), K=9)
    assert rep.extremes["E"][1] <= 0.5**10 + 1e-12
    assert 0.5**10 == pytest.approx(9.77e-4, rel=1e-3)


def test_certificate_serializes(p2):
    d = certify_splitting(p2, np.zeros(2), K=1).to_dict()
    text = json.dumps(d)
    bounds = json.loads(text)["bounds"]
    assert {"name", "theoretical", "measured", "slack", "pass"} <= set(bounds[0])
    assert all(b["pass"] for b in bounds)


def test_desk_cap():
    n = DESK_CAP // 2 + 1
    top = path_topology(n)
    P = PenaltyObjective(metropolis_weights(top), 1.0,
                         [QuadraticObjective(np.eye(2), np.zeros(2))] * n)
    with pytest.raises(ValueError, match="sampled"):
        certify_splitting(P, np.zeros((n, 2)), K=0)


def test_sym_power_rejects_indefinite():
    with pytest.raises(np.linalg.LinAlgError):
        sym_power(np.diag([1.0, -1.0]), 0.5)
    np.testing.assert_allclose(sym_power(np.diag([4.0, 9.0]), 0.5), np.diag([2.0, 3.0]))


def test_rate_constant_examples(p2):
    quad = CurvatureConstants(1.0, 1.0, 0.0)
    rc = rate_constants(quad, p2, 0.5, 0.75, 1.0, 1.5)
    assert (rc.zeta, rc.Gamma1, rc.Gamma2) == (0.5, 0.0, 0.0)
    assert rate_constants(quad, p2, 0.5, 0.75, 0.0, 1.5).zeta == 0.0
    c = CurvatureConstants(1.0, 1.0, 1.0)
    rc = rate_constants(c, p2, 0.5, 0.75, 0.5, 1.0)
    expected = 0.75 * 0.5 - 0.125 * 0.75**3 / (6 * 0.5**1.5)
    assert rc.zeta == pytest.approx(expected, rel=1e-14)
    assert rc.zeta == pytest.approx(0.3501, abs=1e-4)
    assert rc.status == "ok"


def test_theorem1_on_p2(p2):
    trace = run(NetworkNewtonSolver(p2, NnConfig(K=0, eps=1.0, alpha0=1.0)), StopCriteria(max_iters=20))
    gaps = trace.column("F") - 0.5
    np.testing.assert_allclose(gaps[:2], [1.5, 0.25])
    chk = check_theorem1(trace.column("F"), 0.5, 0.5)
    assert chk.passed
    assert check_theorem1([2.0], 0.5, 0.5).passed
    bad = check_theorem1([2.0, 1.5, 1.0], 0.5, 0.5)
    assert not bad.passed and bad.violations == (1, 2)


def test_recursion_on_p2(p2):
    trace = run(NetworkNewtonSolver(p2, NnConfig(K=0, eps=1.0, alpha0=1.0)), StopCriteria(max_iters=10))
    a = trace.column("weighted_grad_norm_prev_D")
    assert a[0] == pytest.approx(math.sqrt(2)) and a[1] == pytest.approx(0.5)
    rep = check_lemma3_theorem2(a, 0.0, 0.0, 1.0, 0.5, 0, 0.5)
    assert rep.lemma3_holds
    assert rep.rows[0].bound == pytest.approx(0.5 * math.sqrt(2))
    assert rep.flagged == []
    assert "vacuous" in rep.status


def test_recursion_no_flags_before_t0():
    a = np.geomspace(0.3, 1e-9, 40)
    rep = check_lemma3_theorem2(a, Gamma1=50.0, Gamma2=3.0, eps=1.0, zeta=0.5, K=1, rho=0.5)
    assert rep.t0 is not None and rep.t0 > 0
    assert all(r.t >= rep.t0 for r in rep.flagged)
    etas = [r.eta for r in rep.rows]
    assert all(b <= a_ for a_, b in zip(etas[1:], etas[2:]))


def test_recursion_interval_by_hand():
    # eta = rho^2 = 0.25 and eps^2 Gamma2 = 1 give the interval [0.25, 0.5).
    rep = check_lemma3_theorem2([0.4, 0.3], 0.0, 1.0, 1.0, 0.5, 1, 0.5)
    row = rep.rows[0]
    assert row.eta == 0.25 and row.in_interval
    assert row.bound == pytest.approx(0.26) and not row.holds
    assert row.quad_bound == pytest.approx(0.32) and row.quad_holds
    rep = check_lemma3_theorem2([0.6, 0.3], 0.0, 1.0, 1.0, 0.5, 1, 0.5)
    assert rep.flagged == [] and rep.lemma3_holds
    assert check_lemma3_theorem2([0.4, 0.3], 0.0, 1.0, 1.0, 0.5, 1, 0.5, floor=0.05).lemma3_holds


def test_fitted_rate():
    assert fitted_linear_rate(0.3 ** np.arange(10)) == pytest.approx(0.3, rel=1e-10)
    assert fitted_linear_rate([1.0]) is None


def test_alpha_gap_on_p2():
    study = alpha_gap_study(p2_problem(), [1.0, 0.1])
    assert study.rows[0][1] == pytest.approx(math.sqrt(0.5), abs=1e-9)
    W = np.full((2, 2), 0.5)
    y = np.linalg.solve(1.1 * np.eye(2) - W, 0.1 * np.array([0.0, 2.0]))
    assert study.rows[1][1] == pytest.approx(np.linalg.norm(y - 1), abs=1e-9)
    assert study.rows[1][1] == pytest.approx(0.1286, abs=1e-4)
    with pytest.raises(ValueError):
        alpha_gap_study(p2_problem(), [])
    with pytest.raises(ValueError):
        alpha_gap_study(p2_problem(), [0.0])


def test_alpha_gap_monotone_on_p2():
    study = alpha_gap_study(p2_problem(), [1.0, 0.3, 0.1, 0.03, 0.01, 1e-3])
    gaps = [r[1] for r in study.rows]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_zeta_increases_with_alpha_for_quadratics():
    top = build_random_topology(6, 0.5, 0)
    P = PenaltyObjective(metropolis_weights(top), 1.0, random_quadratics(6, 2, 0))
    c = P.constants()
    zetas = []
    for a in (0.01, 0.1, 1.0, 10.0):
        sc = series_constants(c, P.weights, a, 1)
        zetas.append(rate_constants(c, P.with_alpha(a), sc.lam, sc.Lam, 1.0, 1.0).zeta)
    assert all(b > a for a, b in zip(zetas, zetas[1:]))


@settings(max_examples=25, deadline=None)
@given(n=st.integers(3, 8), p=st.integers(1, 3), seed=st.integers(0, 10_000),
       alpha=st.sampled_from([0.1, 1.0, 10.0]))
def test_certificate_matches_dense_oracle(n, p, seed, alpha):
    top = build_random_topology(n, 0.5, seed)
    W = metropolis_weights(top)
    locs = random_quadratics(n, p, seed, cond=1e3)
    P = PenaltyObjective(W, alpha, locs)
    H, D, B = penalty_matrices(W.W, [o.A for o in locs], alpha)
    previous = math.inf
    for K in range(5):
        rep = certify_splitting(P, np.zeros((n, p)), K)
        Hi = truncated_inverse(D, B, K)
        R = psd_power(Hi, 0.5)
        e = np.linalg.eigvalsh(np.eye(n * p) - R @ H @ R)
        np.testing.assert_allclose(rep.extremes["E"], (e[0], e[-1]), atol=1e-9)
        assert rep.passed, [c.to_dict() for c in rep.failures()]
        assert rep.extremes["E"][1] <= previous + 1e-12
        previous = rep.extremes["E"][1]


def test_certificate_is_deterministic():
    top = build_random_topology(6, 0.5, 3)
    P = PenaltyObjective(metropolis_weights(top), 1.0, random_quadratics(6, 2, 3, cond=100))
    a = certify_splitting(P, np.ones((6, 2)), 2).to_dict()
    b = certify_splitting(P, np.ones((6, 2)), 2).to_dict()
    assert json.dumps(a) == json.dumps(b)
