"""Envelope formulas against analytic oracles, and checks on synthetic and simulated data."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lure_smo.bounds import (
    attractive_radius,
    capture_time,
    check_strong_hinf,
    check_T_observer,
    envelope_case_a,
    envelope_case_c,
    envelope_case_d,
    envelope_total,
    evaluate_bounds,
    gronwall_check,
    gronwall_rhs,
    improved_attractive_radius,
)
from lure_smo.model import Kappa, LureSystem, Uncertainty
from lure_smo.sim import SchemeConfig, Trajectory, cumulative_l2, integrate_coupled

DT = 1e-3
T = np.arange(10_001) * DT


def synthetic(e, dt=DT, xi=None, P=None):
    e = np.atleast_2d(np.asarray(e, dtype=np.float64).T).T
    n = e.shape[1]
    P = np.eye(n) if P is None else P
    N = e.shape[0]
    z = np.zeros((N, n))
    return Trajectory(
        np.arange(N) * dt, z, e, np.zeros((N, 1)), np.zeros((N, 1)),
        z if xi is None else np.asarray(xi, dtype=np.float64), e, e[:, :1],
        np.einsum("ki,ij,kj->k", e, P, e), np.linalg.norm(e, axis=1), dt, "synthetic",
    )


class TestGronwall:
    def test_constant(self):
        w = np.linspace(4.0, 1.0, T.size)
        res = gronwall_check(w, np.zeros_like(T), np.zeros_like(T), 0.0, DT)
        assert res and np.all(res.rhs == 4.0)

    def test_equality_case(self):
        rhs = gronwall_rhs(1.0, -np.ones_like(T), np.zeros_like(T), 0.5, DT)
        assert np.allclose(rhs, np.exp(-T), atol=1e-12)
        assert gronwall_check(np.exp(-2 * T), -np.ones_like(T), np.zeros_like(T), 0.5, DT)

    def test_pure_integral(self):
        assert np.allclose(gronwall_rhs(0.0, np.zeros_like(T), np.ones_like(T), 0.0, DT), T)

    def test_violation_detected(self):
        res = gronwall_check(np.exp(-T), -np.ones_like(T), np.zeros_like(T), 0.5, DT)
        assert not res and res.worst_excess > 0

    def test_constant_kappa_convolution(self):
        # a = -1, b = 1, w0 = 0: rhs = 1 - e^{-t}
        rhs = gronwall_rhs(0.0, -np.ones_like(T), np.ones_like(T), 0.5, DT)
        assert np.max(np.abs(rhs - (1 - np.exp(-T)))) <= 1e-6

    def test_arguments(self):
        with pytest.raises(ValueError):
            gronwall_check(np.ones(3), np.zeros(3), np.zeros(3), 1.0, DT)
        with pytest.raises(ValueError):
            gronwall_check(-np.ones(3), np.zeros(3), np.zeros(3), 0.5, DT)


class TestEnvelopeTotal:
    def test_no_uncertainty(self):
        P = np.diag([1.0, 4.0])
        env = envelope_total(9.0, 2.0, P, Kappa(0.0), T)
        assert np.allclose(env, 3.0 * np.exp(-0.5 * T))

    def test_unit_convolution(self):
        env = envelope_total(0.0, 1.0, np.eye(2), lambda t: np.ones_like(t), T)
        assert np.max(np.abs(env - (1 - np.exp(-T)))) <= 1e-6
        assert env[0] == 0.0

    @pytest.mark.parametrize("a", [0.5, 3.0])
    def test_matches_case_c(self, a):
        P = np.diag([1.0, 2.0])
        quad = envelope_total(2.0, 1.0, P, Kappa(0.0, 1.5, a), T)
        closed = envelope_case_c(2.0, 1.0, 1.5, a, P)(T)
        assert np.max(np.abs(quad - closed)) <= 1e-5

    @given(st.floats(0.1, 5.0), st.floats(0.0, 3.0), st.floats(0.0, 10.0))
    def test_case_a_dominates(self, eps, k, V0):
        P = np.diag([1.0, 2.5, 0.7])
        lmin = 0.7
        env = envelope_total(V0, eps, P, Kappa(k), T)
        bound, _ = envelope_case_a(V0, eps, k, P)
        # equality holds analytically; the slack absorbs trapezoid error
        ref = env / math.sqrt(lmin)
        assert np.all(bound(T) >= ref - 1e-6 * np.maximum(1.0, ref))


class TestCaseA:
    def test_example1_radius(self):
        _, hi = envelope_case_a(1.0, 2.0, math.sqrt(41), np.eye(3))
        assert hi == pytest.approx(3.2016, abs=5e-5)
        assert attractive_radius(math.sqrt(41), np.eye(3), 2.0) == hi

    def test_zero_k(self):
        P = np.diag([2.0, 8.0])
        bound, _ = envelope_case_a(8.0, 1.0, 0.0, P)
        assert np.allclose(bound(T), 2.0 * np.exp(-T / 8.0))

    def test_limit(self):
        P = np.diag([2.0, 8.0])
        bound, hi = envelope_case_a(8.0, 1.0, 3.0, P)
        assert bound(1e4) == pytest.approx(8 * 8 * 3 / 2.0)
        cI = 3.0 * np.eye(2)
        bound, hi = envelope_case_a(8.0, 1.0, 3.0, cI)
        assert bound(1e4) == pytest.approx(hi)

    def test_improved(self):
        assert improved_attractive_radius(0.6751, 0.0714) == pytest.approx(9.455, abs=1e-3)


class TestCaseC:
    def test_zero_k(self):
        f = envelope_case_c(4.0, 1.0, 0.0, 2.0, np.eye(2))
        assert np.allclose(f(T), 2.0 * np.exp(-T))

    def test_closed_form(self):
        f = envelope_case_c(0.0, 2.0, 1.0, 1.0, np.eye(2))
        assert np.allclose(f(T), np.exp(-T) - np.exp(-2 * T))

    def test_limit_branch_continuous(self):
        P = np.eye(2)
        exact = envelope_case_c(1.0, 1.0, 1.0, 1.0, P)(T)
        near = envelope_case_c(1.0, 1.0, 1.0, 1.0 + 1e-6, P)(T)
        assert np.max(np.abs(exact - near)) <= 1e-5

    def test_decays(self):
        assert envelope_case_c(3.0, 0.5, 2.0, 0.2, np.diag([1.0, 3.0]))(400.0) < 1e-8


class TestCaseD:
    def test_zero_kappa(self):
        env = envelope_case_d(4.0, 1.0, np.eye(2), np.zeros_like(T), T)
        assert np.allclose(env, 2.0 * np.exp(-T))

    def test_exponential_kappa(self):
        run = cumulative_l2(np.exp(-T), DT)
        env = envelope_case_d(0.0, 1.0, np.eye(2), run, T)
        assert np.max(np.abs(env - (1 - np.exp(-2 * T)) / 2)) <= 1e-6

    def test_limit(self):
        P = np.diag([1.0, 2.0])
        t = np.arange(200_001) * 1e-3
        run = cumulative_l2(np.exp(-t), 1e-3)
        env = envelope_case_d(0.0, 1.0, P, run, t)
        l2 = math.sqrt(0.5)
        assert env[-1] == pytest.approx(2.0 * l2 * math.sqrt(2.0 / 2.0) / 1.0, rel=1e-6)


class TestObserverInequalities:
    def test_T_zero(self):
        res = check_T_observer(synthetic(np.zeros((100, 2))), np.eye(2), 1.0)
        assert res and np.all(res.margin == 0)

    def test_T_exponential(self):
        e = np.exp(-T)[:, None] * np.array([[3.0, 4.0]])
        res = check_T_observer(synthetic(e), np.eye(2), 1.0, abs_slack=1e-12)
        assert res
        assert np.allclose(res.gamma, 5 * np.exp(-T))
        bad = check_T_observer(synthetic(e * np.exp(0.5 * T)[:, None]), np.eye(2), 1.0)
        assert not bad

    def test_T_mu(self):
        P = np.diag([0.5, 2.0])
        res = check_T_observer(synthetic(np.zeros((10, 2)), P=P), P, 0.25)
        assert res.mu == pytest.approx(2.0 / 0.5 * math.sqrt(2.0 / 0.5))

    def test_hinf_zero(self):
        res = check_strong_hinf(synthetic(np.zeros((100, 2))), np.eye(2), 1.0, 1.0)
        assert res and res.lhs == 0 and res.rhs == 0

    def test_hinf_dissipation(self):
        # ||e||^2 = 4 e^{-4t}: integral ~ 1 = V0 / (2 eps) at eps = 2
        e = 2 * np.exp(-2 * T)[:, None] * np.array([[1.0, 0.0]])
        res = check_strong_hinf(synthetic(e), np.eye(2), 2.0, 1.0, rel_slack=1e-5)
        assert res and res.lhs == pytest.approx(1.0, rel=1e-5)
        assert not check_strong_hinf(synthetic(e), np.eye(2), 2.2, 1.0)
        assert res.lhs_unsquared == pytest.approx(math.sqrt(res.lhs))


def test_capture_time():
    t = np.arange(6.0)
    assert capture_time([5, 4, 3, 1, 1, 1], t, 2.0) == 3.0
    assert capture_time([1, 1], t[:2], 2.0) == 0.0
    assert capture_time([1, 3], t[:2], 2.0) is None


class TestSimulated:
    @pytest.mark.parametrize("name", ["ex1", "ex2_xi1", "ex2_xi2"])
    def test_all_checks_on_builtins(self, name, request):
        sc = request.getfixturevalue(name)
        tr = integrate_coupled(
            sc.system, sc.observer, sc.x0, sc.xhat0, SchemeConfig(dt=1e-4, t_end=8.0),
            check_assumptions=False,
        )
        rep = evaluate_bounds(tr, sc.observer, sc.eps_used, k_prime=sc.checks.get("k_prime"))
        assert rep.envelope_ok and rep.gronwall.passed and rep.t_observer.passed
        assert rep.ok
        if sc.observer.kappa2.c == 0.0:
            assert rep.env_d is not None

    def test_T_observer_example2_decaying_part(self, ex2_xi2):
        s = ex2_xi2.system
        xi = Uncertainty(np.zeros(3), exp_amp=[1, 1, 1], exp_rate=[1, 2, 1.5])
        sys = LureSystem(s.A, s.B, s.C, s.F, s.f, s.op, xi, s.u, s.L_f)
        tr = integrate_coupled(
            sys, ex2_xi2.observer, ex2_xi2.x0, ex2_xi2.xhat0, SchemeConfig(t_end=20.0),
            check_assumptions=False,
        )
        res = check_T_observer(tr, ex2_xi2.observer.P, ex2_xi2.eps_used)
        assert res and np.all(res.margin > 0)
