import math
import warnings

import numpy as np
import pytest

from lure_smo.errors import DivergenceError, ParameterError
from lure_smo.model import InputSignal, Kappa, LureSystem, Nonlinearity, ObserverConfig, Uncertainty
from lure_smo.monotone import relay_affine
from lure_smo.sim import (
    RESOLVENT,
    RK4,
    SchemeConfig,
    cumulative_l2,
    error_series,
    integrate_coupled,
    l2_norm,
    sample_count,
)


def scalar(A=-1.0, B=0.0, C=1.0, op=None):
    sys = LureSystem(
        [[A]], [[B]], [[C]], [[1.0]], Nonlinearity.zero(1), op or relay_affine(0, 0),
        Uncertainty.zero(1), InputSignal.constant(0.0),
    )
    # B^T P = C - K F with P = 1, F = 1  =>  K = C - B
    obs = ObserverConfig([[1.0]], [[0.0]], [[C - B]], 0.5, Kappa(0), Kappa(0), Kappa(0))
    return sys, obs


class TestScalar:
    def test_exponential(self):
        sys, obs = scalar()
        tr = integrate_coupled(sys, obs, [1.0], [1.0], SchemeConfig(RK4, 1e-3, 1.0))
        assert tr.x[-1, 0] == pytest.approx(math.exp(-1), abs=1e-6)

    def test_rk4_order(self):
        sys, obs = scalar(A=-2.0)
        errs = []
        for dt in (0.1, 0.05, 0.025):
            tr = integrate_coupled(sys, obs, [1.0], [1.0], SchemeConfig(RK4, dt, 2.0))
            errs.append(abs(tr.x[-1, 0] - math.exp(-4.0)))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(orders >= 3.5)

    @pytest.mark.parametrize("method", [RK4, RESOLVENT])
    def test_relay_inclusion(self, method):
        sys, obs = scalar(A=0.0, B=1.0, op=relay_affine(0, 1))
        dt = sigma = 1e-3
        tr = integrate_coupled(
            sys, obs, [1.0], [1.0], SchemeConfig(method, dt, 2.0, sigma), check_assumptions=False
        )
        exact = np.maximum(1.0 - tr.times, 0.0)
        assert np.max(np.abs(tr.x[:, 0] - exact)) <= 5 * max(dt, sigma)

    def test_divergence(self):
        sys, obs = scalar(A=800.0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            with pytest.raises(DivergenceError) as info:
                integrate_coupled(sys, obs, [1.0], [1.0], SchemeConfig(RK4, 0.01, 20.0))
        assert info.value.step > 0


class TestScheme:
    def test_sample_count(self):
        assert sample_count(20.0, 1e-4) == 200_001
        assert sample_count(1.0, 0.3) == 4

    def test_invalid(self):
        with pytest.raises(ParameterError):
            SchemeConfig("euler")
        with pytest.raises(ParameterError):
            SchemeConfig(dt=2.0, t_end=1.0)
        with pytest.raises(ParameterError):
            SchemeConfig(sigma_plant=0.0)

    def test_resolvent_needs_diagonal_coupling(self):
        sys, obs = scalar(A=0.0, B=-1.0, C=1.0, op=relay_affine(0, 1))
        with pytest.warns(UserWarning, match="Eq.\\(7\\): FAIL"):
            with pytest.raises(ParameterError, match="C B"):
                integrate_coupled(sys, obs, [1.0], [1.0], SchemeConfig(RESOLVENT, 1e-3, 0.1))


class TestExample1:
    def test_shapes_and_invariants(self, ex1, ex1_traj):
        tr = ex1_traj
        N = sample_count(20.0, 1e-4)
        for arr in (tr.times, tr.x, tr.xhat, tr.omega, tr.omega_hat, tr.e, tr.ey, tr.V, tr.norm_e):
            assert len(arr) == N
        assert np.array_equal(tr.e, tr.xhat - tr.x)
        lmin = np.linalg.eigvalsh(ex1.observer.P).min()
        assert np.all(tr.V >= lmin * tr.norm_e**2 - 1e-9)

    def test_zero_error_invariance(self, ex1):
        s = LureSystem(
            ex1.system.A, ex1.system.B, ex1.system.C, ex1.system.F, ex1.system.f, ex1.system.op,
            Uncertainty.zero(3), ex1.system.u, ex1.system.L_f,
        )
        sch = SchemeConfig(RK4, 1e-4, 5.0)
        tr = integrate_coupled(s, ex1.observer, ex1.x0, ex1.x0, sch)
        assert np.max(tr.norm_e) <= 1e-6

    def test_schemes_agree(self, ex1, ex1_traj):
        sch = SchemeConfig(RESOLVENT, 1e-4, 20.0)
        tr = integrate_coupled(ex1.system, ex1.observer, ex1.x0, ex1.xhat0, sch)
        gap = np.max(np.abs(tr.norm_e - ex1_traj.norm_e))
        assert gap <= 10 * max(1e-4, 1e-3)

    def test_lyapunov_decrease_outside_omega(self, ex1, ex1_traj):
        tr = ex1_traj
        radius = math.sqrt(41) / 2 + 0.5
        outside = np.nonzero(tr.norm_e[:-1] >= radius)[0]
        assert outside.size > 0
        dV = tr.V[outside + 1] - tr.V[outside]
        assert np.all(dV < 5 * tr.dt)

    def test_recorded_selections_monotone(self, ex1, ex1_traj):
        """<P B (wh - w), e> <= 0 at every sample (up to the boundary layers)."""
        tr = ex1_traj
        PB = ex1.observer.P @ ex1.system.B
        prod = np.einsum("ki,ij,kj->k", tr.omega_hat - tr.omega, PB.T, tr.e)
        assert np.max(prod) <= 1e-6 + 50 * 1e-3 * np.max(np.abs(tr.omega))


class TestNorms:
    def test_error_series(self):
        class T:
            e = np.array([[1.0, 0.0], [0.0, 0.0]])
            ey = np.array([[1.0], [0.0]])

            def __len__(self):
                return 2

        es = error_series(T(), np.diag([4.0, 1.0]))
        assert es.sqrtV[0] == 2.0 and es.sqrtV[1] == 0.0
        es = error_series(T(), np.eye(2))
        assert np.array_equal(es.sqrtV, es.norm_e)

    def test_l2_constant(self):
        assert l2_norm(np.ones(1001), 1e-3) == pytest.approx(1.0)

    def test_l2_exponential(self):
        t = np.arange(10_001) * 1e-3
        assert abs(l2_norm(np.exp(-t), 1e-3, 10.0) - math.sqrt((1 - math.exp(-20)) / 2)) <= 1e-4

    def test_l2_zero(self):
        assert l2_norm(np.zeros(50), 0.1) == 0.0

    def test_cumulative(self):
        t = np.arange(1001) * 1e-3
        c = cumulative_l2(np.column_stack([np.ones_like(t), np.zeros_like(t)]), 1e-3)
        assert np.allclose(c, t)
