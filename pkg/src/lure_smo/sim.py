"""Fixed-step co-simulation of plant and observer.

Two schemes are available:

``explicit-rk4-regularized``
    classical RK4 on the joint state (x, xh); every set-valued term is
    replaced by its boundary-layer regularization.
``semi-implicit-euler-resolvent``
    explicit Euler for the single-valued terms, with the feedback w (and
    wh) solved implicitly through the resolvent of the scalar operator
    composed with the C x dynamics.  The Sign injection stays explicit and
    regularized.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ._accel import njit
from .errors import DimensionError, DivergenceError, ParameterError
from .linalg import as_vector, sym_eigenvalues
from .model import observer_rhs_into, plant_rhs_into, uncertainty_into
from .monotone import resolvent_value, selection_value

__all__ = [
    "RK4",
    "RESOLVENT",
    "METHODS",
    "SchemeConfig",
    "Trajectory",
    "ErrorSeries",
    "integrate_coupled",
    "error_series",
    "l2_norm",
    "cumulative_l2",
    "sample_count",
]

RK4 = "explicit-rk4-regularized"
RESOLVENT = "semi-implicit-euler-resolvent"
METHODS = (RK4, RESOLVENT)


def sample_count(t_end, dt):
    """Number of samples on ``t_k = k dt``, ``0 <= t_k <= t_end``."""
    return int(math.floor(t_end / dt + 1e-9)) + 1


@dataclass(frozen=True)
class SchemeConfig:
    method: str = RK4
    dt: float = 1e-4
    t_end: float = 20.0
    sigma_plant: float = 1e-3
    sigma_obs: float = None  # None: take the observer's own layer

    def __post_init__(self):
        if self.method not in METHODS:
            raise ParameterError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not (self.dt > 0 and self.t_end > 0 and self.dt <= self.t_end):
            raise ParameterError(f"need 0 < dt <= t_end, got dt={self.dt}, t_end={self.t_end}")
        if self.sigma_plant <= 0 or (self.sigma_obs is not None and self.sigma_obs <= 0):
            raise ParameterError("boundary layers must be positive")

    @property
    def steps(self):
        return sample_count(self.t_end, self.dt) - 1


# -- kernels -----------------------------------------------------------------


@njit
def _rk4_kernel(pk, ok, x0, xh0, dt, nsteps, sigma_plant, X, XH, OM, OMH, XI):
    n = x0.shape[0]
    p = pk.F.shape[0]
    m = pk.C.shape[0]
    w = max(n, m, p, pk.u_prm.shape[1])
    ws = np.zeros((4, w))
    om = np.zeros(m)
    k1x = np.empty(n)
    k2x = np.empty(n)
    k3x = np.empty(n)
    k4x = np.empty(n)
    k1h = np.empty(n)
    k2h = np.empty(n)
    k3h = np.empty(n)
    k4h = np.empty(n)
    xs = np.empty(n)
    hs = np.empty(n)
    y = np.empty(p)
    x = x0.copy()
    xh = xh0.copy()
    for k in range(nsteps + 1):
        t = k * dt
        X[k] = x
        XH[k] = xh
        uncertainty_into(pk, t, x, XI[k])
        for i in range(p):
            s = 0.0
            for j in range(n):
                s += pk.F[i, j] * x[j]
            y[i] = s
        plant_rhs_into(pk, x, t, 1, sigma_plant, k1x, OM[k], ws)
        observer_rhs_into(pk, ok, xh, y, t, 1, sigma_plant, k1h, OMH[k], ws)
        bad = False
        for i in range(n):
            if not (np.isfinite(x[i]) and np.isfinite(xh[i])):
                bad = True
        if bad:
            return k
        if k == nsteps:
            break
        # stage 2
        for i in range(n):
            xs[i] = x[i] + 0.5 * dt * k1x[i]
            hs[i] = xh[i] + 0.5 * dt * k1h[i]
        for i in range(p):
            s = 0.0
            for j in range(n):
                s += pk.F[i, j] * xs[j]
            y[i] = s
        plant_rhs_into(pk, xs, t + 0.5 * dt, 1, sigma_plant, k2x, om, ws)
        observer_rhs_into(pk, ok, hs, y, t + 0.5 * dt, 1, sigma_plant, k2h, om, ws)
        # stage 3
        for i in range(n):
            xs[i] = x[i] + 0.5 * dt * k2x[i]
            hs[i] = xh[i] + 0.5 * dt * k2h[i]
        for i in range(p):
            s = 0.0
            for j in range(n):
                s += pk.F[i, j] * xs[j]
            y[i] = s
        plant_rhs_into(pk, xs, t + 0.5 * dt, 1, sigma_plant, k3x, om, ws)
        observer_rhs_into(pk, ok, hs, y, t + 0.5 * dt, 1, sigma_plant, k3h, om, ws)
        # stage 4
        for i in range(n):
            xs[i] = x[i] + dt * k3x[i]
            hs[i] = xh[i] + dt * k3h[i]
        for i in range(p):
            s = 0.0
            for j in range(n):
                s += pk.F[i, j] * xs[j]
            y[i] = s
        plant_rhs_into(pk, xs, t + dt, 1, sigma_plant, k4x, om, ws)
        observer_rhs_into(pk, ok, hs, y, t + dt, 1, sigma_plant, k4h, om, ws)
        for i in range(n):
            x[i] += dt / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i])
            xh[i] += dt / 6.0 * (k1h[i] + 2.0 * k2h[i] + 2.0 * k3h[i] + k4h[i])
    return -1


@njit
def _implicit_feedback(pk, M, v, offset, dt, lam_diag, omega):
    """Solve z = M (v + dt B w) + offset with w = -op(z), componentwise.

    ``lam_diag[i] = dt * (M B)[i, i]``; the coupling matrix must be diagonal.
    """
    n = v.shape[0]
    m = omega.shape[0]
    for i in range(m):
        a = offset[i]
        for j in range(n):
            a += M[i, j] * v[j]
        lam = lam_diag[i]
        z = resolvent_value(pk.kinds[i], pk.oprm[i], pk.jlo[i], pk.jhi[i], lam, a)
        omega[i] = (z - a) / lam


@njit
def _resolvent_kernel(pk, ok, CmKF, lam_p, lam_o, x0, xh0, dt, nsteps, X, XH, OM, OMH, XI):
    n = x0.shape[0]
    p = pk.F.shape[0]
    m = pk.C.shape[0]
    w = max(n, m, p, pk.u_prm.shape[1])
    ws = np.zeros((4, w))
    zero_off = np.zeros(m)
    ky = np.zeros(m)
    fx = np.empty(n)
    fh = np.empty(n)
    vx = np.empty(n)
    vh = np.empty(n)
    om = np.zeros(m)
    omh = np.zeros(m)
    y = np.empty(p)
    x = x0.copy()
    xh = xh0.copy()
    # initial selections: minimal-norm at the initial states
    for i in range(m):
        s = 0.0
        sh = 0.0
        for j in range(n):
            s += pk.C[i, j] * x[j]
            sh += CmKF[i, j] * xh[j]
        for j in range(p):
            for q in range(n):
                sh += ok.K[i, j] * pk.F[j, q] * x[q]
        om[i] = -selection_value(pk.kinds[i], pk.oprm[i], pk.jlo[i], pk.jhi[i], s)
        omh[i] = -selection_value(pk.kinds[i], pk.oprm[i], pk.jlo[i], pk.jhi[i], sh)
    for k in range(nsteps + 1):
        t = k * dt
        X[k] = x
        XH[k] = xh
        OM[k] = om
        OMH[k] = omh
        uncertainty_into(pk, t, x, XI[k])
        bad = False
        for i in range(n):
            if not (np.isfinite(x[i]) and np.isfinite(xh[i])):
                bad = True
        if bad:
            return k
        if k == nsteps:
            break
        for i in range(p):
            s = 0.0
            for j in range(n):
                s += pk.F[i, j] * x[j]
            y[i] = s
        # mode -1: everything except the B w term
        plant_rhs_into(pk, x, t, 0, 1.0, fx, om, ws)
        for i in range(n):
            s = fx[i]
            for j in range(m):
                s -= pk.B[i, j] * om[j]
            vx[i] = x[i] + dt * s
        observer_rhs_into(pk, ok, xh, y, t, -1, 1.0, fh, omh, ws)
        for i in range(n):
            vh[i] = xh[i] + dt * fh[i]
        _implicit_feedback(pk, pk.C, vx, zero_off, dt, lam_p, om)
        for i in range(n):
            s = vx[i]
            for j in range(m):
                s += dt * pk.B[i, j] * om[j]
            x[i] = s
        for i in range(m):
            s = 0.0
            for j in range(p):
                for q in range(n):
                    s += ok.K[i, j] * pk.F[j, q] * x[q]
            ky[i] = s
        _implicit_feedback(pk, CmKF, vh, ky, dt, lam_o, omh)
        for i in range(n):
            s = vh[i]
            for j in range(m):
                s += dt * pk.B[i, j] * omh[j]
            xh[i] = s
    return -1


# -- python surface ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    x: np.ndarray
    xhat: np.ndarray
    omega: np.ndarray
    omega_hat: np.ndarray
    xi: np.ndarray
    e: np.ndarray
    ey: np.ndarray
    V: np.ndarray
    norm_e: np.ndarray
    dt: float
    method: str

    def __len__(self):
        return self.times.size

    @property
    def t_end(self):
        return float(self.times[-1])


@dataclass(frozen=True, eq=False)
class ErrorSeries:
    sqrtV: np.ndarray
    norm_e: np.ndarray
    norm_ey: np.ndarray


def _diag_coupling(M, B, dt, what):
    MB = M @ B
    off = MB - np.diag(np.diag(MB))
    if np.any(np.abs(off) > 1e-12 * max(1.0, np.max(np.abs(MB)))) or np.any(np.diag(MB) <= 0):
        raise ParameterError(
            f"the resolvent scheme needs {what} diagonal with positive entries, got {MB.tolist()}"
        )
    return dt * np.diag(MB).copy()


def integrate_coupled(sys, obs, x0, xhat0, scheme=None, check_assumptions=True):
    """Simulate plant and observer on ``t_k = k dt``.

    Raises DivergenceError at the first sample with a non-finite state.
    """
    scheme = scheme or SchemeConfig()
    obs.check_dims(sys)
    x0 = as_vector(x0, "x0")
    xhat0 = as_vector(xhat0, "xhat0")
    if x0.size != sys.n or xhat0.size != sys.n:
        raise DimensionError(f"initial states must have length {sys.n}")
    if check_assumptions:
        from .assumptions import check_assumption3

        rep = check_assumption3(
            sys.A, sys.F, sys.B, sys.C, obs.P, obs.L, obs.K, sys.L_f, obs.eps, tol=1e-2
        )
        if not rep.ok:
            warnings.warn(f"observer assumptions not certified: {rep.summary()}", stacklevel=2)
    if scheme.sigma_obs is not None and scheme.sigma_obs != obs.sigma_obs:
        from dataclasses import replace

        obs = replace(obs, sigma_obs=scheme.sigma_obs)
    pk = sys.packed()
    ok = obs.packed(sys.F)
    N = scheme.steps
    n, m = sys.n, sys.m
    X = np.zeros((N + 1, n))
    XH = np.zeros((N + 1, n))
    OM = np.zeros((N + 1, m))
    OMH = np.zeros((N + 1, m))
    XI = np.zeros((N + 1, n))
    if scheme.method == RK4:
        bad = _rk4_kernel(pk, ok, x0, xhat0, scheme.dt, N, scheme.sigma_plant, X, XH, OM, OMH, XI)
    else:
        CmKF = sys.C - obs.K @ sys.F
        lam_p = _diag_coupling(sys.C, sys.B, scheme.dt, "C B")
        lam_o = _diag_coupling(CmKF, sys.B, scheme.dt, "(C - K F) B")
        bad = _resolvent_kernel(
            pk, ok, CmKF, lam_p, lam_o, x0, xhat0, scheme.dt, N, X, XH, OM, OMH, XI
        )
    if bad >= 0:
        raise DivergenceError(int(bad), bad * scheme.dt)
    times = np.arange(N + 1) * scheme.dt
    e = XH - X
    ey = e @ sys.F.T
    V = np.einsum("ki,ij,kj->k", e, obs.P, e)
    return Trajectory(
        times, X, XH, OM, OMH, XI, e, ey, V, np.linalg.norm(e, axis=1), scheme.dt, scheme.method
    )


def error_series(traj, P):
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    P = np.asarray(P, dtype=np.float64)
    V = np.einsum("ki,ij,kj->k", traj.e, P, traj.e)
    return ErrorSeries(
        np.sqrt(np.maximum(V, 0.0)),
        np.linalg.norm(traj.e, axis=1),
        np.linalg.norm(np.atleast_2d(traj.ey.T).T, axis=1),
    )


def _sq_norms(series):
    s = np.asarray(series, dtype=np.float64)
    return s * s if s.ndim == 1 else np.sum(s * s, axis=1)


def cumulative_l2(series, dt):
    """Running ``int_0^t ||s||^2`` by the trapezoid rule (not square-rooted)."""
    q = _sq_norms(series)
    out = np.zeros_like(q)
    out[1:] = np.cumsum(0.5 * dt * (q[1:] + q[:-1]))
    return out


def l2_norm(series, dt, t_end=None):
    """Trapezoidal ``sqrt(int_0^t_end ||s(t)||^2 dt)`` of a uniformly sampled series."""
    q = _sq_norms(series)
    if t_end is not None:
        q = q[: sample_count(t_end, dt)]
    if q.size < 2:
        return 0.0
    return float(np.sqrt(0.5 * dt * np.sum(q[1:] + q[:-1])))


def lambda_bounds(P):
    eig = sym_eigenvalues(P)
    return eig.min, eig.max
