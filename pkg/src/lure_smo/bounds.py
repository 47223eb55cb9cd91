"""Closed-form error envelopes and their checks against simulated data.

Notation: ``lmin``/``lmax`` are the extreme eigenvalues of P, ``c = eps/lmax``
the decay rate of sqrt(V), and ``V = <P e, e>``.  The basic envelope is

    sqrt V(t) <= sqrt V(0) e^{-c t} + ||P||/sqrt(lmin) int_0^t e^{c (s - t)} k2(s) ds,

obtained from the Bernoulli-type comparison inequality

    (1 - alpha) w' <= a(t) w + b(t) w^alpha   =>
    w^{1-alpha}(t) <= w^{1-alpha}(0) e^{int_0^t a} + int_0^t e^{int_s^t a} b(s) ds

with ``w = V``, ``alpha = 1/2``.
"""

from dataclasses import dataclass, field

import numpy as np

from ._accel import njit
from .linalg import as_matrix, spectral_norm, sym_eigenvalues
from .sim import cumulative_l2, error_series

__all__ = [
    "GronwallResult",
    "TObserverResult",
    "HinfResult",
    "BoundReport",
    "gronwall_rhs",
    "gronwall_check",
    "envelope_total",
    "envelope_case_a",
    "envelope_case_c",
    "envelope_case_d",
    "attractive_radius",
    "improved_attractive_radius",
    "check_T_observer",
    "check_strong_hinf",
    "capture_time",
    "evaluate_bounds",
]


def _pstats(P):
    P = as_matrix(P, "P")
    eig = sym_eigenvalues(P)
    return eig.min, eig.max, spectral_norm(P)


def _sampled(fn, grid):
    grid = np.asarray(grid, dtype=np.float64)
    if callable(fn):
        return np.broadcast_to(np.asarray(fn(grid), dtype=np.float64), grid.shape).copy()
    return np.asarray(fn, dtype=np.float64)


@njit
def _weighted_convolution(log_q, values, dt):
    """Trapezoid ``int_0^{t_k} e^{A(t_k) - A(s)} g(s) ds`` given ``log_q[k] = A(t_k) - A(t_{k-1})``."""
    out = np.zeros_like(values)
    acc = 0.0
    for k in range(1, values.size):
        q = np.exp(log_q[k])
        acc = q * acc + 0.5 * dt * (values[k] + q * values[k - 1])
        out[k] = acc
    return out


def _convolve_decay(rate, values, dt):
    return _weighted_convolution(np.full(values.size, -rate * dt), values, dt)


def gronwall_rhs(w0, a, b, alpha, dt):
    """Right-hand side of the comparison lemma on a uniform grid (trapezoid quadrature)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    steps = np.zeros_like(a)
    steps[1:] = 0.5 * dt * (a[1:] + a[:-1])
    return w0 ** (1.0 - alpha) * np.exp(np.cumsum(steps)) + _weighted_convolution(steps, b, dt)


@dataclass(frozen=True, eq=False)
class GronwallResult:
    passed: bool
    lhs: np.ndarray
    rhs: np.ndarray
    worst_excess: float

    def __bool__(self):
        return self.passed


def gronwall_check(w, a, b, alpha, dt, tol=1e-9, atol=0.0):
    """Check ``w^{1-alpha}(t_k) <= RHS(t_k) (1 + tol) + atol`` at every sample."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [0, 1)")
    w = np.asarray(w, dtype=np.float64)
    if np.any(w < 0):
        raise ValueError("w must be nonnegative")
    if np.any(np.asarray(b) < 0):
        raise ValueError("b must be nonnegative")
    lhs = w ** (1.0 - alpha)
    rhs = gronwall_rhs(w[0], a, b, alpha, dt)
    excess = lhs - (rhs * (1.0 + tol) + atol)
    return GronwallResult(bool(np.all(excess <= 0)), lhs, rhs, float(np.max(excess)))


def envelope_total(V0, eps, P, kappa2, grid):
    """Envelope on sqrt(V) for a general bound ``kappa2`` (callable or samples on ``grid``)."""
    grid = np.asarray(grid, dtype=np.float64)
    lmin, lmax, normp = _pstats(P)
    rate = eps / lmax
    k2 = np.ascontiguousarray(np.abs(_sampled(kappa2, grid)))
    dt = grid[1] - grid[0] if grid.size > 1 else 0.0
    return np.sqrt(V0) * np.exp(-rate * grid) + normp / np.sqrt(lmin) * _convolve_decay(rate, k2, dt)


def envelope_case_a(V0, eps, k, P):
    """Bound on ||e(t)|| for ``kappa2 <= k`` plus the attractive radius ``k ||P|| / eps``."""
    lmin, lmax, normp = _pstats(P)
    level = lmax * normp * k / (lmin * eps)

    def bound(t):
        t = np.asarray(t, dtype=np.float64)
        return level + np.exp(-eps * t / lmax) * (np.sqrt(V0 / lmin) - level)

    return bound, k * normp / eps


def attractive_radius(k, P, eps):
    return k * spectral_norm(P) / eps


def improved_attractive_radius(k_prime, eps):
    """Radius when ``||P xi2|| <= k'`` is known directly."""
    return k_prime / eps


def envelope_case_c(V0, eps, k, a, P):
    """Envelope on sqrt(V) for ``kappa2(t) <= k e^{-a t}``."""
    lmin, lmax, normp = _pstats(P)
    rate = eps / lmax
    gap = eps - a * lmax

    def bound(t):
        t = np.asarray(t, dtype=np.float64)
        base = np.sqrt(V0) * np.exp(-rate * t)
        if abs(gap) < 1e-9:
            return base + normp * k / np.sqrt(lmin) * t * np.exp(-rate * t)
        coef = lmax * normp * k / (np.sqrt(lmin) * gap)
        return base + coef * (np.exp(-a * t) - np.exp(-rate * t))

    return bound


def envelope_case_d(V0, eps, P, kappa2_sq_integral, grid):
    """Envelope on sqrt(V) for square-integrable kappa2.

    ``kappa2_sq_integral`` holds the running ``int_0^t kappa2^2`` on ``grid``.
    """
    grid = np.asarray(grid, dtype=np.float64)
    lmin, lmax, normp = _pstats(P)
    run = np.asarray(_sampled(kappa2_sq_integral, grid))
    tail = np.sqrt(lmax / (2.0 * eps) * (1.0 - np.exp(-2.0 * eps * grid / lmax)))
    return np.sqrt(V0) * np.exp(-eps * grid / lmax) + normp / np.sqrt(lmin) * np.sqrt(run) * tail


@dataclass(frozen=True, eq=False)
class TObserverResult:
    passed: bool
    margin: np.ndarray
    gamma: np.ndarray
    mu: float
    bound: np.ndarray

    def __bool__(self):
        return self.passed


def check_T_observer(traj, P, eps, xi=None, rel_slack=0.0, abs_slack=0.0):
    """Pointwise ``||e(t)|| <= gamma(t) + mu sqrt(int_0^t ||xi||^2)``.

    ``gamma(t) = sqrt(V(0)/lmin) e^{-eps t/lmax}`` and
    ``mu = ||P|| / lmin * sqrt(lmax / (2 eps))``.  ``xi`` defaults to the
    uncertainty recorded along the trajectory.
    """
    lmin, lmax, normp = _pstats(P)
    xi = traj.xi if xi is None else np.asarray(xi, dtype=np.float64)
    es = error_series(traj, P)
    V0 = es.sqrtV[0] ** 2
    gamma = np.sqrt(V0 / lmin) * np.exp(-eps * traj.times / lmax)
    mu = normp / lmin * np.sqrt(lmax / (2.0 * eps))
    bound = gamma + mu * np.sqrt(cumulative_l2(xi, traj.dt))
    margin = bound * (1.0 + rel_slack) + abs_slack - es.norm_e
    return TObserverResult(bool(np.all(margin >= 0)), margin, gamma, float(mu), bound)


@dataclass(frozen=True)
class HinfResult:
    passed: bool
    lhs: float
    rhs: float
    lhs_unsquared: float
    rhs_unsquared: float

    @property
    def margin(self):
        return self.rhs - self.lhs

    def __bool__(self):
        return self.passed


def check_strong_hinf(traj, P, eps, mu, xi=None, t_end=None, rel_slack=0.0):
    """Integrated gain inequality on ``[0, t_end]``.

    Pass/fail uses ``int ||e||^2 <= V(0)/(2 eps) + mu int ||xi||^2``; the
    unsquared variant ``||e||_2 <= V(0)/(2 eps) + mu ||xi||_2`` is reported
    alongside.  Only meaningful when the block condition holds for (eps, mu).
    """
    xi = traj.xi if xi is None else np.asarray(xi, dtype=np.float64)
    es = error_series(traj, P)
    n = len(traj) if t_end is None else min(len(traj), int(np.floor(t_end / traj.dt + 1e-9)) + 1)
    ie = cumulative_l2(traj.e[:n], traj.dt)[-1]
    ix = cumulative_l2(xi[:n], traj.dt)[-1]
    V0 = es.sqrtV[0] ** 2
    lhs = float(ie)
    rhs = float(V0 / (2.0 * eps) + mu * ix)
    return HinfResult(
        bool(lhs <= rhs * (1.0 + rel_slack)),
        lhs,
        rhs,
        float(np.sqrt(ie)),
        float(V0 / (2.0 * eps) + mu * np.sqrt(ix)),
    )


def capture_time(norm_e, times, radius):
    """First time after which ``norm_e <= radius`` holds to the end, or None."""
    above = np.nonzero(np.asarray(norm_e) > radius)[0]
    if above.size == 0:
        return float(times[0])
    k = above[-1] + 1
    if k >= len(times):
        return None
    return float(times[k])


@dataclass(eq=False)
class BoundReport:
    """Per-sample envelopes and verdicts for one trajectory."""

    times: np.ndarray
    sqrtV: np.ndarray
    norm_e: np.ndarray
    env_total: np.ndarray
    env_a: np.ndarray
    in_omega: np.ndarray
    omega_hi: float
    eps_used: float
    env_c: np.ndarray = None
    env_d: np.ndarray = None
    omega_prime_hi: float = None
    slack_rel: float = 0.05
    slack_abs: float = 0.0
    envelope_ok: bool = True
    worst_violation: float = 0.0
    worst_raw_excess: float = 0.0
    gronwall: GronwallResult = None
    t_observer: TObserverResult = None
    notes: list = field(default_factory=list)

    @property
    def ok(self):
        t_ok = self.t_observer is None or self.t_observer.passed
        return self.envelope_ok and t_ok


def evaluate_bounds(traj, obs, eps, sigma_obs=None, slack_rel=0.05, slack_abs=None, k_prime=None):
    """Compare a trajectory against every envelope that applies to ``obs.kappa2``.

    ``eps`` must be admissible for the dissipation inequality.  The additive
    slack defaults to ``10 (sigma_obs + dt)`` to cover the boundary layers.
    """
    P = obs.P
    sigma_obs = obs.sigma_obs if sigma_obs is None else sigma_obs
    if slack_abs is None:
        slack_abs = 10.0 * (sigma_obs + traj.dt)
    es = error_series(traj, P)
    t = traj.times
    V0 = es.sqrtV[0] ** 2
    kap2 = obs.kappa2
    env = envelope_total(V0, eps, P, kap2, t)
    bound_a, omega_hi = envelope_case_a(V0, eps, kap2.sup, P)
    env_a = bound_a(t)
    env_c = env_d = None
    if kap2.c == 0.0 and kap2.r > 0.0:
        env_c = envelope_case_c(V0, eps, kap2.d, kap2.r, P)(t)
    if kap2.c == 0.0:
        env_d = envelope_case_d(V0, eps, P, cumulative_l2(kap2(t), traj.dt), t)
    excess = es.sqrtV - env
    violation = es.sqrtV - (env * (1.0 + slack_rel) + slack_abs)
    lmin, lmax, normp = _pstats(P)
    g = gronwall_check(
        es.sqrtV**2,
        np.full(t.size, -eps / lmax),
        normp / np.sqrt(lmin) * np.abs(kap2(t)),
        0.5,
        traj.dt,
        tol=slack_rel,
        atol=slack_abs,
    )
    rep = BoundReport(
        times=t,
        sqrtV=es.sqrtV,
        norm_e=es.norm_e,
        env_total=env,
        env_a=env_a,
        in_omega=es.norm_e <= omega_hi,
        omega_hi=float(omega_hi),
        eps_used=float(eps),
        env_c=env_c,
        env_d=env_d,
        omega_prime_hi=None if k_prime is None else improved_attractive_radius(k_prime, eps),
        slack_rel=slack_rel,
        slack_abs=slack_abs,
        envelope_ok=bool(np.all(violation <= 0)),
        worst_violation=float(max(np.max(violation), 0.0)),
        worst_raw_excess=float(max(np.max(excess), 0.0)),
        gronwall=g,
    )
    rep.t_observer = check_T_observer(traj, P, eps, rel_slack=slack_rel, abs_slack=slack_abs)
    return rep
