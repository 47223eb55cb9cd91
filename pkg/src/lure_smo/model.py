"""Plant, sliding-mode observer and uncertainty decomposition.

The plant is the set-valued Lur'e system

    x' = A x + B w + f(x, u) + xi(t, x),   w in -op(C x),   y = F x

and the observer is

    xh' = A xh + B wh - L ey + f(xh, u) - P^{-1} F^T (k1 Sign(ey) + k3 ey / (|ey|^2 + delta))
    wh in -op(C xh - K ey),   ey = F xh - y.

Every term is a small parametric family so the time-stepping kernels can
evaluate it without calling back into Python:

* ``InputSignal``   u(t) = offset + amplitude * sin(freq t + phase)
* ``Nonlinearity``  f(x, u) = G u + S sin(x) + Cc cos(x)     (elementwise sin/cos)
* ``Uncertainty``   xi(t, x) = e^{-decay t} [c + a sin(w t + phi) + S sin(x) + Cc cos(x) + d e^{-r t}]
* ``Kappa``         k(t) = c + d e^{-r t}
"""

from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np

from ._accel import njit
from .errors import DimensionError, ParameterError
from .linalg import (
    as_matrix,
    as_vector,
    least_squares_coeffs,
    spectral_norm,
    sym_eigenvalues,
)
from .monotone import (
    DiagonalOperator,
    ScalarMonotoneOp,
    regularized_sign_into,
    regularized_value,
    selection_value,
)

__all__ = [
    "InputSignal",
    "Nonlinearity",
    "Uncertainty",
    "Kappa",
    "Kappa3Rule",
    "LureSystem",
    "ObserverConfig",
    "UncertaintySplit",
    "plant_rhs",
    "observer_rhs",
    "decompose_uncertainty",
    "kappa3_rule",
    "lipschitz_audit",
    "SEL_MIN_NORM",
    "SEL_REGULARIZED",
]

SEL_MIN_NORM = 0
SEL_REGULARIZED = 1
_SEL_MODES = {"min-norm": SEL_MIN_NORM, "regularized": SEL_REGULARIZED}


def _zeros_if_none(a, shape):
    return np.zeros(shape) if a is None else np.array(a, dtype=np.float64).reshape(shape)


@dataclass(frozen=True, eq=False)
class InputSignal:
    offset: np.ndarray
    amplitude: np.ndarray = None
    freq: np.ndarray = None
    phase: np.ndarray = None

    def __post_init__(self):
        off = as_vector(self.offset, "u.offset")
        r = off.size
        object.__setattr__(self, "offset", off)
        for name in ("amplitude", "freq", "phase"):
            object.__setattr__(self, name, _zeros_if_none(getattr(self, name), (r,)))

    @classmethod
    def constant(cls, value):
        return cls(np.atleast_1d(np.asarray(value, dtype=np.float64)))

    @classmethod
    def sine(cls, amplitude, freq=1.0, phase=0.0):
        amp = np.atleast_1d(np.asarray(amplitude, dtype=np.float64))
        r = amp.size
        return cls(np.zeros(r), amp, np.full(r, float(freq)), np.full(r, float(phase)))

    @property
    def dim(self):
        return self.offset.size

    def packed(self):
        return np.vstack([self.offset, self.amplitude, self.freq, self.phase])

    def __call__(self, t):
        return self.offset + self.amplitude * np.sin(self.freq * t + self.phase)


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    """f(x, u) = G u + S sin(x) + Cc cos(x)."""

    G: np.ndarray
    S: np.ndarray = None
    Cc: np.ndarray = None

    def __post_init__(self):
        G = as_matrix(self.G, "f.G")
        if np.ndim(self.G) == 1:
            G = G.T
        n = G.shape[0]
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "S", _zeros_if_none(self.S, (n, n)))
        object.__setattr__(self, "Cc", _zeros_if_none(self.Cc, (n, n)))

    @classmethod
    def zero(cls, n, r=1):
        return cls(np.zeros((n, r)))

    def __call__(self, x, u):
        x = np.asarray(x, dtype=np.float64)
        return self.G @ np.atleast_1d(u) + self.S @ np.sin(x) + self.Cc @ np.cos(x)

    def lipschitz_bound(self):
        """Crude global bound: sum of the spectral norms of S and Cc."""
        return spectral_norm(self.S) + spectral_norm(self.Cc)


@dataclass(frozen=True, eq=False)
class Uncertainty:
    """xi(t, x) = e^{-decay t} [c + a sin(w t + phi) + S sin x + Cc cos x + d e^{-r t}]."""

    const: np.ndarray
    amp: np.ndarray = None
    freq: np.ndarray = None
    phase: np.ndarray = None
    S: np.ndarray = None
    Cc: np.ndarray = None
    exp_amp: np.ndarray = None
    exp_rate: np.ndarray = None
    decay: float = 0.0

    def __post_init__(self):
        c = as_vector(self.const, "xi.const")
        n = c.size
        object.__setattr__(self, "const", c)
        for name in ("amp", "freq", "phase", "exp_amp", "exp_rate"):
            object.__setattr__(self, name, _zeros_if_none(getattr(self, name), (n,)))
        object.__setattr__(self, "S", _zeros_if_none(self.S, (n, n)))
        object.__setattr__(self, "Cc", _zeros_if_none(self.Cc, (n, n)))
        object.__setattr__(self, "decay", float(self.decay))

    @classmethod
    def zero(cls, n):
        return cls(np.zeros(n))

    @property
    def dim(self):
        return self.const.size

    @property
    def is_zero(self):
        return not any(
            np.any(getattr(self, k) != 0) for k in ("const", "amp", "S", "Cc", "exp_amp")
        )

    def packed(self):
        return np.vstack(
            [self.const, self.amp, self.freq, self.phase, self.exp_amp, self.exp_rate]
        )

    def __call__(self, t, x=None):
        n = self.dim
        x = np.zeros(n) if x is None else np.asarray(x, dtype=np.float64)
        v = (
            self.const
            + self.amp * np.sin(self.freq * t + self.phase)
            + self.S @ np.sin(x)
            + self.Cc @ np.cos(x)
            + self.exp_amp * np.exp(-self.exp_rate * t)
        )
        return np.exp(-self.decay * t) * v

    def with_decay(self, decay):
        kw = {k: getattr(self, k) for k in self.__dataclass_fields__}
        kw["decay"] = decay
        return Uncertainty(**kw)


@dataclass(frozen=True)
class Kappa:
    """Known bound k(t) = c + d e^{-r t}."""

    c: float
    d: float = 0.0
    r: float = 0.0

    def __post_init__(self):
        if self.c < 0 or self.d < 0:
            raise ParameterError("kappa bounds must be nonnegative")

    def __call__(self, t):
        return self.c + self.d * np.exp(-self.r * np.asarray(t, dtype=np.float64))

    def packed(self):
        return np.array([self.c, self.d, self.r])

    @property
    def sup(self):
        return self.c + self.d if self.r >= 0 else np.inf

    @property
    def limit(self):
        return self.c if self.r > 0 else self.c + self.d


@dataclass(frozen=True)
class Kappa3Rule:
    """k3(t) = (||P|| k2(t) + rho)^2 / (2 eps), inflated by 1e-6 for strictness."""

    rho: float
    eps: float
    norm_p: float
    kappa2: Kappa

    def __call__(self, t):
        return (self.norm_p * self.kappa2(t) + self.rho) ** 2 / (2.0 * self.eps) * (1.0 + 1e-6)


def kappa3_rule(rho, eps, P, kappa2):
    if rho <= 0 or eps <= 0:
        raise ParameterError("rho and eps must be positive")
    if not isinstance(kappa2, Kappa):
        kappa2 = Kappa(float(kappa2))
    return Kappa3Rule(float(rho), float(eps), spectral_norm(P), kappa2)


@dataclass(frozen=True, eq=False)
class LureSystem:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    F: np.ndarray
    f: Nonlinearity
    op: DiagonalOperator
    xi: Uncertainty
    u: InputSignal
    L_f: float = 0.0

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        B = as_matrix(self.B, "B")
        if np.ndim(self.B) == 1:
            B = B.T
        C = as_matrix(self.C, "C")
        F = as_matrix(self.F, "F")
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionError(f"A must be square, got {A.shape}")
        m = B.shape[1]
        if B.shape[0] != n:
            raise DimensionError(f"B must be {n}x{m}, got {B.shape}")
        if C.shape != (m, n):
            raise DimensionError(f"C must be {m}x{n}, got {C.shape}")
        if F.shape[1] != n:
            raise DimensionError(f"F must have {n} columns, got {F.shape}")
        p = F.shape[0]
        sv = sym_eigenvalues(F @ F.T)
        if sv.min <= 1e-12 * max(1.0, sv.max):
            raise DimensionError(f"F ({p}x{n}) must have full row rank")
        op = self.op
        if isinstance(op, ScalarMonotoneOp):
            op = DiagonalOperator((op,))
        if op.dim != m:
            raise DimensionError(f"operator acts on R^{op.dim} but C has {m} rows")
        if self.f.G.shape[0] != n:
            raise DimensionError(f"f maps into R^{self.f.G.shape[0]}, expected R^{n}")
        if self.f.G.shape[1] != self.u.dim:
            raise DimensionError(f"f expects u in R^{self.f.G.shape[1]}, input has dim {self.u.dim}")
        if self.xi.dim != n:
            raise DimensionError(f"xi has dimension {self.xi.dim}, expected {n}")
        if self.L_f < 0:
            raise ParameterError("L_f must be nonnegative")
        for k, v in (("A", A), ("B", B), ("C", C), ("F", F), ("op", op)):
            object.__setattr__(self, k, v)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.F.shape[0]

    def packed(self):
        kinds, oprm, jlo, jhi = self.op.packed()
        return PlantPack(
            self.A, self.B, self.C, self.F, self.f.G, self.f.S, self.f.Cc,
            self.u.packed(), self.xi.packed(), self.xi.S, self.xi.Cc, self.xi.decay,
            kinds, oprm, jlo, jhi,
        )


@dataclass(frozen=True, eq=False)
class ObserverConfig:
    P: np.ndarray
    L: np.ndarray
    K: np.ndarray
    eps: float
    kappa1: Kappa
    kappa2: Kappa
    kappa3: object  # Kappa or Kappa3Rule
    delta: float = 1e-3
    sigma_obs: float = 1e-3
    Pinv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        P = as_matrix(self.P, "P")
        L = as_matrix(self.L, "L")
        if np.ndim(self.L) == 1:
            L = L.T
        K = as_matrix(self.K, "K")
        eig = sym_eigenvalues(P)
        if eig.min <= 0:
            raise ParameterError(f"P must be positive definite (min eigenvalue {eig.min:.3g})")
        if self.eps <= 0 or self.delta <= 0 or self.sigma_obs <= 0:
            raise ParameterError("eps, delta and sigma_obs must be positive")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "Pinv", np.linalg.inv(0.5 * (P + P.T)))

    def check_dims(self, sys):
        n, m, p = sys.n, sys.m, sys.p
        if self.P.shape != (n, n):
            raise DimensionError(f"P must be {n}x{n}, got {self.P.shape}")
        if self.L.shape != (n, p):
            raise DimensionError(f"L must be {n}x{p}, got {self.L.shape}")
        if self.K.shape != (m, p):
            raise DimensionError(f"K must be {m}x{p}, got {self.K.shape}")

    def injection_basis(self, F):
        return self.Pinv @ as_matrix(F, "F").T

    def kappa3_at(self, t):
        return self.kappa3(t)

    def packed(self, F):
        kap = np.vstack([self.kappa1.packed(), self.kappa2.packed(), np.zeros(3)])
        rule = np.zeros(7)
        if isinstance(self.kappa3, Kappa3Rule):
            k3 = self.kappa3
            rule[:4] = (1.0, k3.rho, k3.norm_p, k3.eps)
            rule[4:] = k3.kappa2.packed()
        else:
            kap[2] = self.kappa3.packed()
        return ObserverPack(
            self.L, self.K, self.injection_basis(F), kap, rule, float(self.delta), float(self.sigma_obs)
        )


PlantPack = namedtuple(
    "PlantPack",
    "A B C F G fS fC u_prm xi_vec xi_S xi_C xi_decay kinds oprm jlo jhi",
)
ObserverPack = namedtuple("ObserverPack", "L K basis kap rule delta sigma_obs")


# -- kernels -----------------------------------------------------------------


@njit
def kappa_value(kap, rule, i, t):
    if i == 2 and rule[0] == 1.0:
        k2 = rule[4] + rule[5] * np.exp(-rule[6] * t)
        return (rule[2] * k2 + rule[1]) ** 2 / (2.0 * rule[3]) * (1.0 + 1e-6)
    return kap[i, 0] + kap[i, 1] * np.exp(-kap[i, 2] * t)


@njit
def input_into(u_prm, t, out):
    for i in range(u_prm.shape[1]):
        out[i] = u_prm[0, i] + u_prm[1, i] * np.sin(u_prm[2, i] * t + u_prm[3, i])


@njit
def smooth_terms_into(pk, x, u, out):
    """out = A x + f(x, u)."""
    n = x.shape[0]
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += pk.A[i, j] * x[j] + pk.fS[i, j] * np.sin(x[j]) + pk.fC[i, j] * np.cos(x[j])
        for j in range(u.shape[0]):
            s += pk.G[i, j] * u[j]
        out[i] = s


@njit
def uncertainty_into(pk, t, x, out):
    n = x.shape[0]
    v = pk.xi_vec
    scale = np.exp(-pk.xi_decay * t)
    for i in range(n):
        s = v[0, i] + v[1, i] * np.sin(v[2, i] * t + v[3, i]) + v[4, i] * np.exp(-v[5, i] * t)
        for j in range(n):
            s += pk.xi_S[i, j] * np.sin(x[j]) + pk.xi_C[i, j] * np.cos(x[j])
        out[i] = scale * s


@njit
def select_into(pk, z, mode, sigma, out):
    """out = -sel(op, z) under the chosen selection mode."""
    for i in range(z.shape[0]):
        if mode == 0:
            out[i] = -selection_value(pk.kinds[i], pk.oprm[i], pk.jlo[i], pk.jhi[i], z[i])
        else:
            out[i] = -regularized_value(pk.kinds[i], pk.oprm[i], pk.jlo[i], pk.jhi[i], z[i], sigma)


@njit
def plant_rhs_into(pk, x, t, mode, sigma, out, omega, ws):
    """Plant vector field; ``ws`` is scratch of shape (4, >= max(n, m, r))."""
    n = x.shape[0]
    m = pk.C.shape[0]
    r = pk.u_prm.shape[1]
    u = ws[0, :r]
    z = ws[1, :m]
    xi = ws[2, :n]
    input_into(pk.u_prm, t, u)
    smooth_terms_into(pk, x, u, out)
    for i in range(m):
        s = 0.0
        for j in range(n):
            s += pk.C[i, j] * x[j]
        z[i] = s
    select_into(pk, z, mode, sigma, omega)
    uncertainty_into(pk, t, x, xi)
    for i in range(n):
        s = out[i] + xi[i]
        for j in range(m):
            s += pk.B[i, j] * omega[j]
        out[i] = s


@njit
def observer_rhs_into(pk, ok, xh, y, t, mode, sigma, out, omega_h, ws):
    """Observer vector field (without the Bw term when ``mode < 0``)."""
    n = xh.shape[0]
    m = pk.C.shape[0]
    p = pk.F.shape[0]
    r = pk.u_prm.shape[1]
    u = ws[0, :r]
    z = ws[1, :m]
    ey = ws[2, :p]
    sg = ws[3, :p]
    input_into(pk.u_prm, t, u)
    smooth_terms_into(pk, xh, u, out)
    ey2 = 0.0
    for i in range(p):
        s = -y[i]
        for j in range(n):
            s += pk.F[i, j] * xh[j]
        ey[i] = s
        ey2 += s * s
    for i in range(m):
        s = 0.0
        for j in range(n):
            s += pk.C[i, j] * xh[j]
        for j in range(p):
            s -= ok.K[i, j] * ey[j]
        z[i] = s
    if mode >= 0:
        select_into(pk, z, mode, sigma, omega_h)
    else:
        for i in range(m):
            omega_h[i] = 0.0
    k1 = kappa_value(ok.kap, ok.rule, 0, t)
    k3 = kappa_value(ok.kap, ok.rule, 2, t)
    regularized_sign_into(ey, ok.sigma_obs, sg)
    c3 = k3 / (ey2 + ok.delta)
    for j in range(p):
        sg[j] = k1 * sg[j] + c3 * ey[j]
    for i in range(n):
        s = out[i]
        for j in range(m):
            s += pk.B[i, j] * omega_h[j]
        for j in range(p):
            s -= ok.L[i, j] * ey[j] + ok.basis[i, j] * sg[j]
        out[i] = s


# -- python surface ----------------------------------------------------------


def _scratch(sys):
    return np.zeros((4, max(sys.n, sys.m, sys.p, sys.u.dim)))


def _mode(scheme_hint):
    if isinstance(scheme_hint, str):
        try:
            return _SEL_MODES[scheme_hint]
        except KeyError:
            raise ValueError(f"unknown selection mode {scheme_hint!r}") from None
    return int(scheme_hint)


def plant_rhs(sys, x, t, scheme_hint="min-norm", sigma=1e-3):
    """Return ``(x', w)`` with ``w = -selection(op, C x)``."""
    x = as_vector(x, "x")
    if x.size != sys.n:
        raise DimensionError(f"x has length {x.size}, expected {sys.n}")
    out = np.empty(sys.n)
    omega = np.empty(sys.m)
    plant_rhs_into(sys.packed(), x, float(t), _mode(scheme_hint), float(sigma), out, omega, _scratch(sys))
    return out, omega


def observer_rhs(sys, obs, xhat, y, t, scheme_hint="min-norm", sigma=1e-3):
    """Return ``(xh', wh)`` for measured output ``y = F x``."""
    obs.check_dims(sys)
    xhat = as_vector(xhat, "xhat")
    y = as_vector(y, "y")
    if xhat.size != sys.n or y.size != sys.p:
        raise DimensionError(f"xhat/y have lengths {xhat.size}/{y.size}, expected {sys.n}/{sys.p}")
    out = np.empty(sys.n)
    omega = np.empty(sys.m)
    observer_rhs_into(
        sys.packed(), obs.packed(sys.F), xhat, y, float(t), _mode(scheme_hint), float(sigma),
        out, omega, _scratch(sys),
    )
    return out, omega


def decompose_uncertainty(P, F, xi_sample):
    """Split xi into ``P^{-1} F^T xi1`` (its projection) plus the residual xi2."""
    P = as_matrix(P, "P")
    F = as_matrix(F, "F")
    basis = np.linalg.solve(P, F.T)
    xi = as_vector(xi_sample, "xi")
    xi1 = least_squares_coeffs(basis, xi)
    return xi1, xi - basis @ xi1


@dataclass(frozen=True, eq=False)
class UncertaintySplit:
    """Per-sample decomposition of an uncertainty along a trajectory."""

    basis: np.ndarray
    xi1: np.ndarray
    xi2: np.ndarray

    @classmethod
    def along(cls, P, F, xi_samples):
        P = as_matrix(P, "P")
        F = as_matrix(F, "F")
        basis = np.linalg.solve(P, F.T)
        xi_samples = np.atleast_2d(np.asarray(xi_samples, dtype=np.float64))
        gram = basis.T @ basis
        least_squares_coeffs(basis, xi_samples[0])  # rank check
        xi1 = np.linalg.solve(gram, basis.T @ xi_samples.T).T
        xi2 = xi_samples - xi1 @ basis.T
        return cls(basis, xi1, xi2)

    def reassembled(self):
        return self.xi1 @ self.basis.T + self.xi2


def lipschitz_audit(f, box, pairs=10_000, seed=0, u=0.0):
    """Largest observed ratio ||f(x1,u) - f(x2,u)|| / ||x1 - x2|| over random pairs in ``box``."""
    lo, hi = (np.asarray(b, dtype=np.float64) for b in box)
    rng = np.random.default_rng(seed)
    x1 = rng.uniform(lo, hi, size=(pairs, lo.size))
    x2 = rng.uniform(lo, hi, size=(pairs, lo.size))
    uu = np.atleast_1d(u).astype(np.float64)
    f1 = (f.G @ uu)[None, :] + np.sin(x1) @ f.S.T + np.cos(x1) @ f.Cc.T
    f2 = (f.G @ uu)[None, :] + np.sin(x2) @ f.S.T + np.cos(x2) @ f.Cc.T
    d = np.linalg.norm(x1 - x2, axis=1)
    keep = d > 0
    return float(np.max(np.linalg.norm(f1 - f2, axis=1)[keep] / d[keep]))
