"""Certification of the observer matrix conditions.

For given (P, L, K, eps) the observer requires

    P(A - LF) + (A - LF)^T P + 2 L_f ||P|| I + 2 eps I <= 0        (dissipation)
    B^T P = C - K F                                                (range)

and, for the L2 gain, the block condition
``[[Omega, -P], [-P, -2 mu eps I]] <= 0`` with Omega the dissipation matrix.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError
from .linalg import as_matrix, is_negative_semidefinite, spectral_norm, sym_eigenvalues

__all__ = [
    "Assumption3Report",
    "dissipation_matrix",
    "check_assumption3",
    "max_admissible_eps",
    "check_assumption5",
    "suggest_mu",
    "effective_eps",
    "hinf_certificate",
]

PUBLISHED_RANGE_TOL = 1e-2
EXACT_RANGE_TOL = 1e-9


def _mats(A, F, P, L):
    A = as_matrix(A, "A")
    F = as_matrix(F, "F")
    P = as_matrix(P, "P")
    L = as_matrix(L, "L")
    if np.ndim(L) == 2 and L.shape[0] == 1 and A.shape[0] != 1:
        L = L.T
    n = A.shape[0]
    if A.shape != (n, n) or P.shape != (n, n):
        raise DimensionError(f"A and P must be {n}x{n}, got {A.shape} and {P.shape}")
    if L.shape != (n, F.shape[0]) or F.shape[1] != n:
        raise DimensionError(f"L must be {n}x{F.shape[0]} and F must have {n} columns")
    return A, F, P, L


def _require_pd(P):
    eig = sym_eigenvalues(P)
    if eig.min <= 0:
        raise ParameterError(f"P is not positive definite (min eigenvalue {eig.min:.6g})")
    return eig


def dissipation_matrix(A, F, P, L, L_f, eps=0.0):
    """``P(A-LF) + (A-LF)^T P + 2 L_f ||P|| I + 2 eps I`` (symmetrized)."""
    A, F, P, L = _mats(A, F, P, L)
    Acl = A - L @ F
    M = P @ Acl + Acl.T @ P
    M = 0.5 * (M + M.T)
    n = A.shape[0]
    return M + (2.0 * L_f * spectral_norm(P) + 2.0 * eps) * np.eye(n)


@dataclass(frozen=True)
class Assumption3Report:
    ineq_ok: bool
    range_ok: bool
    witness_eig: float
    range_residual: float
    eps: float
    tol: float

    @property
    def ok(self):
        return self.ineq_ok and self.range_ok

    def summary(self):
        a = "PASS" if self.ineq_ok else "FAIL"
        b = "PASS" if self.range_ok else "FAIL"
        return (
            f"Eq.(7): {a} (witness {self.witness_eig:.3f}); "
            f"Eq.(8): {b} (residual {self.range_residual:.3g})"
        )


def check_assumption3(A, F, B, C, P, L, K, L_f, eps, tol=EXACT_RANGE_TOL, ineq_tol=None):
    """Dissipation inequality and range equality for a candidate (P, L, K, eps).

    ``tol`` bounds the range residual ``max |B^T P - (C - K F)|``;
    ``ineq_tol`` bounds the largest eigenvalue of the dissipation matrix
    (default ``1e-9 max(1, ||M||)``).
    """
    A, F, P, L = _mats(A, F, P, L)
    _require_pd(P)
    B = as_matrix(B, "B")
    if np.ndim(B) == 1 or (B.shape[0] == 1 and A.shape[0] != 1):
        B = B.T
    C = as_matrix(C, "C")
    K = as_matrix(K, "K")
    if B.shape[0] != A.shape[0] or C.shape != (B.shape[1], A.shape[0]):
        raise DimensionError(f"B {B.shape} and C {C.shape} do not fit A {A.shape}")
    if K.shape != (C.shape[0], F.shape[0]):
        raise DimensionError(f"K must be {C.shape[0]}x{F.shape[0]}, got {K.shape}")
    M = dissipation_matrix(A, F, P, L, L_f, eps)
    nsd = is_negative_semidefinite(M, ineq_tol)
    residual = float(np.max(np.abs(B.T @ P - (C - K @ F))))
    return Assumption3Report(nsd.ok, residual <= tol, nsd.witness, residual, float(eps), tol)


def max_admissible_eps(A, F, P, L, L_f):
    """Largest eps for which the dissipation inequality holds (may be <= 0)."""
    _require_pd(as_matrix(P, "P"))
    M = dissipation_matrix(A, F, P, L, L_f, 0.0)
    return -sym_eigenvalues(M).max / 2.0


def effective_eps(printed_eps, A, F, P, L, L_f):
    """``min(printed, eps*)``: the margin actually certified by the data."""
    return min(float(printed_eps), max_admissible_eps(A, F, P, L, L_f))


def _block(A, F, P, L, L_f, eps, mu):
    if eps <= 0 or mu <= 0:
        raise ParameterError("eps and mu must be positive")
    A, F, P, L = _mats(A, F, P, L)
    n = A.shape[0]
    Om = dissipation_matrix(A, F, P, L, L_f, eps)
    Ps = 0.5 * (P + P.T)
    return np.block([[Om, -Ps], [-Ps, -2.0 * mu * eps * np.eye(n)]])


def check_assumption5(A, F, P, L, L_f, eps, mu, tol=None):
    """Block-matrix condition; returns an NSDResult (truthy on success)."""
    return is_negative_semidefinite(_block(A, F, P, L, L_f, eps, mu), tol)


def suggest_mu(P, eps, Omega, tol=1e-12):
    """``||P||^2 / (4 eps^2)`` (slightly inflated) when ``Omega <= -2 eps I``, else None."""
    if eps <= 0:
        raise ParameterError("eps must be positive")
    lam = sym_eigenvalues(Omega).max
    if lam > -2.0 * eps + tol * max(1.0, abs(lam)):
        return None
    return spectral_norm(P) ** 2 / (4.0 * eps**2) * (1.0 + 1e-3)


def hinf_certificate(A, F, P, L, L_f, eps=None):
    """An (eps, mu) pair satisfying the block condition, or None.

    With ``M0`` the dissipation matrix at eps = 0, ``Omega <= -2 eps I``
    holds for every ``eps <= eps*/2``; the default takes that endpoint
    (capped by ``eps`` when given) and applies :func:`suggest_mu`.
    """
    star = max_admissible_eps(A, F, P, L, L_f)
    if star <= 0:
        return None
    e = star / 2.0 if eps is None else min(float(eps), star / 2.0)
    mu = suggest_mu(P, e, dissipation_matrix(A, F, P, L, L_f, e), tol=1e-9)
    if mu is None:
        return None
    return e, mu
