"""Small dense symmetric linear algebra.

Everything here is sized for the n <= ~10 matrices of observer design:
eigenvalues come from a cyclic Jacobi sweep, which is unconditionally
convergent on symmetric input and needs no LAPACK.
"""

from dataclasses import dataclass

import numpy as np

from ._accel import njit
from .errors import DimensionError, SingularityError

__all__ = [
    "SymEig",
    "NSDResult",
    "as_matrix",
    "as_vector",
    "sym_eigenvalues",
    "spectral_norm",
    "is_negative_semidefinite",
    "least_squares_coeffs",
    "projection_onto_columns",
]


@dataclass(frozen=True)
class SymEig:
    values: np.ndarray
    vectors: np.ndarray
    symmetrized: bool = False

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)

    @property
    def min(self):
        return float(self.values[0])

    @property
    def max(self):
        return float(self.values[-1])


@dataclass(frozen=True)
class NSDResult:
    ok: bool
    witness: float
    symmetrized: bool = False

    def __bool__(self):
        return self.ok


def as_matrix(M, name="matrix"):
    """Coerce to a finite 2-D float64 array (1-D input becomes a row)."""
    a = np.array(M, dtype=np.float64)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(1, -1)
    elif a.ndim != 2:
        raise DimensionError(f"{name}: expected 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name}: non-finite entries")
    return a


def as_vector(v, name="vector"):
    a = np.array(v, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name}: non-finite entries")
    return a


@njit
def jacobi_eigh(S, rel_tol):
    """Cyclic Jacobi eigen-decomposition of a symmetric matrix.

    Returns ``(w, V)`` with ascending eigenvalues ``w`` and orthonormal
    eigenvectors in the columns of ``V``.  Sweeps stop once the
    off-diagonal Frobenius mass drops below ``rel_tol * ||S||_F``.
    """
    n = S.shape[0]
    a = S.copy()
    v = np.eye(n)
    scale = 0.0
    for i in range(n):
        for j in range(n):
            scale += a[i, j] * a[i, j]
    scale = np.sqrt(scale)
    thresh = rel_tol * scale
    for _sweep in range(100):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += 2.0 * a[i, j] * a[i, j]
        if np.sqrt(off) <= thresh or off == 0.0:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + np.sqrt(1.0 + theta * theta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    w = np.empty(n)
    for i in range(n):
        w[i] = a[i, i]
    order = np.argsort(w)
    return w[order], v[:, order]


def _square(M, name):
    a = as_matrix(M, name)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name}: expected a square matrix, got {a.shape}")
    return a


def _symmetrize(a, tol):
    asym = float(np.max(np.abs(a - a.T))) if a.size else 0.0
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    return 0.5 * (a + a.T), asym > tol * scale


def sym_eigenvalues(M, tol=1e-12):
    """Ascending eigenvalues (and eigenvectors) of a symmetric matrix.

    Input that is not symmetric within ``tol`` is replaced by its
    symmetric part and ``symmetrized`` is set on the result.
    """
    a = _square(M, "M")
    s, flagged = _symmetrize(a, tol)
    if s.shape[0] == 0:
        return SymEig(np.empty(0), np.empty((0, 0)), flagged)
    w, v = jacobi_eigh(s, 1e-14)
    return SymEig(w, v, flagged)


def spectral_norm(M):
    """Largest singular value."""
    a = as_matrix(M, "M")
    if a.size == 0:
        return 0.0
    gram = a.T @ a if a.shape[1] <= a.shape[0] else a @ a.T
    w, _ = jacobi_eigh(0.5 * (gram + gram.T), 1e-15)
    return float(np.sqrt(max(w[-1], 0.0)))


def is_negative_semidefinite(M, tol=None):
    """``M <= 0`` test; the witness is the largest eigenvalue.

    The default tolerance is ``1e-9 * max(1, ||M||)``.
    """
    a = _square(M, "M")
    eig = sym_eigenvalues(a)
    if tol is None:
        tol = 1e-9 * max(1.0, float(np.max(np.abs(eig.values))))
    witness = eig.max
    return NSDResult(bool(witness <= tol), witness, eig.symmetrized)


def least_squares_coeffs(M, v):
    """Coefficients ``c`` with ``M @ c`` the orthogonal projection of ``v``.

    Raises SingularityError when the Gram matrix ``M.T @ M`` has reciprocal
    condition number below 1e-12.
    """
    a = as_matrix(M, "M")
    if a.ndim == 2 and a.shape[0] == 1 and np.ndim(M) == 1:
        a = a.T  # a bare 1-D sequence is a single column
    b = as_vector(v, "v")
    if a.shape[0] != b.shape[0]:
        raise DimensionError(f"M has {a.shape[0]} rows but v has length {b.shape[0]}")
    gram = a.T @ a
    w, _ = jacobi_eigh(gram, 1e-15)
    if w[-1] <= 0.0 or w[0] / w[-1] < 1e-12:
        raise SingularityError(
            f"Gram matrix M^T M ({gram.shape[0]}x{gram.shape[0]}) is singular "
            f"(eigenvalues {w[0]:.3g} .. {w[-1]:.3g}); M must have full column rank"
        )
    return np.linalg.solve(gram, a.T @ b)


def projection_onto_columns(M, v):
    a = as_matrix(M, "M")
    return a @ least_squares_coeffs(a, v)
