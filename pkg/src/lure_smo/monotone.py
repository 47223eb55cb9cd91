"""Scalar maximal monotone operators for the Lur'e feedback.

An operator is a monotone branch on R \\ {0} plus a jump interval at the
origin.  Branches are kind-coded (``RELAY`` or ``FRICTION``) with a fixed
six-slot parameter vector so the time-stepping kernels can evaluate them
without Python callbacks.  Slot 0 always holds a linear term, which is how
a loop transformation is represented.

    RELAY     [lin, a, b, -, -, -]       sign(x)(a|x| + b) + lin*x
    FRICTION  [lin, Tsl, T1, T2, w1, w2] (Tsl + T1 s(w1|x|) + T2 s(w2|x|)) sign(x) + lin*x

with the sigmoid ``s(z) = 1 - 2/(1 + e^z) = tanh(z/2)``.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from ._accel import njit
from .errors import NonConvergenceError, ParameterError

__all__ = [
    "RELAY",
    "FRICTION",
    "ScalarMonotoneOp",
    "DiagonalOperator",
    "ProbeResult",
    "relay_affine",
    "rotor_friction",
    "loop_transform",
    "min_norm_selection",
    "regularized_selection",
    "resolvent",
    "monotonicity_probe",
    "sign_field",
    "regularized_sign",
]

RELAY = 0
FRICTION = 1
NPARAM = 6


# -- kernels -----------------------------------------------------------------


@njit
def branch_value(kind, prm, x):
    if kind == RELAY:
        base = prm[1] * abs(x) + prm[2]
    else:
        ax = abs(x)
        base = prm[1] + prm[2] * np.tanh(0.5 * prm[4] * ax) + prm[3] * np.tanh(0.5 * prm[5] * ax)
    if x > 0.0:
        return base + prm[0] * x
    return -base + prm[0] * x


@njit
def selection_value(kind, prm, jlo, jhi, x):
    """Minimal-norm element of op(x)."""
    if x != 0.0:
        return branch_value(kind, prm, x)
    if jlo > 0.0:
        return jlo
    if jhi < 0.0:
        return jhi
    return 0.0


@njit
def regularized_value(kind, prm, jlo, jhi, x, sigma):
    """Branch outside ``|x| < sigma``, linear interpolation inside."""
    if abs(x) >= sigma:
        return branch_value(kind, prm, x)
    lo = branch_value(kind, prm, -sigma)
    hi = branch_value(kind, prm, sigma)
    return lo + (x + sigma) / (2.0 * sigma) * (hi - lo)


@njit
def resolvent_value(kind, prm, jlo, jhi, lam, y):
    """Unique x with y in x + lam*op(x), by bisection.

    Returns NaN if no sign change is found within 200 bracket doublings.
    """
    if lam * jlo <= y <= lam * jhi:
        return 0.0
    m = max(abs(jlo), abs(jhi))
    r = abs(y) + 1.0
    m = max(m, abs(branch_value(kind, prm, r)), abs(branch_value(kind, prm, -r)))
    width = lam * m + 1e-12
    lo = y - width
    hi = y + width
    ok = False
    for _ in range(200):
        rlo = lo + lam * selection_value(kind, prm, jlo, jhi, lo) - y
        rhi = hi + lam * selection_value(kind, prm, jlo, jhi, hi) - y
        if rlo <= 0.0 and rhi >= 0.0:
            ok = True
            break
        if rlo > 0.0:
            lo = y - 2.0 * (y - lo)
        if rhi < 0.0:
            hi = y + 2.0 * (hi - y)
    if not ok:
        return np.nan
    # the root lies on one side of the origin, so keep the bracket there
    if y > lam * jhi:
        lo = max(lo, 0.0)
    else:
        hi = min(hi, 0.0)
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if mid == 0.0:
            mid = 0.5 * hi if hi > 0.0 else 0.5 * lo
        rm = mid + lam * branch_value(kind, prm, mid) - y
        if rm > 0.0:
            hi = mid
        elif rm < 0.0:
            lo = mid
        else:
            return mid
    return 0.5 * (lo + hi)


@njit
def regularized_sign_into(v, sigma, out):
    """Sign field v/||v|| with a linear layer ``v/sigma`` inside ``||v|| < sigma``."""
    nrm = 0.0
    for i in range(v.shape[0]):
        nrm += v[i] * v[i]
    nrm = np.sqrt(nrm)
    d = nrm if nrm >= sigma else sigma
    for i in range(v.shape[0]):
        out[i] = v[i] / d


# -- python surface ----------------------------------------------------------


@dataclass(frozen=True)
class ScalarMonotoneOp:
    """Maximal monotone map R => R: kind-coded branch plus jump at 0."""

    kind: int
    params: tuple
    jump_lo: float
    jump_hi: float
    label: str = ""
    _prm: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        prm = np.zeros(NPARAM)
        prm[: len(self.params)] = self.params
        object.__setattr__(self, "params", tuple(float(p) for p in prm))
        object.__setattr__(self, "_prm", prm)
        if self.jump_lo > self.jump_hi:
            raise ParameterError(f"jump_lo {self.jump_lo} > jump_hi {self.jump_hi}")

    @property
    def prm(self):
        return self._prm

    @property
    def linear_coefficient(self):
        return self.params[0]

    def branch(self, x):
        return _vectorize(lambda s: branch_value(self.kind, self._prm, s), x)

    def selection(self, x):
        return _vectorize(
            lambda s: selection_value(self.kind, self._prm, self.jump_lo, self.jump_hi, s), x
        )

    def __call__(self, x):
        """Set value at ``x`` as a closed interval ``(lo, hi)``."""
        x = float(x)
        if x == 0.0:
            return (self.jump_lo, self.jump_hi)
        b = float(branch_value(self.kind, self._prm, x))
        return (b, b)

    def to_dict(self):
        if self.kind == RELAY:
            d = {"type": "relay_affine", "a": self.params[1], "b": self.params[2]}
        else:
            tsl, t1, t2, w1, w2 = self.params[1:]
            d = {"type": "rotor_friction", "Tsl": tsl, "T1": t1, "T2": t2, "w1": w1, "w2": w2}
        d["linear"] = self.params[0]
        return d


def _vectorize(f, x):
    if np.ndim(x) == 0:
        return float(f(float(x)))
    arr = np.asarray(x, dtype=np.float64)
    return np.array([f(float(s)) for s in arr.ravel()]).reshape(arr.shape)


@dataclass(frozen=True)
class DiagonalOperator:
    """Diagonal product of scalar operators acting on R^m componentwise."""

    ops: tuple

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))

    @property
    def dim(self):
        return len(self.ops)

    def selection(self, z):
        z = np.asarray(z, dtype=np.float64).reshape(-1)
        return np.array([op.selection(float(s)) for op, s in zip(self.ops, z)])

    def regularized(self, z, sigma):
        z = np.asarray(z, dtype=np.float64).reshape(-1)
        return np.array([regularized_selection(op, float(s), sigma) for op, s in zip(self.ops, z)])

    def packed(self):
        """Kernel arrays ``(kinds, params, jlo, jhi)``."""
        kinds = np.array([op.kind for op in self.ops], dtype=np.int64)
        prm = np.array([op.prm for op in self.ops]).reshape(len(self.ops), NPARAM)
        jlo = np.array([op.jump_lo for op in self.ops], dtype=np.float64)
        jhi = np.array([op.jump_hi for op in self.ops], dtype=np.float64)
        return kinds, prm, jlo, jhi


def relay_affine(a, b, label=None):
    """``sign(x)(a|x| + b)`` with jump interval ``[-b, b]``."""
    if a < 0 or b < 0:
        raise ParameterError(f"relay_affine needs a >= 0 and b >= 0, got a={a}, b={b}")
    return ScalarMonotoneOp(
        RELAY, (0.0, a, b), -float(b), float(b), label or f"relay_affine({a:g},{b:g})"
    )


def rotor_friction(Tsl, T1, T2, w1, w2, bl, label=None):
    """Lower-disc friction law of a drill-string rotor.

    ``T(x) = [Tsl + T1 s(w1|x|) + T2 s(w2|x|)] sign(x) + bl x`` for x != 0
    and ``[-Tsl, Tsl]`` at 0.  Not monotone for every parameter set; see
    :func:`monotonicity_probe` and :func:`loop_transform`.
    """
    return ScalarMonotoneOp(
        FRICTION, (bl, Tsl, T1, T2, w1, w2), -float(Tsl), float(Tsl), label or "rotor_friction"
    )


def loop_transform(op, m):
    """``op(x) - m x``; the jump interval is unchanged."""
    if m == 0:
        return op
    prm = list(op.params)
    prm[0] -= m
    return replace(op, params=tuple(prm), label=f"{op.label}-({m:g})x")


def min_norm_selection(op, x):
    return op.selection(x)


def regularized_selection(op, x, sigma):
    if sigma <= 0:
        raise ParameterError("sigma must be positive")
    return float(regularized_value(op.kind, op.prm, op.jump_lo, op.jump_hi, float(x), float(sigma)))


def resolvent(op, lam, y):
    """``(I + lam*op)^{-1}(y)``."""
    if lam <= 0:
        raise ParameterError("lambda must be positive")
    x = resolvent_value(op.kind, op.prm, op.jump_lo, op.jump_hi, float(lam), float(y))
    if np.isnan(x):
        raise NonConvergenceError(
            f"resolvent bracket for {op.label!r} did not close after 200 doublings; "
            "is the operator monotone?"
        )
    return float(x)


@dataclass(frozen=True)
class ProbeResult:
    passed: bool
    min_product: float
    worst_pair: tuple

    def __bool__(self):
        return self.passed


def monotonicity_probe(op, domain=(-10.0, 10.0), samples=1000, seed=0, threshold=-1e-9):
    """Random-pair monotonicity test on ``domain``.

    Draws ``samples`` pairs and reports the smallest
    ``(sel(y) - sel(x)) * (y - x)`` together with the pair achieving it.
    """
    if samples < 2:
        raise ParameterError("samples must be >= 2")
    rng = np.random.default_rng(seed)
    lo, hi = domain
    pairs = rng.uniform(lo, hi, size=(samples, 2))
    x, y = pairs[:, 0], pairs[:, 1]
    prod = (op.selection(y) - op.selection(x)) * (y - x)
    k = int(np.argmin(prod))
    worst = float(prod[k])
    return ProbeResult(worst >= threshold, worst, (float(x[k]), float(y[k])))


def sign_field(v):
    """Sign(v) = v/||v||; at 0 returns the zero vector (minimal-norm element of the ball)."""
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    nrm = np.linalg.norm(v)
    return v / nrm if nrm > 0 else np.zeros_like(v)


def regularized_sign(v, sigma):
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    out = np.empty_like(v)
    regularized_sign_into(v, float(sigma), out)
    return out
