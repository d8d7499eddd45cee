"""Hierarchy specifications, the Q_{b,j} recursion, named flows, vacua and
zero-curvature residuals.

A flow is fixed by a traceless diagonal ``a``, a diagonal ``b`` commuting
with it, and an index ``j``.  Its Lax pair is

    A = a*lam + u,    B = b*lam**j + Q_{b,1} lam**(j-1) + ... + Q_{b,j},

and the flow itself reads ``u_t = [Q_{b,j+1}, a]``.  The -1 flow uses the
pair ``(a*lam + u, lam**-1 g^{-1} b g)``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import fd
from .errors import (GridMismatch, LambdaZeroAtMinusOneFlow, NotPolynomialInA,
                     UnknownFlow)
from .fd import Grid
from .linalg import JSignature, comm

CLUSTER_TOL = 1e-10


class Reality(str, enum.Enum):
    SLNC = "slnc"
    UN = "un"
    UKJ = "ukj"
    TWISTED = "twisted"
    KDV = "kdv"
    KW = "kw"
    GD = "gd"


def root_of_unity_diag(n: int) -> np.ndarray:
    """diag(1, w, ..., w^{n-1}) with w = exp(2 pi i / n), using exact trig."""
    k = np.arange(n)
    return np.cos(2 * np.pi * k / n) + 1j * np.sin(2 * np.pi * k / n)


@dataclass(frozen=True)
class HierarchySpec:
    """Which flow of which hierarchy.  ``a`` and ``b`` are diagonal entries."""

    a: np.ndarray
    b: np.ndarray
    j: int
    reality: Reality = Reality.SLNC
    J: JSignature | None = field(default=None)

    def __post_init__(self):
        a = np.asarray(self.a, dtype=complex)
        b = np.asarray(self.b, dtype=complex)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "reality", Reality(self.reality))
        if a.shape != b.shape or a.ndim != 1:
            raise ValueError("a and b must be diagonal entry vectors of equal length")
        if abs(a.sum()) > 1e-12 * max(1.0, np.abs(a).max()):
            raise ValueError("a must be traceless")
        if self.j == 0 or self.j < -1:
            raise ValueError("flow index must be >= 1 or -1")
        r = self.reality
        if r is Reality.UN and (np.abs(a.real).max() > 1e-14 or np.abs(b.real).max() > 1e-14):
            raise ValueError("u(n) reality needs skew-Hermitian a and b")
        if r is Reality.UKJ and self.J is None:
            raise ValueError("u(k, n-k) reality needs a signature J")
        if r is Reality.KDV and (a.size != 2 or not np.allclose(a, [1, -1])):
            raise ValueError("KdV reality needs a = diag(1, -1)")
        if r in (Reality.KW, Reality.GD) and not np.allclose(a, root_of_unity_diag(a.size), atol=1e-14):
            raise ValueError("KW/GD reality needs a = diag(1, w, ..., w^{n-1})")

    @property
    def n(self) -> int:
        return self.a.size

    @property
    def A(self) -> np.ndarray:
        return np.diag(self.a)

    @property
    def B(self) -> np.ndarray:
        return np.diag(self.b)

    # convenient named hierarchies -------------------------------------
    @classmethod
    def nls(cls, j: int = 2) -> "HierarchySpec":
        """su(2) with a = b = diag(i, -i); j=2 is the focusing NLS."""
        a = np.array([1j, -1j])
        return cls(a, a, j, Reality.UN)

    @classmethod
    def su(cls, n: int, j: int = 2, a=None, b=None) -> "HierarchySpec":
        """u(n) hierarchy, by default a = b = diag(i, -i, ..., -i) shifted to be traceless."""
        if a is None:
            a = np.array([1j] + [-1j] * (n - 1))
            a = a - a.mean()
        a = np.asarray(a, dtype=complex)
        return cls(a, a if b is None else b, j, Reality.UN)

    @classmethod
    def sine_gordon(cls, beta: float = -0.25) -> "HierarchySpec":
        """-1 flow with a = diag(i, -i) and b = beta * a."""
        a = np.array([1j, -1j])
        return cls(a, beta * a, -1, Reality.TWISTED)

    @classmethod
    def kdv(cls) -> "HierarchySpec":
        a = np.array([1.0, -1.0], dtype=complex)
        return cls(a, a, 3, Reality.KDV)

    @classmethod
    def kw(cls, n: int) -> "HierarchySpec":
        a = root_of_unity_diag(n)
        a = a - a.mean()  # already traceless; removes rounding
        return cls(a, a, n + 1, Reality.KW)


@dataclass(frozen=True)
class FieldSample:
    """Samples of a field on a grid; ``values[it, ix, ...]``."""

    grid: Grid
    values: np.ndarray


# ---------------------------------------------------------------------------
# Q recursion

def _clusters(a: np.ndarray, tol: float = CLUSTER_TOL) -> list[complex]:
    reps: list[complex] = []
    for v in a:
        if not any(abs(v - r) <= tol * max(1.0, abs(r)) for r in reps):
            reps.append(complex(v))
    return reps


def _same_block(a: np.ndarray, tol: float = CLUSTER_TOL) -> np.ndarray:
    return np.abs(a[:, None] - a[None, :]) <= tol * np.maximum(1.0, np.abs(a)[:, None])


def b_polynomial(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Coefficients c (lowest degree first) with b = sum c_k a^k."""
    reps = _clusters(a)
    vals = []
    for r in reps:
        idx = [i for i in range(a.size) if abs(a[i] - r) <= CLUSTER_TOL * max(1.0, abs(r))]
        bv = b[idx]
        if np.ptp(bv.real) + np.ptp(bv.imag) > 1e-12:
            raise NotPolynomialInA("b is not constant on an eigenspace of a")
        vals.append(bv[0])
    V = np.vander(np.array(reps), increasing=True)
    return np.linalg.solve(V, np.array(vals))


def _series_mul(S, T, upto):
    out = []
    for m in range(upto + 1):
        acc = 0
        for p in range(m + 1):
            acc = acc + S[p] @ T[m - p]
        out.append(acc)
    return out


def q_series_a(a: np.ndarray, u: np.ndarray, hx: float, upto: int, accuracy: int = 4,
               axis: int = -3) -> list[np.ndarray]:
    """Q_{a,0}, ..., Q_{a,upto} for a field ``u`` of shape (..., nx, n, n).

    Off-diagonal parts come from ad(a)^{-1}; diagonal parts from the
    minimal-polynomial identity f(a + Q_1/lam + ...) = 0.
    """
    u = np.asarray(u, dtype=complex)
    n = a.size
    A = np.broadcast_to(np.diag(a), u.shape).astype(complex)
    same = _same_block(a)
    diff = a[:, None] - a[None, :]
    safe = np.where(same, 1.0, diff)
    reps = _clusters(a)
    # f'(a_i) = prod_{c != a_i} (a_i - c)
    fprime = np.array([np.prod([ai - c for c in reps if abs(ai - c) > CLUSTER_TOL * max(1, abs(c))])
                       for ai in a])
    Q = [A, u.copy()]
    I = np.eye(n)
    for m in range(1, upto):
        R = fd.d1(Q[m], hx, axis=axis, accuracy=accuracy) + comm(u, Q[m])
        P = np.where(same, 0.0, -R / safe)
        # coefficient of lam^{-(m+1)} in prod_c (S - c), S = a + sum_{k<=m} Q_k lam^{-k}
        zero = np.zeros_like(u)
        prod = None
        for c in reps:
            S = [Q[0] - c * I] + [Q[k] for k in range(1, m + 1)] + [zero]
            prod = S if prod is None else _series_mul(prod, S, m + 1)
        N = prod[m + 1]
        T = np.where(same, -N / fprime[:, None], 0.0)
        Q.append(P + T)
    return Q[: upto + 1]


def q_coefficients(spec: HierarchySpec, u: np.ndarray, hx: float, upto: int,
                   accuracy: int = 4, axis: int = -3) -> list[np.ndarray]:
    """Q_{b,0}, ..., Q_{b,upto} for ``b`` a polynomial in ``a``."""
    c = b_polynomial(spec.a, spec.b)
    Qa = q_series_a(spec.a, u, hx, upto, accuracy, axis)
    I = np.broadcast_to(np.eye(spec.n), Qa[0].shape).astype(complex)
    zero = np.zeros_like(Qa[0])
    power = [I] + [zero] * upto
    total = [c[0] * I] + [zero] * upto
    for ck in c[1:]:
        power = _series_mul(power, Qa, upto)
        total = [tk + ck * pk for tk, pk in zip(total, power)]
    return total


def recursion_defect(a: np.ndarray, u: np.ndarray, Q: list[np.ndarray], hx: float,
                     accuracy: int = 4, axis: int = -3) -> list[np.ndarray]:
    """(Q_i)_x + [u, Q_i] - [Q_{i+1}, a] for each available i."""
    Am = np.diag(a)
    return [fd.d1(Q[i], hx, axis=axis, accuracy=accuracy) + comm(u, Q[i]) - comm(Q[i + 1], Am)
            for i in range(len(Q) - 1)]


def sl2_table(q, r, qx, rx, qxx, rxx):
    """Closed-form Q_{a,2}, Q_{a,3} for sl(2) with a = diag(1,-1), u = [[0,q],[r,0]]."""
    Q2 = np.stack([np.stack([-q * r / 2, -qx / 2], -1), np.stack([rx / 2, q * r / 2], -1)], -2)
    w = (q * rx - r * qx) / 4
    Q3 = np.stack([np.stack([-w, (qxx - 2 * q * q * r) / 4], -1),
                   np.stack([(rxx - 2 * q * r * r) / 4, w], -1)], -2)
    return Q2, Q3


def flow_from_recursion(spec: HierarchySpec, u: np.ndarray, hx: float, accuracy: int = 4,
                        axis: int = -3) -> np.ndarray:
    """u_t = [Q_{b,j+1}, a] evaluated through the generic recursion."""
    Q = q_coefficients(spec, u, hx, spec.j + 1, accuracy, axis)
    return comm(Q[spec.j + 1], spec.A)


# ---------------------------------------------------------------------------
# named flows

def _qx(q, hx, k, accuracy):
    return [fd.d1, fd.d2, fd.d3][k - 1](q, hx, axis=-1, accuracy=accuracy)


def _nls(q, hx, acc):
    return 0.5j * (_qx(q, hx, 2, acc) + 2 * np.abs(q) ** 2 * q)


def _nls_defocusing(q, hx, acc):
    return 0.5j * (_qx(q, hx, 2, acc) - 2 * np.abs(q) ** 2 * q)


def _nls3(q, hx, acc):
    return -0.25 * (_qx(q, hx, 3, acc) + 6 * np.abs(q) ** 2 * _qx(q, hx, 1, acc))


def _mkdv(q, hx, acc):
    return -0.25 * (_qx(q, hx, 3, acc) - 6 * q**2 * _qx(q, hx, 1, acc))


def _mkdv_h2(q, hx, acc):
    return 0.25 * (_qx(q, hx, 3, acc) + 6 * q**2 * _qx(q, hx, 1, acc))


def _mkdv_complex(q, hx, acc):
    return 0.25 * (_qx(q, hx, 3, acc) - 6 * q**2 * _qx(q, hx, 1, acc))


def _kdv(q, hx, acc):
    return 0.25 * (_qx(q, hx, 3, acc) - 6 * q * _qx(q, hx, 1, acc))


def _matrix_nls(q, hx, acc):
    # q has shape (..., nx, k, n-k); derivatives along the x axis
    qxx = fd.d2(q, hx, axis=-3, accuracy=acc)
    qs = np.conj(np.swapaxes(q, -1, -2))
    return 0.5j * (qxx + 2 * q @ qs @ q)


SCALAR_FLOWS = {
    "nls": _nls,
    "nls-defocusing": _nls_defocusing,
    "nls3": _nls3,
    "mkdv": _mkdv,
    "mkdv-h2": _mkdv_h2,
    "mkdv-complex": _mkdv_complex,
    "kdv": _kdv,
}


def n_wave_rhs(a: np.ndarray, b: np.ndarray, u: np.ndarray, hx: float, accuracy: int = 4) -> np.ndarray:
    """Right-hand side of the n-wave equation for u of shape (..., nx, n, n)."""
    n = a.size
    ux = fd.d1(u, hx, axis=-3, accuracy=accuracy)
    out = np.zeros_like(u, dtype=complex)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            acc = (b[i] - b[j]) / (a[i] - a[j]) * ux[..., i, j]
            for k in range(n):
                if k in (i, j):
                    continue
                c = (b[k] - b[j]) / (a[k] - a[j]) - (b[i] - b[k]) / (a[i] - a[k])
                acc = acc + c * u[..., i, k] * u[..., k, j]
            out[..., i, j] = acc
    return out


def flow_rhs(name: str, q: np.ndarray, hx: float, accuracy: int = 4, **kw) -> np.ndarray:
    """Time derivative prescribed by a named flow, x-derivatives by finite differences.

    Scalar flows take q of shape (..., nx).  ``matrix-nls`` takes (..., nx, k, m).
    ``n-wave`` takes (..., nx, n, n) and keyword arrays ``a`` and ``b``.
    ``sine-gordon`` returns sin q, the value prescribed for q_xt.
    """
    if name in SCALAR_FLOWS:
        return SCALAR_FLOWS[name](np.asarray(q), hx, accuracy)
    if name == "matrix-nls":
        return _matrix_nls(np.asarray(q, dtype=complex), hx, accuracy)
    if name == "n-wave":
        return n_wave_rhs(np.asarray(kw["a"]), np.asarray(kw["b"]), np.asarray(q, dtype=complex), hx, accuracy)
    if name == "sine-gordon":
        return np.sin(q)
    raise UnknownFlow(name)


FLOW_NAMES = tuple(SCALAR_FLOWS) + ("matrix-nls", "n-wave", "sine-gordon")


# ---------------------------------------------------------------------------
# vacuum and Lax pairs

def vacuum_trivialization(spec: HierarchySpec):
    """Evaluator (x, t, lam) -> exp(a lam x + b lam^j t), batched over x, t."""

    def E(x, t, lam):
        lam = complex(lam)
        if spec.j == -1 and lam == 0:
            raise LambdaZeroAtMinusOneFlow("lambda = 0 is a pole for the -1 flow")
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        ph = (spec.a * lam) * x[..., None] + (spec.b * lam ** spec.j) * t[..., None]
        d = np.exp(ph)
        return d[..., :, None] * np.eye(spec.n)

    return E


def vacuum_diag(spec: HierarchySpec, x, t, lam) -> np.ndarray:
    """Diagonal of the vacuum trivialization, shape (..., n)."""
    lam = complex(lam)
    if spec.j == -1 and lam == 0:
        raise LambdaZeroAtMinusOneFlow("lambda = 0 is a pole for the -1 flow")
    x = np.asarray(x, dtype=float)[..., None]
    t = np.asarray(t, dtype=float)[..., None]
    return np.exp(spec.a * lam * x + spec.b * lam ** spec.j * t)


def lax_pair(spec: HierarchySpec, u: np.ndarray, hx: float, lam: complex,
             accuracy: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """A = a lam + u and B = sum_i Q_{b,i} lam^{j-i}, for j >= 1."""
    Q = q_coefficients(spec, u, hx, spec.j, accuracy)
    A = spec.A * lam + u
    B = sum(Q[i] * lam ** (spec.j - i) for i in range(spec.j + 1))
    return A, B


def zero_curvature_residual(A: np.ndarray, B: np.ndarray, grid: Grid, accuracy: int = 2,
                            margin: int = 2) -> float:
    """max |B_x - A_t + [A, B]| over the grid interior."""
    if A.shape != B.shape or A.shape[:2] != grid.shape:
        raise GridMismatch(f"A {A.shape}, B {B.shape}, grid {grid.shape}")
    R = fd.d1(B, grid.hx, axis=1, accuracy=accuracy) - fd.d1(A, grid.ht, axis=0, accuracy=accuracy) + comm(A, B)
    sl = fd.interior(margin, R.shape)
    return float(np.max(np.abs(R[sl]), initial=0.0))
