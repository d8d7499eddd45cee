"""Kupershmidt-Wilson and Gel'fand-Dikii reductions of the sl(n) hierarchy.

KW: A = a lam + u with u in G_0 (circulant with zero diagonal), a =
diag(1, w, ..., w^{n-1}), flow n + 1.  GD: A = a lam + Y_q with
Y_q = b + sum q_i f_i, fixed by Ad(phi_n) tau_n Ad(phi_n)^{-1}.
Both use degree one simple elements a lam + Y acting by
E -> (a lam + Y) E (a lam + Y~)^{-1}.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (LastCoordinateVanishesAt, ResonantPoles, SingularBv, SingularDifference,
                     ZeroK)
from .hierarchy import HierarchySpec, Reality, flow_from_recursion, root_of_unity_diag

N_MAX = 6
SING_RTOL = 1e-10


def omega(n: int) -> complex:
    return complex(root_of_unity_diag(n)[1])


def _check_n(n):
    if not 2 <= n <= N_MAX:
        raise ValueError(f"n must be in [2, {N_MAX}], got {n}")


# ---------------------------------------------------------------------------
# KW


@dataclass(frozen=True)
class CyclicFrame:
    n: int

    def __post_init__(self):
        _check_n(self.n)

    @property
    def w(self) -> complex:
        return omega(self.n)

    @cached_property
    def tau(self) -> np.ndarray:
        """e_21 + e_32 + ... + e_1n, i.e. tau e_i = e_{i+1}."""
        return np.roll(np.eye(self.n), 1, axis=0)

    @cached_property
    def a(self) -> np.ndarray:
        return np.diag(root_of_unity_diag(self.n))

    @property
    def adiag(self) -> np.ndarray:
        return root_of_unity_diag(self.n)

    def component(self, y: np.ndarray, k: int) -> np.ndarray:
        """Projection onto G_k, the w^k eigenspace of Ad(tau^{-1})."""
        ti = self.tau.T
        out = np.zeros_like(y, dtype=complex)
        M = np.asarray(y, dtype=complex)
        for m in range(self.n):
            out = out + self.w ** (-k * m) * M
            M = ti @ M @ self.tau
        return out / self.n

    def membership_defect(self, y: np.ndarray, k: int) -> float:
        """max |y_{i+1,j+1} - w^k y_ij| (indices mod n)."""
        y = np.asarray(y)
        sh = np.roll(np.roll(y, -1, axis=-2), -1, axis=-1)
        return float(np.max(np.abs(sh - self.w**k * y)))

    def reality_defect(self, A_eval, lams) -> float:
        """max |tau^{-1} A(w^{-1} lam) tau - A(lam)|."""
        ti = self.tau.T
        return max(float(np.max(np.abs(ti @ A_eval(lam / self.w) @ self.tau - A_eval(lam)))) for lam in lams)


def zeta(v) -> np.ndarray:
    """(zeta(v))_ij = v_{j-i+1}: the G_0 matrix with first row v."""
    v = np.asarray(v)
    n = v.shape[-1]
    idx = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
    return v[..., idx]


def B_matrix(v) -> np.ndarray:
    """i-th column tau^{-(i-1)} v, so B_ij = v_{i+j-1}."""
    v = np.asarray(v)
    n = v.shape[-1]
    idx = (np.arange(n)[:, None] + np.arange(n)[None, :]) % n
    return v[..., idx]


def _kw_Y(v, k, adiag):
    Bv = B_matrix(v)
    s = np.linalg.svd(Bv, compute_uv=False)
    bad = s[..., -1] <= SING_RTOL * s[..., 0]
    with np.errstate(all="ignore"):
        BaB = Bv * adiag[..., None, :]
        Y = -k * adiag[:, None] * np.swapaxes(np.linalg.solve(np.swapaxes(Bv, -1, -2),
                                                              np.swapaxes(BaB, -1, -2)), -1, -2)
    return Y, bad


@dataclass(frozen=True)
class KWElement:
    """p_{v,k}(lam) = a lam - k a B(v) a B(v)^{-1}."""

    v: np.ndarray
    k: complex

    @property
    def n(self) -> int:
        return len(self.v)

    @cached_property
    def Y(self) -> np.ndarray:
        Y, bad = _kw_Y(np.asarray(self.v, dtype=complex), self.k, root_of_unity_diag(self.n))
        if bad:
            raise SingularBv("B(v) is singular")
        return Y

    def matrix(self, lam) -> np.ndarray:
        return np.diag(root_of_unity_diag(self.n)) * lam + self.Y

    def inverse_numerator(self, lam) -> np.ndarray:
        """p_{a^{-1}v, w k}(lam) ... p_{a^{-(n-1)}v, w^{n-1} k}(lam)."""
        ad = root_of_unity_diag(self.n)
        w = omega(self.n)
        out = np.eye(self.n, dtype=complex)
        for j in range(1, self.n):
            out = out @ KWElement(np.asarray(self.v) * ad ** (-j), self.k * w**j).matrix(lam)
        return out

    def inverse(self, lam) -> np.ndarray:
        return self.inverse_numerator(lam) / (lam**self.n - self.k**self.n)


def kw_simple(v, k) -> KWElement:
    e = KWElement(np.asarray(v, dtype=complex), complex(k))
    e.Y  # raises SingularBv
    return e


def kw_vacuum_E(n, X, T, lam) -> np.ndarray:
    """exp(a lam x + a lam^{n+1} t)."""
    ad = root_of_unity_diag(n)
    X = np.asarray(X, dtype=float)
    T = np.asarray(T, dtype=float)
    ph = np.exp(ad * (lam * X[..., None] + lam ** (n + 1) * T[..., None]))
    return ph[..., :, None] * np.eye(n)


@dataclass(frozen=True)
class KWEvaluation:
    q: np.ndarray  # first rows (..., n), q[..., 0] = 0
    ys: list  # first rows of Y~ for each step
    mask: np.ndarray
    E: dict

    @property
    def u(self) -> np.ndarray:
        return zeta(self.q)


@dataclass(frozen=True)
class KWState:
    n: int
    chain: tuple = ()

    def apply(self, elem: KWElement) -> "KWState":
        return kw_darboux(self, elem.v, elem.k)

    def evaluate(self, X, T, lams=()) -> KWEvaluation:
        n = self.n
        ad = root_of_unity_diag(n)
        X = np.asarray(X, dtype=float)
        T = np.asarray(T, dtype=float)
        keys = list(dict.fromkeys([complex(l) for l in lams] + [complex(e.k) for e in self.chain]))
        Es = {lam: kw_vacuum_E(n, X, T, lam) for lam in keys}
        q = np.zeros(X.shape + (n,), dtype=complex)
        mask = np.zeros(X.shape, dtype=bool)
        ys = []
        for e in self.chain:
            vt = np.linalg.solve(Es[e.k], np.broadcast_to(e.v, X.shape + (n,))[..., None])[..., 0]
            Yt, bad = _kw_Y(vt, e.k, ad)
            mask |= bad
            y = Yt[..., 0, :]
            q = q / ad + y * (1 - 1 / ad)
            ys.append(y)
            for lam in list(Es):
                if abs(lam**n - e.k**n) < 1e-12 * max(1.0, abs(e.k) ** n):
                    del Es[lam]
                    continue
                with np.errstate(all="ignore"):
                    right = np.linalg.inv(np.diag(ad) * lam + Yt)
                    Es[lam] = e.matrix(lam) @ Es[lam] @ right
        return KWEvaluation(q, ys, mask, {complex(l): Es[complex(l)] for l in lams})


def kw_darboux(state: KWState, v, k) -> KWState:
    """q~_j = w^{1-j} q_j + (1 - w^{1-j}) y_j, y = first row of -k a B(v~) a B(v~)^{-1}.

    v~(x, t) = E(x, t, k)^{-1} v.  Nodes where B(v~) is singular are
    reported in the evaluation mask.
    """
    if k == 0:
        raise ZeroK("k must be non-zero")
    e = kw_simple(v, k)
    if len(e.v) != state.n:
        raise ValueError("vector length does not match n")
    for f in state.chain:
        if abs(f.k**state.n - e.k**state.n) < 1e-12:
            raise ResonantPoles("k^n already used in the chain")
    return KWState(state.n, state.chain + (e,))


def kw_flow_residual(q, hx, ht, n, accuracy: int = 4, trim: bool = True) -> np.ndarray:
    """u_t - [Q_{n+2}, a] for u = zeta(q) on a (nt, nx, n) grid.

    With ``trim`` only the interior unaffected by one-sided stencils is
    returned.
    """
    from . import fd

    u = zeta(np.asarray(q, dtype=complex))
    spec = HierarchySpec.kw(n)
    rhs = flow_from_recursion(spec, u, hx, accuracy)
    ut = fd.d1(u, ht, axis=0, accuracy=accuracy)
    r = ut - rhs
    return r[2:-2, 2 * n + 2:-(2 * n + 2)] if trim else r


@dataclass(frozen=True)
class QuadPair:
    Yt: np.ndarray
    Zt: np.ndarray


def kw_quad_relation(Y, Z) -> QuadPair:
    """Y~ = a(Y-Z)a^{-1} Z (Y-Z)^{-1}, Z~ = a(Y-Z)a^{-1} Y (Y-Z)^{-1}.

    (a lam + Y~)(a lam + Y) = (a lam + Z~)(a lam + Z).
    """
    Y = np.asarray(Y, dtype=complex)
    Z = np.asarray(Z, dtype=complex)
    n = Y.shape[-1]
    D = Y - Z
    s = np.linalg.svd(D, compute_uv=False)
    if np.any(s[..., -1] <= SING_RTOL * np.maximum(s[..., 0], 1e-300)):
        raise SingularDifference("Y - Z is singular")
    ad = root_of_unity_diag(n)
    aDa = ad[:, None] * D / ad[None, :]
    Di = np.linalg.inv(D)
    return QuadPair(aDa @ Z @ Di, aDa @ Y @ Di)


def kw_composite(q, xi, eta):
    """The fourth solution from q and two BT solutions xi, eta (first rows).

    xi~ is the first row of a(X - H)a^{-1} H (X - H)^{-1} with X = zeta(xi),
    H = zeta(eta), and q~ = q' a^{-1} + xi~ (I - a^{-1}).
    """
    q = np.asarray(q, dtype=complex)
    n = q.shape[-1]
    ad = root_of_unity_diag(n)
    d = np.asarray(xi) - np.asarray(eta)
    Zd = zeta(d)
    s = np.linalg.svd(Zd, compute_uv=False)
    if np.any(s[..., -1] <= SING_RTOL * np.maximum(s[..., 0], 1e-300)):
        raise SingularDifference("det zeta(xi - eta) vanishes")
    row = (d / ad)[..., None, :] @ zeta(eta)
    xt = np.linalg.solve(np.swapaxes(Zd, -1, -2), np.swapaxes(row, -1, -2))[..., 0]
    qp = q / ad + np.asarray(xi) * (1 - 1 / ad)
    return qp / ad + xt * (1 - 1 / ad), xt


def bt_vector_from_fields(q, q_new, n):
    """y_j for j >= 2 from q~_j = w^{1-j} q_j + (1 - w^{1-j}) y_j."""
    ad = root_of_unity_diag(n)
    y = np.zeros(np.shape(q), dtype=complex)
    y[..., 1:] = (np.asarray(q_new)[..., 1:] - np.asarray(q)[..., 1:] / ad[1:]) / (1 - 1 / ad[1:])
    return y


def _track_roots(coeff_fn, shape, seed, start):
    """Pick, at each node of a (nt, nx) grid, the root continuing its neighbours.

    coeff_fn(i, j) gives polynomial coefficients (highest first).  Rows are
    walked outward from column ``start[1]`` and the reference value is the
    linear extrapolation of the last two picks.  The first row visited
    starts from ``seed``, later rows from the previous row's value(s).
    """
    nt, nx = shape
    out = np.empty(shape, dtype=complex)
    i0, j0 = start

    def pick(i, j, ref):
        r = np.roots(coeff_fn(i, j))
        return r[np.argmin(np.abs(r - ref))]

    def ext(vals):
        return vals[-1] if len(vals) < 2 else 2 * vals[-1] - vals[-2]

    done = []
    for i in list(range(i0, nt)) + list(range(i0 - 1, -1, -1)):
        if i == i0:
            ref = seed
        elif i == i0 - 1:
            ref = out[i0, j0] if i0 + 1 >= nt or i0 + 1 not in done else 2 * out[i0, j0] - out[i0 + 1, j0]
        else:
            step = 1 if i > i0 else -1
            ref = out[i - step, j0] if i - 2 * step not in done else 2 * out[i - step, j0] - out[i - 2 * step, j0]
        out[i, j0] = pick(i, j0, ref)
        for js in (range(j0 + 1, nx), range(j0 - 1, -1, -1)):
            trail = [out[i, j0]]
            for j in js:
                out[i, j] = pick(i, j, ext(trail))
                trail = trail[-1:] + [out[i, j]]
        done.append(i)
    return out


def _first_slot_poly(rest, c, n, build):
    """Coefficients (highest first) of s -> det(build(s)) - c, degree n, by interpolation."""
    nodes = np.exp(2j * np.pi * np.arange(n + 1) / (n + 1))
    vals = []
    for s in nodes:
        r = np.array(rest, dtype=complex)
        r[0] = s
        vals.append(np.linalg.det(build(r)) - c)
    return np.polyfit(nodes, np.array(vals), n)


def kw_algebraic_composite(q, q1, q2, c1, c2, seed1, seed2, start):
    """q~ from q, q', q'' alone, the first coordinates fixed by det zeta = const.

    c1, c2 are the constants det zeta(xi), det zeta(eta); seed1 and seed2
    pick the root at ``start`` and continuity picks it elsewhere.
    """
    q = np.asarray(q, dtype=complex)
    n = q.shape[-1]
    xs = bt_vector_from_fields(q, q1, n)
    es = bt_vector_from_fields(q, q2, n)

    shape = q.shape[:-1]
    x0 = _track_roots(lambda i, j: _first_slot_poly(xs[i, j], c1, n, zeta), shape, seed1, start)
    e0 = _track_roots(lambda i, j: _first_slot_poly(es[i, j], c2, n, zeta), shape, seed2, start)
    xs[..., 0] = x0
    es[..., 0] = e0
    return kw_composite(q, xs, es)[0]


# ---------------------------------------------------------------------------
# GD


def _s(i, w):
    return sum(w**m for m in range(i))


@dataclass(frozen=True)
class GDFrame:
    n: int

    def __post_init__(self):
        _check_n(self.n)

    @property
    def w(self) -> complex:
        return omega(self.n)

    @cached_property
    def a(self) -> np.ndarray:
        return np.diag(root_of_unity_diag(self.n))

    @cached_property
    def b(self) -> np.ndarray:
        return np.eye(self.n, k=-1)

    @cached_property
    def Lam(self) -> np.ndarray:
        """sum_i (1 + w + ... + w^{i-1}) e_{i,i+1}."""
        return np.diag([_s(i, self.w) for i in range(1, self.n)], k=1)

    @cached_property
    def f(self) -> list:
        """f_0 = I, f_i = Lam^i / (s_1 s_2 ... s_i), s_m = 1 + w + ... + w^{m-1}.

        The coefficient of lam^i in phi (e_1n lam^n + b) = (a lam + b) phi
        reads f_i b - b f_i = a f_{i-1}, which with Lam^i b - b Lam^i =
        s_i a Lam^{i-1} forces the cumulative product.
        """
        out = [np.eye(self.n, dtype=complex)]
        c = 1.0
        for i in range(1, self.n):
            c = c * _s(i, self.w)
            out.append(np.linalg.matrix_power(self.Lam, i) / c)
        return out

    @cached_property
    def g(self) -> list:
        """Coefficients of phi_n^{-1}: g_1 = -f_1, -g_j = f_j + sum g_i f_{j-i}."""
        g = [np.eye(self.n, dtype=complex)]
        for j in range(1, self.n):
            acc = self.f[j].copy()
            for i in range(1, j):
                acc = acc + g[i] @ self.f[j - i]
            g.append(-acc)
        return g

    def phi(self, lam) -> np.ndarray:
        return sum(fi * lam**i for i, fi in enumerate(self.f))

    def phi_inv(self, lam) -> np.ndarray:
        return sum(gi * lam**i for i, gi in enumerate(self.g))

    def identity_defect(self) -> float:
        """phi(lam)(e_1n lam^n + b) = (a lam + b) phi(lam), coefficientwise."""
        n = self.n
        e1n = np.zeros((n, n))
        e1n[0, -1] = 1
        # coefficients of lam^0 .. lam^{2n-1}
        lhs = [np.zeros((n, n), dtype=complex) for _ in range(2 * n)]
        rhs = [np.zeros((n, n), dtype=complex) for _ in range(2 * n)]
        for i, fi in enumerate(self.f):
            lhs[i] += fi @ self.b
            lhs[i + n] += fi @ e1n
            rhs[i] += self.b @ fi
            rhs[i + 1] += self.a @ fi
        return max(float(np.max(np.abs(l - r))) for l, r in zip(lhs, rhs))

    def commute_defect(self) -> float:
        return max(float(np.max(np.abs(fi @ fj - fj @ fi))) for fi in self.f for fj in self.f)

    def Y(self, y) -> np.ndarray:
        """Y_y = b + sum y_i f_i; y may carry leading batch axes."""
        y = np.asarray(y, dtype=complex)
        out = np.broadcast_to(self.b, y.shape[:-1] + (self.n, self.n)).astype(complex)
        for i, fi in enumerate(self.f):
            out = out + y[..., i, None, None] * fi
        return out

    def reality_defect(self, A_eval, lams) -> float:
        """max |phi(lam)^{-1} A(lam) phi(lam) - phi(w lam)^{-1} A(w lam) phi(w lam)|."""
        w = self.w
        worst = 0.0
        for lam in lams:
            L = self.phi_inv(lam) @ A_eval(lam) @ self.phi(lam)
            R = self.phi_inv(w * lam) @ A_eval(w * lam) @ self.phi(w * lam)
            worst = max(worst, float(np.max(np.abs(L - R))))
        return worst

    def coefficients(self):
        """Nonzero entries c_{k,k+i} of f_i, row by row."""
        return [np.diag(fi, k=i) for i, fi in enumerate(self.f)]

    def K_inv(self, k, v) -> np.ndarray:
        """y with (a k + Y_y) v = 0, v normalized so its last coordinate is 1.

        Back substitution from the last row upwards: row n gives y_0, row
        n - j gives y_j.  Batched over leading axes of v.
        """
        if np.any(np.asarray(k) == 0):
            raise ZeroK("k must be non-zero")
        v = np.asarray(v, dtype=complex)
        n = self.n
        if np.any(np.abs(v[..., -1] - 1) > 1e-12):
            raise ValueError("v must have last coordinate 1")
        ad = root_of_unity_diag(n)
        c = self.coefficients()
        y = np.zeros(v.shape, dtype=complex)
        for j in range(n):
            row = n - 1 - j
            # (a k v)_row + (b v)_row + sum_{i<=j} y_i c_i[row] v_{row+i} = 0
            acc = ad[row] * k * v[..., row]
            if row > 0:
                acc = acc + v[..., row - 1]
            for i in range(j):
                acc = acc + y[..., i] * c[i][row] * v[..., row + i]
            y[..., j] = -acc / (c[j][row] * v[..., row + j])
        return y

    def K(self, y):
        """(k, v): k in the sector 0 <= arg k < 2 pi / n with det Y_y = (-k)^n, v in ker(a k + Y_y)."""
        Yy = self.Y(y)
        kn = complex((-1) ** self.n * np.linalg.det(Yy))
        if kn == 0:
            raise ZeroK("det Y_y = 0")
        arg = np.mod(np.angle(kn), 2 * np.pi) / self.n
        k = abs(kn) ** (1 / self.n) * np.exp(1j * arg)
        M = self.a * k + Yy
        _, _, Vh = np.linalg.svd(M)
        v = Vh[-1].conj()
        return k, v / v[-1]

    def det_poly_defect(self, y) -> float:
        """det(a lam + Y_y) against (-1)^{n+1}(lam^n - k^n), by interpolation."""
        n = self.n
        Yy = self.Y(y)
        nodes = 1.3 * np.exp(2j * np.pi * (np.arange(n + 1) + 0.25) / (n + 1))
        vals = np.array([np.linalg.det(self.a * s + Yy) for s in nodes])
        coef = np.polyfit(nodes, vals, n)  # highest first
        kn = (-1) ** n * np.linalg.det(Yy)  # det Y = (-k)^n
        target = np.zeros(n + 1, dtype=complex)
        target[0] = (-1) ** (n + 1)
        target[-1] = (-1) ** n * kn
        return float(np.max(np.abs(coef - target)))

    def vacuum_E(self, X, T, lam) -> np.ndarray:
        """exp((x + lam^n t)(a lam + b)), through a lam + b = phi V^{-1} (a lam) V phi^{-1}."""
        if lam == 0:
            raise ZeroK("the vacuum frame is built for lam != 0")
        n = self.n
        w = self.w
        V = np.array([[(w**i * lam) ** j for j in range(n)] for i in range(n)], dtype=complex)
        P = self.phi(lam) @ np.linalg.inv(V)
        Pi = V @ self.phi_inv(lam)
        s = np.asarray(X, dtype=float) + lam**n * np.asarray(T, dtype=float)
        d = np.exp(root_of_unity_diag(n) * lam * s[..., None])
        return P @ (d[..., :, None] * Pi)

    def h(self, k, v):
        """a lam + Y for y = K_n^{-1}(k, v / l_n(v))."""
        v = np.asarray(v, dtype=complex)
        return self.Y(self.K_inv(k, v / v[..., -1:]))

    def C_matrix(self, k, v) -> np.ndarray:
        """Columns phi(w^i k) phi(k)^{-1} v."""
        pk = self.phi_inv(k)
        return np.column_stack([self.phi(self.w**i * k) @ pk @ v for i in range(self.n)])

    def centralizer_dim(self) -> tuple[int, float]:
        """Dimension of {Z : Z Lam = Lam Z} and the distance of its basis from span{Lam^i}."""
        n = self.n
        I = np.eye(n)
        M = np.kron(I, self.Lam.T) - np.kron(self.Lam, I)  # row-major vec(Z Lam - Lam Z)
        _, s, Vh = np.linalg.svd(M)
        tol = 1e-10 * s[0]
        null = Vh[np.sum(s > tol):].conj()
        powers = np.array([np.linalg.matrix_power(self.Lam, i).ravel() for i in range(n)]).T
        Qp, _ = np.linalg.qr(powers)
        resid = null.T - Qp @ (Qp.conj().T @ null.T)
        return null.shape[0], float(np.max(np.abs(resid))) if null.size else 0.0


def gd_phi(n: int) -> GDFrame:
    return GDFrame(n)


def gd_parity_defect(frame: GDFrame, Q: list, count: int | None = None) -> float:
    """Coefficients of lam phi^{-1} Q(lam) phi with exponent not divisible by n.

    Q = [Q_0, Q_1, ...] (values at one point) is the series sum Q_i lam^{-i}.
    Only exponents whose coefficient is complete given len(Q) are used, the
    top ``count`` (default n + 1) of them.
    """
    n = frame.n
    M = len(Q) - 1
    count = n + 1 if count is None else count
    worst = 0.0
    used = 0
    m = 2 * n - 1
    while used < count and 1 + 2 * (n - 1) - m <= M:
        if m % n:
            acc = 0
            for p, gp in enumerate(frame.g):
                for r, fr in enumerate(frame.f):
                    i = 1 + p + r - m
                    if 0 <= i <= M:
                        acc = acc + gp @ Q[i] @ fr
            worst = max(worst, float(np.max(np.abs(acc))))
            used += 1
        m -= 1
    return worst


@dataclass(frozen=True)
class GDEvaluation:
    q: np.ndarray  # (..., n), q[..., 0] = 0
    ys: list
    mask: np.ndarray
    E: dict


@dataclass(frozen=True)
class GDState:
    n: int
    chain: tuple = ()  # ((k, v), ...)

    def apply(self, k, v) -> "GDState":
        return gd_darboux(self, k, v)

    def evaluate(self, X, T, lams=()) -> GDEvaluation:
        fr = GDFrame(self.n)
        n = self.n
        ad = root_of_unity_diag(n)
        X = np.asarray(X, dtype=float)
        T = np.asarray(T, dtype=float)
        keys = list(dict.fromkeys([complex(l) for l in lams] + [k for k, _ in self.chain]))
        Es = {lam: fr.vacuum_E(X, T, lam) for lam in keys}
        q = np.zeros(X.shape + (n,), dtype=complex)
        mask = np.zeros(X.shape, dtype=bool)
        ys = []
        for k, v in self.chain:
            left = fr.Y(fr.K_inv(k, v / v[-1]))
            vt = np.linalg.solve(Es[k], np.broadcast_to(v, X.shape + (n,))[..., None])[..., 0]
            last = vt[..., -1]
            bad = np.abs(last) <= SING_RTOL * np.linalg.norm(vt, axis=-1)
            mask |= bad
            with np.errstate(all="ignore"):
                y = fr.K_inv(k, np.where(bad[..., None], np.nan, vt / last[..., None]))
            Yt = fr.Y(y)
            q = q / ad + y * (1 - 1 / ad)
            q[..., 0] = 0
            ys.append(y)
            for lam in list(Es):
                if abs(lam**n - k**n) < 1e-12 * max(1.0, abs(k) ** n):
                    del Es[lam]
                    continue
                with np.errstate(all="ignore"):
                    Es[lam] = (fr.a * lam + left) @ Es[lam] @ np.linalg.inv(fr.a * lam + Yt)
        return GDEvaluation(q, ys, mask, {complex(l): Es[complex(l)] for l in lams})


def gd_darboux(state: GDState, k, v) -> GDState:
    """theta_{k,v} * q: y~ = K_n^{-1}(k, v~ / l_n(v~)), q~_i = w^{-i} q_i + (1 - w^{-i}) y~_i.

    v~(x, t) = E(x, t, k)^{-1} v; nodes where l_n(v~) vanishes are
    reported in the evaluation mask.
    """
    k = complex(k)
    if k == 0:
        raise ZeroK("k must be non-zero")
    v = np.asarray(v, dtype=complex)
    if v[-1] == 0:
        raise LastCoordinateVanishesAt("l_n(v) = 0 at the origin")
    for k2, _ in state.chain:
        if abs(k2**state.n - k**state.n) < 1e-12:
            raise ResonantPoles("k^n already used in the chain")
    return GDState(state.n, state.chain + ((k, v / v[-1]),))


def require_regular(ev, X, T, exc=LastCoordinateVanishesAt):
    if np.any(ev.mask):
        i = tuple(np.argwhere(ev.mask)[0])
        raise exc(f"degenerate at (x, t) = ({np.asarray(X)[i]}, {np.asarray(T)[i]})")


def gd_flow_residual(q, hx, ht, n, accuracy: int = 4, trim: bool = True) -> np.ndarray:
    """u_t - [Q_{n+2}, a] for u = Y_q (interior only with ``trim``)."""
    from . import fd

    fr = GDFrame(n)
    u = fr.Y(np.asarray(q, dtype=complex))
    a = root_of_unity_diag(n)
    spec = HierarchySpec(a, a, n + 1, Reality.GD)
    rhs = flow_from_recursion(spec, u, hx, accuracy)
    ut = fd.d1(u, ht, axis=0, accuracy=accuracy)
    r = ut - rhs
    return r[2:-2, 2 * n + 2:-(2 * n + 2)] if trim else r


@dataclass(frozen=True)
class GDQuad:
    xi1: np.ndarray
    xi2: np.ndarray

    def product_defect(self, frame: GDFrame, k1, v1, k2, v2, lams) -> float:
        L1, L2 = frame.h(k1, v1), frame.h(k2, v2)
        R1, R2 = frame.h(k1, self.xi1), frame.h(k2, self.xi2)
        a = frame.a
        return max(float(np.max(np.abs((a * l + R2) @ (a * l + L1) - (a * l + R1) @ (a * l + L2))))
                   for l in lams)


def gd_quad_relation(frame: GDFrame, k1, v1, k2, v2) -> GDQuad:
    """xi1 || h_{k2,v2}(k1) v1 and xi2 || h_{k1,v1}(k2) v2, last coordinate 1."""
    n = frame.n
    if abs(k1**n - k2**n) < 1e-12 * max(abs(k1), abs(k2), 1.0) ** n:
        raise ResonantPoles("k1^n = k2^n")
    v1 = np.asarray(v1, dtype=complex)
    v2 = np.asarray(v2, dtype=complex)
    x1 = (frame.a * k1 + frame.h(k2, v2)) @ v1
    x2 = (frame.a * k2 + frame.h(k1, v1)) @ v2
    for x in (x1, x2):
        if abs(x[-1]) <= SING_RTOL * np.linalg.norm(x):
            raise LastCoordinateVanishesAt("l_n(xi) = 0")
    return GDQuad(x1 / x1[-1], x2 / x2[-1])


def gd_permutability(state: GDState, k1, v1, k2, v2, X, T) -> np.ndarray:
    """q^(3) by the recipe: xi2 = h_{k1, v~1}(k2) v~2, y~2 = K^{-1}(k2, xi2 / l_n(xi2))."""
    fr = GDFrame(state.n)
    ad = root_of_unity_diag(state.n)
    ev = state.evaluate(X, T, [k1, k2])
    n = state.n
    v1 = np.asarray(v1, dtype=complex)
    v2 = np.asarray(v2, dtype=complex)
    vt1 = np.linalg.solve(ev.E[complex(k1)], np.broadcast_to(v1, np.shape(X) + (n,))[..., None])[..., 0]
    vt2 = np.linalg.solve(ev.E[complex(k2)], np.broadcast_to(v2, np.shape(X) + (n,))[..., None])[..., 0]
    y1 = fr.K_inv(k1, vt1 / vt1[..., -1:])
    q1 = ev.q / ad + y1 * (1 - 1 / ad)
    xi2 = ((fr.a * k2 + fr.Y(y1)) @ vt2[..., None])[..., 0]
    y2 = fr.K_inv(k2, xi2 / xi2[..., -1:])
    q3 = q1 / ad + y2 * (1 - 1 / ad)
    q3[..., 0] = 0
    return q3


def gd_algebraic_permutability(fr: GDFrame, q0, q1, q2, k1, k2, seeds, start):
    """q^(3) from q^(0), q^(1), q^(2) alone.

    y^(i)_j for j >= 1 come from the field relation; y^(i)_0 solves
    det Y_y = (-k_i)^n (a degree n polynomial), the root being fixed by
    ``seeds`` at ``start`` and continuity elsewhere.
    """
    n = fr.n
    ad = root_of_unity_diag(n)
    q0 = np.asarray(q0, dtype=complex)
    shape = q0.shape[:-1]
    ys = []
    for qi, k, seed in ((q1, k1, seeds[0]), (q2, k2, seeds[1])):
        y = np.zeros(q0.shape, dtype=complex)
        y[..., 1:] = (np.asarray(qi)[..., 1:] - q0[..., 1:] / ad[1:]) / (1 - 1 / ad[1:])
        target = (-k) ** n
        y[..., 0] = _track_roots(lambda i, j, y=y, c=target: _first_slot_poly(y[i, j], c, n, fr.Y),
                                 shape, seed, start)
        ys.append(y)
    y1, y2 = ys
    M2 = fr.a * k2 + fr.Y(y2)
    _, _, Vh = np.linalg.svd(M2)
    vt2 = np.conj(Vh[..., -1, :])
    xi2 = ((fr.a * k2 + fr.Y(y1)) @ vt2[..., None])[..., 0]
    yt = fr.K_inv(k2, xi2 / xi2[..., -1:])
    q3 = np.asarray(q1) / ad + yt * (1 - 1 / ad)
    q3[..., 0] = 0
    return q3


def gd3_operator(q, hx):
    """p_1 = (1 - w^2) q_1, p_2 = (q_1)_x + q_2 for n = 3 fields (..., nx, 3)."""
    from . import fd

    w = omega(3)
    q = np.asarray(q)
    return (1 - w**2) * q[..., 1], fd.d1(q[..., 1], hx, axis=-1) + q[..., 2]
