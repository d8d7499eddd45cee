"""KdV as the r = 1 restriction of the third sl(2, R) flow.

a = diag(1, -1), u = [[0, q], [1, 0]], q_t = (q_xxx - 6 q q_x)/4.  The
simple elements are p_{xi,k}(lam) = a lam + [[xi, xi^2 - k^2], [1, xi]],
acting by E -> p_{xi,k} E p_{-xi~,k} / (lam^2 - k^2).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BlowUpDetected, F2VanishesAt, PoleEvaluation, SingularB, XiCollision, ZeroK

A_DIAG = np.array([1.0, -1.0])
F2_RTOL = 1e-10


def phi(lam) -> np.ndarray:
    return np.array([[1.0, lam], [0.0, 1.0]], dtype=complex)


def p_matrix(xi, k, lam) -> np.ndarray:
    """p_{xi,k}(lam); xi may be an array, giving shape xi.shape + (2, 2)."""
    xi = np.asarray(xi, dtype=complex)
    out = np.empty(xi.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = lam + xi
    out[..., 0, 1] = xi**2 - k**2
    out[..., 1, 0] = 1.0
    out[..., 1, 1] = -lam + xi
    return out


@dataclass(frozen=True)
class KdVElement:
    xi: float
    k: float

    def matrix(self, lam) -> np.ndarray:
        return p_matrix(self.xi, self.k, lam)

    def inverse(self, lam) -> np.ndarray:
        if abs(lam * lam - self.k**2) < 1e-14:
            raise PoleEvaluation("lam = +-k")
        return p_matrix(-self.xi, self.k, lam) / (lam * lam - self.k**2)

    def zeros(self):
        return (self.k, -self.k)

    def kernel_vectors(self):
        """v_+ and v_- with p(+-k) v_+- = 0."""
        return (np.array([self.k - self.xi, 1.0]), np.array([-(self.k + self.xi), 1.0]))


@dataclass(frozen=True)
class KernelData:
    v_plus: np.ndarray
    v_minus: np.ndarray
    B: np.ndarray
    Y: np.ndarray


def kdv_kernel_data(xi: float, k: float) -> KernelData:
    """B = [v_+ | v_-] and Y = -k a B a B^{-1}, for which a lam + Y = p_{xi,k}(lam)."""
    if k == 0:
        raise SingularB("B is singular for k = 0")
    e = KdVElement(xi, k)
    vp, vm = e.kernel_vectors()
    B = np.column_stack([vp, vm])
    a = np.diag(A_DIAG)
    Y = -k * a @ B @ a @ np.linalg.inv(B)
    return KernelData(vp, vm, B, Y)


def kdv_reality_check(A_eval, lams) -> float:
    """max over lams of |conj A(conj lam) - A(lam)| and the evenness of phi^{-1} A phi."""
    worst = 0.0
    for lam in lams:
        A = np.asarray(A_eval(lam))
        Ac = np.conj(np.asarray(A_eval(np.conj(lam))))
        worst = max(worst, float(np.max(np.abs(Ac - A))))
        even = np.linalg.inv(phi(lam)) @ A @ phi(lam)
        odd = np.linalg.inv(phi(-lam)) @ np.asarray(A_eval(-lam)) @ phi(-lam)
        worst = max(worst, float(np.max(np.abs(even - odd))))
    return worst


def kdv_lax_B(q, qx, qxx, lam) -> np.ndarray:
    """a lam^3 + u lam^2 + Q_2 lam + Q_3 for the third flow."""
    q, qx, qxx = (np.asarray(v, dtype=float) for v in (q, qx, qxx))
    out = np.zeros(q.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = lam**3 - q / 2 * lam + qx / 4
    out[..., 1, 1] = -lam**3 + q / 2 * lam - qx / 4
    out[..., 0, 1] = q * lam**2 - qx / 2 * lam + (qxx - 2 * q * q) / 4
    out[..., 1, 0] = lam**2 - q / 2
    return out


# ---------------------------------------------------------------------------
# states


def vacuum_E(X, T, lam) -> np.ndarray:
    """[[e^th, 0], [sinh(th)/lam, e^-th]], th = lam x + lam^3 t (x at lam = 0)."""
    X = np.asarray(X, dtype=float)
    T = np.asarray(T, dtype=float)
    th = lam * X + lam**3 * T
    out = np.zeros(X.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = np.exp(th)
    out[..., 1, 1] = np.exp(-th)
    out[..., 1, 0] = X + 0 * th if lam == 0 else np.sinh(th) / lam
    return out


@dataclass(frozen=True)
class KdVEvaluation:
    q: np.ndarray
    xis: list  # xi~ of each step
    mask: np.ndarray  # True next to poles of q
    E: dict = field(default_factory=dict)


@dataclass(frozen=True)
class KdVState:
    """Vacuum plus a chain of p_{xi,k} steps, walked at every evaluation."""

    chain: tuple = ()

    def apply(self, elem: KdVElement) -> "KdVState":
        return kdv_darboux(self, elem.xi, elem.k)

    def evaluate(self, X, T, lams=()) -> KdVEvaluation:
        X = np.asarray(X, dtype=float)
        T = np.asarray(T, dtype=float)
        ks = [e.k for e in self.chain]
        for lam in lams:
            if any(abs(lam * lam - k * k) < 1e-14 for k in ks):
                raise PoleEvaluation(f"lam = {lam} is a zero of the chain")
        need = list(dict.fromkeys([complex(l) for l in lams] + [complex(k) for k in ks]))
        Es = {lam: vacuum_E(X, T, lam) for lam in need}
        q = np.zeros(X.shape)
        xis = []
        for i, e in enumerate(self.chain):
            if e.k == 0 and i > 0:
                raise ZeroK("k = 0 is only supported as the first step on the vacuum")
            v = np.array([e.k - e.xi, 1.0], dtype=complex)
            f = np.linalg.solve(Es[complex(e.k)], np.broadcast_to(v, X.shape + (2,))[..., None])[..., 0]
            f1, f2 = f[..., 0].real, f[..., 1].real
            scale = np.maximum(np.hypot(f1, f2), 1e-300)
            f2 = np.where(np.abs(f2) <= F2_RTOL * scale, np.nan, f2)
            with np.errstate(all="ignore"):
                xt = e.k - f1 / f2
                q = -q + 2 * (xt**2 - e.k**2)
            xis.append(xt)
            for lam in list(Es):
                if abs(lam * lam - e.k**2) < 1e-14:
                    del Es[lam]
                    continue
                with np.errstate(all="ignore"):
                    Es[lam] = p_matrix(e.xi, e.k, lam) @ Es[lam] @ p_matrix(-xt, e.k, lam) / (lam * lam - e.k**2)
        return KdVEvaluation(q, xis, pole_mask(q, X), {complex(l): Es[complex(l)] for l in lams})

    def q(self, X, T) -> np.ndarray:
        return self.evaluate(X, T).q

    def E(self, X, T, lam) -> np.ndarray:
        return self.evaluate(X, T, [lam]).E[complex(lam)]

    def __call__(self, X, T):
        return self.q(X, T)


def pole_mask(q, X, radius: float | None = None):
    """Nodes within one x step (or ``radius``) of a pole of q.

    Poles of these solutions are double poles q ~ 2/(x - x0)^2, so a node at
    distance d <= h from one has q >= 2/h^2; smooth resolved data stays far
    below that.  Non-finite values are flagged too.  Residual checks should
    pass a fixed physical ``radius``: the stencil error near a double pole
    scales like h^2 / d^7, so a mask of fixed cell width does not converge.
    """
    q = np.asarray(q)
    X = np.asarray(X, dtype=float)
    bad = ~np.isfinite(q)
    if X.ndim and X.shape[-1] > 1:
        h = abs(float(X.reshape(-1, X.shape[-1])[0, 1] - X.reshape(-1, X.shape[-1])[0, 0]))
        r = h if radius is None else max(radius, h)
        with np.errstate(invalid="ignore"):
            bad |= np.abs(q) >= 2.0 / (r * r)
        grown = bad.copy()
        grown[..., 1:] |= bad[..., :-1]
        grown[..., :-1] |= bad[..., 1:]
        bad = grown
    return bad


def kdv_darboux(state: KdVState, xi: float, k: float) -> KdVState:
    """p_{xi,k} * q.

    (f1, f2) = E(x, t, k)^{-1}(k - xi, 1), xi~ = k - f1/f2,
    q~ = -q + 2(xi~^2 - k^2), E~ = p_{xi,k} E p_{-xi~,k} / (lam^2 - k^2).
    Nodes next to poles of the result are reported in the evaluation mask.
    k = 0 is accepted as the first step on the vacuum, where E(x, t, 0) is
    the limit [[1, 0], [x, 1]] and the step gives xi~ = xi / (1 + xi x).
    """
    if k == 0 and state.chain:
        raise ZeroK("k = 0 is only supported as the first step on the vacuum")
    for e in state.chain:
        if abs(e.k**2 - k**2) < 1e-14:
            raise PoleEvaluation("k^2 already used in the chain")
    return KdVState(state.chain + (KdVElement(float(xi), float(k)),))


def require_regular(ev: KdVEvaluation, X, T):
    if np.any(ev.mask):
        i = np.argwhere(ev.mask)[0]
        raise F2VanishesAt(f"f2 vanishes near (x, t) = ({np.asarray(X)[tuple(i)]}, {np.asarray(T)[tuple(i)]})")


# ---------------------------------------------------------------------------
# closed forms


def vacuum_soliton(xi: float, k: float):
    """p_{xi,k} * 0: -2k^2 sech^2(s) if k^2 > xi^2, else 2k^2 csch^2(s).

    s = kx + k^3 t + x0 with x0 = log(|xi + k| / |xi - k|) / 2.
    """
    b = k * k - xi * xi
    x0 = 0.5 * np.log(abs(xi + k) / abs(xi - k))

    def q(X, T):
        s = k * np.asarray(X, dtype=float) + k**3 * np.asarray(T, dtype=float) + x0
        with np.errstate(all="ignore"):
            return -2 * k * k / np.cosh(s) ** 2 if b > 0 else 2 * k * k / np.sinh(s) ** 2

    q.x0 = x0
    q.branch = "sech" if b > 0 else "csch"
    return q


def rational_solution(xi: float):
    """p_{xi,0} * 0 = 2 xi^2 / (1 + xi x)^2."""

    def q(X, T):
        with np.errstate(all="ignore"):
            return 2 * xi * xi / (1 + xi * np.asarray(X, dtype=float)) ** 2 + 0 * np.asarray(T, dtype=float)

    return q


# ---------------------------------------------------------------------------
# Backlund ODE


@dataclass(frozen=True)
class KdVOdeResult:
    A: np.ndarray  # (nt, nx)
    q_new: np.ndarray
    richardson_error: float


def _derivs(q_eval, x, t, d=1e-3):
    """q, q_x, q_xx at (x, t) by 5-point stencils in x."""
    vals = [q_eval(x + m * d, t) for m in (-2, -1, 0, 1, 2)]
    qx = (vals[0] - 8 * vals[1] + 8 * vals[3] - vals[4]) / (12 * d)
    qxx = (-vals[0] + 16 * vals[1] - 30 * vals[2] + 16 * vals[3] - vals[4]) / (12 * d * d)
    return vals[2], qx, qxx


def kdv_bt_ode(q_eval, k: float, xi0: float, grid, substeps: int = 1, richardson: bool = True,
               blowup: float = 1e8) -> KdVOdeResult:
    """Integrate A_x = q - A^2 + k^2 and the t equation from A(0, 0) = xi0.

    The x equation is swept along t = 0 from the origin (node nearest 0),
    then each x column is swept in t with
    A_t = (q_xx - 2q^2)/4 - q_x A/2 + q(A^2 + k^2)/2 - k^2 (A^2 - k^2).
    Returns A and q~ = -q + 2(A^2 - k^2).
    """
    x, t = grid.x, grid.t
    i0 = int(np.argmin(np.abs(t)))
    j0 = int(np.argmin(np.abs(x)))

    def fx(s, A, tv):
        return q_eval(np.atleast_1d(s), np.atleast_1d(tv))[0] - A * A + k * k

    def ft(s, A):
        q, qx, qxx = _derivs(q_eval, x, np.full_like(x, s))
        return (qxx - 2 * q * q) / 4 - qx * A / 2 + q * (A * A + k * k) / 2 - k * k * (A * A - k * k)

    def rk4(f, y, s0, h):
        k1 = f(s0, y)
        k2 = f(s0 + h / 2, y + h / 2 * k1)
        k3 = f(s0 + h / 2, y + h / 2 * k2)
        k4 = f(s0 + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if np.any(~np.isfinite(y)) or np.max(np.abs(y)) > blowup:
            raise BlowUpDetected(f"|A| exceeded {blowup:g} near s = {s0 + h}")
        return y

    def march(f, y0, nodes, sub):
        out = [y0]
        y = y0
        for a, b in zip(nodes[:-1], nodes[1:]):
            h = (b - a) / sub
            s = a
            for _ in range(sub):
                y = rk4(f, y, s, h)
                s += h
            out.append(y)
        return np.array(out)

    def sweep(sub):
        t0 = t[i0]
        g = lambda s, A: fx(s, A, t0)
        right = march(g, np.float64(xi0), x[j0:], sub)
        left = march(g, np.float64(xi0), x[j0::-1], sub)
        row = np.concatenate([left[::-1][:-1], right])
        up = march(ft, row, t[i0:], sub)
        down = march(ft, row, t[i0::-1], sub)
        return np.concatenate([down[::-1][:-1], up])

    A = sweep(substeps)
    err = float(np.max(np.abs(sweep(2 * substeps) - A))) if richardson else float("nan")
    X, T = grid.mesh()
    q = q_eval(X, T)
    return KdVOdeResult(A, -q + 2 * (A * A - k * k), err)


# ---------------------------------------------------------------------------
# permutability


def kdv_element_pair(a1: float, k1: float, a2: float, k2: float):
    """xi1, xi2 with p_{xi2,k2} p_{a1,k1} = p_{xi1,k1} p_{a2,k2}."""
    if a1 == a2:
        raise XiCollision("a1 = a2")
    c = (k1 * k1 - k2 * k2) / (a1 - a2)
    return -a2 + c, -a1 + c


def kdv_permutability(q1, xi1, xi2, k1: float, k2: float):
    """q12 = -q1 + 2(xi12^2 - k2^2) with xi12 = -xi1 + (k1^2 - k2^2)/(xi1 - xi2)."""
    if k1 * k1 == k2 * k2:
        raise ValueError("need k1^2 != k2^2")
    d = np.asarray(xi1) - np.asarray(xi2)
    if np.any(d == 0):
        raise XiCollision("xi1 = xi2 at some point")
    xi12 = -np.asarray(xi1) + (k1 * k1 - k2 * k2) / d
    return -np.asarray(q1) + 2 * (xi12**2 - k2 * k2), xi12


@dataclass(frozen=True)
class Ladder:
    q: np.ndarray
    xi: np.ndarray
    mask: np.ndarray
    levels: list  # q_1, q_12, q_123, ...


def kdv_ladder(a_list, k_list, X, T, order=None) -> Ladder:
    """The iterated permutability construction from the vacuum.

    Level r holds xi_{i1..ir j} for the remaining indices j; the next level
    uses xi_{..jm} = -xi_{..j} + (k_j^2 - k_m^2)/(xi_{..j} - xi_{..m}).
    Nodes next to a pole of the final q are collected in ``mask``.
    """
    n = len(a_list)
    order = list(range(n)) if order is None else list(order)
    cur = {}
    for i in order:
        cur[i] = KdVState().apply(KdVElement(a_list[i], k_list[i])).evaluate(X, T).xis[0]
    first = order[0]
    q = 2 * (cur[first] ** 2 - k_list[first] ** 2)
    levels = [q]
    head = first
    rest = order[1:]
    while rest:
        nxt = {}
        for m in rest:
            d = cur[head] - cur[m]
            with np.errstate(all="ignore"):
                nxt[m] = -cur[head] + (k_list[head] ** 2 - k_list[m] ** 2) / d
        head = rest[0]
        rest = rest[1:]
        cur = nxt
        with np.errstate(all="ignore"):
            q = -q + 2 * (cur[head] ** 2 - k_list[head] ** 2)
        levels.append(q)
    return Ladder(q, cur[head], pole_mask(q, X), levels)


def hill_intertwine(y, y_x, xi_new):
    """z = y' - xi~ y, carrying y'' = (q + k^2) y to z'' = (q~ + k^2) z."""
    return np.asarray(y_x) - np.asarray(xi_new) * np.asarray(y)
