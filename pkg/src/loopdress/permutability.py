"""Quadratic relations between simple elements, Bianchi permutability and
the classical sine-Gordon Backlund transformations.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dressing import DressedState, General, Unitary, unitary
from .errors import CoincidentPoles, EqualParameters, SingularDifference
from .hierarchy import HierarchySpec
from .linalg import HermProj, ObliqueProj, comm, mgs

# ---------------------------------------------------------------------------
# quadratic relations


@dataclass(frozen=True)
class QuadRelation:
    """g_{z2,tau2} g_{z1,pi1} = g_{z1,tau1} g_{z2,pi2} with tau_i = phi pi_i phi^{-1}."""

    first: object  # element (z1, pi1)
    second: object  # element (z2, pi2)
    phi: np.ndarray
    tau1: object  # element (z1, tau1)
    tau2: object  # element (z2, tau2)

    def product_defect(self, lams) -> float:
        """max over lams of |g_{z2,tau2} g_{z1,pi1} - g_{z1,tau1} g_{z2,pi2}|."""
        worst = 0.0
        for lam in lams:
            lhs = self.tau2.matrix(lam) @ self.first.matrix(lam)
            rhs = self.tau1.matrix(lam) @ self.second.matrix(lam)
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        return worst

    def hermiticity_defect(self) -> float:
        out = 0.0
        for e in (self.tau1, self.tau2):
            P = e.proj.matrix
            out = max(out, float(np.max(np.abs(P - P.conj().T))))
        return out


def _y(alpha1, alpha2, P):
    """alpha2 + (alpha1 - alpha2) P, the matrix with h = (lam - Y)/(lam - alpha1)."""
    return alpha2 * np.eye(P.shape[-1]) + (alpha1 - alpha2) * P


def quad_phi(e1, e2) -> np.ndarray:
    """phi = (alpha2 + (alpha1 - alpha2) pi1) - (beta2 + (beta1 - beta2) pi2)."""
    a1, a2 = e1.alphas
    b1, b2 = e2.alphas
    return _y(a1, a2, e1.proj.matrix) - _y(b1, b2, e2.proj.matrix)


def quad_relation(e1, e2) -> QuadRelation:
    """Refactor the product of two simple elements in the opposite order.

    For unitary elements phi is, up to sign, (z2 - z1) + (z1 - conj z1) pi1 -
    (z2 - conj z2) pi2, and the new projections come out Hermitian.  General
    elements get oblique tau_i with image phi(Im pi_i) and kernel
    phi(Ker pi_i).
    """
    p1, p2 = set(np.round(e1.alphas, 12)), set(np.round(e2.alphas, 12))
    if p1 & p2:
        raise CoincidentPoles("the two elements share a pole")
    phi = quad_phi(e1, e2)
    s = np.linalg.svd(phi, compute_uv=False)
    if s[-1] <= 1e-12 * max(s[0], 1.0):
        raise SingularDifference("phi is singular")
    t1 = _conjugated(e1, phi)
    t2 = _conjugated(e2, phi)
    return QuadRelation(e1, e2, phi, t1, t2)


def _conjugated(e, phi):
    if isinstance(e, Unitary):
        return Unitary(e.z, HermProj(mgs(phi @ e.proj.basis)))
    if isinstance(e, General):
        im = phi @ e.proj.im_basis
        ker = phi @ e.proj.ker_basis
        return General(e.alpha1, e.alpha2, ObliqueProj(im, ker))
    raise TypeError(f"no quadratic relation for {type(e).__name__}")


def unitary_quad_relation(z1, pi1, z2, pi2) -> QuadRelation:
    """quad_relation for g_{z1,pi1}, g_{z2,pi2}; pi given as vectors or HermProj."""
    z1, z2 = complex(z1), complex(z2)
    if abs(z1 - z2) < 1e-12 or abs(z1 - np.conj(z2)) < 1e-12:
        raise CoincidentPoles("need z1 != z2 and z1 != conj z2")
    e1 = Unitary(z1, pi1) if isinstance(pi1, HermProj) else unitary(z1, pi1)
    e2 = Unitary(z2, pi2) if isinstance(pi2, HermProj) else unitary(z2, pi2)
    return quad_relation(e1, e2)


# ---------------------------------------------------------------------------
# third solution


@dataclass(frozen=True)
class ThirdSolution:
    path1: np.ndarray  # first element, then the refactored second
    path2: np.ndarray  # second element, then the refactored first
    algebraic: np.ndarray  # u1 + (beta1 - beta2)[a, tau2~] from the projection fields

    def path_defect(self) -> float:
        return float(np.max(np.abs(self.path1 - self.path2)))


def third_solution(u0: DressedState, e1, e2, X, T) -> ThirdSolution:
    """u3 through both composition orders, plus the pointwise Bianchi formula.

    The algebraic route needs only pi1~, pi2~ (the projections produced when
    e1, e2 act on u0 separately): tau2~ = phi~ pi2~ phi~^{-1} and
    u3 = u1 + (beta1 - beta2)[a, tau2~].
    """
    rel = quad_relation(e1, e2)
    path1 = u0.apply(e1).apply(rel.tau2)
    path2 = u0.apply(e2).apply(rel.tau1)
    ev1 = u0.apply(e1).evaluate(X, T)
    ev2 = u0.apply(e2).evaluate(X, T)
    P1, P2 = ev1.projections[-1], ev2.projections[-1]
    a1, a2 = e1.alphas
    b1, b2 = e2.alphas
    phit = _y(a1, a2, P1) - _y(b1, b2, P2)
    tau2 = phit @ P2 @ np.linalg.inv(phit)
    u3 = ev1.u + (b1 - b2) * comm(u0.spec.A, tau2)
    return ThirdSolution(path1(X, T), path2(X, T), u3)


# ---------------------------------------------------------------------------
# sine-Gordon


@dataclass(frozen=True)
class SGEBTParams:
    s: float
    c0: float

    def __post_init__(self):
        if self.s == 0:
            raise ValueError("s must be non-zero")


def _rot_angle(G):
    return np.arctan2(G[..., 0, 1].real, G[..., 0, 0].real)


def _gauge(state: DressedState, X, T):
    """H^{-1}, H the product over the chain of the new factors at lam = 0."""
    ev = state.evaluate(X, T)
    n = state.spec.n
    H = np.broadcast_to(np.eye(n, dtype=complex), np.shape(X) + (n, n))
    for e, P in zip(state.chain, ev.projections):
        w = e.z / np.conj(e.z)
        H = (P + w * (np.eye(n) - P)) @ H
    return np.linalg.inv(H)


def _far_left(state: DressedState, T) -> float:
    """An x so far left that every new projection has reached its limit."""
    zs = [complex(e.z) for e in state.chain]
    if not zs:
        return 0.0
    beta = float(np.max(np.abs(state.spec.b)))
    tmax = float(np.max(np.abs(T), initial=0.0))
    rate = min(abs(z.imag) for z in zs)
    drift = max(abs((1 / z).imag) for z in zs) * beta * tmax
    return -(60.0 + 2 * drift) / rate


def sge_angle(state: DressedState, X, T, anchor: float | None = None) -> np.ndarray:
    """q for u = [[0, q_x/2], [-q_x/2, 0]].

    u fixes the gauge g (g^{-1} g_x = u) up to a constant on the left; it is
    fixed here by g -> I far to the left, which pins q up to a multiple of
    2 pi (g and -g give the same u).  On (nt, nx) grids the half angle is
    unwrapped from the node nearest the origin.  ``anchor`` selects the
    branch with q(0, 0) closest to the given value.
    """
    X = np.asarray(X, dtype=float)
    T = np.asarray(T, dtype=float)
    G = _gauge(state, X, T)
    G_left = _gauge(state, np.full_like(X, _far_left(state, T)), T)
    half = _rot_angle(np.linalg.solve(G_left, G))
    if X.ndim == 2 and min(X.shape) > 1:
        i0 = int(np.argmin(np.abs(T[:, 0])))
        j0 = int(np.argmin(np.abs(X[0])))
        half = _unwrap2d(half, i0, j0, 2 * np.pi)
        ref = half[i0, j0]
    else:
        ref = float(_rot_angle(np.linalg.solve(
            _gauge(state, np.full(1, _far_left(state, np.zeros(1))), np.zeros(1)),
            _gauge(state, np.zeros(1), np.zeros(1))))[0])
    q = 2 * half
    if anchor is not None:
        q = q + 2 * np.pi * np.round((anchor - 2 * ref) / (2 * np.pi))
    return q


def sge_kink(s: complex, c0: float):
    """B_{s,c0}(0) = 4 arctan(tan(c0/4) e^{2 s x + t/(2 s)}); complex s allowed."""
    d = np.tan(c0 / 4)

    def q(X, T):
        X = np.asarray(X, dtype=float)
        T = np.asarray(T, dtype=float)
        return 4 * np.arctan(d * np.exp(2 * s * X + T / (2 * s)))

    return q


def sge_bt_projection(q00: float, params: SGEBTParams, candidate: str = "half") -> HermProj:
    """pi for B_{s,c0}: onto (cos(f0/2), sin(f0/2)) with f0 = (q(0,0) + c0)/2.

    ``candidate="full"`` uses (cos f0, sin f0) instead; only the half angle
    reproduces q*(0,0) = c0, see ``sge_classical_bt``.
    """
    f0 = 0.5 * (q00 + params.c0)
    ang = f0 / 2 if candidate == "half" else f0
    return HermProj(np.array([[np.cos(ang)], [np.sin(ang)]], dtype=complex))


@dataclass(frozen=True)
class SGEBTResult:
    state: DressedState
    candidate: str
    value_at_origin: float


def sge_classical_bt(state: DressedState, params: SGEBTParams, candidate: str | None = None,
                     q_origin: float | None = None) -> SGEBTResult:
    """B_{s,c0}(q) = g_{is,pi} * u for q the sine-Gordon angle of ``state``.

    With ``candidate=None`` both angle conventions for pi are tried and the
    ``q_origin`` picks the branch of the input angle at the origin.  The
    one giving q*(0,0) = c0 (mod 2 pi, the freedom left by u) is kept.
    """
    q00 = float(sge_angle(state, np.zeros(1), np.zeros(1), anchor=q_origin)[0])
    z = 1j * params.s
    tried = []
    for cand in ([candidate] if candidate else ["half", "full"]):
        new = state.apply(Unitary(z, sge_bt_projection(q00, params, cand)))
        v = float(sge_angle(new, np.zeros(1), np.zeros(1), anchor=params.c0)[0])
        err = abs(v - params.c0)
        tried.append((err, cand, new, v))
        if candidate is None and err < 1e-9:
            break
    err, cand, new, v = min(tried, key=lambda r: r[0])
    return SGEBTResult(new, cand, v)


def _unwrap2d(F, i0: int, j0: int, period: float):
    """Unwrap along the t column through j0, then along every row from j0."""
    F = np.array(F, dtype=float)
    col = F[:, j0]
    col = np.concatenate([np.unwrap(col[i0::-1], period=period)[::-1][:-1],
                          np.unwrap(col[i0:], period=period)])
    F[:, j0] = col
    left = np.unwrap(F[:, j0::-1], axis=1, period=period)[:, ::-1]
    right = np.unwrap(F[:, j0:], axis=1, period=period)
    return np.concatenate([left[:, :-1], right], axis=1)


def sge_bianchi(q0, q1, q2, s1, s2, base=None):
    """q3 from tan((q3 - q0)/4) = ((s1 + s2)/(s1 - s2)) tan((q1 - q2)/4).

    Inputs may be complex (conjugate Backlund pairs); the result is returned
    real when its imaginary part is at round-off level.  For 2-d fields the
    4 pi ambiguity is removed by unwrapping from ``base`` = (it, ix), default
    the array centre.
    """
    if s1 == s2 or s1 == -s2 or s1 == 0 or s2 == 0:
        raise EqualParameters("need s1^2 != s2^2 and s1 s2 != 0")
    r = (s1 + s2) / (s1 - s2)
    w = 4 * np.arctan(r * np.tan((np.asarray(q1) - np.asarray(q2)) / 4))
    if np.iscomplexobj(w) and np.max(np.abs(w.imag), initial=0.0) <= 1e-9 * max(1.0, np.max(np.abs(w))):
        w = w.real
    q3 = np.asarray(q0) + w
    if np.ndim(q3) == 2 and not np.iscomplexobj(q3):
        i0, j0 = base if base is not None else (q3.shape[0] // 2, q3.shape[1] // 2)
        d = _unwrap2d(q3 - np.asarray(q0), i0, j0, 4 * np.pi)
        q3 = np.asarray(q0) + d
    return q3


def bianchi_defect(q0, q1, q2, q3, s1, s2) -> float:
    r = (s1 + s2) / (s1 - s2)
    lhs = np.tan((np.asarray(q3) - q0) / 4)
    rhs = r * np.tan((np.asarray(q1) - q2) / 4)
    return float(np.max(np.abs(lhs - rhs)))


def sge_bianchi_state(s1: float, s2: float, c1: float, c2: float) -> DressedState:
    """q3 as a dressing of the vacuum: B_{s1,c1} first, then the refactored s2 step."""
    spec = HierarchySpec.sine_gordon()
    vac = DressedState.vacuum(spec)
    e1 = Unitary(1j * s1, sge_bt_projection(0.0, SGEBTParams(s1, c1)))
    e2 = Unitary(1j * s2, sge_bt_projection(0.0, SGEBTParams(s2, c2)))
    rel = quad_relation(e1, e2)
    return vac.apply(e1).apply(rel.tau2)
