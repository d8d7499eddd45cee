"""Rational simple elements and their dressing action.

A dressed state is a seed solution (the vacuum by default) together with an
ordered chain of simple elements.  Nothing is cached in rational-function
form: at every (x, t) the chain is walked once, building each new projection
from the current trivialization evaluated at the element's poles, then
updating the trivialization by E -> h E h~^{-1}.

The generic element is

    h(lam) = pi + (lam - alpha2)/(lam - alpha1) (I - pi),

with image V1 and kernel V2.  The unitary element g_{z,pi} is the case
alpha1 = conj(z), alpha2 = z with pi Hermitian.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence, Union

import numpy as np

from .errors import (IncompatibleReality, NoDecayAtLeftEdge, PoleEvaluation,
                     RealPole, SingularAtPoint, StepSizeUnderflow, ZeroScale)
from .fd import Grid
from .hierarchy import HierarchySpec, Reality, q_coefficients, vacuum_diag
from .linalg import (HermProj, JSignature, ObliqueProj, as_basis, comm, dagger,
                     herm_matrix, j_matrix, oblique_matrix, proj_from_basis,
                     retract)

IM_Z_MIN = 1e-8
COND_MAX = 1e10


# ---------------------------------------------------------------------------
# simple elements

@dataclass(frozen=True)
class Unitary:
    """g_{z,pi}(lam) = pi + (lam - z)/(lam - conj z) pi^perp."""

    z: complex
    proj: HermProj

    def __post_init__(self):
        if abs(complex(self.z).imag) <= IM_Z_MIN:
            raise RealPole(f"|Im z| must exceed {IM_Z_MIN}")

    @property
    def alphas(self):
        return np.conj(self.z), complex(self.z)

    def matrix(self, lam) -> np.ndarray:
        P = self.proj.matrix
        return P + (lam - self.z) / (lam - np.conj(self.z)) * (np.eye(P.shape[0]) - P)


@dataclass(frozen=True)
class General:
    """h_{alpha1,alpha2,pi}(lam) = I + (alpha1 - alpha2)/(lam - alpha1) (I - pi)."""

    alpha1: complex
    alpha2: complex
    proj: ObliqueProj

    def __post_init__(self):
        if self.alpha1 == self.alpha2:
            raise ValueError("alpha1 and alpha2 must differ")

    @property
    def alphas(self):
        return complex(self.alpha1), complex(self.alpha2)

    def matrix(self, lam) -> np.ndarray:
        P = self.proj.matrix
        return np.eye(P.shape[0]) + (self.alpha1 - self.alpha2) / (lam - self.alpha1) * (np.eye(P.shape[0]) - P)


@dataclass(frozen=True)
class JUnitary:
    """h_{conj z, z, pi} with pi a J-projection (u(k, n-k) reality)."""

    z: complex
    proj: ObliqueProj
    J: JSignature

    def __post_init__(self):
        if abs(complex(self.z).imag) <= IM_Z_MIN:
            raise RealPole(f"|Im z| must exceed {IM_Z_MIN}")

    @property
    def alphas(self):
        return np.conj(self.z), complex(self.z)

    def matrix(self, lam) -> np.ndarray:
        P = self.proj.matrix
        return P + (lam - self.z) / (lam - np.conj(self.z)) * (np.eye(P.shape[0]) - P)


SimpleElement = Union[Unitary, General, JUnitary]


def unitary(z: complex, vectors) -> Unitary:
    return Unitary(complex(z), proj_from_basis(vectors))


def general(alpha1: complex, alpha2: complex, im, ker) -> General:
    from .linalg import oblique_proj
    return General(complex(alpha1), complex(alpha2), oblique_proj(im, ker))


def j_unitary(z: complex, vectors, J: JSignature) -> JUnitary:
    from .linalg import j_proj_from_basis
    return JUnitary(complex(z), j_proj_from_basis(vectors, J), J)


# ---------------------------------------------------------------------------
# seeds

class VacuumSeed:
    """u = 0 with trivialization exp(a lam x + b lam^j t)."""

    def __init__(self, spec: HierarchySpec):
        self.spec = spec

    def u(self, X, T) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.zeros(X.shape + (self.spec.n, self.spec.n), dtype=complex)

    def E(self, X, T, lam) -> np.ndarray:
        d = vacuum_diag(self.spec, X, T, lam)
        return d[..., :, None] * np.eye(self.spec.n)


class ScaledSeed:
    """The scaling action r*u(x,t) = r^{-1} u(x/r, t/r^j), with E(x/r, t/r^j, r lam)."""

    def __init__(self, base, r: float):
        if r == 0:
            raise ZeroScale("scale must be non-zero")
        self.base = base
        self.r = float(r)
        self.spec = base.spec

    def _xt(self, X, T):
        j = self.spec.j
        return np.asarray(X, dtype=float) / self.r, np.asarray(T, dtype=float) / self.r ** j

    def u(self, X, T):
        x, t = self._xt(X, T)
        return self.base.u(x, t) / self.r

    def E(self, X, T, lam):
        x, t = self._xt(X, T)
        return self.base.E(x, t, self.r * lam)


# ---------------------------------------------------------------------------
# dressed states

@dataclass(frozen=True)
class Evaluation:
    u: np.ndarray
    projections: list
    E: dict = field(default_factory=dict)
    cond: list = field(default_factory=list)


_ALLOWED = {
    Reality.UN: (Unitary,),
    Reality.TWISTED: (Unitary,),
    Reality.SLNC: (General, Unitary),
    Reality.UKJ: (JUnitary,),
}


@dataclass(frozen=True)
class DressedState:
    """Seed solution plus an ordered chain of simple elements (immutable)."""

    spec: HierarchySpec
    chain: tuple = ()
    seed: object = None

    @classmethod
    def vacuum(cls, spec: HierarchySpec) -> "DressedState":
        return cls(spec, (), VacuumSeed(spec))

    def _seed(self):
        return self.seed if self.seed is not None else VacuumSeed(self.spec)

    def apply(self, elem) -> "DressedState":
        return apply_simple(self, elem)

    def poles(self) -> list[complex]:
        out = []
        for e in self.chain:
            out.extend(e.alphas)
        return out

    # the walk ------------------------------------------------------------
    def evaluate(self, X, T, lams: Sequence[complex] = (), strict: bool = True) -> Evaluation:
        X = np.asarray(X, dtype=float)
        T = np.asarray(T, dtype=float)
        seed = self._seed()
        poles = self.poles()
        for lam in lams:
            if any(abs(complex(lam) - p) < 1e-14 for p in poles):
                raise PoleEvaluation(f"lambda = {lam} is a pole of the chain")
        need = list(dict.fromkeys([complex(l) for l in lams] + poles))
        Es = {lam: seed.E(X, T, lam) for lam in need}
        u = np.array(seed.u(X, T), dtype=complex)
        a = self.spec.A
        n = self.spec.n
        I = np.eye(n)
        projs, conds = [], []
        for elem in self.chain:
            al1, al2 = elem.alphas
            Pt, cond = _tilde_projection(elem, Es[al1], Es[al2])
            if strict and np.any(cond > COND_MAX):
                raise SingularAtPoint(f"factorization fails at {int(np.sum(cond > COND_MAX))} points")
            projs.append(Pt)
            conds.append(cond)
            u = u + (al1 - al2) * comm(a, Pt)
            P = elem.proj.matrix
            for lam in list(Es):
                if lam in (al1, al2):
                    del Es[lam]
                    continue
                h = P + (lam - al2) / (lam - al1) * (I - P)
                hti = Pt + (lam - al1) / (lam - al2) * (I - Pt)
                Es[lam] = h @ Es[lam] @ hti
        return Evaluation(u, projs, {l: Es[complex(l)] for l in lams}, conds)

    def u(self, X, T) -> np.ndarray:
        return self.evaluate(X, T).u

    def E(self, X, T, lam) -> np.ndarray:
        return self.evaluate(X, T, [lam]).E[complex(lam)]

    def __call__(self, X, T) -> np.ndarray:
        return self.u(X, T)


def _normalize_cols(W):
    return W / np.linalg.norm(W, axis=-2, keepdims=True)


def _tilde_projection(elem, E1, E2):
    """New projection at every point, with a conditioning indicator."""
    if isinstance(elem, Unitary):
        U = elem.proj.basis
        W = _normalize_cols(dagger(E2) @ U)
        G = dagger(W) @ W
        cond = np.linalg.cond(G) if U.shape[1] else np.ones(W.shape[:-2])
        return herm_matrix(W), cond
    if isinstance(elem, JUnitary):
        d = elem.J.diag
        U = elem.proj.im_basis
        W = _normalize_cols(d[:, None] * (dagger(E2) @ (d[:, None] * U)))
        G = dagger(W) @ (d[:, None] * W)
        s = np.linalg.svd(G, compute_uv=False)
        cond = 1.0 / np.maximum(s[..., -1], 1e-300)
        return j_matrix(W, d), cond
    V1 = elem.proj.im_basis
    V2 = elem.proj.ker_basis
    W1 = _normalize_cols(np.linalg.solve(E1, np.broadcast_to(V1, E1.shape[:-2] + V1.shape)))
    if V2.shape[1]:
        W2 = _normalize_cols(np.linalg.solve(E2, np.broadcast_to(V2, E2.shape[:-2] + V2.shape)))
    else:
        W2 = np.zeros(E1.shape[:-2] + (E1.shape[-1], 0), dtype=complex)
    M = np.concatenate([W1, W2], axis=-1)
    cond = np.linalg.cond(M)
    with np.errstate(all="ignore"):
        P = oblique_matrix(W1, W2) if np.all(np.isfinite(cond)) else _safe_oblique(W1, W2)
    return P, cond


def _safe_oblique(W1, W2):
    M = np.concatenate([W1, W2], axis=-1)
    n = M.shape[-1]
    r = W1.shape[-1]
    D = np.zeros((n, n), dtype=complex)
    D[:r, :r] = np.eye(r)
    Minv = np.linalg.pinv(M)
    return M @ D @ Minv


def apply_simple(state: DressedState, elem) -> DressedState:
    """Append a simple element to the chain (checked against the reality class)."""
    allowed = _ALLOWED.get(state.spec.reality)
    if allowed is None or not isinstance(elem, allowed):
        raise IncompatibleReality(f"{type(elem).__name__} does not act on {state.spec.reality.value} states")
    if isinstance(elem, JUnitary) and state.spec.J is not None and elem.J != state.spec.J:
        raise IncompatibleReality("signature of the element differs from the state's")
    if elem.proj.matrix.shape[0] != state.spec.n:
        raise ValueError("element dimension differs from the hierarchy dimension")
    for p in elem.alphas:
        if any(abs(p - q) < 1e-12 for q in state.poles()):
            raise PoleEvaluation(f"pole {p} already used in the chain")
    return replace(state, chain=state.chain + (elem,), seed=state._seed())


def eval_solution(state: DressedState, x, t) -> np.ndarray:
    return state.u(x, t)


def eval_trivialization(state: DressedState, x, t, lam) -> np.ndarray:
    return state.E(x, t, lam)


def twisted_pairing_ok(state: DressedState, tol: float = 1e-12) -> bool:
    """Every factor is twisted-real or has its partner (-conj z, conj pi) in the chain."""
    els = [e for e in state.chain if isinstance(e, Unitary)]
    for e in els:
        P = e.proj.matrix
        if abs(e.z + np.conj(e.z)) <= tol and np.abs(P.imag).max() <= tol:
            continue
        partner = [f for f in els if abs(f.z + np.conj(e.z)) <= tol
                   and np.abs(f.proj.matrix - np.conj(P)).max() <= tol]
        if not partner:
            return False
    return True


def unitarity_defect(state: DressedState, X, T, lam: complex) -> float:
    """max |E(lam-bar)^* E(lam) - I| over the sample points."""
    ev = state.evaluate(X, T, [lam, np.conj(lam)])
    E1, E2 = ev.E[complex(lam)], ev.E[complex(np.conj(lam))]
    return float(np.max(np.abs(dagger(E2) @ E1 - np.eye(state.spec.n))))


# ---------------------------------------------------------------------------
# scaling

def scaling_action(state, r: float) -> DressedState:
    """r*u as a new (empty-chain) state whose seed is the rescaled input."""
    if r == 0:
        raise ZeroScale("scale must be non-zero")
    return DressedState(state.spec, (), ScaledSeed(state, r))


# ---------------------------------------------------------------------------
# ODE routes

def _rk4(f, y, s0, h, retr):
    k1 = f(s0, y)
    k2 = f(s0 + h / 2, y + h / 2 * k1)
    k3 = f(s0 + h / 2, y + h / 2 * k2)
    k4 = f(s0 + h, y + h * k3)
    return retr(y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4))


def _proj_rhs(P, M):
    """Velocity of the Hermitian projection onto span W when W' = M W."""
    n = P.shape[-1]
    K = (np.eye(n) - P) @ M @ P
    return K + dagger(K)


def _integrate(f, y0, s_grid, retr, substeps=1):
    """RK4 along s_grid (fixed step), returning the state at every node."""
    out = [y0]
    y = y0
    for i in range(len(s_grid) - 1):
        h = (s_grid[i + 1] - s_grid[i]) / substeps
        if h == 0:
            raise StepSizeUnderflow("zero step")
        s = s_grid[i]
        for _ in range(substeps):
            y = _rk4(f, y, s, h, retr)
            s += h
        out.append(y)
    return np.array(out)


@dataclass(frozen=True)
class OdeResult:
    projections: np.ndarray  # (nt, nx, n, n)
    richardson_error: float


def bt_ode_route(spec: HierarchySpec, u_eval: Callable, z: complex, pi0: HermProj, grid: Grid,
                 B_eval: Callable | None = None, richardson: bool = True,
                 substeps: int = 1) -> OdeResult:
    """Integrate the Backlund ODE for the projection from pi0 at the origin.

    The image of the new projection moves by W_x = A(z)^* W, W_t = B(z)^* W,
    which for Hermitian projections is the Riccati system
    P' = (I - P) M P + h.c.  x is integrated along t = 0 from x = 0 in both
    directions, then every x column is integrated in t from t = 0.  Steps are
    RK4 with ``substeps`` steps per grid cell; each step is retracted to the
    projection manifold.  When ``richardson`` is set the whole sweep is
    repeated with halved steps and the max difference is reported.
    """
    if abs(complex(z).imag) <= IM_Z_MIN:
        raise RealPole("real pole")
    a = spec.A

    def A_star(x, t):
        uu = u_eval(np.atleast_1d(x), np.atleast_1d(t))
        return dagger(a * z + uu)

    if B_eval is None:
        B_eval = _b_from_recursion(spec, u_eval, grid)

    def B_star(x, t):
        return dagger(B_eval(np.atleast_1d(x), np.atleast_1d(t), z))

    def sweep(sub):
        x = grid.x
        t = grid.t
        i0 = int(np.argmin(np.abs(x)))
        j0 = int(np.argmin(np.abs(t)))
        P0 = pi0.matrix[None]
        fx = lambda s, P: _proj_rhs(P, A_star(s, t[j0]))
        right = _integrate(fx, P0, x[i0:], retract, sub)
        left = _integrate(fx, P0, x[i0::-1], retract, sub)
        row = np.concatenate([left[::-1, 0][:-1], right[:, 0]], axis=0)  # (nx, n, n)
        ft = lambda s, P: _proj_rhs(P, B_star(x, np.full_like(x, s)))
        up = _integrate(ft, row, t[j0:], retract, sub)
        down = _integrate(ft, row, t[j0::-1], retract, sub)
        return np.concatenate([down[::-1][:-1], up], axis=0)

    P = sweep(substeps)
    err = float(np.max(np.abs(sweep(2 * substeps) - P))) if richardson else float("nan")
    return OdeResult(P, err)


def _b_from_recursion(spec: HierarchySpec, u_eval: Callable, grid: Grid, refine: int = 4):
    """B(x, t, lam) on the x nodes of ``grid``, from the Q recursion (j >= 1).

    The recursion is run on an x grid ``refine`` times finer than ``grid`` so
    that differentiation error stays below the RK4 error of the sweeps.
    """
    if spec.j < 1:
        raise ValueError("the -1 flow needs an explicit B evaluator (see minus_one_b)")
    x = grid.x
    xf = np.linspace(x[0], x[-1], (x.size - 1) * refine + 1)
    hf = (x[-1] - x[0]) / (xf.size - 1)

    def B(xq, tq, lam):
        tv = np.unique(np.atleast_1d(tq))
        if tv.size != 1:
            raise ValueError("B evaluator expects a single time level per call")
        uu = u_eval(xf, np.full_like(xf, tv[0]))
        Q = q_coefficients(spec, uu, hf, spec.j)
        Bf = sum(Q[i] * lam ** (spec.j - i) for i in range(spec.j + 1))[::refine]
        xq = np.atleast_1d(xq)
        if xq.size == x.size and np.allclose(xq, x):
            return Bf
        idx = np.clip(np.searchsorted(x, xq), 0, x.size - 1)
        if not np.allclose(x[idx], xq):
            raise ValueError("B from the recursion is only available on grid nodes")
        return Bf[idx]

    return B


def minus_one_flow_g(u_eval: Callable, x: np.ndarray, t: np.ndarray, decay_tol: float = 1e-6,
                     substeps: int = 1) -> np.ndarray:
    """g(x, t) with g^{-1} g_x = u and g(x_min, t) = I, by RK4 in x.

    Returns an array of shape (nt, nx, n, n).  The left-edge normalization
    stands in for the limit at minus infinity; the size of u there is the
    error bound and is checked against ``decay_tol``.
    """
    x = np.asarray(x, dtype=float)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    u0 = u_eval(np.full_like(t, x[0]), t)
    if np.max(np.abs(u0)) >= decay_tol:
        raise NoDecayAtLeftEdge(f"|u(x_min)| = {np.max(np.abs(u0)):.2e}")
    n = u0.shape[-1]
    g = np.broadcast_to(np.eye(n, dtype=complex), t.shape + (n, n)).copy()
    out = [g]
    f = lambda s, G: G @ u_eval(np.full_like(t, s), t)
    for i in range(x.size - 1):
        h = (x[i + 1] - x[i]) / substeps
        s = x[i]
        for _ in range(substeps):
            g = _rk4(f, g, s, h, lambda y: y)
            s += h
        out.append(g)
    return np.stack(out, axis=1)


def minus_one_b(spec: HierarchySpec, u_eval: Callable, x0: float, x_nodes: np.ndarray,
                t_levels: np.ndarray, substeps: int = 4):
    """B(x, t, lam) = lam^{-1} g^{-1} b g for the -1 flow on fixed nodes.

    g is integrated once from x0 through ``x_nodes`` for all ``t_levels``
    together (vectorized over t); the evaluator only looks values up, and the
    levels must cover every t the caller asks for.
    """
    x_nodes = np.asarray(x_nodes, dtype=float)
    t_levels = np.asarray(t_levels, dtype=float)
    if x_nodes[0] < x0:
        raise ValueError("x nodes must lie right of the normalization point")
    step = float(np.min(np.diff(x_nodes))) if x_nodes.size > 1 else 0.05
    nlead = max(2, int(np.ceil((x_nodes[0] - x0) / step)) + 1)
    lead = np.linspace(x0, x_nodes[0], nlead)
    nodes = np.concatenate([lead, x_nodes[1:]])
    g = minus_one_flow_g(u_eval, nodes, t_levels, substeps=substeps)[:, nlead - 1:]
    Bc = np.linalg.solve(g, spec.B @ g)  # (nt, nx, n, n), still to be divided by lam

    def B(xq, tq, lam):
        xq = np.atleast_1d(np.asarray(xq, dtype=float))
        tq = np.broadcast_to(np.atleast_1d(np.asarray(tq, dtype=float)), xq.shape)
        it = np.abs(t_levels[None, :] - tq[:, None]).argmin(axis=1)
        ix = np.abs(x_nodes[None, :] - xq[:, None]).argmin(axis=1)
        if not (np.allclose(t_levels[it], tq, atol=1e-12) and np.allclose(x_nodes[ix], xq, atol=1e-12)):
            raise ValueError("query outside the precomputed nodes")
        return Bc[it, ix] / lam

    return B


def minus_one_b_for_grid(spec: HierarchySpec, u_eval: Callable, grid: Grid, x0: float,
                         substeps: int = 1, g_substeps: int = 4):
    """``minus_one_b`` on the t levels that ``bt_ode_route`` visits on ``grid``.

    The sweeps start from the node nearest t = 0 and take RK4 half steps of
    the (Richardson-halved) substep, so levels are laid out from that node.
    """
    t = grid.t
    j0 = int(np.argmin(np.abs(t)))
    k = 4 * substeps
    up = np.linspace(t[j0], t[-1], (t.size - 1 - j0) * k + 1)
    down = np.linspace(t[0], t[j0], j0 * k + 1)
    levels = np.unique(np.concatenate([down, up]))
    return minus_one_b(spec, u_eval, x0, grid.x, levels, g_substeps)


# ---------------------------------------------------------------------------
# n-dimensional systems

def ndim_dress(a_list: Sequence[np.ndarray], z: complex, vectors, coords: Sequence[np.ndarray]) -> np.ndarray:
    """g_{z,pi} * 0 for the U(n) n-dimensional system.

    ``a_list`` holds the diagonals a_1..a_m; ``coords`` the broadcastable
    coordinate arrays x_1..x_m.  Returns v = -(z - conj z) (pi~)_* where pi~
    projects onto E(x, z)^* V with E = exp(sum a_i lam x_i) and (.)_* drops
    the diagonal.
    """
    U = as_basis(vectors)
    n = U.shape[0]
    ph = 0
    for a_i, x_i in zip(a_list, coords):
        ph = ph + np.asarray(a_i)[None] * np.asarray(x_i, dtype=float)[..., None]
    # E(z)^* = exp(conj(a z x)) for diagonal a
    Ed = np.conj(np.exp(ph * z))
    W = Ed[..., :, None] * U
    P = herm_matrix(_normalize_cols(W))
    off = P * (1 - np.eye(n))
    return -(z - np.conj(z)) * off


def ndim_residual(a_list, v: np.ndarray, spacings: Sequence[float], accuracy: int = 2, margin: int = 2) -> float:
    """max |[a_i, v_{x_j}] - [a_j, v_{x_i}] - [[a_i, v], [a_j, v]]| over pairs i < j."""
    from . import fd
    m = len(a_list)
    A = [np.diag(np.asarray(a)) for a in a_list]
    dv = [fd.d1(v, spacings[i], axis=i, accuracy=accuracy) for i in range(m)]
    worst = 0.0
    sl = tuple(slice(margin, s - margin) for s in v.shape[:m])
    for i in range(m):
        for j in range(i + 1, m):
            R = comm(A[i], dv[j]) - comm(A[j], dv[i]) - comm(comm(A[i], v), comm(A[j], v))
            worst = max(worst, float(np.max(np.abs(R[sl]))))
    return worst


# ---------------------------------------------------------------------------
# singular loci

@dataclass(frozen=True)
class SingularLocus:
    points: list  # (x, t) pairs
    conditions: list  # indicator value at each flagged point

    @property
    def empty(self) -> bool:
        return not self.points


def factorization_indicator(state: DressedState, X, T) -> tuple[np.ndarray, np.ndarray]:
    """Real-or-complex indicator whose zeros mark factorization failure, and cond numbers.

    For each non-unitary element the indicator is the determinant of the
    column-normalized matrix [V1~ | V2~] (general) or the Gram matrix
    V~^* J V~ (J-unitary).  The product over the chain is returned.
    """
    X = np.asarray(X, dtype=float)
    T = np.asarray(T, dtype=float)
    seed = state._seed()
    poles = state.poles()
    Es = {lam: seed.E(X, T, lam) for lam in dict.fromkeys(poles)}
    ind = np.ones(X.shape, dtype=complex)
    cond = np.ones(X.shape)
    I = np.eye(state.spec.n)
    for elem in state.chain:
        al1, al2 = elem.alphas
        E1, E2 = Es[al1], Es[al2]
        if isinstance(elem, General):
            V1, V2 = elem.proj.im_basis, elem.proj.ker_basis
            W1 = _normalize_cols(np.linalg.solve(E1, np.broadcast_to(V1, E1.shape[:-2] + V1.shape)))
            W2 = _normalize_cols(np.linalg.solve(E2, np.broadcast_to(V2, E2.shape[:-2] + V2.shape)))
            M = np.concatenate([W1, W2], axis=-1)
            ind = ind * np.linalg.det(M)
        elif isinstance(elem, JUnitary):
            d = elem.J.diag
            U = elem.proj.im_basis
            W = _normalize_cols(d[:, None] * (dagger(E2) @ (d[:, None] * U)))
            ind = ind * np.linalg.det(dagger(W) @ (d[:, None] * W))
        else:
            W = _normalize_cols(dagger(E2) @ elem.proj.basis)
            ind = ind * np.linalg.det(dagger(W) @ W)
        with np.errstate(all="ignore"):
            Pt, c = _tilde_projection(elem, E1, E2)
        cond = np.maximum(cond, np.where(np.isfinite(c), c, np.inf))
        P = elem.proj.matrix
        for lam in list(Es):
            if lam in (al1, al2):
                del Es[lam]
                continue
            h = P + (lam - al2) / (lam - al1) * (I - P)
            hti = Pt + (lam - al1) / (lam - al2) * (I - Pt)
            Es[lam] = h @ Es[lam] @ hti
    return ind, cond


def singular_locus_scan(state: DressedState, grid: Grid) -> SingularLocus:
    """Grid points next to a zero of the factorization indicator.

    A point is flagged when the condition number exceeds 1e10, or when the
    (phase-aligned) indicator changes sign between it and its x-neighbour; of
    the two neighbours the one closer to the linearly interpolated zero is
    reported.  For unitary chains the indicator is a Gram determinant, which
    stays positive, so the scan comes back empty.
    """
    X, T = grid.mesh()
    ind, cond = factorization_indicator(state, X, T)
    pts, vals = [], []
    flagged = np.zeros(X.shape, dtype=bool)
    flagged |= cond > COND_MAX
    # phase alignment: for real-analytic cases the indicator is real up to a constant phase
    ph = np.exp(-1j * np.angle(ind.flat[np.argmax(np.abs(ind))]))
    r = (ind * ph).real
    im = (ind * ph).imag
    real_like = np.max(np.abs(im)) <= 1e-6 * max(np.max(np.abs(r)), 1e-300)
    if real_like:
        s = np.sign(r)
        change = s[:, 1:] * s[:, :-1] < 0
        it, ix = np.nonzero(change)
        for a, b in zip(it, ix):
            r0, r1 = r[a, b], r[a, b + 1]
            frac = r0 / (r0 - r1)
            flagged[a, b + (1 if frac > 0.5 else 0)] = True
    for a, b in zip(*np.nonzero(flagged)):
        pts.append((float(X[a, b]), float(T[a, b])))
        vals.append(float(cond[a, b]))
    return SingularLocus(pts, vals)


def edge_growth(u: np.ndarray, width: int = 5) -> float:
    """Ratio of the largest |u| in the outer x-band to the largest |u| inside it."""
    mag = np.abs(u).reshape(u.shape[:2] + (-1,)).max(axis=-1)
    edge = max(mag[:, :width].max(), mag[:, -width:].max())
    inner = mag[:, width:-width].max()
    return float(edge / max(inner, 1e-300))


def tail_size(u: np.ndarray, width: int = 1) -> float:
    """Largest |u| on the outer x-band of the grid."""
    mag = np.abs(u).reshape(u.shape[:2] + (-1,)).max(axis=-1)
    return float(max(mag[:, :width].max(), mag[:, -width:].max()))
