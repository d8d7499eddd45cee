"""Closed-form soliton evaluators.

* ``one_soliton``: g_{z,pi} * 0 from the projection onto E(z)^* V.
* ``n_soliton``: the determinant-style formula built from the matrix
  F = (f_mk), with rank-one data.
* ``breather``: the sine-Gordon breather in two coordinate conventions.
* ``periodic_poles``: poles whose solitons share a common time period.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import gcd

import numpy as np

from .dressing import DressedState, Unitary, unitary
from .errors import (DegenerateAngle, FSingularAtPoint, NoCommonPeriod, RankDeficientU,
                     RealPole)
from .hierarchy import HierarchySpec
from .linalg import DEGENERACY_RTOL, HermProj, as_basis, comm, herm_matrix, proj_from_basis

F_COND_MAX = 1e12


def _phase(spec: HierarchySpec, X, T, lam) -> np.ndarray:
    """a lam x + b lam^j t, shape (..., n)."""
    X = np.asarray(X, dtype=float)[..., None]
    T = np.asarray(T, dtype=float)[..., None]
    return spec.a * lam * X + spec.b * lam ** spec.j * T


def _balanced(expo: np.ndarray, v: np.ndarray) -> np.ndarray:
    """exp(expo) * v with the dominant real exponent factored out (unit-norm output)."""
    shift = expo.real.max(axis=-1, keepdims=True)
    w = np.exp(expo - shift) * v
    return w / np.linalg.norm(w, axis=-1, keepdims=True)


class OneSoliton:
    """g_{z,pi} * 0 for a u(n) flow, via pi~ onto exp(-a conj(z) x - b conj(z)^j t) V."""

    def __init__(self, spec: HierarchySpec, z: complex, vectors):
        if abs(complex(z).imag) <= 1e-8:
            raise RealPole("pole must be off the real axis")
        U = as_basis(vectors)
        s = np.linalg.svd(U, compute_uv=False)
        if s[-1] <= DEGENERACY_RTOL * s[0]:
            raise RankDeficientU("basis of V is rank deficient")
        self.spec, self.z, self.U = spec, complex(z), U

    def projection(self, X, T) -> np.ndarray:
        expo = -_phase(self.spec, X, T, np.conj(self.z))
        shift = expo.real.max(axis=-1, keepdims=True)
        W = np.exp(expo - shift)[..., :, None] * self.U
        W = W / np.linalg.norm(W, axis=-2, keepdims=True)
        return herm_matrix(W)

    def __call__(self, X, T) -> np.ndarray:
        P = self.projection(X, T)
        return (self.z - np.conj(self.z)) * comm(P, self.spec.A)


def one_soliton(spec: HierarchySpec, z: complex, vectors) -> OneSoliton:
    return OneSoliton(spec, z, vectors)


def ex518_B(z: complex, v, j: int, X, T) -> np.ndarray:
    """Closed-form off-diagonal block for a = diag(-i, i, ..., i), V = span(1, v)."""
    v = np.asarray(v, dtype=complex)
    X = np.asarray(X, dtype=float)[..., None]
    T = np.asarray(T, dtype=float)[..., None]
    zj = z ** j
    e = z.imag * X + zj.imag * T
    num = 4 * z.imag * np.exp(2j * (z.real * X + zj.real * T)) * np.conj(v)
    return num / (np.exp(-2 * e) + np.exp(2 * e) * np.vdot(v, v).real)


def nls_soliton(s: float, c: complex, X, T) -> np.ndarray:
    """q = 4 s conj(c) e^{2 i s^2 t} / (|c|^2 e^{2 s x} + e^{-2 s x})."""
    X = np.asarray(X, dtype=float)
    T = np.asarray(T, dtype=float)
    return 4 * s * np.conj(c) * np.exp(2j * s * s * T) / (abs(c) ** 2 * np.exp(2 * s * X) + np.exp(-2 * s * X))


# ---------------------------------------------------------------------------
# N-soliton

@dataclass(frozen=True)
class SingularityData:
    """Poles z_1..z_N and rank-one projections given by vectors v_1..v_N."""

    poles: tuple
    vectors: tuple

    def __post_init__(self):
        z = [complex(p) for p in self.poles]
        if len(z) != len(self.vectors):
            raise ValueError("one vector per pole")
        for i, zi in enumerate(z):
            if abs(zi.imag) <= 1e-8:
                raise RealPole(f"pole {zi} is real")
            for k, zk in enumerate(z):
                if i != k and (abs(zi - zk) < 1e-12 or abs(zi - np.conj(zk)) < 1e-12):
                    raise ValueError("poles must be distinct and not conjugate to each other")
        object.__setattr__(self, "poles", tuple(z))
        object.__setattr__(self, "vectors", tuple(np.asarray(v, dtype=complex).ravel() for v in self.vectors))

    @property
    def N(self) -> int:
        return len(self.poles)

    def projections(self) -> list[HermProj]:
        return [proj_from_basis([v]) for v in self.vectors]


class SolitonEvaluator:
    """u~ = sum_k [P_k, a] with P_k = (sum_m v~_m f^{mk}) v~_k^*.

    v~_k = exp(-a conj(z_k) x - b conj(z_k)^j t) v_k, and
    f_mk = v~_m^* v~_k / (z_m - conj z_k).  The dressing loop at (x, t) is
    g~(lam) = I + sum_k P_k / (lam - z_k).
    """

    def __init__(self, spec: HierarchySpec, data: SingularityData, strict: bool = True):
        self.spec, self.data, self.strict = spec, data, strict

    def _parts(self, X, T):
        z = np.array(self.data.poles)
        Vt = []
        for zk, vk in zip(z, self.data.vectors):
            Vt.append(_balanced(-_phase(self.spec, X, T, np.conj(zk)), vk))
        Vt = np.stack(Vt, axis=-1)  # (..., n, N), unit columns
        G = np.conj(np.swapaxes(Vt, -1, -2)) @ Vt  # v_m^* v_k
        F = G / (z[:, None] - np.conj(z)[None, :])
        cond = np.linalg.cond(F)
        if self.strict and np.any(cond > F_COND_MAX):
            raise FSingularAtPoint(f"cond(F) up to {np.max(cond):.2e}")
        I = np.broadcast_to(np.eye(z.size), F.shape)
        Finv = np.linalg.solve(F, I)
        Finv = Finv + np.linalg.solve(F, I - F @ Finv)  # one refinement step
        Xi = Vt @ Finv  # column k is xi_k
        return Vt, Xi, cond

    def residues(self, X, T) -> list[np.ndarray]:
        Vt, Xi, _ = self._parts(X, T)
        return [Xi[..., :, k, None] * np.conj(Vt[..., None, :, k]) for k in range(self.data.N)]

    def cond(self, X, T) -> np.ndarray:
        return self._parts(X, T)[2]

    def __call__(self, X, T) -> np.ndarray:
        a = self.spec.A
        return sum(comm(P, a) for P in self.residues(X, T))

    def loop(self, X, T, lam) -> np.ndarray:
        """g~(x, t, lam) = I + sum_k P_k / (lam - z_k)."""
        P = self.residues(X, T)
        return np.eye(self.spec.n) + sum(Pk / (lam - zk) for Pk, zk in zip(P, self.data.poles))

    def trivialization(self, X, T, lam) -> np.ndarray:
        """E~ = g(lam) e(x, t, lam) g~(x, t, lam)^{-1} with g(lam) = g~(0, 0, lam)."""
        X = np.asarray(X, dtype=float)
        g0 = self.loop(np.zeros(()), np.zeros(()), lam)
        e = np.exp(_phase(self.spec, X, T, lam))[..., :, None] * np.eye(self.spec.n)
        return g0 @ e @ np.linalg.inv(self.loop(X, T, lam))


def n_soliton(spec: HierarchySpec, data: SingularityData, strict: bool = True) -> SolitonEvaluator:
    return SolitonEvaluator(spec, data, strict)


def chain_from_data(spec: HierarchySpec, data: SingularityData) -> DressedState:
    """The same dressing as a chain of unitary simple elements.

    Writing g(lam) = g~(0, 0, lam) as h_N ... h_1 with h_k = g_{z_k, tau_k}, the
    rightmost factor's projection is onto ker g(conj z_1) = span v_1, and in
    general tau_k projects onto (h_{k-1} ... h_1)(conj z_k) v_k.
    """
    state = DressedState.vacuum(spec)
    done: list[Unitary] = []
    for zk, vk in zip(data.poles, data.vectors):
        w = vk.copy()
        for e in done:
            w = e.matrix(np.conj(zk)) @ w
        elem = unitary(zk, [w])
        done.append(elem)
        state = state.apply(elem)
    return state


# ---------------------------------------------------------------------------
# breathers

def breather(theta: float, convention: str = "sge"):
    """Sine-Gordon breather q(x, t).

    ``"minus"``: 4 atan(sin th sin((x+t) cos th) / (cos th cosh((x-t) sin th))),
    a solution of q_xt = -sin q (the lab-frame breather in X = x - t,
    T = x + t).  ``"sge"``: the same with t -> -t, a solution of q_xt = sin q.
    """
    c, s = np.cos(theta), np.sin(theta)
    if abs(c) < 1e-12 or abs(s) < 1e-12:
        raise DegenerateAngle("need sin(theta) and cos(theta) non-zero")
    if convention not in ("sge", "minus"):
        raise ValueError(convention)
    sign = 1.0 if convention == "minus" else -1.0

    def q(X, T):
        X = np.asarray(X, dtype=float)
        T = np.asarray(T, dtype=float)
        return 4 * np.arctan(s * np.sin((X + sign * T) * c) / (c * np.cosh((X - sign * T) * s)))

    q.period = 2 * np.pi / c
    # shift (dx, dt) that advances lab time by one period at fixed lab position
    q.shift = (np.pi / c, sign * np.pi / c)
    return q


def breather_state(theta: float, convention: str = "sge", vector=(1.0, 1.0)) -> DressedState:
    """Quadratic dressing (g_{z,pi} g_{-conj z, pi}) * 0 producing the breather.

    With a = diag(i, -i) the poles are z = e^{i th}/2 and -conj(z); b = -a/4
    for the ``sge`` convention and b = a/4 for the ``minus`` one.
    """
    beta = -0.25 if convention == "sge" else 0.25
    spec = HierarchySpec.sine_gordon(beta)
    z = 0.5 * np.exp(1j * theta)
    return DressedState.vacuum(spec).apply(unitary(z, [vector])).apply(unitary(-np.conj(z), [vector]))


# ---------------------------------------------------------------------------
# time-periodic poles

@dataclass(frozen=True)
class PeriodicPoles:
    poles: list
    periods: list
    period: float


def _rational(v, what: str) -> Fraction:
    f = Fraction(v).limit_denominator(10**6)
    if abs(float(f) - float(v)) > 1e-12:
        raise NoCommonPeriod(f"{what} {v} is not (close to) rational")
    return f


def _frac_gcd(fs) -> Fraction:
    """Largest rational g with every f / g an integer."""
    num, den = 0, 1
    for f in fs:
        f = abs(Fraction(f))
        if f == 0:
            continue
        num = gcd(num, f.numerator)
        den = den * f.denominator // gcd(den, f.denominator)
    if num == 0:
        raise NoCommonPeriod("all frequencies vanish")
    return Fraction(num, den)


def periodic_poles(j: int, rhos, b=(1, -1)) -> PeriodicPoles:
    """Poles whose solitons are periodic in t, with a common period.

    j >= 3: z = rho e^{2 pi i / j}, so z^j = rho^j.  j = 2: z = i rho.  For
    b = i diag(b_1, ..., b_n) with rational b_r, a pole with real z^j gives
    t-frequencies (b_r - b_s) z^j; the period is 2 pi over their rational gcd.

    j = -1: ``rhos`` holds the rational values cos(theta_k) and the poles are
    e^{i theta_k} (upper half plane); the returned period is the common
    multiple of 2 pi / cos(theta_k) in the time T = x + t.
    """
    if j == -1:
        cs = [_rational(c, "cos(theta)") for c in rhos]
        if any(c == 0 or abs(c) >= 1 for c in cs):
            raise ValueError("need 0 < |cos(theta)| < 1")
        poles = [complex(float(c), np.sqrt(1 - float(c) ** 2)) for c in cs]
        periods = [2 * np.pi / abs(float(c)) for c in cs]
        return PeriodicPoles(poles, periods, 2 * np.pi / float(_frac_gcd(cs)))
    if j < 2:
        raise ValueError("j must be >= 2 or -1")
    rs = [_rational(r, "rho") for r in rhos]
    bs = [_rational(v, "b entry") for v in b]
    if any(r == 0 for r in rs):
        raise ValueError("rho must be non-zero")
    diffs = {bi - bk for bi in bs for bk in bs if bi != bk}
    poles, periods, freqs = [], [], []
    for r in rs:
        if j == 2:
            z, zj = 1j * float(r), -(r ** 2)
        else:
            z, zj = float(r) * np.exp(2j * np.pi / j), r ** j
        f = [d * zj for d in diffs]
        poles.append(z)
        periods.append(2 * np.pi / float(_frac_gcd(f)))
        freqs.extend(f)
    return PeriodicPoles(poles, periods, 2 * np.pi / float(_frac_gcd(freqs)))
