"""Named reproductions run by ``loopdress paper-example``.

Most entries are plain experiment dicts; each may add extra algebraic
checks that do not fit the grid/flow format.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import UnknownExample
from .verify import ResidualReport

BREATHER_THETA = 0.6
U11_POLE = 0.3 - 0.5j
U11_VECTOR = (2.0, 1.0)


def _nls():
    return {
        "name": "nls-1soliton",
        "hierarchy": {"kind": "matrix", "a": ["1j", "-1j"], "j": 2, "reality": "un"},
        "chain": [{"type": "unitary", "z": [0, 1], "vectors": [[1, 0.5]]}],
        "grid": {"x": [-10, 10], "t": [-2, 2], "hx": 0.02, "ht": 0.02},
        "outputs": {"fields": ["u01"], "checks": [
            {"kind": "pde", "flow": "nls", "field": "u01"},
            {"kind": "closed-form", "field": "u01", "form": "nls-soliton", "params": {"s": 1.0, "c": 0.5}, "tol": 1e-10},
            {"kind": "reality"},
        ]},
    }


def _breather():
    th = BREATHER_THETA
    z = 0.5 * complex(math.cos(th), math.sin(th))
    return {
        "name": "sge-breather",
        "hierarchy": {"kind": "matrix", "a": ["1j", "-1j"], "b": ["-0.25j", "0.25j"], "j": -1, "reality": "twisted"},
        "chain": [{"type": "unitary", "z": [z.real, z.imag], "vectors": [[1, 1]]},
                  {"type": "unitary", "z": [-z.real, z.imag], "vectors": [[1, 1]]}],
        "grid": {"x": [-10, 10], "t": [-3, 3], "hx": 0.05, "ht": 0.05},
        "outputs": {"fields": ["angle"], "anchor": 0.0, "checks": [
            {"kind": "pde", "flow": "sine-gordon", "field": "angle"},
            {"kind": "closed-form", "field": "angle", "form": "breather", "params": {"theta": th}, "tol": 1e-8},
            # one period of lab time x - t at fixed x + t
            {"kind": "periodicity", "field": "angle", "period": 2 * math.pi / math.cos(th),
             "direction": [0.5, -0.5], "tol": 1e-9},
            {"kind": "reality"},
        ]},
    }


def _kdv_sech():
    return {
        "name": "kdv-sech2",
        "hierarchy": {"kind": "kdv"},
        "chain": [{"type": "kdv", "xi": 0.5, "k": 1.0}],
        "grid": {"x": [-8, 8], "t": [-0.5, 0.5], "hx": 0.02, "ht": 0.01},
        "outputs": {"fields": ["q"], "checks": [
            {"kind": "closed-form", "form": "kdv-soliton", "params": {"xi": 0.5, "k": 1.0}, "tol": 1e-10},
            {"kind": "pde", "flow": "kdv"},
            {"kind": "reality"},
        ]},
    }


def _kdv_rational():
    return {
        "name": "kdv-rational",
        "hierarchy": {"kind": "kdv"},
        "chain": [{"type": "kdv", "xi": 1.0, "k": 0.0}],
        "grid": {"x": [-4, 4], "t": [-0.5, 0.5], "hx": 0.02, "ht": 0.01},
        "outputs": {"fields": ["q"], "checks": [
            {"kind": "closed-form", "form": "kdv-rational", "params": {"xi": 1.0}, "tol": 1e-10},
            {"kind": "pde", "flow": "kdv", "mask_radius": 0.5},
            {"kind": "singular-scan", "expect": "nonempty"},
        ]},
    }


KW3_V = [1.0, [0.5, 0.2], -0.3]
KW3_K = [0.9, 0.2]


def _kw3():
    return {
        "name": "kw3-darboux",
        "hierarchy": {"kind": "kw", "n": 3},
        "chain": [{"type": "kw", "v": KW3_V, "k": KW3_K}],
        "grid": {"x": [-3, 3], "t": [-0.1, 0.1], "hx": 0.02, "ht": 0.01},
        "outputs": {"fields": ["q1", "q2"], "checks": [
            {"kind": "pde", "flow": "kw", "order": 2},
            {"kind": "reality"},
        ]},
    }


def _u11():
    return {
        "name": "u11-singular",
        "hierarchy": {"kind": "matrix", "a": ["1j", "-1j"], "j": 2, "reality": "ukj", "J": 1},
        "chain": [{"type": "j-unitary", "z": [U11_POLE.real, U11_POLE.imag], "vectors": [list(U11_VECTOR)]}],
        "grid": {"x": [-3, 3], "t": [-0.5, 0.5], "hx": 0.05, "ht": 0.05},
        "outputs": {"fields": ["u01"], "checks": [{"kind": "singular-scan", "expect": "nonempty"}]},
    }


SPECS = {
    "nls-1soliton": _nls,
    "sge-breather": _breather,
    "kdv-sech2": _kdv_sech,
    "kdv-rational": _kdv_rational,
    "kw3-darboux": _kw3,
    "u11-singular": _u11,
}
CUSTOM = ("bianchi-sge", "gd-phi-table")
NAMES = tuple(SPECS) + CUSTOM


def spec_dict(name: str) -> dict | None:
    if name not in NAMES:
        raise UnknownExample(f"unknown example {name!r}; choose from {', '.join(NAMES)}")
    return SPECS[name]() if name in SPECS else None


def _report(name, value, tol, params=None, formula="max deviation <= tol") -> ResidualReport:
    return ResidualReport(name, {}, float(value), float(value), None, tol, formula, bool(value <= tol), 0, params or {})


# ---------------------------------------------------------------------------
# extra checks


def kw3_extras() -> list[ResidualReport]:
    from .kwgd import CyclicFrame, KWState, kw_simple, zeta
    from .fd import Grid

    v = np.array([1.0, 0.5 + 0.2j, -0.3])
    k = 0.9 + 0.2j
    e = kw_simple(v, k)
    fr = CyclicFrame(3)
    kern = max(np.abs(e.matrix(fr.w**i * k) @ np.linalg.matrix_power(np.linalg.inv(fr.tau), i) @ v).max()
               for i in range(3))
    inv = max(np.abs(e.matrix(lam) @ e.inverse(lam) - np.eye(3)).max() for lam in (0.3 + 0.1j, -1.1j, 2.0))
    g = Grid.uniform(-1.5, 1.5, 0.05, -0.1, 0.1, 0.05)
    ys = KWState(3).apply(e).evaluate(*g.mesh()).ys[0]
    d = np.linalg.det(zeta(ys))
    spread = float(np.ptp(d.real) + np.ptp(d.imag))
    return [_report("kw:kernel", kern, 1e-12), _report("kw:inverse", inv, 1e-12),
            _report("kw:det-zeta-constant", spread, 1e-10, {"det": [d.flat[0].real, d.flat[0].imag]})]


def displayed_phi(n: int, lam):
    """The phi_2, phi_3, phi_4 tables as printed in the source, entry by entry."""
    w = np.exp(2j * np.pi / n)
    L = lam
    if n == 2:
        return np.array([[1, L], [0, 1]], dtype=complex)
    if n == 3:
        return np.array([[1, L, L**2], [0, 1, (1 + w) * L], [0, 0, 1]], dtype=complex)
    if n == 4:
        s3 = 1 + w + w * w
        return np.array([[1, L, L**2, L**3], [0, 1, (1 + w) * L, s3 * L**2],
                         [0, 0, 1, s3 * L], [0, 0, 0, 1]], dtype=complex)
    raise ValueError("tables are displayed for n = 2, 3, 4 only")


def gd_phi_table(out=print) -> list[ResidualReport]:
    from .kwgd import gd_phi

    reps = []
    for n in (2, 3, 4):
        fr = gd_phi(n)
        out(f"phi_{n}(lam) = sum_i f_i lam^i with")
        for i, fi in enumerate(fr.f):
            out(f"  f_{i} =")
            for row in np.asarray(fi):
                out("    " + "  ".join(f"{complex(c).real:+.6f}{complex(c).imag:+.6f}j" for c in row))
        dev = max(np.abs(fr.phi(lam) - displayed_phi(n, lam)).max() for lam in (0.7, 0.3 + 1.1j, -1.4j))
        reps.append(_report(f"gd:phi{n}-table", dev, 1e-13))
        reps.append(_report(f"gd:phi{n}-identity", fr.identity_defect(), 1e-13))
    return reps


def bianchi_sge(s1=1.0, s2=2.0, c1=1.0, c2=0.5) -> list[ResidualReport]:
    from .fd import Grid
    from .permutability import bianchi_defect, sge_angle, sge_bianchi_state, sge_kink

    g = Grid.uniform(-3, 3, 0.05, -1, 1, 0.05)
    X, T = g.mesh()
    q1 = sge_kink(s1, c1)(X, T)
    q2 = sge_kink(s2, c2)(X, T)
    q3 = sge_angle(sge_bianchi_state(s1, s2, c1, c2), X, T)
    d = bianchi_defect(np.zeros_like(X), q1, q2, q3, s1, s2)
    return [ResidualReport("bianchi:sge", g.meta(), d, d, None, 1e-8,
                           "max |tan((q3-q0)/4) - ((s1+s2)/(s1-s2)) tan((q1-q2)/4)| <= tol", bool(d <= 1e-8), 0,
                           {"s1": s1, "s2": s2, "c1": c1, "c2": c2})]


def u11_extras(points) -> list[ResidualReport]:
    """Distance of the detected locus from xi = ln((c+1)/(c-1))/2, in grid cells."""
    v = np.array(U11_VECTOR)
    c = (abs(v[0]) ** 2 + abs(v[1]) ** 2) / (abs(v[0]) ** 2 - abs(v[1]) ** 2)
    target = 0.5 * math.log((c + 1) / (c - 1))
    z = np.conj(U11_POLE)
    h = 0.05
    cell = math.hypot(2 * z.imag, 2 * (z * z).imag) * h  # change of xi across one cell
    if not points:
        return [_report("u11:locus", math.inf, 1.0)]
    xs = np.array([p[0] for p in points])
    ts = np.array([p[1] for p in points])
    xi = (1j * ((z - np.conj(z)) * xs + (z * z - np.conj(z) ** 2) * ts)).real
    dev = float(np.abs(xi - target).max() / cell)
    return [_report("u11:locus-within-one-cell", dev, 1.0,
                    {"xi_target": target, "points": len(points)}, "max |xi - target| / (|grad xi| h) <= 1")]


def unitary_empty_scan() -> ResidualReport:
    """The same scan on a u(2) state: nothing may be flagged."""
    from .dressing import DressedState, singular_locus_scan, unitary
    from .fd import Grid
    from .hierarchy import HierarchySpec

    st = DressedState.vacuum(HierarchySpec.nls()).apply(unitary(np.conj(U11_POLE), [U11_VECTOR]))
    pts = singular_locus_scan(st, Grid.uniform(-3, 3, 0.05, -0.5, 0.5, 0.05)).points
    return _report("u2:locus-empty", len(pts), 0)
