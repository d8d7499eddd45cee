"""Residual checks with self-calibrated tolerances.

A PDE residual is measured on a grid and on its refinement; the halving
ratio confirms the expected order and fixes C_est, and the check passes
when the coarse residual is below SAFETY * C_est * h^order.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import fd
from .errors import GridTooCoarse, UnresolvedGrid
from .fd import Grid
from .hierarchy import flow_rhs
from .linalg import dagger

SAFETY = 3.0
RATIO_RANGE = {2: (3.5, 4.5), 4: (12.0, 20.0)}
ZERO_FLOOR = 1e-11
MASK_CELLS = 3
MIN_WIDTH_CELLS = 8


@dataclass
class ResidualReport:
    name: str
    grid: dict
    residual_max: float
    residual_l2: float
    expected_order: int | None
    tol: float
    tol_formula: str
    passed: bool
    mask_count: int = 0
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in list(d.items()):
            if isinstance(v, float) and not np.isfinite(v):
                d[k] = repr(v)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, default=_jsonable)


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _norms(r: np.ndarray, keep: np.ndarray, cell: float) -> tuple[float, float]:
    vals = np.abs(r[keep])
    if vals.size == 0:
        return 0.0, 0.0
    return float(vals.max()), float(np.sqrt(np.sum(vals**2) * cell))


def dilate(mask: np.ndarray, cells: int = MASK_CELLS) -> np.ndarray:
    """Grow a (nt, nx) mask by ``cells`` nodes in both directions."""
    out = mask.copy()
    for _ in range(cells):
        grown = out.copy()
        grown[1:] |= out[:-1]
        grown[:-1] |= out[1:]
        grown[:, 1:] |= out[:, :-1]
        grown[:, :-1] |= out[:, 1:]
        out = grown
    return out


def _flow_residual(flow, q, grid: Grid, accuracy: int) -> np.ndarray:
    if callable(flow):
        return flow(q, grid)
    if flow == "sine-gordon":
        qxt = fd.d1(fd.d1(q, grid.hx, axis=1, accuracy=accuracy), grid.ht, axis=0, accuracy=accuracy)
        return qxt - np.sin(q)
    qt = fd.d1(q, grid.ht, axis=0, accuracy=accuracy)
    return qt - flow_rhs(flow, q, grid.hx, accuracy=accuracy)


def check_resolution(q: np.ndarray, grid: Grid, cells: int = MIN_WIDTH_CELLS) -> float:
    """Width max|q| / max|q_x| in units of hx; UnresolvedGrid below ``cells``."""
    mag = np.abs(q).reshape(q.shape[:2] + (-1,))
    qx = np.abs(fd.d1(q, grid.hx, axis=1, accuracy=2)).reshape(mag.shape)
    top = float(mag.max())
    if top <= ZERO_FLOOR:
        return np.inf
    width = top / max(float(qx.max()), 1e-300) / grid.hx
    if width < cells:
        raise UnresolvedGrid(f"feature width {width:.2f} cells < {cells}")
    return width


def pde_residual(source, flow, grid: Grid, expected_order: int = 2, mask_fn: Callable | None = None,
                 margin: int | tuple[int, int] = 4, name: str | None = None, tol: float | None = None,
                 check_width: bool = True) -> ResidualReport:
    """Residual of a named flow (or a callable residual(q, grid)).

    ``source`` is an evaluator (X, T) -> field, in which case the check is
    repeated on the refined grid to confirm the order and calibrate the
    tolerance, or a field sampled on ``grid`` together with an explicit
    ``tol``.  ``mask_fn(X, T)`` marks singular nodes; nodes within three
    cells of them are excluded and counted.  ``margin`` is a node count, or
    a (t, x) pair, dropped at the edges where stencils are one-sided.
    Stencil accuracy equals the expected order.  The width heuristic is
    skipped when the mask flags any node.
    """
    name = name or (flow if isinstance(flow, str) else getattr(flow, "__name__", "residual"))
    acc = 4 if expected_order == 4 else 2

    def measure(g: Grid, q=None, width=True):
        X, T = g.mesh()
        if q is None:
            q = source(X, T)
        if width:
            check_resolution(q, g)
        with np.errstate(all="ignore"):
            r = _flow_residual(flow, q, g, acc)
        if r.ndim > 2:
            r = np.abs(r).reshape(r.shape[:2] + (-1,)).max(axis=-1)
        return np.abs(r)

    X, T = grid.mesh()
    mt, mx = (margin, margin) if np.isscalar(margin) else margin
    keep = np.zeros(X.shape, dtype=bool)
    keep[mt:X.shape[0] - mt, mx:X.shape[1] - mx] = True
    if not keep.any():
        raise GridTooCoarse(f"no interior nodes left after a margin of {(mt, mx)}")
    count = 0
    if mask_fn is not None:
        bad = dilate(np.asarray(mask_fn(X, T), dtype=bool))
        count = int(np.sum(bad & keep))
        keep &= ~bad
    # the width heuristic means nothing next to a pole
    width = check_width and count == 0
    r = measure(grid, None if callable(source) else np.asarray(source), width)
    cell = grid.hx * grid.ht
    rmax, rl2 = _norms(r, keep, cell)

    if not callable(source):
        if tol is None:
            raise ValueError("a sampled field needs an explicit tol")
        return ResidualReport(name, grid.meta(), rmax, rl2, expected_order, tol, "given",
                              bool(rmax <= tol), count)

    # the refined grid contains the coarse nodes; compare there so the mask
    # and margin cover the same physical points at both resolutions
    fine = grid.refined()
    r2 = measure(fine, width=width)
    rmax2, _ = _norms(r2[::2, ::2], keep, cell)
    h = max(grid.hx, grid.ht)
    params = {"fine_residual_max": rmax2}
    if rmax <= ZERO_FLOOR and rmax2 <= ZERO_FLOOR:
        tol_v = ZERO_FLOOR
        formula = f"floor {ZERO_FLOOR:g} (both residuals at round-off)"
        ok = True
        params["ratio"] = None
    else:
        ratio = rmax / max(rmax2, 1e-300)
        c_est = rmax2 / (h / 2) ** expected_order
        tol_v = SAFETY * c_est * h**expected_order if tol is None else tol
        lo, hi = RATIO_RANGE[expected_order]
        formula = f"{SAFETY:g} * C_est * h^{expected_order}, C_est = r(h/2) / (h/2)^{expected_order}; ratio in [{lo}, {hi}]"
        ok = bool(rmax <= tol_v and lo <= ratio <= hi)
        params.update(ratio=ratio, C_est=c_est)
    return ResidualReport(name, grid.meta(), rmax, rl2, expected_order, tol_v, formula, ok, count, params)


# ---------------------------------------------------------------------------
# reality


def reality_defect(kind: str, E_eval: Callable, lams, J=None, n: int | None = None) -> float:
    """Largest deviation of a reality identity for a lam -> matrix evaluator.

    un:   E(conj lam)^* E(lam) = I
    ukj:  E(conj lam)^* J E(lam) = J
    kdv:  conj E(conj lam) = E(lam) and phi^{-1} E phi even in lam
    kw:   tau^{-1} E(w^{-1} lam) tau = E(lam)
    gd:   phi_n^{-1} E phi_n invariant under lam -> w lam
    """
    if kind == "kdv":
        from .kdv import kdv_reality_check

        return kdv_reality_check(E_eval, lams)
    if kind in ("kw", "gd"):
        from .kwgd import CyclicFrame, GDFrame

        frame = CyclicFrame(n) if kind == "kw" else GDFrame(n)
        return frame.reality_defect(E_eval, lams)
    worst = 0.0
    for lam in lams:
        A = np.asarray(E_eval(lam))
        B = np.asarray(E_eval(np.conj(lam)))
        m = A.shape[-1]
        if kind == "un":
            D = dagger(B) @ A - np.eye(m)
        elif kind == "ukj":
            Jm = np.diag(J)
            D = dagger(B) @ Jm @ A - Jm
        else:
            raise ValueError(f"unknown reality class {kind!r}")
        worst = max(worst, float(np.max(np.abs(D))))
    return worst


def reality_residual(kind: str, E_eval: Callable, lams, tol: float = 1e-10, J=None, n=None,
                     name: str | None = None) -> ResidualReport:
    d = reality_defect(kind, E_eval, lams, J=J, n=n)
    return ResidualReport(name or f"reality-{kind}", {"lams": [complex(l) for l in lams]}, d, d, None, tol,
                          "max deviation over samples <= tol", bool(d <= tol))


# ---------------------------------------------------------------------------
# cross-route and periodicity


def oracle_compare(eval1, eval2, grid: Grid, tol: float, mask_fn: Callable | None = None,
                   name: str = "oracle") -> ResidualReport:
    """Max and L2 difference of two evaluators (or sampled fields) on a common grid."""
    X, T = grid.mesh()
    a = eval1(X, T) if callable(eval1) else np.asarray(eval1)
    b = eval2(X, T) if callable(eval2) else np.asarray(eval2)
    d = np.abs(a - b)
    if d.ndim > 2:
        d = d.reshape(d.shape[:2] + (-1,)).max(axis=-1)
    keep = np.ones(X.shape, dtype=bool)
    count = 0
    if mask_fn is not None:
        bad = dilate(np.asarray(mask_fn(X, T), dtype=bool))
        count = int(bad.sum())
        keep &= ~bad
    with np.errstate(invalid="ignore"):
        rmax, rl2 = _norms(np.where(np.isfinite(d), d, np.inf), keep, grid.hx * max(grid.ht, 1.0))
    return ResidualReport(name, grid.meta(), rmax, rl2, None, tol, "max difference <= tol",
                          bool(rmax <= tol), count)


def periodicity_residual(evaluator, period: float, grid: Grid, tol: float = 1e-9,
                         direction=(0.0, 1.0), name: str = "periodicity") -> ResidualReport:
    """max |u((x, t) + period * direction) - u(x, t)| over the grid.

    direction = (0, 1) is plain time periodicity; the characteristic-frame
    breather uses (1/2, -1/2), one period of lab time x - t at fixed x + t.
    """
    if not period > 0:
        raise ValueError("period must be positive")
    X, T = grid.mesh()
    dx, dt = period * direction[0], period * direction[1]
    d = np.abs(evaluator(X + dx, T + dt) - evaluator(X, T))
    if d.ndim > 2:
        d = d.reshape(d.shape[:2] + (-1,)).max(axis=-1)
    rmax, rl2 = _norms(d, np.ones(X.shape, dtype=bool), grid.hx * max(grid.ht, 1.0))
    return ResidualReport(name, grid.meta(), rmax, rl2, None, tol, "max |u(t+T) - u(t)| <= tol",
                          bool(rmax <= tol), params={"period": period, "direction": list(direction)})


# ---------------------------------------------------------------------------
# fault injection


def perturbed(evaluator, eps: float = 1e-3, kind: str = "bump"):
    """A copy of ``evaluator`` with a smooth localized defect added."""

    def f(X, T):
        base = evaluator(X, T)
        bump = eps * np.exp(-((np.asarray(X) - 0.3) ** 2) - (np.asarray(T) - 0.1) ** 2)
        if kind == "time":
            bump = eps * np.asarray(T) * np.exp(-np.asarray(X) ** 2)
        return base + bump.reshape(bump.shape + (1,) * (np.ndim(base) - bump.ndim))

    return f


def conjugated(E_eval, scale: float = 2.0):
    """Fault injection for reality checks: E -> S E S^{-1}, S = diag(scale, 1, ..).

    Entrywise complex conjugation would not do here: the unitary identity
    survives it.
    """

    def f(lam):
        E = np.asarray(E_eval(lam))
        s = np.ones(E.shape[-1])
        s[0] = scale
        return s[:, None] * E / s[None, :]

    return f
