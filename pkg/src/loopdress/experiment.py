"""Declarative experiment files: parsing, building states, running checks.

An experiment is a JSON object with four blocks::

    {
      "name": "nls-1soliton",
      "hierarchy": {"kind": "matrix", "a": ["1j", "-1j"], "j": 2, "reality": "un"},
      "chain": [{"type": "unitary", "z": [0, 1], "vectors": [[1, 0.5]]}],
      "grid": {"x": [-10, 10], "t": [-2, 2], "hx": 0.02, "ht": 0.02},
      "outputs": {"fields": ["u01"], "checks": [{"kind": "pde", "flow": "nls", "field": "u01"}]}
    }

Complex numbers are written as a number, a [re, im] pair or a string such as
"0.3+0.5j".  Unknown keys and non-finite numbers are rejected.
"""
from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import ParseError
from .fd import Grid

HIERARCHY_KINDS = ("matrix", "kdv", "kw", "gd")
ELEMENT_TYPES = {
    "matrix": ("unitary", "general", "j-unitary", "sge-bt"),
    "kdv": ("kdv",),
    "kw": ("kw",),
    "gd": ("gd",),
}
CHECK_KINDS = ("pde", "reality", "singular-scan", "periodicity", "closed-form")
CLOSED_FORMS = ("nls-soliton", "breather", "kdv-soliton", "kdv-rational", "kink")

_KEYS = {
    "top": {"name", "hierarchy", "chain", "grid", "outputs"},
    "hierarchy": {"kind", "n", "a", "b", "j", "reality", "J"},
    "unitary": {"type", "z", "vectors"},
    "general": {"type", "alpha1", "alpha2", "im", "ker"},
    "j-unitary": {"type", "z", "vectors"},
    "sge-bt": {"type", "s", "c0"},
    "kdv": {"type", "xi", "k"},
    "kw": {"type", "v", "k"},
    "gd": {"type", "v", "k"},
    "grid": {"x", "t", "hx", "ht"},
    "outputs": {"fields", "checks", "anchor"},
    "pde": {"kind", "flow", "field", "order", "mask_radius", "tol"},
    "reality": {"kind", "lams", "tol", "x", "t"},
    "singular-scan": {"kind", "expect"},
    "periodicity": {"kind", "field", "period", "direction", "tol"},
    "closed-form": {"kind", "field", "form", "params", "tol"},
}


# ---------------------------------------------------------------------------
# parsing


class _Src:
    """Raw text, used to turn a key path into a line and column."""

    def __init__(self, text: str):
        self.text = text

    def locate(self, key: str | None) -> tuple[int | None, int | None]:
        if key is None:
            return None, None
        m = re.search(r'"%s"\s*:' % re.escape(key), self.text)
        if not m:
            return None, None
        line = self.text.count("\n", 0, m.start()) + 1
        col = m.start() - (self.text.rfind("\n", 0, m.start()) + 1) + 1
        return line, col

    def fail(self, msg: str, key: str | None = None):
        raise ParseError(msg, *self.locate(key))


def _finite_float(s: str) -> float:
    v = float(s)
    if not math.isfinite(v):
        raise ValueError(f"non-finite number {s}")
    return v


def _reject_constant(s: str):
    raise ValueError(f"non-finite number {s}")


def loads(text: str) -> dict:
    """json.loads with positions on syntax errors and no NaN or Infinity."""
    try:
        return json.loads(text, parse_float=_finite_float, parse_constant=_reject_constant)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, e.lineno, e.colno) from None
    except ValueError as e:
        m = re.search(r"-?(NaN|Infinity)|\d[\d.eE+-]*[eE]\+?\d{3,}", text)
        line = col = None
        if m:
            line = text.count("\n", 0, m.start()) + 1
            col = m.start() - (text.rfind("\n", 0, m.start()) + 1) + 1
        raise ParseError(str(e), line, col) from None


def as_complex(v, src: _Src, key: str) -> complex:
    if isinstance(v, bool):
        src.fail(f"{key}: expected a number", key)
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, list) and len(v) == 2 and all(isinstance(p, (int, float)) and not isinstance(p, bool) for p in v):
        return complex(v[0], v[1])
    if isinstance(v, str):
        try:
            c = complex(v.replace(" ", ""))
        except ValueError:
            src.fail(f"{key}: cannot read {v!r} as a complex number", key)
        if not (math.isfinite(c.real) and math.isfinite(c.imag)):
            src.fail(f"{key}: non-finite value", key)
        return c
    src.fail(f"{key}: expected a number, [re, im] or a complex string", key)


def _vec(v, src, key) -> tuple:
    if not isinstance(v, list) or not v:
        src.fail(f"{key}: expected a non-empty list", key)
    return tuple(as_complex(c, src, key) for c in v)


def _vecs(v, src, key) -> tuple:
    if not isinstance(v, list) or not v:
        src.fail(f"{key}: expected a list of vectors", key)
    return tuple(_vec(c, src, key) for c in v)


def _real(v, src, key) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        src.fail(f"{key}: expected a real number", key)
    return float(v)


def _int(v, src, key) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        src.fail(f"{key}: expected an integer", key)
    return int(v)


def _obj(d, src, what: str, allowed: set, key: str | None = None) -> dict:
    if not isinstance(d, dict):
        src.fail(f"{what}: expected an object", key)
    extra = sorted(set(d) - allowed)
    if extra:
        src.fail(f"{what}: unknown key {extra[0]!r}", extra[0])
    return d


def _need(d, name, src, what):
    if name not in d:
        src.fail(f"{what}: missing {name!r}")
    return d[name]


@dataclass(frozen=True)
class HierarchyBlock:
    kind: str = "matrix"
    n: int = 2
    a: tuple | None = None
    b: tuple | None = None
    j: int | None = None
    reality: str = "slnc"
    J: int | None = None  # number of +1 entries of the signature


@dataclass(frozen=True)
class ElementBlock:
    type: str
    values: dict


@dataclass(frozen=True)
class GridBlock:
    x: tuple[float, float]
    t: tuple[float, float]
    hx: float
    ht: float

    def grid(self, scale: float = 1.0) -> Grid:
        return Grid.uniform(self.x[0], self.x[1], self.hx * scale, self.t[0], self.t[1], self.ht * scale)


@dataclass(frozen=True)
class CheckBlock:
    kind: str
    options: dict


@dataclass(frozen=True)
class OutputBlock:
    fields: tuple[str, ...] = ()
    checks: tuple[CheckBlock, ...] = ()
    anchor: float | None = None


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    hierarchy: HierarchyBlock
    chain: tuple[ElementBlock, ...]
    grid: GridBlock
    outputs: OutputBlock
    source: dict = field(compare=False, repr=False, default_factory=dict)

    def to_dict(self) -> dict:
        return json.loads(json.dumps(self.source))

    @property
    def spec_hash(self) -> str:
        return spec_hash(self.source)


def spec_hash(d: dict) -> str:
    canon = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _parse_hierarchy(d, src) -> HierarchyBlock:
    d = _obj(d, src, "hierarchy", _KEYS["hierarchy"], "hierarchy")
    kind = d.get("kind", "matrix")
    if kind not in HIERARCHY_KINDS:
        src.fail(f"hierarchy.kind must be one of {HIERARCHY_KINDS}", "kind")
    n = _int(d.get("n", 2), src, "n")
    a = _vec(d["a"], src, "a") if "a" in d else None
    b = _vec(d["b"], src, "b") if "b" in d else None
    j = _int(d["j"], src, "j") if "j" in d else None
    reality = d.get("reality", {"matrix": "slnc"}.get(kind, kind))
    if not isinstance(reality, str):
        src.fail("hierarchy.reality must be a string", "reality")
    J = _int(d["J"], src, "J") if "J" in d else None
    if kind == "matrix":
        if a is None or j is None:
            src.fail("a matrix hierarchy needs 'a' and 'j'", "hierarchy")
        n = len(a)
    elif kind in ("kw", "gd") and "n" not in d:
        src.fail(f"a {kind} hierarchy needs 'n'", "hierarchy")
    elif kind == "kdv":
        n = 2
    return HierarchyBlock(kind, n, a, b, j, reality, J)


def _parse_element(d, src, kind: str) -> ElementBlock:
    if not isinstance(d, dict) or "type" not in d:
        src.fail("chain entries need a 'type'", "chain")
    t = d["type"]
    if t not in ELEMENT_TYPES[kind]:
        src.fail(f"element type {t!r} is not valid for a {kind} hierarchy", "type")
    _obj(d, src, f"element {t}", _KEYS[t])
    w = f"element {t}"
    if t in ("unitary", "j-unitary"):
        vals = {"z": as_complex(_need(d, "z", src, w), src, "z"), "vectors": _vecs(_need(d, "vectors", src, w), src, "vectors")}
    elif t == "general":
        vals = {k: as_complex(_need(d, k, src, w), src, k) for k in ("alpha1", "alpha2")}
        vals.update({k: _vecs(_need(d, k, src, w), src, k) for k in ("im", "ker")})
    elif t == "sge-bt":
        vals = {k: _real(_need(d, k, src, w), src, k) for k in ("s", "c0")}
    elif t == "kdv":
        vals = {k: _real(_need(d, k, src, w), src, k) for k in ("xi", "k")}
    else:
        vals = {"v": _vec(_need(d, "v", src, w), src, "v"), "k": as_complex(_need(d, "k", src, w), src, "k")}
    return ElementBlock(t, vals)


def _parse_grid(d, src) -> GridBlock:
    d = _obj(d, src, "grid", _KEYS["grid"], "grid")
    ext = {}
    for k in ("x", "t"):
        v = _need(d, k, src, "grid")
        if not (isinstance(v, list) and len(v) == 2):
            src.fail(f"grid.{k} must be [start, stop]", k)
        ext[k] = (_real(v[0], src, k), _real(v[1], src, k))
        if not ext[k][1] > ext[k][0]:
            src.fail(f"grid.{k} must be increasing", k)
    hx = _real(_need(d, "hx", src, "grid"), src, "hx")
    ht = _real(_need(d, "ht", src, "grid"), src, "ht")
    if hx <= 0 or ht <= 0:
        src.fail("grid spacings must be positive", "hx" if hx <= 0 else "ht")
    return GridBlock(ext["x"], ext["t"], hx, ht)


def _parse_check(d, src) -> CheckBlock:
    if not isinstance(d, dict) or "kind" not in d:
        src.fail("checks need a 'kind'", "checks")
    k = d["kind"]
    if k not in CHECK_KINDS:
        src.fail(f"check kind must be one of {CHECK_KINDS}", "kind")
    _obj(d, src, f"check {k}", _KEYS[k])
    o = {key: v for key, v in d.items() if key != "kind"}
    for key in ("tol", "period", "mask_radius"):
        if key in o:
            o[key] = _real(o[key], src, key)
    if "order" in o and _int(o["order"], src, "order") not in (2, 4):
        src.fail("order must be 2 or 4", "order")
    if "lams" in o:
        o["lams"] = _vec(o["lams"], src, "lams")
    if "direction" in o:
        o["direction"] = tuple(_real(v, src, "direction") for v in o["direction"])
    if k == "pde" and "flow" not in o:
        src.fail("a pde check needs 'flow'", "kind")
    if k == "closed-form":
        if o.get("form") not in CLOSED_FORMS:
            src.fail(f"closed-form 'form' must be one of {CLOSED_FORMS}", "form")
        if not isinstance(o.get("params", {}), dict):
            src.fail("closed-form params must be an object", "params")
    if k == "periodicity" and "period" not in o:
        src.fail("a periodicity check needs 'period'", "kind")
    if k == "singular-scan" and o.get("expect", "empty") not in ("empty", "nonempty"):
        src.fail("expect must be 'empty' or 'nonempty'", "expect")
    return CheckBlock(k, o)


def parse_spec(text: str) -> ExperimentSpec:
    src = _Src(text)
    d = loads(text)
    return spec_from_dict(d, src)


def spec_from_dict(d: dict, src: _Src | None = None) -> ExperimentSpec:
    src = src or _Src(json.dumps(d, indent=1))
    d = _obj(d, src, "experiment", _KEYS["top"])
    h = _parse_hierarchy(_need(d, "hierarchy", src, "experiment"), src)
    chain = _need(d, "chain", src, "experiment")
    if not isinstance(chain, list):
        src.fail("chain must be a list", "chain")
    chain = tuple(_parse_element(e, src, h.kind) for e in chain)
    g = _parse_grid(_need(d, "grid", src, "experiment"), src)
    out = _obj(d.get("outputs", {}), src, "outputs", _KEYS["outputs"], "outputs")
    fields = out.get("fields", [])
    if not isinstance(fields, list) or not all(isinstance(f, str) for f in fields):
        src.fail("outputs.fields must be a list of names", "fields")
    checks = out.get("checks", [])
    if not isinstance(checks, list):
        src.fail("outputs.checks must be a list", "checks")
    anchor = _real(out["anchor"], src, "anchor") if "anchor" in out else None
    name = d.get("name", "experiment")
    if not isinstance(name, str):
        src.fail("name must be a string", "name")
    spec = ExperimentSpec(name, h, chain, g, OutputBlock(tuple(fields), tuple(_parse_check(c, src) for c in checks), anchor), d)
    try:
        for f in spec.outputs.fields:
            field_names(spec).index(f)
    except ValueError:
        src.fail(f"unknown field {f!r}; available: {field_names(spec)}", "fields")
    return spec


# ---------------------------------------------------------------------------
# building


def field_names(spec: ExperimentSpec) -> list[str]:
    h = spec.hierarchy
    if h.kind == "kdv":
        return ["q"]
    if h.kind in ("kw", "gd"):
        return [f"q{i}" for i in range(1, h.n)]
    names = [f"u{i}{j}" for i in range(h.n) for j in range(h.n)]
    if h.j == -1 and h.n == 2:
        names.append("angle")
    return names


def hierarchy_spec(h: HierarchyBlock):
    from .hierarchy import HierarchySpec, Reality
    from .linalg import JSignature

    if h.kind == "kdv":
        return HierarchySpec.kdv()
    if h.kind == "kw":
        return HierarchySpec.kw(h.n)
    if h.kind == "gd":
        from .hierarchy import root_of_unity_diag

        a = root_of_unity_diag(h.n)
        return HierarchySpec(a, a, h.n + 1, Reality.GD)
    J = JSignature(len(h.a), h.J) if h.J is not None else None
    return HierarchySpec(np.array(h.a), np.array(h.b if h.b is not None else h.a), h.j, Reality(h.reality), J)


@dataclass
class Built:
    """Evaluators for one experiment."""

    spec: ExperimentSpec
    state: Any
    hspec: Any
    _cache: dict = field(default_factory=dict)

    def _ev(self, X, T):
        X = np.asarray(X, dtype=float)
        T = np.asarray(T, dtype=float)
        key = (X.shape, hashlib.sha1(X.tobytes()).hexdigest(), hashlib.sha1(T.tobytes()).hexdigest())
        if key not in self._cache:
            self._cache.clear()
            kind = self.spec.hierarchy.kind
            if kind == "matrix":
                with np.errstate(all="ignore"):
                    self._cache[key] = self.state.evaluate(X, T, strict=False)
            else:
                with np.errstate(all="ignore"):
                    self._cache[key] = self.state.evaluate(X, T)
        return self._cache[key]

    def field(self, name: str) -> Callable:
        kind = self.spec.hierarchy.kind
        if name not in field_names(self.spec):
            raise KeyError(name)
        if name == "angle":
            from .permutability import sge_angle

            return lambda X, T: sge_angle(self.state, X, T, anchor=self.spec.outputs.anchor)
        if kind == "kdv":
            return lambda X, T: self._ev(X, T).q
        if kind in ("kw", "gd"):
            i = int(name[1:])
            return lambda X, T: self._ev(X, T).q[..., i]
        i, j = int(name[1]), int(name[2])
        return lambda X, T: self._ev(X, T).u[..., i, j]

    def vector(self, X, T) -> np.ndarray:
        """The full field: u for matrix hierarchies, q for the scalar ones."""
        ev = self._ev(X, T)
        return ev.u if self.spec.hierarchy.kind == "matrix" else ev.q

    def mask(self, X, T) -> np.ndarray:
        """Nodes where the dressing step is singular."""
        from .dressing import COND_MAX

        ev = self._ev(X, T)
        if self.spec.hierarchy.kind == "matrix":
            bad = ~np.all(np.isfinite(ev.u), axis=(-1, -2))
            for c in ev.cond:
                bad |= ~(c <= COND_MAX)
            return bad
        return np.asarray(ev.mask, dtype=bool)

    def singular_points(self, grid: Grid) -> list:
        """Detected singular locus as (x, t) pairs."""
        if self.spec.hierarchy.kind == "matrix":
            from .dressing import singular_locus_scan

            return singular_locus_scan(self.state, grid).points
        X, T = grid.mesh()
        m = self.mask(X, T)
        return list(zip(X[m].tolist(), T[m].tolist()))

    def E(self, x: float, t: float, lam) -> np.ndarray:
        X, T = np.array(x, dtype=float), np.array(t, dtype=float)
        return self.state.evaluate(X, T, [lam]).E[complex(lam)]


def build(spec: ExperimentSpec) -> Built:
    h = spec.hierarchy
    hs = hierarchy_spec(h)
    if h.kind == "kdv":
        from .kdv import KdVElement, KdVState

        st = KdVState()
        for e in spec.chain:
            st = st.apply(KdVElement(e.values["xi"], e.values["k"]))
    elif h.kind == "kw":
        from .kwgd import KWState, kw_simple

        st = KWState(h.n)
        for e in spec.chain:
            st = st.apply(kw_simple(np.array(e.values["v"]), e.values["k"]))
    elif h.kind == "gd":
        from .kwgd import GDState

        st = GDState(h.n)
        for e in spec.chain:
            st = st.apply(e.values["k"], np.array(e.values["v"]))
    else:
        from .dressing import DressedState, general, j_unitary, unitary
        from .permutability import SGEBTParams, sge_classical_bt

        st = DressedState.vacuum(hs)
        for e in spec.chain:
            v = e.values
            if e.type == "unitary":
                st = st.apply(unitary(v["z"], v["vectors"]))
            elif e.type == "general":
                st = st.apply(general(v["alpha1"], v["alpha2"], v["im"], v["ker"]))
            elif e.type == "j-unitary":
                st = st.apply(j_unitary(v["z"], v["vectors"], hs.J))
            else:
                st = sge_classical_bt(st, SGEBTParams(v["s"], v["c0"])).state
    return Built(spec, st, hs)


# ---------------------------------------------------------------------------
# checks

DEFAULT_LAMS = (0.4 + 0.3j, 1.2 - 0.1j, -0.7 + 0.9j)


def _closed_form(form: str, p: dict) -> Callable:
    from .kdv import rational_solution, vacuum_soliton
    from .permutability import sge_kink
    from .solitons import breather, nls_soliton

    if form == "nls-soliton":
        s, c = float(p["s"]), complex(*p["c"]) if isinstance(p["c"], list) else complex(p["c"])
        return lambda X, T: nls_soliton(s, c, X, T)
    if form == "breather":
        return breather(float(p["theta"]), p.get("convention", "sge"))
    if form == "kdv-soliton":
        return vacuum_soliton(float(p["xi"]), float(p["k"]))
    if form == "kdv-rational":
        return rational_solution(float(p["xi"]))
    return sge_kink(float(p["s"]), float(p["c0"]))


def run_check(built: Built, check: CheckBlock, grid: Grid):
    """One declared check -> ResidualReport."""
    from . import verify
    from .kdv import pole_mask

    o = check.options
    k = check.kind
    h = built.spec.hierarchy
    default_field = (built.spec.outputs.fields or field_names(built.spec))[0]
    fname = o.get("field", default_field)
    if k == "pde":
        flow = o["flow"]
        order = int(o.get("order", 2))
        if h.kind == "kdv" or "mask_radius" in o:
            r = o.get("mask_radius", 0.5)
            f = built.field(fname)

            def mask_fn(X, T):
                return pole_mask(f(X, T), X, radius=r)
        else:
            mask_fn = built.mask
        if flow in ("kw", "gd"):
            from .kwgd import gd_flow_residual, kw_flow_residual

            fn = kw_flow_residual if flow == "kw" else gd_flow_residual
            n = h.n

            def res(q, g):
                return fn(q, g.hx, g.ht, n, accuracy=order, trim=False)

            res.__name__ = f"{flow}{n}"
            return verify.pde_residual(built.vector, res, grid, order, mask_fn=mask_fn, margin=(2, 4 * n),
                                       name=f"pde:{flow}{n}", tol=o.get("tol"), check_width=False)
        return verify.pde_residual(built.field(fname), flow, grid, order, mask_fn=mask_fn,
                                   name=f"pde:{flow}:{fname}", tol=o.get("tol"))
    if k == "reality":
        lams = o.get("lams", DEFAULT_LAMS)
        kind = {"un": "un", "twisted": "un", "ukj": "ukj", "kdv": "kdv", "kw": "kw", "gd": "gd"}.get(h.reality)
        if kind is None:
            raise ValueError(f"no reality identity for class {h.reality!r}")
        x, t = float(o.get("x", 0.3)), float(o.get("t", 0.05))
        J = built.hspec.J.diag if kind == "ukj" else None
        return verify.reality_residual(kind, lambda lam: built.E(x, t, lam), lams, tol=o.get("tol", 1e-10),
                                       J=J, n=h.n, name=f"reality:{kind}")
    if k == "singular-scan":
        expect = o.get("expect", "empty")
        pts = built.singular_points(grid)
        ok = (not pts) if expect == "empty" else bool(pts)
        return verify.ResidualReport(f"singular-scan:{expect}", grid.meta(), float(len(pts)), float(len(pts)), None,
                                     0.0, f"locus {expect}", ok, len(pts), {"points": pts[:50]})
    if k == "periodicity":
        return verify.periodicity_residual(built.field(fname), o["period"], grid, tol=o.get("tol", 1e-9),
                                           direction=o.get("direction", (0.0, 1.0)), name=f"periodicity:{fname}")
    ref = _closed_form(o["form"], o.get("params", {}))

    def ref_poles(X, T):
        return pole_mask(ref(X, T), X)

    return verify.oracle_compare(built.field(fname), ref, grid, tol=o.get("tol", 1e-10),
                                 mask_fn=ref_poles if h.kind == "kdv" else None,
                                 name=f"closed-form:{o['form']}:{fname}")
