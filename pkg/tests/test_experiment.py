import json

import pytest
from hypothesis import given, strategies as st

from loopdress import catalog
from loopdress.errors import ParseError, UnknownExample
from loopdress.experiment import build, field_names, parse_spec, run_check, spec_from_dict

BASE = {
    "name": "kdv",
    "hierarchy": {"kind": "kdv"},
    "chain": [{"type": "kdv", "xi": 0.5, "k": 1.0}],
    "grid": {"x": [-4, 4], "t": [-0.2, 0.2], "hx": 0.1, "ht": 0.1},
    "outputs": {"fields": ["q"], "checks": [{"kind": "reality"}]},
}

num = st.floats(-3, 3, allow_nan=False).map(lambda v: round(v, 6))
cnum = st.one_of(num, st.tuples(num, num).map(list), st.tuples(num, num).map(lambda p: f"{p[0]}{p[1]:+}j"))


@st.composite
def matrix_specs(draw):
    chain = [{"type": "unitary", "z": [draw(num), draw(st.floats(0.2, 2).map(lambda v: round(v, 6)))],
              "vectors": [[1, draw(cnum)]]} for _ in range(draw(st.integers(1, 3)))]
    return {
        "name": draw(st.text("abcxyz-", min_size=1, max_size=8)),
        "hierarchy": {"kind": "matrix", "a": ["1j", "-1j"], "j": draw(st.integers(1, 4)), "reality": "un"},
        "chain": chain,
        "grid": {"x": [-1, 1], "t": [0, 1], "hx": draw(st.sampled_from([0.1, 0.05])), "ht": 0.1},
        "outputs": {"fields": ["u01"], "checks": [{"kind": "reality", "tol": 1e-10}]},
    }


@given(matrix_specs())
def test_round_trip(d):
    spec = spec_from_dict(d)
    again = parse_spec(json.dumps(spec.to_dict()))
    assert again == spec
    assert again.spec_hash == spec.spec_hash


def test_hash_ignores_key_order():
    d2 = dict(reversed(list(BASE.items())))
    assert spec_from_dict(d2).spec_hash == spec_from_dict(BASE).spec_hash


def test_syntax_error_position():
    with pytest.raises(ParseError) as e:
        parse_spec('{\n  "name": "x",\n  "grid": {"x": [1, 2,]}\n}')
    assert e.value.line == 3


def test_unknown_key_position():
    text = json.dumps(BASE, indent=1).replace('"hx"', '"hxx"')
    with pytest.raises(ParseError) as e:
        parse_spec(text)
    assert e.value.line is not None and "hxx" in str(e.value)


@pytest.mark.parametrize("bad", ["NaN", "Infinity", "1e999"])
def test_non_finite_rejected(bad):
    with pytest.raises(ParseError):
        parse_spec(json.dumps(BASE).replace("0.5", bad, 1))


@pytest.mark.parametrize("mutate", [
    lambda d: d["hierarchy"].update(kind="nope"),
    lambda d: d["chain"][0].update(type="unitary"),
    lambda d: d["outputs"]["checks"].append({"kind": "fuzz"}),
    lambda d: d["grid"].update(hx=-0.1),
    lambda d: d.pop("grid"),
])
def test_invalid_blocks(mutate):
    d = json.loads(json.dumps(BASE))
    mutate(d)
    with pytest.raises(ParseError):
        spec_from_dict(d)


def test_field_names():
    assert field_names(spec_from_dict(BASE)) == ["q"]
    assert field_names(spec_from_dict(catalog.spec_dict("kw3-darboux"))) == ["q1", "q2"]


def test_build_and_check():
    spec = spec_from_dict(BASE)
    b = build(spec)
    g = spec.grid.grid()
    X, T = g.mesh()
    assert b.field("q")(X, T).shape == X.shape
    assert run_check(b, spec.outputs.checks[0], g).passed


def test_catalog_names():
    for name in catalog.SPECS:
        spec_from_dict(catalog.spec_dict(name))
    with pytest.raises(UnknownExample):
        catalog.spec_dict("nope")
