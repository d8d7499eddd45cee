import numpy as np
import pytest
from hypothesis import given, strategies as st

from loopdress.errors import NotPolynomialInA, UnknownFlow
from loopdress.fd import Grid
from loopdress.hierarchy import (FLOW_NAMES, HierarchySpec, Reality, b_polynomial, flow_from_recursion, flow_rhs,
                                 lax_pair, q_series_a, recursion_defect, root_of_unity_diag, sl2_table,
                                 vacuum_trivialization, zero_curvature_residual)
from loopdress.solitons import nls_soliton

A2 = np.array([1.0, -1.0], dtype=complex)


def smooth_pair(x, c):
    """q, r and their first two derivatives for random smooth profiles."""
    q = np.sin(c[0] * x) + 1j * c[1] * np.cos(c[2] * x + c[3])
    qx = c[0] * np.cos(c[0] * x) - 1j * c[1] * c[2] * np.sin(c[2] * x + c[3])
    qxx = -c[0] ** 2 * np.sin(c[0] * x) - 1j * c[1] * c[2] ** 2 * np.cos(c[2] * x + c[3])
    e = np.exp(-c[4] * x**2)
    r = e + c[5] * np.sin(2 * x)
    rx = -2 * c[4] * x * e + 2 * c[5] * np.cos(2 * x)
    rxx = (-2 * c[4] + 4 * c[4] ** 2 * x**2) * e - 4 * c[5] * np.sin(2 * x)
    return q, r, qx, rx, qxx, rxx


def table_error(h, c):
    x = np.arange(-2, 2 + h / 2, h)
    q, r, qx, rx, qxx, rxx = smooth_pair(x, c)
    u = np.zeros((x.size, 2, 2), dtype=complex)
    u[:, 0, 1], u[:, 1, 0] = q, r
    Q = q_series_a(A2, u, h, 4, accuracy=4)
    Q2, Q3 = sl2_table(q, r, qx, rx, qxx, rxx)
    sl = slice(8, -8)
    return max(np.abs(Q[2] - Q2)[sl].max(), np.abs(Q[3] - Q3)[sl].max()), Q, u, x


@given(st.lists(st.floats(0.3, 1.5), min_size=6, max_size=6))
def test_sl2_table_matches_recursion_fourth_order(c):
    e1, *_ = table_error(0.02, c)
    e2, *_ = table_error(0.01, c)
    assert e2 < 1e-6
    assert e1 / e2 > 10  # fourth order: ideally 16


def test_recursion_identity_all_indices():
    _, Q, u, x = table_error(0.01, [1.3, 0.4, 0.7, 0.2, 0.3, 0.2])
    h = x[1] - x[0]
    for d in recursion_defect(A2, u, Q, h, accuracy=4):
        assert np.abs(d[8:-8]).max() < 1e-7


def test_q0_q1():
    u = np.zeros((20, 2, 2), dtype=complex)
    u[:, 0, 1] = 1.0
    Q = q_series_a(A2, u, 0.1, 2)
    assert np.allclose(Q[0], np.diag(A2))
    assert np.allclose(Q[1], u)


def test_spec_validation():
    with pytest.raises(ValueError):
        HierarchySpec(np.array([1.0, 1.0]), np.array([1.0, 1.0]), 2)  # not traceless
    with pytest.raises(ValueError):
        HierarchySpec(A2, A2, 0)
    with pytest.raises(ValueError):
        HierarchySpec(A2, A2, 2, Reality.UN)  # a not skew-Hermitian
    with pytest.raises(ValueError):
        HierarchySpec(A2, A2, 2, Reality.UKJ)  # no signature
    assert HierarchySpec.kw(3).n == 3
    assert np.allclose(root_of_unity_diag(4), [1, 1j, -1, -1j])


def test_b_polynomial():
    a = np.array([1j, -1j])
    c = b_polynomial(a, 0.5 * a)
    assert np.allclose(c[0] + c[1] * a, 0.5 * a)
    with pytest.raises(NotPolynomialInA):
        b_polynomial(np.array([1.0, 1.0, -2.0]), np.array([1.0, 2.0, -3.0]))


def test_unknown_flow():
    with pytest.raises(UnknownFlow):
        flow_rhs("burgers", np.zeros(10), 0.1)
    assert "nls" in FLOW_NAMES and "kdv" in FLOW_NAMES


def test_named_nls_flow_on_soliton():
    g = Grid.uniform(-6, 6, 0.01, 0, 0, 1)
    X, T = g.mesh()
    q = nls_soliton(1.0, 0.5, X, T)
    qt = 2j * q  # e^{2 i s^2 t}
    assert np.abs(qt - flow_rhs("nls", q[0], g.hx)[None])[:, 4:-4].max() < 1e-3


def test_flow_from_recursion_matches_named_nls():
    a = np.array([1j, -1j])
    spec = HierarchySpec.nls()
    x = np.linspace(-4, 4, 401)
    h = x[1] - x[0]
    q = np.exp(-x**2) * (1 + 0.3j * x)
    u = np.zeros((x.size, 2, 2), dtype=complex)
    u[:, 0, 1], u[:, 1, 0] = q, -np.conj(q)
    ut = flow_from_recursion(spec, u[None], h)[0]
    assert np.abs(ut[6:-6, 0, 1] - flow_rhs("nls", q, h)[6:-6]).max() < 1e-5
    assert a.size == 2


def test_vacuum_zero_curvature():
    spec = HierarchySpec.nls()
    g = Grid.uniform(-1, 1, 0.1, -1, 1, 0.1)
    u = np.zeros(g.shape + (2, 2), dtype=complex)
    A, B = lax_pair(spec, u, g.hx, 0.7 + 0.2j)
    assert zero_curvature_residual(A, B, g) < 1e-12
    E = vacuum_trivialization(spec)
    assert np.allclose(E(0.0, 0.0, 0.3), np.eye(2))
