import numpy as np
import pytest
from hypothesis import given, strategies as st

from loopdress.errors import ResonantPoles, ZeroK
from loopdress.fd import Grid
from loopdress.kdv import KdVElement, KdVState
from loopdress.kwgd import (CyclicFrame, GDFrame, GDState, KWState, gd_phi, gd_quad_relation, kw_darboux,
                            kw_flow_residual, kw_quad_relation, kw_simple, zeta)

cpx = st.builds(complex, st.floats(-1, 1), st.floats(-1, 1))


@pytest.mark.parametrize("n", [2, 3, 4])
def test_cyclic_frame(n):
    cf = CyclicFrame(n)
    assert np.abs(np.linalg.matrix_power(cf.tau, n) - np.eye(n)).max() < 1e-12
    assert np.abs(cf.tau.T @ cf.a @ cf.tau - cf.w * cf.a).max() < 1e-12


@given(st.lists(cpx, min_size=3, max_size=3), st.floats(0.5, 1.2), st.floats(-0.5, 0.5))
def test_kw_element_kernel_and_inverse(v, kr, ki):
    v = np.array([1.0] + v[1:])
    k = complex(kr, ki)
    try:
        e = kw_simple(v, k)
    except Exception:
        return  # B(v) singular for this draw
    fr = CyclicFrame(3)
    for i in range(3):
        w = np.linalg.matrix_power(np.linalg.inv(fr.tau), i) @ v
        assert np.abs(e.matrix(fr.w**i * k) @ w).max() < 1e-8 * max(1, np.abs(e.Y).max())
    lam = 0.3 + 0.1j
    assert np.abs(e.matrix(lam) @ e.inverse(lam) - np.eye(3)).max() < 1e-8 * max(1, np.abs(e.Y).max()) ** 3


def test_kw_darboux_errors():
    with pytest.raises(ZeroK):
        kw_darboux(KWState(3), [1, 0.5, 0.2], 0)
    s = KWState(3).apply(kw_simple([1, 0.5, 0.2], 0.9))
    with pytest.raises(ResonantPoles):
        s.apply(kw_simple([1, 0.1, 0.3], 0.9 * np.exp(2j * np.pi / 3)))


def test_kw3_flow_second_order():
    st_ = KWState(3).apply(kw_simple([1.0, 0.5 + 0.2j, -0.3], 0.9 + 0.2j))
    r = []
    for h in (0.04, 0.02):
        g = Grid.uniform(-3, 3, h, -0.1, 0.1, h / 2)
        r.append(np.abs(kw_flow_residual(st_.evaluate(*g.mesh()).q, g.hx, g.ht, 3, accuracy=2)).max())
    assert 3.0 < r[0] / r[1] < 4.5


def test_det_zeta_constant():
    g = Grid.uniform(-1.5, 1.5, 0.05, -0.1, 0.1, 0.05)
    ys = KWState(3).apply(kw_simple([1.0, 0.5 + 0.2j, -0.3], 0.9 + 0.2j)).evaluate(*g.mesh()).ys[0]
    d = np.linalg.det(zeta(ys))
    assert np.ptp(d.real) + np.ptp(d.imag) < 1e-10


def test_kw_quad_relation():
    rng = np.random.default_rng(2)
    Y, Z = zeta(rng.normal(size=3) + 0j), zeta(rng.normal(size=3) + 0j)
    r = kw_quad_relation(Y, Z)
    a = CyclicFrame(3).a
    assert np.abs((a * 0.7 + r.Yt) @ (a * 0.7 + Y) - (a * 0.7 + r.Zt) @ (a * 0.7 + Z)).max() < 1e-10


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_gd_frame_identities(n, rng):
    fr = GDFrame(n)
    assert fr.identity_defect() < 1e-12
    assert fr.commute_defect() < 1e-12
    y = rng.normal(size=n) + 1j * rng.normal(size=n)
    k, v = fr.K(y)
    assert np.abs(fr.K_inv(k, v) - y).max() < 1e-11
    assert fr.det_poly_defect(y) < 1e-10


def test_gd_phi_is_frame():
    assert np.allclose(gd_phi(3).phi(2.0), GDFrame(3).phi(2.0))


def test_gd2_is_kdv():
    g = Grid.uniform(-5, 5, 0.05, -0.3, 0.3, 0.05)
    X, T = g.mesh()
    xi, k = 0.3, 1.0
    q = GDState(2).apply(k, np.array([k - xi, 1.0])).evaluate(X, T).q[..., 1]
    assert np.abs(q - KdVState().apply(KdVElement(xi, k)).q(X, T)).max() < 1e-10


def test_gd_quad_relation_and_orders():
    fr = GDFrame(3)
    k1, v1 = 0.8 * np.exp(0.3j), np.array([0.4 + 0.2j, -0.3, 1.0])
    k2, v2 = 1.1 * np.exp(0.5j), np.array([-0.2, 0.5j, 1.0])
    Q = gd_quad_relation(fr, k1, v1, k2, v2)
    assert Q.product_defect(fr, k1, v1, k2, v2, [0.3, 1 + 1j, -0.7j]) < 1e-12
    X, T = Grid.uniform(-1, 1, 0.05, -0.1, 0.1, 0.05).mesh()
    a = GDState(3).apply(k1, v1).apply(k2, Q.xi2).evaluate(X, T).q
    b = GDState(3).apply(k2, v2).apply(k1, Q.xi1).evaluate(X, T).q
    assert np.abs(a - b).max() < 1e-9 * max(1.0, np.abs(a).max())
    with pytest.raises(ResonantPoles):
        gd_quad_relation(fr, k1, v1, k1 * fr.w, v2)
