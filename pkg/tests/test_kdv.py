import numpy as np
import pytest
from hypothesis import given, strategies as st

from loopdress.errors import PoleEvaluation, SingularB
from loopdress.fd import Grid
from loopdress.kdv import (KdVElement, KdVState, kdv_element_pair, kdv_kernel_data, kdv_ladder, kdv_reality_check,
                           p_matrix, pole_mask, rational_solution, vacuum_soliton)
from loopdress.verify import pde_residual

G = Grid.uniform(-8, 8, 0.05, -0.5, 0.5, 0.05)


@given(st.floats(-2, 2), st.floats(0.2, 2))
def test_element_kernel_and_inverse(xi, k):
    e = KdVElement(xi, k)
    vp, vm = e.kernel_vectors()
    assert np.abs(e.matrix(k) @ vp).max() < 1e-12
    assert np.abs(e.matrix(-k) @ vm).max() < 1e-12
    lam = 0.3 + 0.7j
    assert np.abs(e.matrix(lam) @ e.inverse(lam) - np.eye(2)).max() < 1e-10
    with pytest.raises(PoleEvaluation):
        e.inverse(k)


def test_kernel_data():
    kd = kdv_kernel_data(0.3, 1.0)
    assert np.allclose(kd.Y, [[0.3, 0.09 - 1], [1, 0.3]])
    assert np.allclose(np.diag([1, -1]) * 0.4 + kd.Y, p_matrix(0.3, 1.0, 0.4))
    with pytest.raises(SingularB):
        kdv_kernel_data(0.3, 0)


@pytest.mark.parametrize("xi,k,branch", [(0.5, 1.0, "sech"), (1.5, 1.0, "csch"), (-0.4, 0.7, "sech")])
def test_vacuum_darboux_closed_form(xi, k, branch):
    X, T = G.mesh()
    ref = vacuum_soliton(xi, k)
    assert ref.branch == branch
    q = KdVState().apply(KdVElement(xi, k)).q(X, T)
    keep = ~pole_mask(ref(X, T), X, radius=0.3)
    assert np.abs(q - ref(X, T))[keep].max() < 1e-10


def test_rational():
    X, T = G.mesh()
    q = KdVState().apply(KdVElement(0.5, 0.0)).q(X, T)
    ref = rational_solution(0.5)(X, T)
    keep = ~pole_mask(ref, X, radius=0.3)
    assert np.abs(q - ref)[keep].max() < 1e-10


def test_sech_solves_kdv():
    st_ = KdVState().apply(KdVElement(0.5, 1.0))
    assert pde_residual(st_.q, "kdv", Grid.uniform(-8, 8, 0.02, -0.5, 0.5, 0.01)).passed


def test_reality():
    st_ = KdVState().apply(KdVElement(0.3, 1.0)).apply(KdVElement(-0.7, 0.6))
    assert kdv_reality_check(lambda lam: st_.E(np.array(0.2), np.array(0.1), lam), [0.3 + 0.2j, 1.3]) < 1e-10


def test_permutability_orders_and_ladder():
    X, T = G.mesh()
    a1, k1, a2, k2 = 0.3, 0.6, -1.2, 1.0
    xi1, xi2 = kdv_element_pair(a1, k1, a2, k2)
    q12 = KdVState().apply(KdVElement(a1, k1)).apply(KdVElement(xi2, k2)).q(X, T)
    q21 = KdVState().apply(KdVElement(a2, k2)).apply(KdVElement(xi1, k1)).q(X, T)
    scale = max(1.0, np.abs(q12).max())
    assert np.abs(q12 - q21).max() < 1e-9 * scale
    L = kdv_ladder([a1, a2], [k1, k2], X, T)
    assert np.abs(L.q - q12).max() < 1e-9 * scale


def test_singular_ladder_counterexample():
    # b1 > 0 and b2 < 0, yet q12 has poles on the grid
    g = Grid.uniform(-15, 15, 0.02, -1, 1, 0.1)
    X, T = g.mesh()
    L = kdv_ladder([0.3, -0.7], [1.0, 0.6], X, T)
    assert L.mask.sum() > 0


def test_pole_mask_radius():
    x = np.linspace(-1.005, 1.005, 202)[None, :]  # no node on the pole
    q = 2 / x**2
    narrow = pole_mask(q, x)
    wide = pole_mask(q, x, radius=0.2)
    assert narrow.sum() < wide.sum()
    assert np.all(np.abs(x[wide]) <= 0.2 + 0.01 + 1e-12)  # radius plus the one-node dilation
