import numpy as np
import pytest
from hypothesis import given, strategies as st

from loopdress.dressing import DressedState, general, unitary
from loopdress.errors import CoincidentPoles, EqualParameters
from loopdress.fd import Grid
from loopdress.hierarchy import HierarchySpec, Reality
from loopdress.permutability import (SGEBTParams, bianchi_defect, quad_relation, sge_angle, sge_bianchi,
                                     sge_bianchi_state, sge_classical_bt, sge_kink, third_solution,
                                     unitary_quad_relation)

LAMS = [0.3 + 0.2j, -1.1 + 0.4j, 2.0, 0.7j]


@given(st.floats(-1, 1), st.floats(0.3, 1.5), st.floats(-1, 1), st.floats(0.3, 1.5), st.floats(-2, 2))
def test_unitary_quadratic_relation(r1, i1, r2, i2, c):
    z1, z2 = complex(r1, i1), complex(r2, i2)
    if abs(z1 - z2) < 0.1:
        return
    rel = unitary_quad_relation(z1, [(1, c)], z2, [(1, 1j)])
    assert rel.product_defect(LAMS) < 1e-10
    assert rel.hermiticity_defect() < 1e-12


def test_general_quadratic_relation():
    e1 = general(2.5, 1.0, [(1, 1)], [(1, 2)])
    e2 = general(-0.5, 3.0, [(1, -1j)], [(2, 1)])
    assert quad_relation(e1, e2).product_defect(LAMS) < 1e-12


def test_coincident_poles():
    with pytest.raises(CoincidentPoles):
        unitary_quad_relation(0.5j, [(1, 0)], 0.5j, [(0, 1)])
    with pytest.raises(CoincidentPoles):
        unitary_quad_relation(0.2 + 0.5j, [(1, 0)], 0.2 - 0.5j, [(0, 1)])


def test_third_solution_both_orders_and_algebraic():
    g = Grid.uniform(-3, 3, 0.1, -0.5, 0.5, 0.1)
    X, T = g.mesh()
    th = third_solution(DressedState.vacuum(HierarchySpec.nls()), unitary(0.3 + 0.8j, [(1, 0.5j)]),
                        unitary(-0.4 + 1.2j, [(1, -0.5)]), X, T)
    assert th.path_defect() < 1e-9
    assert np.abs(th.algebraic - th.path1).max() < 1e-9


def test_third_solution_sl2c():
    a = np.array([1.0, -1.0], dtype=complex)
    g = Grid.uniform(-1, 1, 0.1, -0.2, 0.2, 0.1)
    X, T = g.mesh()
    vac = DressedState.vacuum(HierarchySpec(a, a, 2, Reality.SLNC))
    th = third_solution(vac, general(0.5, -1.5, [(1, 2)], [(1, -1)]), general(1.0 + 0.5j, -2.0, [(1, 1j)], [(1, 3)]),
                        X, T)
    assert th.path_defect() < 1e-8


def test_classical_bt_gives_kink():
    g = Grid.uniform(-3, 3, 0.1, -1, 1, 0.1)
    X, T = g.mesh()
    vac = DressedState.vacuum(HierarchySpec.sine_gordon())
    r = sge_classical_bt(vac, SGEBTParams(0.5, 1.0))
    assert abs(r.value_at_origin - 1.0) < 1e-9
    assert np.abs(sge_angle(r.state, X, T, anchor=1.0) - sge_kink(0.5, 1.0)(X, T)).max() < 1e-9


def test_bianchi():
    g = Grid.uniform(-3, 3, 0.1, -1, 1, 0.1)
    X, T = g.mesh()
    q1, q2 = sge_kink(1.0, 1.0)(X, T), sge_kink(2.0, 0.5)(X, T)
    q3 = sge_angle(sge_bianchi_state(1.0, 2.0, 1.0, 0.5), X, T)
    assert bianchi_defect(0 * X, q1, q2, q3, 1.0, 2.0) < 1e-8
    assert np.abs(np.tan(sge_bianchi(0 * X, q1, q2, 1.0, 2.0) / 4) - np.tan(q3 / 4)).max() < 1e-8
    with pytest.raises(EqualParameters):
        sge_bianchi(0, 0.1, 0.2, 1.0, -1.0)
