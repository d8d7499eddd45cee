import numpy as np
import pytest

from loopdress.errors import GridTooCoarse
from loopdress.fd import Grid, d1, d2, d3, interior


@pytest.mark.parametrize("acc,order", [(2, 2), (4, 4)])
def test_stencil_orders(acc, order):
    errs = []
    for h in (0.05, 0.025):
        x = np.arange(-1, 1 + h / 2, h)
        f = np.sin(2 * x)
        sl = slice(4, -4)
        e1 = np.abs(d1(f, h, accuracy=acc) - 2 * np.cos(2 * x))[sl].max()
        e2 = np.abs(d2(f, h, accuracy=acc) + 4 * np.sin(2 * x))[sl].max()
        e3 = np.abs(d3(f, h, accuracy=acc) + 8 * np.cos(2 * x))[sl].max()
        errs.append((e1, e2, e3))
    for a, b in zip(errs[0], errs[1]):
        assert 0.7 * 2**order < a / b < 1.4 * 2**order


def test_grid_mesh_and_refine():
    g = Grid.uniform(-1, 1, 0.5, 0, 1, 0.25)
    X, T = g.mesh()
    assert X.shape == g.shape == (5, 5)
    f = g.refined()
    assert f.hx == pytest.approx(0.25) and f.ht == pytest.approx(0.125)
    Xf, Tf = f.mesh()
    assert np.array_equal(Xf[::2, ::2], X) and np.array_equal(Tf[::2, ::2], T)
    assert g.meta()["nx"] == 5


def test_too_coarse_and_interior():
    with pytest.raises(GridTooCoarse):
        d1(np.ones(2), 0.1)
    assert interior(2, (10, 12, 3)) == (slice(2, 8), slice(2, 10))
