"""Finite-difference stencils on uniform grids.

Central stencils of order 2 or 4 in the interior; second-order one-sided
stencils at the two ends of the axis.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridTooCoarse


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid.  Field arrays are indexed ``[it, ix, ...]``."""

    x: np.ndarray
    t: np.ndarray

    @classmethod
    def uniform(cls, x0: float, x1: float, hx: float, t0: float, t1: float, ht: float) -> "Grid":
        nx = int(round((x1 - x0) / hx)) + 1
        nt = int(round((t1 - t0) / ht)) + 1
        return cls(np.linspace(x0, x1, nx), np.linspace(t0, t1, nt))

    @property
    def hx(self) -> float:
        return float(self.x[1] - self.x[0]) if self.x.size > 1 else 0.0

    @property
    def ht(self) -> float:
        return float(self.t[1] - self.t[0]) if self.t.size > 1 else 0.0

    @property
    def shape(self) -> tuple[int, int]:
        return (self.t.size, self.x.size)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """(X, T) arrays of shape (nt, nx)."""
        T, X = np.meshgrid(self.t, self.x, indexing="ij")
        return X, T

    def refined(self) -> "Grid":
        """Grid with both spacings halved over the same extents."""
        return Grid(np.linspace(self.x[0], self.x[-1], 2 * self.x.size - 1),
                    np.linspace(self.t[0], self.t[-1], 2 * self.t.size - 1))

    def meta(self) -> dict:
        return {"hx": self.hx, "ht": self.ht,
                "x": [float(self.x[0]), float(self.x[-1])],
                "t": [float(self.t[0]), float(self.t[-1])],
                "nx": int(self.x.size), "nt": int(self.t.size)}


def _move(f, axis):
    return np.moveaxis(np.asarray(f), axis, 0)


def d1(f: np.ndarray, h: float, axis: int = 0, accuracy: int = 4) -> np.ndarray:
    """First derivative along ``axis``."""
    g = _move(f, axis)
    N = g.shape[0]
    if N < (5 if accuracy == 4 else 3):
        raise GridTooCoarse(f"{N} points along axis {axis}")
    out = np.empty_like(g, dtype=np.result_type(g.dtype, float))
    out[1:-1] = (g[2:] - g[:-2]) / (2 * h)
    if accuracy == 4:
        out[2:-2] = (-g[4:] + 8 * g[3:-1] - 8 * g[1:-3] + g[:-4]) / (12 * h)
    out[0] = (-3 * g[0] + 4 * g[1] - g[2]) / (2 * h)
    out[-1] = (3 * g[-1] - 4 * g[-2] + g[-3]) / (2 * h)
    return np.moveaxis(out, 0, axis)


def d2(f: np.ndarray, h: float, axis: int = 0, accuracy: int = 4) -> np.ndarray:
    """Second derivative along ``axis``."""
    g = _move(f, axis)
    N = g.shape[0]
    if N < (5 if accuracy == 4 else 4):
        raise GridTooCoarse(f"{N} points along axis {axis}")
    out = np.empty_like(g, dtype=np.result_type(g.dtype, float))
    out[1:-1] = (g[2:] - 2 * g[1:-1] + g[:-2]) / h**2
    if accuracy == 4:
        out[2:-2] = (-g[4:] + 16 * g[3:-1] - 30 * g[2:-2] + 16 * g[1:-3] - g[:-4]) / (12 * h**2)
    out[0] = (2 * g[0] - 5 * g[1] + 4 * g[2] - g[3]) / h**2
    out[-1] = (2 * g[-1] - 5 * g[-2] + 4 * g[-3] - g[-4]) / h**2
    return np.moveaxis(out, 0, axis)


def d3(f: np.ndarray, h: float, axis: int = 0, accuracy: int = 4) -> np.ndarray:
    """Third derivative along ``axis``; central in the interior."""
    g = _move(f, axis)
    N = g.shape[0]
    if N < 7:
        raise GridTooCoarse(f"{N} points along axis {axis}")
    out = np.moveaxis(d1(d2(g, h, 0, accuracy), h, 0, accuracy), 0, 0).copy()
    # central stencils where they fit
    out[2:-2] = (g[4:] - 2 * g[3:-1] + 2 * g[1:-3] - g[:-4]) / (2 * h**3)
    if accuracy == 4:
        out[3:-3] = (-g[6:] + 8 * g[5:-1] - 13 * g[4:-2] + 13 * g[2:-4] - 8 * g[1:-5] + g[:-6]) / (8 * h**3)
    return np.moveaxis(out, 0, axis)


def interior(margin: int, shape: tuple[int, ...]) -> tuple[slice, ...]:
    """Slices dropping ``margin`` points at each end of the leading two axes."""
    return tuple(slice(margin, s - margin) for s in shape[:2])
