"""Spatial profiles on the normalized grid and the per-window initial state."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator


def uniform_grid(n: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, n)


class FillingProfile:
    """Filling-ratio profile carrying its first and second x-derivatives.

    Values use cubic Hermite interpolation with the carried slopes, slopes use
    Hermite interpolation with the carried curvature, and curvature is linear.
    """

    def __init__(self, x, f, fx, fxx):
        self.x = np.asarray(x, dtype=float)
        self.f = np.asarray(f, dtype=float)
        self.fx = np.asarray(fx, dtype=float)
        self.fxx = np.asarray(fxx, dtype=float)
        self._f = CubicHermiteSpline(self.x, self.f, self.fx)
        self._fx = CubicHermiteSpline(self.x, self.fx, self.fxx)

    def _clip(self, q):
        return np.clip(q, self.x[0], self.x[-1])

    def __call__(self, q):
        return self._f(self._clip(q))

    def d1(self, q):
        return self._fx(self._clip(q))

    def d2(self, q):
        return np.interp(q, self.x, self.fxx)

    def deviation_w1inf(self, f_pe: float) -> float:
        """sup |f - f_pe| + sup |f_x| on the nodes."""
        return float(np.max(np.abs(self.f - f_pe)) + np.max(np.abs(self.fx)))

    @classmethod
    def from_table(cls, x_tab, f, fx=None, fxx=None, grid=None):
        """Resample a node table onto ``grid`` (defaults to the table nodes)."""
        x_tab = np.asarray(x_tab, dtype=float)
        grid = x_tab if grid is None else np.asarray(grid, dtype=float)
        if fx is None:
            p = PchipInterpolator(x_tab, f)
            return cls(grid, p(grid), p.derivative()(grid), p.derivative(2)(grid))
        h = CubicHermiteSpline(x_tab, f, fx)
        if fxx is None:
            d2 = h.derivative(2)(grid)
        else:
            d2 = np.interp(grid, x_tab, fxx)
        if fxx is None:
            d1 = h.derivative()(grid)
        else:
            d1 = CubicHermiteSpline(x_tab, fx, fxx)(grid)
        return cls(grid, h(grid), d1, d2)


class ScalarProfile:
    """Moisture or temperature profile; monotone (PCHIP) interpolation, no new extrema."""

    def __init__(self, x, v):
        self.x = np.asarray(x, dtype=float)
        self.v = np.asarray(v, dtype=float)
        self._p = PchipInterpolator(self.x, self.v)

    def __call__(self, q):
        return self._p(np.clip(q, self.x[0], self.x[-1]))

    @classmethod
    def from_table(cls, x_tab, v, grid=None):
        p = cls(x_tab, v)
        if grid is None:
            return p
        return cls(grid, p(grid))


@dataclass
class WindowState:
    """Initial data for one continuation window (window-start time ``t0``)."""

    t0: float
    l0: float
    fp: FillingProfile
    M_p: ScalarProfile
    T_p: ScalarProfile
    M_f: ScalarProfile
    T_f: ScalarProfile

    @property
    def x(self):
        return self.fp.x

    @property
    def fp1(self) -> float:
        return float(self.fp.f[-1])
