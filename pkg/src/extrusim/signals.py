"""Time signals and barrel-temperature tables.

Every signal supports ``s(t)``, ``s.derivative(t)`` and ``s.second_derivative(t)``
on scalars or arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class PiecewiseLinear:
    """Piecewise-linear signal through explicit breakpoints.

    Values are extended as constants outside the table. At a breakpoint the
    derivative is the slope of the piece to its left; at (or before) the first
    breakpoint the first piece's slope is used.
    """

    kind = "pwl"

    def __init__(self, t, v):
        self.t = np.atleast_1d(np.asarray(t, dtype=float))
        self.v = np.atleast_1d(np.asarray(v, dtype=float))
        if self.t.shape != self.v.shape or self.t.ndim != 1:
            raise ValueError("breakpoint times and values must be 1-d of equal length")
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("breakpoint times must be strictly increasing")
        if self.t.size > 1:
            self._slopes = np.diff(self.v) / np.diff(self.t)
        else:
            self._slopes = np.zeros(0)

    @classmethod
    def constant(cls, value: float) -> "PiecewiseLinear":
        return cls([0.0], [value])

    def __call__(self, t):
        return np.interp(t, self.t, self.v)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        if self._slopes.size == 0:
            return np.zeros_like(t)
        # piece k covers (t_k, t_{k+1}]
        k = np.searchsorted(self.t, t, side="left") - 1
        k = np.clip(k, 0, self._slopes.size - 1)
        out = self._slopes[k]
        return np.where(t > self.t[-1], 0.0, out)

    def second_derivative(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    def breakpoints(self):
        return self.t

    def to_dict(self):
        return {"kind": "pwl", "t": self.t.tolist(), "v": self.v.tolist()}


@dataclass
class SineSignal:
    """``base + amp * sin(omega * t + phase)``; smooth data for regularity checks."""

    base: float
    amp: float = 0.0
    omega: float = 1.0
    phase: float = 0.0
    kind: str = field(default="sine", init=False, repr=False)

    def __call__(self, t):
        return self.base + self.amp * np.sin(self.omega * np.asarray(t, dtype=float) + self.phase)

    def derivative(self, t):
        return self.amp * self.omega * np.cos(self.omega * np.asarray(t, dtype=float) + self.phase)

    def second_derivative(self, t):
        return -self.amp * self.omega**2 * np.sin(self.omega * np.asarray(t, dtype=float) + self.phase)

    def breakpoints(self):
        return np.zeros(0)

    def to_dict(self):
        return {"kind": "sine", "base": self.base, "amp": self.amp,
                "omega": self.omega, "phase": self.phase}


def signal_from_dict(d):
    if isinstance(d, (int, float)):
        return PiecewiseLinear.constant(float(d))
    kind = d.get("kind", "pwl")
    if kind == "pwl":
        return PiecewiseLinear(d["t"], d["v"])
    if kind == "sine":
        return SineSignal(float(d["base"]), float(d.get("amp", 0.0)),
                          float(d.get("omega", 1.0)), float(d.get("phase", 0.0)))
    raise ValueError(f"unknown signal kind {kind!r}")


class BilinearTable:
    """Bilinear table over (t, x) with constant extension outside the box.

    Either axis may have a single node, which makes the table constant along it.
    """

    def __init__(self, t, x, v):
        self.t = np.atleast_1d(np.asarray(t, dtype=float))
        self.x = np.atleast_1d(np.asarray(x, dtype=float))
        self.v = np.asarray(v, dtype=float).reshape(self.t.size, self.x.size)

    @classmethod
    def constant(cls, value: float) -> "BilinearTable":
        return cls([0.0], [0.0], [[value]])

    @staticmethod
    def _locate(nodes, q):
        if nodes.size == 1:
            z = np.zeros(q.shape, dtype=int)
            return z, z, np.zeros(q.shape)
        q = np.clip(q, nodes[0], nodes[-1])
        i = np.clip(np.searchsorted(nodes, q, side="right") - 1, 0, nodes.size - 2)
        w = (q - nodes[i]) / (nodes[i + 1] - nodes[i])
        return i, i + 1, w

    def __call__(self, t, x):
        t, x = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
        i0, i1, wt = self._locate(self.t, t)
        j0, j1, wx = self._locate(self.x, x)
        v = self.v
        return ((1 - wt) * ((1 - wx) * v[i0, j0] + wx * v[i0, j1])
                + wt * ((1 - wx) * v[i1, j0] + wx * v[i1, j1]))

    def to_dict(self):
        return {"t": self.t.tolist(), "x": self.x.tolist(), "v": self.v.tolist()}

    @classmethod
    def from_dict(cls, d):
        if isinstance(d, (int, float)):
            return cls.constant(float(d))
        return cls(d["t"], d["x"], d["v"])


@dataclass
class OperatingSignals:
    """Screw speed, feed rate, inlet moisture/temperature and barrel temperature per zone."""

    N: object
    F_in: object
    M_in: object
    T_in: object
    T_b_pfz: BilinearTable
    T_b_ffz: BilinearTable

    def T_b(self, zone: str, t, x):
        return self.T_b_pfz(t, x) if zone == "pfz" else self.T_b_ffz(t, x)

    def inlet_ratio(self, params, t):
        """F_in / (rho0 V_eff N), unchecked."""
        return self.F_in(t) / (params.rho0 * params.V_eff * self.N(t))

    def inlet_ratio_derivatives(self, params, t):
        """First and second time derivatives of the inlet ratio."""
        c = params.rho0 * params.V_eff
        F, dF, d2F = self.F_in(t), self.F_in.derivative(t), self.F_in.second_derivative(t)
        N, dN, d2N = self.N(t), self.N.derivative(t), self.N.second_derivative(t)
        u = dF * N - F * dN
        du = d2F * N - F * d2N
        d1 = u / (c * N**2)
        d2 = (du * N - 2.0 * u * dN) / (c * N**3)
        return d1, d2

    def to_dict(self):
        return {"N": self.N.to_dict(), "F_in": self.F_in.to_dict(),
                "M_in": self.M_in.to_dict(), "T_in": self.T_in.to_dict(),
                "T_b_pfz": self.T_b_pfz.to_dict(), "T_b_ffz": self.T_b_ffz.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(N=signal_from_dict(d["N"]), F_in=signal_from_dict(d["F_in"]),
                   M_in=signal_from_dict(d["M_in"]), T_in=signal_from_dict(d["T_in"]),
                   T_b_pfz=BilinearTable.from_dict(d["T_b_pfz"]),
                   T_b_ffz=BilinearTable.from_dict(d["T_b_ffz"]))
