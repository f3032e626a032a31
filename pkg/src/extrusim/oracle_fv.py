"""First-order upwind finite-volume reference solver.

Independent of the characteristic machinery: both zones are discretized on
cell centers of the normalized coordinate, transported with non-conservative
upwind differences (velocities are positive), and the interface ODE is
advanced by explicit Euler using the last PFZ cell as f_p(t, 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CFLError
from .model import (PhysicalParams, heat_generation_ffz, heat_generation_pfz,
                    interface_velocity, velocity_ffz, velocity_pfz)
from .transport import FIELDS, FieldSnapshot, SolutionHistory, interface_series

CFL_MAX = 0.9


@dataclass
class FvState:
    t: float
    l: float
    f_p: np.ndarray
    M_p: np.ndarray
    T_p: np.ndarray
    M_f: np.ndarray
    T_f: np.ndarray

    @property
    def n(self) -> int:
        return self.f_p.size

    @property
    def fp1(self) -> float:
        return float(self.f_p[-1])


def cell_centers(n: int) -> np.ndarray:
    return (np.arange(n) + 0.5) / n


def _upwind(u, ghost, a, dt, dx):
    left = np.concatenate([[ghost], u[:-1]])
    return u - dt / dx * a * (u - left)


def max_speeds(params: PhysicalParams, signals, st: FvState):
    xc = cell_centers(st.n)
    N = signals.N(st.t)
    F = interface_velocity(params, st.l, N, st.fp1)
    a_p = velocity_pfz(params, xc, N, st.l, st.fp1)
    a_f = velocity_ffz(params, xc, N, st.l, st.fp1)
    return F, a_p, a_f


def fv_step(params: PhysicalParams, signals, st: FvState, dt: float) -> FvState:
    """One explicit step; raises CFLError if dt exceeds the stability limit."""
    dx = 1.0 / st.n
    xc = cell_centers(st.n)
    t = st.t
    N = signals.N(t)
    F, a_p, a_f = max_speeds(params, signals, st)
    cfl = dt / dx * max(np.max(a_p), np.max(a_f))
    if cfl > CFL_MAX:
        raise CFLError(f"CFL number {cfl:.3f} exceeds {CFL_MAX} (dt={dt:.3g}, dx={dx:.3g})")
    C0 = params.C0
    g_in = signals.inlet_ratio(params, t)
    f_p = _upwind(st.f_p, g_in, a_p, dt, dx)
    M_p = _upwind(st.M_p, signals.M_in(t), a_p, dt, dx)
    src_p = C0 * (st.T_p - signals.T_b("pfz", t, xc)) + heat_generation_pfz(params, N, st.f_p)
    T_p = _upwind(st.T_p, signals.T_in(t), a_p, dt, dx) + dt * src_p
    M_f = _upwind(st.M_f, st.M_p[-1], a_f, dt, dx)
    src_f = C0 * (st.T_f - signals.T_b("ffz", t, xc)) + heat_generation_ffz(params, N)
    T_f = _upwind(st.T_f, st.T_p[-1], a_f, dt, dx) + dt * src_f
    return FvState(t + dt, st.l + dt * F, f_p, M_p, T_p, M_f, T_f)


def fv_initial(scenario, n: int) -> FvState:
    xc = cell_centers(n)
    ws = scenario.initial_state(max(1025, 2 * n + 1))
    return FvState(0.0, float(scenario.l0), ws.fp(xc), ws.M_p(xc), ws.T_p(xc),
                   ws.M_f(xc), ws.T_f(xc))


def _snapshot(st: FvState) -> FieldSnapshot:
    return FieldSnapshot(st.t, cell_centers(st.n), st.f_p.copy(), st.M_p.copy(), st.T_p.copy(),
                         st.M_f.copy(), st.T_f.copy(), l=st.l, fp1=st.fp1)


def fv_mass(params: PhysicalParams, l: float, f_p) -> float:
    """Midpoint-rule total mass of a cell-centered profile."""
    return params.rho0 * params.S_eff * (l * np.mean(f_p) + (params.L - l))


def fv_solve(scenario, cells: int = 400, output_times=None, cfl: float = 0.8,
             dt: float | None = None) -> SolutionHistory:
    """March to the horizon, landing exactly on every output time."""
    if not 0 < cfl <= CFL_MAX:
        raise CFLError(f"requested CFL number {cfl} outside (0, {CFL_MAX}]")
    params, signals = scenario.params, scenario.signals
    outs = np.sort(np.asarray(scenario.output_times if output_times is None else output_times,
                              dtype=float))
    T = scenario.horizon
    st = fv_initial(scenario, cells)
    dx = 1.0 / cells
    snaps, ts, ls, fs = [], [st.t], [st.l], [st.fp1]
    oi = 0
    while oi < outs.size and outs[oi] <= 1e-14:
        snaps.append(_snapshot(st))
        oi += 1
    while T - st.t > 1e-12:
        if dt is None:
            _, a_p, a_f = max_speeds(params, signals, st)
            step = cfl * dx / max(np.max(a_p), np.max(a_f))
        else:
            step = dt
        target = outs[oi] if oi < outs.size else T
        if st.t + step >= target - 1e-12:
            step = target - st.t
        st = fv_step(params, signals, st, step)
        ts.append(st.t)
        ls.append(st.l)
        fs.append(st.fp1)
        while oi < outs.size and abs(outs[oi] - st.t) <= 1e-10:
            snaps.append(_snapshot(st))
            oi += 1
    hist = SolutionHistory(snaps, interface_series(params, signals, np.array(ts),
                                                   np.array(ls), np.array(fs)))
    hist.mass = np.array([fv_mass(params, s.l, s.f_p) for s in snaps])
    return hist


def compare(a: SolutionHistory, b: SolutionHistory) -> dict:
    """Relative L1 differences per field (b interpolated onto a's grid and times)
    and the relative sup difference of the interface position."""
    out = {}
    tb = b.times
    pairs = []
    for sa in a.snapshots:
        k = int(np.argmin(np.abs(tb - sa.t))) if tb.size else -1
        if k < 0 or abs(tb[k] - sa.t) > 1e-8:
            raise ValueError(f"no matching output time for t={sa.t}")
        pairs.append((sa, b.snapshots[k]))
    for name in FIELDS:
        num = den = 0.0
        for sa, sb in pairs:
            ua = sa.field(name)
            ub = np.interp(sa.x, sb.x, sb.field(name))
            num += np.trapezoid(np.abs(ua - ub), sa.x)
            den += np.trapezoid(np.abs(ua), sa.x)
        out[name] = float(num / den) if den > 0 else float(num)
    la = a.interface["l"]
    lb = np.interp(a.interface["t"], b.interface["t"], b.interface["l"])
    out["l"] = float(np.max(np.abs(la - lb)) / np.max(np.abs(la)))
    return out
