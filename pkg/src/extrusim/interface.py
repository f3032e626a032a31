"""Fixed-point solver for the interface pair (l(t), f_p(t, 1)).

Each window [t0, t0 + delta] solves Psi = Map(Psi), where

    Map_1(Psi)(t) = l0 + int_{t0}^t F(l, N, f_p(., 1)) ds
    Map_2(Psi)(t) = f_p0(xi(t0; t, 1))

by Picard iteration. The window length comes from explicit bounds that keep
the map inside the eps1-ball and make it a 1/2-contraction. The end-of-window
profiles seed the next window.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .characteristics import Characteristics, InterfaceTrajectory
from .errors import ConvergenceError, RegimeError
from .model import (DEFAULT_GUARD, EquilibriumPoint, PhysicalParams,
                    interface_velocity, interface_velocity_partials)
from .profiles import WindowState
from .transport import (SolutionHistory, evaluate_window, interface_series,
                        state_from_snapshot, total_mass)

log = logging.getLogger(__name__)

CONTRACTION = 0.5


@dataclass(frozen=True)
class SolverConfig:
    eps1: float = 0.1
    h: float = 1e-3
    tol_fix: float = 1e-10
    max_iter: int = 60
    slack: float = 0.1
    safety: float = 0.9
    guard: float = DEFAULT_GUARD
    grid_n: int = 513
    norm_samples: int = 64
    norm_safety: float = 1.1
    # differences below this are rounding noise and give no contraction ratio
    ratio_floor: float = 1e-12

    def validate(self, params: PhysicalParams, eq: EquilibriumPoint):
        lim = min(eq.l_e, params.L - eq.l_e, eq.f_pe, 1.0 - eq.f_pe)
        if not 0 < self.eps1 < lim:
            raise RegimeError(f"eps1={self.eps1} must lie in (0, {lim:.6g})")
        if self.h <= 0 or self.tol_fix <= 0:
            raise ValueError("micro-step and Picard tolerance must be positive")

    def with_overrides(self, overrides: dict | None) -> "SolverConfig":
        return replace(self, **(overrides or {}))


def norm_F_bound(params: PhysicalParams, eq: EquilibriumPoint, eps1: float,
                 guard: float = DEFAULT_GUARD, samples: int = 64, safety: float = 1.1,
                 fp_box: str = "ball") -> float:
    """Upper estimate of sup|F| + sum of sup|partials| over the admissible box.

    The box is l in [0, L], N in [N_e - eps1, N_e + eps1] and, for ``fp_box="ball"``,
    f_p(., 1) in [f_pe - eps1, f_pe + eps1]; ``fp_box="full"`` uses [0, 1 - guard].
    """
    l = np.linspace(0.0, params.L, samples)
    N = np.linspace(eq.N_e - eps1, eq.N_e + eps1, samples)
    if fp_box == "ball":
        f = np.linspace(max(eq.f_pe - eps1, 0.0), min(eq.f_pe + eps1, 1.0 - guard), samples)
    else:
        f = np.linspace(0.0, 1.0 - guard, samples)
    Lg, Ng, Fg = np.meshgrid(l, N, f, indexing="ij")
    val = interface_velocity(params, Lg, Ng, Fg, guard)
    parts = interface_velocity_partials(params, Lg, Ng, Fg)
    total = np.max(np.abs(val)) + sum(np.max(np.abs(p)) for p in parts)
    return float(safety * total)


def map2_lipschitz(delta, Fn, a, zN, W):
    """Lipschitz constant of Map_2 on a window of length delta (explicit bound).

    a = l_e - eps1, zN = zeta (N_e + eps1), W = ||f_p0 - f_pe||_{W^{1,inf}}.
    """
    return W * math.exp(delta * Fn / a) * (
        delta * Fn * (1.0 + delta * zN / a) * (1.0 / a + 1.0 / a**2) + delta * zN / a**2)


def contraction_delta(Fn, a, zN, W) -> float:
    """Largest delta for which both Lipschitz bounds are at most 1/2."""
    d1 = CONTRACTION / Fn if Fn > 0 else math.inf
    if W <= 0:
        return d1
    f = lambda d: map2_lipschitz(d, Fn, a, zN, W) - CONTRACTION
    hi = 1e-3
    while f(hi) < 0:
        hi *= 2.0
        if hi > 1e6:
            return d1
    return min(d1, brentq(f, 0.0, hi, xtol=1e-14, rtol=1e-12))


def choose_window(config: SolverConfig, params: PhysicalParams, eq: EquilibriumPoint,
                  state: WindowState, T_remaining: float, Fn: float | None = None) -> float:
    if Fn is None:
        Fn = norm_F_bound(params, eq, config.eps1, config.guard,
                          config.norm_samples, config.norm_safety)
    e1 = config.eps1
    a = eq.l_e - e1
    zN = params.zeta * (eq.N_e + e1)
    W = state.fp.deviation_w1inf(eq.f_pe)
    inv = (1.0 / Fn) if Fn > 0 else math.inf
    T0_lb = a / (zN + Fn)
    cands = [T0_lb, a * inv, (params.L - eq.l_e - e1) * inv, contraction_delta(Fn, a, zN, W)]
    delta = min(config.safety * min(cands), T_remaining)
    if not delta > 0:
        raise RegimeError(f"window length {delta} is not positive")
    return float(delta)


def apply_map(params: PhysicalParams, signals, state: WindowState, traj: InterfaceTrajectory,
              eq: EquilibriumPoint | None = None, eps1: float | None = None,
              guard: float = DEFAULT_GUARD) -> InterfaceTrajectory:
    ts = traj.times
    N = signals.N(ts)
    F = interface_velocity(params, traj.l, N, traj.fp1, guard)
    l_new = state.l0 + np.concatenate([[0.0], np.cumsum(0.5 * np.diff(ts) * (F[1:] + F[:-1]))])
    ch = Characteristics(params, signals, traj, guard)
    xi = ch.xi_unit_start_all()
    if np.min(xi) < -1e-12:
        raise RegimeError("window extends past the separatrix crossing time")
    fp_new = state.fp(np.clip(xi, 0.0, 1.0))
    fp_new[0] = state.fp1
    out = InterfaceTrajectory(ts, l_new, fp_new)
    if eq is not None and eps1 is not None:
        dl = np.max(np.abs(l_new - eq.l_e))
        df = np.max(np.abs(fp_new - eq.f_pe))
        if max(dl, df) > eps1:
            raise RegimeError(f"iterate left the eps1-ball (|l-l_e|={dl:.3g}, |fp1-f_pe|={df:.3g})")
    return out


@dataclass
class WindowResult:
    index: int
    t0: float
    delta: float
    state: WindowState
    traj: InterfaceTrajectory
    iterations: int
    diffs: list = field(default_factory=list)
    ratios: list = field(default_factory=list)

    def record(self) -> dict:
        return {"window": self.index, "t0": self.t0, "delta": self.delta,
                "iterations": self.iterations, "ratios": list(self.ratios),
                "final_update": self.diffs[-1] if self.diffs else 0.0}


def window_nodes(t0: float, delta: float, h: float) -> np.ndarray:
    K = max(1, int(math.ceil(delta / h - 1e-9)))
    return t0 + np.linspace(0.0, delta, K + 1)


def solve_window(params: PhysicalParams, signals, state: WindowState, config: SolverConfig,
                 eq: EquilibriumPoint, delta: float, guess: InterfaceTrajectory | None = None,
                 index: int = 0) -> WindowResult:
    """Picard iteration of the interface map from a constant (or given) guess."""
    ts = window_nodes(state.t0, delta, config.h)
    traj = guess if guess is not None else InterfaceTrajectory.constant(ts, state.l0, state.fp1)
    diffs, ratios = [], []
    for it in range(1, config.max_iter + 1):
        try:
            new = apply_map(params, signals, state, traj, eq, config.eps1, config.guard)
        except RegimeError as exc:
            raise RegimeError(str(exc), window=index) from exc
        d = new.distance(traj)
        if diffs and diffs[-1] > config.ratio_floor and d > config.ratio_floor:
            ratios.append(d / diffs[-1])
        diffs.append(d)
        traj = new
        if d < config.tol_fix:
            log.debug("window %d: delta=%.4g converged in %d iterations", index, delta, it)
            return WindowResult(index, state.t0, delta, state, traj, it, diffs, ratios)
    raise ConvergenceError(f"Picard iteration did not converge in {config.max_iter} iterations "
                           f"(last update {diffs[-1]:.3g})", window=index)


@dataclass
class GlobalSolution:
    windows: list
    history: SolutionHistory
    Fnorm: float

    @property
    def trajectory(self) -> InterfaceTrajectory:
        ts = [self.windows[0].traj.times[:1]]
        ls = [self.windows[0].traj.l[:1]]
        fs = [self.windows[0].traj.fp1[:1]]
        for w in self.windows:
            ts.append(w.traj.times[1:])
            ls.append(w.traj.l[1:])
            fs.append(w.traj.fp1[1:])
        return InterfaceTrajectory(np.concatenate(ts), np.concatenate(ls), np.concatenate(fs))

    def window_at(self, t: float) -> WindowResult:
        for w in self.windows:
            if t <= w.t0 + w.delta + 1e-12:
                return w
        return self.windows[-1]

    def characteristics(self, w: WindowResult, params, signals, guard=DEFAULT_GUARD):
        return Characteristics(params, signals, w.traj, guard)

    def log_records(self):
        return [w.record() for w in self.windows]


def solve_global(scenario, config: SolverConfig | None = None, output_times=None,
                 derivatives: bool = True) -> GlobalSolution:
    """March windows over [0, T]; snapshots are taken at ``output_times``."""
    config = config or SolverConfig()
    params, signals, eq = scenario.params, scenario.signals, scenario.equilibrium
    config.validate(params, eq)
    T = scenario.horizon
    outs = np.sort(np.asarray(scenario.output_times if output_times is None else output_times,
                              dtype=float))
    state = scenario.initial_state(config.grid_n)
    Fn = norm_F_bound(params, eq, config.eps1, config.guard, config.norm_samples,
                      config.norm_safety)
    windows, snaps = [], []
    oi = 0
    t = 0.0
    k = 0
    while T - t > 1e-12 * max(T, 1.0):
        delta = choose_window(config, params, eq, state, T - t, Fn)
        res = solve_window(params, signals, state, config, eq, delta, index=k)
        windows.append(res)
        ch = Characteristics(params, signals, res.traj, config.guard)
        t1 = res.traj.end
        end_snap = None
        try:
            while oi < outs.size and outs[oi] <= t1 + 1e-12:
                to = min(outs[oi], t1)
                snap = evaluate_window(ch, state, to, derivatives=derivatives)
                if abs(to - t1) <= 1e-12 and snap.f_px is not None:
                    end_snap = snap
                snaps.append(snap)
                oi += 1
            if end_snap is None:
                end_snap = evaluate_window(ch, state, t1, derivatives=True)
        except RegimeError as exc:
            raise RegimeError(str(exc), window=k) from exc
        state = state_from_snapshot(end_snap)
        t = t1
        k += 1
    sol = GlobalSolution(windows, SolutionHistory([], {}), Fn)
    traj = sol.trajectory
    sol.history.snapshots = snaps
    sol.history.interface = interface_series(params, signals, traj.times, traj.l, traj.fp1)
    sol.history.mass = np.array([total_mass(params, s.l, s.x, s.f_p) for s in snaps])
    return sol
