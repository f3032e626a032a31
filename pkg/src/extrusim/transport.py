"""Field reconstruction along characteristics, plus validation measures.

Within one window the trajectory (l, f_p(., 1)) is known, so f_p, M_p, M_f
are transported values and T_p, T_f follow the linear relaxation ODE
dT/ds = C0 (T - T_b) + g along each curve, solved with an exact integrating
factor, with the source integrated exactly against the exponential weight
(piecewise-linear in time).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .characteristics import FFZ, PFZ, Characteristics
from .model import (EquilibriumPoint, PhysicalParams, heat_generation_ffz,
                    heat_generation_pfz, interface_velocity, net_flow_rate, pressure_drop)
from .profiles import FillingProfile, ScalarProfile, WindowState

FIELDS = ("f_p", "M_p", "T_p", "M_f", "T_f")


@dataclass
class FieldSnapshot:
    t: float
    x: np.ndarray
    f_p: np.ndarray
    M_p: np.ndarray
    T_p: np.ndarray
    M_f: np.ndarray
    T_f: np.ndarray
    f_px: np.ndarray | None = None
    f_pxx: np.ndarray | None = None
    l: float = float("nan")
    fp1: float = float("nan")

    def field(self, name):
        return getattr(self, name)


@dataclass
class SolutionHistory:
    snapshots: list
    # interface series: arrays t, l, fp1, Fd, dP
    interface: dict
    mass: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def times(self):
        return np.array([s.t for s in self.snapshots])


def _safe_tau(paths):
    return np.where(paths.initial, paths.nodes[0], paths.tau)


def _inlet_ratio(ch, tau):
    return ch.signals.inlet_ratio(ch.params, tau)


def reconstruct_fp(ch: Characteristics, state: WindowState, t, x, paths=None):
    """Filling ratio from the foot of the PFZ characteristic through (t, x)."""
    if paths is None:
        paths = ch.trace(PFZ, t, x)
    tau = _safe_tau(paths)
    beta = np.where(paths.initial, paths.beta, 0.0)
    return np.where(paths.initial, state.fp(beta), _inlet_ratio(ch, tau))


def reconstruct_fp_derivatives(ch: Characteristics, state: WindowState, t, x, paths=None):
    """(f_px, f_pxx) by the chain rule through the analytic foot derivatives."""
    if paths is None:
        paths = ch.trace(PFZ, t, x)
    p, sig = ch.params, ch.signals
    tau = _safe_tau(paths)
    beta = np.where(paths.initial, paths.beta, 0.0)
    E = ch.stretch(PFZ, paths.foot_time, paths.t)
    l_tau, _ = ch.traj.at(tau)
    N_tau = sig.N(tau)
    tau_x = -l_tau / (p.zeta * N_tau) * E
    tau_xx = tau_x * E * l_tau * sig.N.derivative(tau) / (p.zeta * N_tau**2)
    g1, g2 = sig.inlet_ratio_derivatives(p, tau)
    fx = np.where(paths.initial, state.fp.d1(beta) * E, g1 * tau_x)
    fxx = np.where(paths.initial, state.fp.d2(beta) * E**2, g2 * tau_x**2 + g1 * tau_xx)
    return fx, fxx


def _pfz_values(ch, state, t, x, paths=None):
    """(f_p, M_p, T_p) at arbitrary points (t_i, x_i) of the PFZ."""
    p, sig = ch.params, ch.signals
    if paths is None:
        paths = ch.trace(PFZ, t, x)
    tau = _safe_tau(paths)
    beta = np.where(paths.initial, paths.beta, 0.0)
    f_foot = np.where(paths.initial, state.fp(beta), _inlet_ratio(ch, tau))
    M = np.where(paths.initial, state.M_p(beta), sig.M_in(tau))
    T_foot = np.where(paths.initial, state.T_p(beta), sig.T_in(tau))
    C0 = p.C0
    tt = paths.t

    def source(s, xi):
        return -C0 * sig.T_b_pfz(s, xi) + heat_generation_pfz(p, sig.N(s), f_foot[None, :])

    T = np.exp(C0 * (tt - paths.foot_time)) * T_foot + paths.integrate_decay(source, C0)
    return f_foot, M, T


def _ffz_values(ch, state, t, x, paths=None):
    """(M_f, T_f) at points of the FFZ; inflow from the PFZ exit trace."""
    p, sig = ch.params, ch.signals
    if paths is None:
        paths = ch.trace(FFZ, t, x)
    beta = np.where(paths.initial, paths.beta, 0.0)
    M_foot = state.M_f(beta)
    T_foot = state.T_f(beta)
    bnd = np.nonzero(~paths.initial)[0]
    if bnd.size:
        _, Mb, Tb = _pfz_values(ch, state, paths.tau[bnd], np.ones(bnd.size))
        M_foot[bnd] = Mb
        T_foot[bnd] = Tb
    C0 = p.C0
    tt = paths.t

    def source(s, xi):
        return -C0 * sig.T_b_ffz(s, xi) + heat_generation_ffz(p, sig.N(s))

    T = np.exp(C0 * (tt - paths.foot_time)) * T_foot + paths.integrate_decay(source, C0)
    return M_foot, T


def evaluate_window(ch: Characteristics, state: WindowState, t: float, x=None,
                    derivatives: bool = True) -> FieldSnapshot:
    """All fields at time t on grid x (defaults to the state's grid)."""
    x = state.x if x is None else np.asarray(x, dtype=float)
    tt = np.full(x.shape, float(t))
    paths = ch.trace(PFZ, tt, x)
    f, M_p, T_p = _pfz_values(ch, state, tt, x, paths)
    M_f, T_f = _ffz_values(ch, state, tt, x)
    # zone coupling at the interface is imposed, not re-traced
    left = x == 0.0
    right = x == 1.0
    if left.any() and right.any():
        M_f[left] = M_p[right][0]
        T_f[left] = T_p[right][0]
    fx = fxx = None
    if derivatives:
        fx, fxx = reconstruct_fp_derivatives(ch, state, tt, x, paths)
    l, fp1 = ch.traj.at(t)
    return FieldSnapshot(float(t), x, f, M_p, T_p, M_f, T_f, fx, fxx, float(l), float(fp1))


def state_from_snapshot(snap: FieldSnapshot) -> WindowState:
    x = snap.x
    return WindowState(
        t0=snap.t, l0=snap.l,
        fp=FillingProfile(x, snap.f_p, snap.f_px, snap.f_pxx),
        M_p=ScalarProfile(x, snap.M_p), T_p=ScalarProfile(x, snap.T_p),
        M_f=ScalarProfile(x, snap.M_f), T_f=ScalarProfile(x, snap.T_f))


def solve_moisture(ch: Characteristics, state: WindowState, output_times, x=None):
    """(M_p, M_f) arrays, one row per output time inside the window."""
    x = state.x if x is None else x
    rows = [evaluate_window(ch, state, t, x, derivatives=False) for t in output_times]
    return np.array([r.M_p for r in rows]), np.array([r.M_f for r in rows])


def solve_temperature(ch: Characteristics, state: WindowState, output_times, x=None):
    """(T_p, T_f) arrays, one row per output time inside the window."""
    x = state.x if x is None else x
    rows = [evaluate_window(ch, state, t, x, derivatives=False) for t in output_times]
    return np.array([r.T_p for r in rows]), np.array([r.T_f for r in rows])


def total_mass(params: PhysicalParams, l: float, x, f_p) -> float:
    """rho0 S_eff (l * int f_p + (L - l)), trapezoid in the normalized variable."""
    return params.rho0 * params.S_eff * (l * np.trapezoid(f_p, x) + (params.L - l))


def interface_series(params, signals, t, l, fp1):
    N = signals.N(t)
    return {"t": np.asarray(t), "l": np.asarray(l), "fp1": np.asarray(fp1),
            "Fd": net_flow_rate(params, l, N), "dP": pressure_drop(params, l, N)}


def mass_balance_defect(params, signals, history: SolutionHistory):
    """Central-difference dm/dt minus (F_in - F_d) at interior output times."""
    t = history.times
    m = history.mass
    ls = np.array([s.l for s in history.snapshots])
    dmdt = (m[2:] - m[:-2]) / (t[2:] - t[:-2])
    tc = t[1:-1]
    rhs = signals.F_in(tc) - net_flow_rate(params, ls[1:-1], signals.N(tc))
    return tc, dmdt - rhs


# ---- weak formulation ----------------------------------------------------

def polynomial_test_family(max_deg: int = 2):
    """Test functions (1 - x) x^i t^j, i, j <= max_deg, with their t- and x-derivatives."""
    fam = []
    for i in range(max_deg + 1):
        for j in range(max_deg + 1):
            def phi(t, x, i=i, j=j):
                return (1 - x) * x**i * t**j

            def phi_t(t, x, i=i, j=j):
                return (1 - x) * x**i * (j * t ** (j - 1) if j else 0.0 * t)

            def phi_x(t, x, i=i, j=j):
                dxi = i * x ** (i - 1) if i else 0.0 * x
                return ((1 - x) * dxi - x**i) * t**j

            fam.append(((i, j), phi, phi_t, phi_x))
    return fam


def _trapz2(vals, t, x):
    return np.trapezoid(np.trapezoid(vals, x, axis=1), t)


def weak_residual(t, x, u, a, a_x, h, phi, phi_t, phi_x, b=None, c=None):
    """Residual of the weak identity for u_t + a u_x = b u + c, u(t, 0) = h.

    ``u``, ``a``, ``a_x``, ``b``, ``c`` are (nt, nx) arrays on the grid; ``h``
    has length nt. The last time row plays the role of tau_end.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    TT, XX = np.meshgrid(t, x, indexing="ij")
    if np.any(np.abs(phi(t, np.ones_like(t))) > 0):
        raise ValueError("test function must vanish at x = 1")
    b = np.zeros_like(u) if b is None else b
    c = np.zeros_like(u) if c is None else c
    ph = phi(TT, XX)
    inner = u * (phi_t(TT, XX) + a * phi_x(TT, XX) + (a_x + b) * ph) + c * ph
    term1 = -_trapz2(inner, t, x)
    term2 = np.trapezoid(u[-1] * ph[-1], x)
    term3 = -np.trapezoid(u[0] * ph[0], x)
    term4 = -np.trapezoid(h * a[:, 0] * ph[:, 0], t)
    return float(term1 + term2 + term3 + term4)


def pfz_velocity_grid(params, signals, times, l, fp1, x):
    """alpha_p and its x-derivative on a (t, x) grid."""
    N = signals.N(times)
    F = interface_velocity(params, l, N, fp1)
    a = (params.zeta * N[:, None] - x[None, :] * F[:, None]) / l[:, None]
    a_x = np.broadcast_to((-F / l)[:, None], a.shape)
    return a, a_x


def moisture_weak_residuals(params, signals, history: SolutionHistory, max_deg: int = 2):
    """Weak residual of the solved M_p for every member of the polynomial family."""
    t = history.times
    x = history.snapshots[0].x
    u = np.array([s.M_p for s in history.snapshots])
    l = np.array([s.l for s in history.snapshots])
    fp1 = np.array([s.fp1 for s in history.snapshots])
    a, a_x = pfz_velocity_grid(params, signals, t, l, fp1, x)
    h = signals.M_in(t)
    return {key: weak_residual(t, x, u, a, a_x, h, phi, pt, px)
            for key, phi, pt, px in polynomial_test_family(max_deg)}


# ---- norm estimates ------------------------------------------------------

def _l2(v, x):
    return float(np.sqrt(np.trapezoid(v**2, x)))


def estimate_norms(history: SolutionHistory, equilibrium: EquilibriumPoint, data_eps: float,
                   params=None, signals=None, initial=None, horizon=None) -> dict:
    """Deviation norms of the solution and their ratios to the data size.

    The W^{1,inf} deviation of f_p sums sup |f_p - f_pe|, sup |f_px| and
    sup |f_pt| (f_pt = -alpha_p f_px) over all snapshots.
    """
    snaps = history.snapshots
    x = snaps[0].x
    sup_dev = max(float(np.max(np.abs(s.f_p - equilibrium.f_pe))) for s in snaps)
    fxs = [s.f_px if s.f_px is not None else np.gradient(s.f_p, x) for s in snaps]
    sup_fx = max(float(np.max(np.abs(fx))) for fx in fxs)
    sup_ft = 0.0
    if params is not None and signals is not None:
        for s, fx in zip(snaps, fxs):
            N = signals.N(s.t)
            F = interface_velocity(params, s.l, N, s.fp1)
            a = (params.zeta * N - x * F) / s.l
            sup_ft = max(sup_ft, float(np.max(np.abs(a * fx))))
    fp_w1inf = sup_dev + sup_fx + sup_ft
    il = history.interface
    l_sup = float(np.max(np.abs(np.asarray(il["l"]) - equilibrium.l_e)))
    h2 = []
    for s in snaps:
        if s.f_px is not None and s.f_pxx is not None:
            h2.append(np.sqrt(_l2(s.f_p - equilibrium.f_pe, x) ** 2 + _l2(s.f_px, x) ** 2
                              + _l2(s.f_pxx, x) ** 2))
    report = {
        "fp_dev_w1inf": fp_w1inf,
        "fp_dev_sup": sup_dev,
        "l_dev_sup": l_sup,
        "fp_dev_h2_sup": float(max(h2)) if h2 else float("nan"),
        "data_eps": data_eps,
    }
    for name in ("M_p", "T_p", "M_f", "T_f"):
        report[f"{name}_L2_sup"] = max(_l2(s.field(name), x) for s in snaps)
    if data_eps > 0:
        report["C_fp"] = fp_w1inf / data_eps
        report["C_l"] = l_sup / data_eps
    if initial is not None and signals is not None and horizon is not None:
        tq = np.linspace(0.0, horizon, 2001)
        xi = initial["x"]
        d = {
            "M0_p": _l2(initial["M_p"], xi), "M0_f": _l2(initial["M_f"], xi),
            "T0_p": _l2(initial["T_p"], xi), "T0_f": _l2(initial["T_f"], xi),
            "M_in": _l2(signals.M_in(tq), tq), "T_in": _l2(signals.T_in(tq), tq),
        }
        if params is not None:
            d["g_f"] = float(np.sqrt(np.trapezoid(heat_generation_ffz(params, signals.N(tq)) ** 2, tq)))
            gp = [np.trapezoid(heat_generation_pfz(params, signals.N(s.t), s.f_p) ** 2, x) for s in snaps]
            d["g_p"] = float(np.sqrt(np.trapezoid(gp, history.times))) if len(snaps) > 1 else float("nan")
        report["data_norms"] = d
        rhs = {
            "M_p": d["M0_p"] + d["M_in"],
            "M_f": d["M0_p"] + d["M_in"] + d["M0_f"],
            "T_p": d["T0_p"] + d["T_in"] + d.get("g_p", 0.0),
            "T_f": d["T0_p"] + d["T_in"] + d["T0_f"] + d.get("g_f", 0.0),
        }
        report["constants"] = {k: (report[f"{k}_L2_sup"] / v if v > 0 else
                                   (0.0 if report[f"{k}_L2_sup"] == 0 else float("inf")))
                               for k, v in rhs.items()}
    return report
