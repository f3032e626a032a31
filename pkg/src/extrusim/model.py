"""Closed-form coefficients of the bi-zone extruder model.

All functions accept scalars or numpy arrays and broadcast. Positions ``x``
are normalized zone coordinates in [0, 1]; ``l`` is the physical interface
position in (0, L).
"""

from __future__ import annotations

from dataclasses import dataclass, asdict, fields

import numpy as np

from .errors import DegenerateDenominatorError, InflowRegimeError, RegimeError

DEFAULT_GUARD = 1e-4


@dataclass(frozen=True)
class PhysicalParams:
    L: float
    zeta: float
    K_d: float
    B: float
    rho0: float
    V_eff: float
    S_eff: float
    S_ech: float
    alpha_heat: float
    c0: float
    eta: float
    mu_p: float
    mu_f: float
    beta0: float
    P0: float = 1.0

    def __post_init__(self):
        bad = [f.name for f in fields(self) if not getattr(self, f.name) > 0]
        if bad:
            raise ValueError(f"parameters must be strictly positive: {', '.join(bad)}")

    @property
    def C0(self) -> float:
        """Heat-exchange rate coefficient; always negative."""
        return -self.zeta * self.S_ech * self.alpha_heat / (self.rho0 * self.V_eff * self.c0)

    def is_conserving(self, rtol: float = 1e-12) -> bool:
        return abs(self.V_eff - self.zeta * self.S_eff) <= rtol * self.V_eff

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class EquilibriumPoint:
    l_e: float
    N_e: float
    f_pe: float

    @classmethod
    def from_position(cls, params: PhysicalParams, l_e: float, N_e: float) -> "EquilibriumPoint":
        return cls(l_e, N_e, float(equilibrium_filling(params, l_e, N_e)))


def pumping_capacity(params: PhysicalParams, N):
    """Maximum mass throughput rho0 * V_eff * N of the screw."""
    if np.any(np.asarray(N) < 0):
        raise ValueError("screw speed must be nonnegative")
    return params.rho0 * params.V_eff * N


def _check_position(params, l, closed_right=True):
    l_arr = np.asarray(l)
    upper_ok = l_arr <= params.L if closed_right else l_arr < params.L
    if np.any(l_arr < 0) or not np.all(upper_ok):
        raise ValueError(f"interface position outside [0, L]: {l}")


def net_flow_rate(params: PhysicalParams, l, N):
    """Die flow rate F_d as a function of interface position and screw speed."""
    _check_position(params, l)
    u = params.L - np.asarray(l, dtype=float)
    return (params.K_d * params.rho0 * params.V_eff * N * u
            / (params.B * params.rho0 + params.K_d * u))


def pressure_drop(params: PhysicalParams, l, N):
    """Die pressure drop P(t, L) - P0; satisfies F_d = K_d / eta * dP."""
    _check_position(params, l)
    u = params.L - np.asarray(l, dtype=float)
    return (params.eta * params.rho0 * params.V_eff * N * u
            / (params.B * params.rho0 + params.K_d * u))


def interface_velocity(params: PhysicalParams, l, N, fp1, guard: float = DEFAULT_GUARD):
    """Interface speed F(l, N, f_p(t, 1)) from the total mass balance."""
    fp1 = np.asarray(fp1, dtype=float)
    if np.any(fp1 > 1.0 - guard):
        raise DegenerateDenominatorError(
            f"interface filling ratio {np.max(fp1):.6g} exceeds 1 - {guard:g}")
    Fd = net_flow_rate(params, l, N)
    return ((Fd - params.rho0 * params.V_eff * N * fp1)
            / (params.rho0 * params.S_eff * (1.0 - fp1)))


def interface_velocity_partials(params: PhysicalParams, l, N, fp1):
    """Analytic partial derivatives (dF/dl, dF/dN, dF/dfp1)."""
    rho, V = params.rho0, params.V_eff
    u = params.L - np.asarray(l, dtype=float)
    denom = params.B * rho + params.K_d * u
    D = rho * params.S_eff * (1.0 - fp1)
    Fd = params.K_d * rho * V * N * u / denom
    dFd_dl = -params.K_d * rho * V * N * params.B * rho / denom**2
    dF_dl = dFd_dl / D
    dF_dN = (params.K_d * rho * V * u / denom - rho * V * fp1) / D
    dF_df = (Fd - rho * V * N) / (rho * params.S_eff * (1.0 - fp1) ** 2)
    return dF_dl, dF_dN, dF_df


def equilibrium_filling(params: PhysicalParams, l_e, N_e=None):
    """Filling ratio that makes the interface stationary at l_e (independent of N_e)."""
    if not np.all((np.asarray(l_e) > 0) & (np.asarray(l_e) < params.L)):
        raise ValueError("equilibrium position must lie in (0, L)")
    u = params.L - np.asarray(l_e, dtype=float)
    return params.K_d * u / (params.B * params.rho0 + params.K_d * u)


def velocity_pfz(params: PhysicalParams, x, N, l, fp1, guard: float = DEFAULT_GUARD):
    """Normalized transport speed in the partially filled zone."""
    F = interface_velocity(params, l, N, fp1, guard)
    a = (params.zeta * N - np.asarray(x) * F) / l
    if np.any(a <= 0):
        raise RegimeError("nonpositive PFZ velocity")
    return a


def velocity_ffz(params: PhysicalParams, x, N, l, fp1, guard: float = DEFAULT_GUARD):
    """Normalized transport speed in the fully filled zone."""
    F = interface_velocity(params, l, N, fp1, guard)
    Fd = net_flow_rate(params, l, N)
    a = (params.zeta * Fd / (params.rho0 * params.V_eff) + (np.asarray(x) - 1.0) * F) / (params.L - l)
    if np.any(a <= 0):
        raise RegimeError("nonpositive FFZ velocity (flow reversal is not handled)")
    return a


def heat_generation_pfz(params: PhysicalParams, N, f_p):
    f_p = np.asarray(f_p, dtype=float)
    if np.any(f_p <= 0):
        raise RegimeError("filling ratio must be positive in the viscous heating term")
    return params.mu_p * params.beta0 * params.eta * N**2 / (f_p * params.rho0 * params.V_eff * params.c0)


def heat_generation_ffz(params: PhysicalParams, N):
    return params.mu_f * params.beta0 * params.eta * N**2 / (params.rho0 * params.V_eff * params.c0)


def source_pfz(params: PhysicalParams, t, x, T_p, f_p, signals):
    N = signals.N(t)
    return params.C0 * (T_p - signals.T_b_pfz(t, x)) + heat_generation_pfz(params, N, f_p)


def source_ffz(params: PhysicalParams, t, x, T_f, signals):
    N = signals.N(t)
    return params.C0 * (T_f - signals.T_b_ffz(t, x)) + heat_generation_ffz(params, N)


def inlet_filling(params: PhysicalParams, signals, t):
    """Inlet boundary filling ratio; must lie strictly inside (0, 1)."""
    N = signals.N(t)
    if np.any(np.asarray(N) <= 0):
        raise InflowRegimeError(f"screw speed nonpositive at t={t}")
    g = signals.F_in(t) / (params.rho0 * params.V_eff * N)
    bad = (np.asarray(g) <= 0) | (np.asarray(g) >= 1)
    if np.any(bad):
        tt = np.broadcast_to(np.asarray(t, dtype=float), np.shape(bad))
        raise InflowRegimeError(
            f"inlet filling ratio {np.asarray(g)[bad].flat[0]:.6g} outside (0, 1) "
            f"at t={np.asarray(tt)[bad].flat[0]:.6g}")
    return g
