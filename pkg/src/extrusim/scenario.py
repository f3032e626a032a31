"""Scenario files: loading, validation, serialization and bundled builders.

A scenario is a JSON document (``.scn``) with the keys ``name``, ``params``,
``equilibrium``, ``signals``, ``initial``, ``horizon``, ``output_times``,
``conserving`` and optionally ``solver`` and ``check_compat2``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ScenarioError
from .interface import SolverConfig
from .model import EquilibriumPoint, PhysicalParams, equilibrium_filling
from .profiles import FillingProfile, ScalarProfile, WindowState, uniform_grid
from .signals import BilinearTable, OperatingSignals, PiecewiseLinear, SineSignal

COMPAT_TOL = 1e-8
PROFILE_KEYS = ("f_p", "M_p", "T_p", "M_f", "T_f")

# one code per invariant
E_SCHEMA = "E001"
E_PARAM = "E010"
E_CONSERVING = "E011"
E_L0 = "E020"
E_EQ_POSITION = "E021"
E_EQ_SPEED = "E022"
E_SPEED = "E030"
E_INFLOW = "E031"
E_FP0_RANGE = "E040"
E_COMPAT = "E041"
E_COMPAT2 = "E042"
E_HORIZON = "E050"
E_OUTPUT_TIMES = "E051"
E_PROFILE_TABLE = "E060"
E_SOLVER_KEY = "E070"


@dataclass
class Issue:
    code: str
    path: str
    message: str


@dataclass
class Scenario:
    name: str
    params: PhysicalParams
    l_e: float
    N_e: float
    signals: OperatingSignals
    initial: dict
    l0: float
    horizon: float
    output_times: list
    conserving: bool = False
    solver: dict = field(default_factory=dict)
    check_compat2: bool = False

    @property
    def equilibrium(self) -> EquilibriumPoint:
        return EquilibriumPoint.from_position(self.params, self.l_e, self.N_e)

    def solver_config(self, **overrides) -> SolverConfig:
        return SolverConfig().with_overrides({**self.solver, **overrides})

    def initial_state(self, n: int) -> WindowState:
        ini = self.initial
        x = np.asarray(ini["x"], dtype=float)
        grid = uniform_grid(n)
        fp = FillingProfile.from_table(x, ini["f_p"], ini.get("f_p_x"), ini.get("f_p_xx"), grid)
        prof = {k: ScalarProfile.from_table(x, ini[k], grid) for k in ("M_p", "T_p", "M_f", "T_f")}
        return WindowState(0.0, float(self.l0), fp, **prof)

    def to_dict(self) -> dict:
        ini = {k: np.asarray(v, dtype=float).tolist() for k, v in self.initial.items()}
        d = {
            "name": self.name,
            "params": self.params.to_dict(),
            "equilibrium": {"l_e": self.l_e, "N_e": self.N_e},
            "signals": self.signals.to_dict(),
            "initial": dict(ini, l0=self.l0),
            "horizon": self.horizon,
            "output_times": [float(t) for t in self.output_times],
            "conserving": self.conserving,
            "solver": dict(self.solver),
        }
        if self.check_compat2:
            d["check_compat2"] = True
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())


# ---- validation ----------------------------------------------------------

def _scan_times(sig, T, n=2001):
    t = np.linspace(0.0, T, n)
    bps = np.concatenate([np.asarray(s.breakpoints()) for s in sig])
    bps = bps[(bps >= 0) & (bps <= T)]
    return np.unique(np.concatenate([t, bps]))


def compat2_defect(params, signals, fp_x0: float, l0: float) -> float:
    """Left side of the second-order corner compatibility condition."""
    g1, _ = signals.inlet_ratio_derivatives(params, 0.0)
    return float(fp_x0 + l0 / (params.zeta * signals.N(0.0)) * g1)


def validate_dict(d: dict) -> tuple[list, Scenario | None]:
    """Check a parsed scenario document; returns (issues, scenario-or-None)."""
    issues: list[Issue] = []

    def need(obj, key, path):
        if not isinstance(obj, dict) or key not in obj:
            issues.append(Issue(E_SCHEMA, f"{path}.{key}" if path else key, "missing"))
            return None
        return obj[key]

    praw = need(d, "params", "")
    params = None
    if isinstance(praw, dict):
        names = [f.name for f in fields(PhysicalParams)]
        missing = [n for n in names if n not in praw and n != "P0"]
        for n in missing:
            issues.append(Issue(E_SCHEMA, f"params.{n}", "missing"))
        extra = [k for k in praw if k not in names]
        for k in extra:
            issues.append(Issue(E_SCHEMA, f"params.{k}", "unknown parameter"))
        bad = [k for k in names if k in praw and not (isinstance(praw[k], (int, float))
                                                       and praw[k] > 0)]
        for k in bad:
            issues.append(Issue(E_PARAM, f"params.{k}", f"must be strictly positive, got {praw[k]!r}"))
        if not missing and not extra and not bad:
            params = PhysicalParams(**{k: float(v) for k, v in praw.items()})

    conserving = bool(d.get("conserving", False))
    if params is not None and conserving and not params.is_conserving():
        issues.append(Issue(E_CONSERVING, "params.V_eff",
                            f"conserving scenario requires V_eff = zeta*S_eff "
                            f"({params.V_eff} vs {params.zeta * params.S_eff})"))

    eq = need(d, "equilibrium", "")
    l_e = N_e = None
    if isinstance(eq, dict):
        l_e, N_e = eq.get("l_e"), eq.get("N_e")
        if params is not None and not (isinstance(l_e, (int, float)) and 0 < l_e < params.L):
            issues.append(Issue(E_EQ_POSITION, "equilibrium.l_e", f"must lie in (0, L), got {l_e!r}"))
        if not (isinstance(N_e, (int, float)) and N_e > 0):
            issues.append(Issue(E_EQ_SPEED, "equilibrium.N_e", f"must be positive, got {N_e!r}"))

    T = d.get("horizon")
    if not (isinstance(T, (int, float)) and T > 0):
        issues.append(Issue(E_HORIZON, "horizon", f"must be positive, got {T!r}"))
        T = None
    outs = d.get("output_times", [])
    if T is not None:
        o = np.asarray(outs, dtype=float)
        if o.size and (np.any(o < 0) or np.any(o > T) or np.any(np.diff(o) <= 0)):
            issues.append(Issue(E_OUTPUT_TIMES, "output_times", "must be strictly increasing within [0, horizon]"))

    signals = None
    sraw = need(d, "signals", "")
    if isinstance(sraw, dict):
        try:
            signals = OperatingSignals.from_dict(sraw)
        except (KeyError, ValueError, TypeError) as exc:
            issues.append(Issue(E_SCHEMA, "signals", f"cannot parse: {exc}"))

    if signals is not None and params is not None and T is not None:
        ts = _scan_times([signals.N, signals.F_in], T)
        N = signals.N(ts)
        if np.any(N <= 0):
            k = int(np.argmax(N <= 0))
            issues.append(Issue(E_SPEED, "signals.N", f"screw speed {N[k]:.6g} <= 0 at t={ts[k]:.6g}"))
        else:
            g = signals.inlet_ratio(params, ts)
            bad = (g <= 0) | (g >= 1)
            if np.any(bad):
                k = int(np.argmax(bad))
                issues.append(Issue(E_INFLOW, "signals.F_in",
                                    f"inlet ratio F_in/theta(N) = {g[k]:.6g} outside (0, 1) at t={ts[k]:.6g}"))

    ini = need(d, "initial", "")
    l0 = None
    if isinstance(ini, dict):
        l0 = ini.get("l0")
        if params is not None and not (isinstance(l0, (int, float)) and 0 < l0 < params.L):
            issues.append(Issue(E_L0, "initial.l0", f"must lie in (0, L), got {l0!r}"))
        x = np.asarray(ini.get("x", []), dtype=float)
        if x.size < 2 or x[0] != 0.0 or x[-1] != 1.0 or np.any(np.diff(x) <= 0):
            issues.append(Issue(E_PROFILE_TABLE, "initial.x", "must increase strictly from 0 to 1"))
        for k in PROFILE_KEYS + ("f_p_x", "f_p_xx"):
            if k not in ini:
                if k in PROFILE_KEYS:
                    issues.append(Issue(E_SCHEMA, f"initial.{k}", "missing"))
                continue
            if np.asarray(ini[k]).shape != x.shape:
                issues.append(Issue(E_PROFILE_TABLE, f"initial.{k}", "length differs from initial.x"))
        if "f_p" in ini and np.asarray(ini["f_p"]).shape == x.shape:
            f = np.asarray(ini["f_p"], dtype=float)
            if np.any(f <= 0) or np.any(f >= 1):
                issues.append(Issue(E_FP0_RANGE, "initial.f_p", "values must lie in (0, 1)"))
            elif signals is not None and params is not None and signals.N(0.0) > 0:
                defect = float(f[0] - signals.inlet_ratio(params, 0.0))
                if abs(defect) > COMPAT_TOL:
                    issues.append(Issue(E_COMPAT, "initial.f_p[0]",
                                        f"corner compatibility violated by {defect:.3g}"))
                if d.get("check_compat2") and isinstance(l0, (int, float)):
                    fx0 = (ini["f_p_x"][0] if "f_p_x" in ini
                           else FillingProfile.from_table(x, f).fx[0])
                    c2 = compat2_defect(params, signals, float(fx0), float(l0))
                    if abs(c2) > 1e-6:
                        issues.append(Issue(E_COMPAT2, "initial.f_p_x[0]",
                                            f"second-order compatibility violated by {c2:.3g}"))

    solver = d.get("solver", {}) or {}
    known = {f.name for f in fields(SolverConfig)}
    for k in solver:
        if k not in known:
            issues.append(Issue(E_SOLVER_KEY, f"solver.{k}", "unknown solver option"))

    if issues:
        return issues, None
    initial = {k: np.asarray(v, dtype=float) for k, v in ini.items() if k != "l0"}
    sc = Scenario(name=str(d.get("name", "scenario")), params=params, l_e=float(l_e),
                  N_e=float(N_e), signals=signals, initial=initial, l0=float(l0),
                  horizon=float(T), output_times=[float(t) for t in outs],
                  conserving=conserving, solver=dict(solver),
                  check_compat2=bool(d.get("check_compat2", False)))
    return issues, sc


def loads_scenario(text: str) -> Scenario:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError([Issue(E_SCHEMA, "<document>", f"parse error: {exc}")]) from exc
    if not isinstance(d, dict):
        raise ScenarioError([Issue(E_SCHEMA, "<document>", "top level must be an object")])
    issues, sc = validate_dict(d)
    if issues:
        raise ScenarioError(issues)
    return sc


def load_scenario(path) -> Scenario:
    p = Path(path)
    if not p.exists():
        bundled = resources.files("extrusim") / "scenarios" / p.name
        if bundled.is_file():
            return loads_scenario(bundled.read_text())
        raise FileNotFoundError(path)
    return loads_scenario(p.read_text())


def bundled_path(name: str):
    return resources.files("extrusim") / "scenarios" / name


# ---- builders ------------------------------------------------------------

def unit_params(mu_p: float = 0.1, mu_f: float = 0.1) -> PhysicalParams:
    """Unit-magnitude parameters; V_eff = zeta * S_eff (conserving)."""
    return PhysicalParams(L=1.0, zeta=1.0, K_d=1.0, B=1.0, rho0=1.0, V_eff=1.0, S_eff=1.0,
                          S_ech=1.0, alpha_heat=1.0, c0=1.0, eta=1.0, mu_p=mu_p, mu_f=mu_f,
                          beta0=1.0, P0=1.0)


def _table_grid(n=257):
    return np.linspace(0.0, 1.0, n)


def equilibrium_scenario(horizon: float = 10.0, l_e: float = 0.5, N_e: float = 1.0,
                         T_star: float = 1.0, M_star: float = 0.3) -> Scenario:
    """Stationary data: the exact solution is constant in time."""
    p = unit_params()
    f_pe = float(equilibrium_filling(p, l_e))
    theta = p.rho0 * p.V_eff * N_e
    g_p = p.mu_p * p.beta0 * p.eta * N_e**2 / (f_pe * p.rho0 * p.V_eff * p.c0)
    g_f = p.mu_f * p.beta0 * p.eta * N_e**2 / (p.rho0 * p.V_eff * p.c0)
    sig = OperatingSignals(
        N=PiecewiseLinear.constant(N_e), F_in=PiecewiseLinear.constant(theta * f_pe),
        M_in=PiecewiseLinear.constant(M_star), T_in=PiecewiseLinear.constant(T_star),
        T_b_pfz=BilinearTable.constant(T_star + g_p / p.C0),
        T_b_ffz=BilinearTable.constant(T_star + g_f / p.C0))
    x = _table_grid(5)
    one = np.ones_like(x)
    ini = {"x": x, "f_p": f_pe * one, "f_p_x": 0 * one, "f_p_xx": 0 * one,
           "M_p": M_star * one, "T_p": T_star * one, "M_f": M_star * one, "T_f": T_star * one}
    return Scenario("equilibrium", p, l_e, N_e, sig, ini, l_e, horizon,
                    list(np.linspace(0.0, horizon, 11)), conserving=True)


def _moisture_temperature(x):
    M_p = 0.3 + 0.02 * np.sin(np.pi * x)
    M_f = 0.3 + 0.015 * np.sin(np.pi * x)
    T_p = 1.0 + 0.05 * x
    T_f = 1.05 + 0.05 * np.sin(0.5 * np.pi * x)
    return M_p, T_p, M_f, T_f


def _mt_signals():
    M_in = PiecewiseLinear([0.0, 0.5, 1.2, 2.0, 3.0], [0.3, 0.33, 0.31, 0.32, 0.3])
    T_in = PiecewiseLinear([0.0, 1.0, 2.0, 3.0], [1.0, 1.05, 1.02, 1.0])
    T_b_pfz = BilinearTable([0.0, 3.0], [0.0, 1.0], [[0.8, 1.0], [0.9, 1.1]])
    T_b_ffz = BilinearTable([0.0, 3.0], [0.0, 1.0], [[1.0, 1.2], [1.1, 1.0]])
    return M_in, T_in, T_b_pfz, T_b_ffz


def perturbed_scenario(eps: float = 0.02, horizon: float = 2.0, output_times=None,
                       smooth_moisture: bool = False) -> Scenario:
    """Small W^{1,inf} perturbation of the unit equilibrium, all terms scaled by eps.

    Screw speed, feed rate, initial filling profile and interface position each
    carry roughly a quarter of the data budget eps.
    """
    p = unit_params()
    l_e, N_e = 0.5, 1.0
    f_pe = float(equilibrium_filling(p, l_e))
    theta = p.rho0 * p.V_eff * N_e
    tN = [0.0, 0.5, 1.0, 1.5, 2.0, 3.0]
    nN = np.array([0.0, 0.5, 1.0, 0.5, 0.2, 0.0])
    N = PiecewiseLinear(tN, N_e + eps / 8 * nN)
    tF = [0.0, 0.4, 0.9, 1.4, 2.0, 3.0]
    r = np.array([0.0, 0.4, -0.1, 0.3, 0.0, 0.0])
    a = (eps / 8) / (f_pe * 1.4)
    F_in = PiecewiseLinear(tF, theta * f_pe * (1.0 + a * r))
    M_in, T_in, T_b_pfz, T_b_ffz = _mt_signals()
    if smooth_moisture:
        M_in = SineSignal(0.3, 0.02, 2.0, 0.0)
    sig = OperatingSignals(N, F_in, M_in, T_in, T_b_pfz, T_b_ffz)
    x = _table_grid()
    b = eps / (4 * (1 + np.pi))
    f0 = f_pe + b * np.sin(np.pi * x)
    f0x = b * np.pi * np.cos(np.pi * x)
    f0xx = -b * np.pi**2 * np.sin(np.pi * x)
    M_p, T_p, M_f, T_f = _moisture_temperature(x)
    if smooth_moisture:
        M_p = 0.3 - 0.02 * np.sin(np.pi * x) * 0.5
    ini = {"x": x, "f_p": f0, "f_p_x": f0x, "f_p_xx": f0xx,
           "M_p": M_p, "T_p": T_p, "M_f": M_f, "T_f": T_f}
    if output_times is None:
        output_times = list(np.linspace(0.0, horizon, 9))
    return Scenario(f"perturbed-eps{eps:g}", p, l_e, N_e, sig, ini, l_e + eps / 4, horizon,
                    list(output_times), conserving=True)


def regularity_scenario(eps: float = 0.02, horizon: float = 2.0, output_times=None) -> Scenario:
    """Smooth (H^2-class) data satisfying both corner compatibility conditions."""
    p = unit_params()
    l_e, N_e = 0.5, 1.0
    f_pe = float(equilibrium_filling(p, l_e))
    theta = p.rho0 * p.V_eff * N_e
    N = SineSignal(N_e, eps / 8, np.pi, 0.0)
    F_in = SineSignal(theta * f_pe, theta * f_pe * eps / 4, 2.0, 0.0)
    M_in, T_in, T_b_pfz, T_b_ffz = _mt_signals()
    sig = OperatingSignals(N, F_in, M_in, T_in, T_b_pfz, T_b_ffz)
    l0 = l_e + eps / 4
    g1, _ = sig.inlet_ratio_derivatives(p, 0.0)
    c1 = -l0 * g1 / (p.zeta * N(0.0) * np.pi)
    c2 = eps / 8
    x = _table_grid()
    f0 = f_pe + c1 * np.sin(np.pi * x) + c2 * (1 - np.cos(np.pi * x))
    f0x = c1 * np.pi * np.cos(np.pi * x) + c2 * np.pi * np.sin(np.pi * x)
    f0xx = -c1 * np.pi**2 * np.sin(np.pi * x) + c2 * np.pi**2 * np.cos(np.pi * x)
    M_p, T_p, M_f, T_f = _moisture_temperature(x)
    ini = {"x": x, "f_p": f0, "f_p_x": f0x, "f_p_xx": f0xx,
           "M_p": M_p, "T_p": T_p, "M_f": M_f, "T_f": T_f}
    if output_times is None:
        output_times = list(np.linspace(0.0, horizon, 9))
    return Scenario(f"regularity-eps{eps:g}", p, l_e, N_e, sig, ini, l0, horizon,
                    list(output_times), conserving=True, check_compat2=True)


def data_deviation(sc: Scenario, n_t: int = 20001) -> dict:
    """Terms of the smallness condition: W^{1,inf} deviations of the data."""
    p, sig = sc.params, sc.signals
    eq = sc.equilibrium
    t = np.linspace(0.0, sc.horizon, n_t)
    g = sig.inlet_ratio(p, t)
    g1, _ = sig.inlet_ratio_derivatives(p, t)
    state = sc.initial_state(1025)
    terms = {
        "f_p0": state.fp.deviation_w1inf(eq.f_pe),
        "inlet": float(np.max(np.abs(g - eq.f_pe)) + np.max(np.abs(g1))),
        "N": float(np.max(np.abs(sig.N(t) - eq.N_e)) + np.max(np.abs(sig.N.derivative(t)))),
        "l0": abs(sc.l0 - eq.l_e),
    }
    terms["total"] = math.fsum(terms.values())
    return terms
