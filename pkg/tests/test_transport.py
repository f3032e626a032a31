from dataclasses import replace

import numpy as np
import pytest

from extrusim.characteristics import PFZ, Characteristics, InterfaceTrajectory
from extrusim.interface import SolverConfig, solve_global
from extrusim.model import equilibrium_filling, heat_generation_pfz
from extrusim.oracle_fv import compare, fv_solve
from extrusim.profiles import FillingProfile, ScalarProfile, WindowState
from extrusim.scenario import Scenario, equilibrium_scenario
from extrusim.signals import BilinearTable, OperatingSignals, PiecewiseLinear
from extrusim.transport import (estimate_norms, evaluate_window, mass_balance_defect,
                                polynomial_test_family, reconstruct_fp,
                                reconstruct_fp_derivatives, weak_residual)

X = np.linspace(0, 1, 129)


def _eq_setup(params, fp=None, T_in=1.0, T_b=1.0, M_in=0.3, T_len=1.0):
    f_pe = equilibrium_filling(params, 0.5)
    c = PiecewiseLinear.constant
    sig = OperatingSignals(c(1.0), c(f_pe), c(M_in) if np.isscalar(M_in) else M_in, c(T_in),
                           BilinearTable.constant(T_b), BilinearTable.constant(T_b))
    ts = np.linspace(0, T_len, int(T_len * 1000) + 1)
    ch = Characteristics(params, sig, InterfaceTrajectory.constant(ts, 0.5, f_pe))
    if fp is None:
        fp = FillingProfile(X, np.full_like(X, f_pe), 0 * X, 0 * X)
    s = lambda v: ScalarProfile(X, np.full_like(X, v))
    return ch, WindowState(0.0, 0.5, fp, s(0.3), s(1.0), s(0.3), s(1.0))


def test_reconstruct_equilibrium(params):
    ch, st = _eq_setup(params)
    t = np.array([0.0, 0.1, 0.4, 0.9])
    x = np.array([0.3, 0.8, 0.1, 0.5])
    np.testing.assert_allclose(reconstruct_fp(ch, st, t, x), 1 / 3, atol=1e-15)
    fx, fxx = reconstruct_fp_derivatives(ch, st, t, x)
    np.testing.assert_allclose(fx, 0, atol=1e-14)
    np.testing.assert_allclose(fxx, 0, atol=1e-14)


def test_reconstruct_initial_time_identity(first_window):
    res, ch, st = first_window
    snap = evaluate_window(ch, st, res.traj.start)
    np.testing.assert_allclose(snap.f_p, st.fp.f, atol=1e-14)
    np.testing.assert_allclose(snap.M_p, st.M_p(st.x), atol=1e-14)
    np.testing.assert_allclose(snap.T_f, st.T_f(st.x), atol=1e-14)


def test_linear_profile_slope_is_transported(params):
    a = 0.05
    fp = FillingProfile(X, 1 / 3 + a * (X - 1), np.full_like(X, a), 0 * X)
    ch, st = _eq_setup(params, fp)
    t = np.full(5, 0.2)
    x = np.linspace(0.45, 0.95, 5)  # beyond the separatrix 2 t
    fx, fxx = reconstruct_fp_derivatives(ch, st, t, x)
    np.testing.assert_allclose(fx, a, rtol=1e-12)
    np.testing.assert_allclose(fxx, 0, atol=1e-12)


def test_derivatives_match_differences(first_window):
    res, ch, st = first_window
    rng = np.random.default_rng(8)
    d = 1e-4
    t = rng.uniform(res.traj.start, res.traj.end, 60)
    x = rng.uniform(d, 1 - d, 60)
    sep = np.array([ch.separatrix(s) for s in t])
    keep = np.abs(x - sep) > 3 * d
    t, x = t[keep], x[keep]
    fx, fxx = reconstruct_fp_derivatives(ch, st, t, x)
    f = lambda q: reconstruct_fp(ch, st, t, q)
    np.testing.assert_allclose(fx, (f(x + d) - f(x - d)) / (2 * d), atol=1e-5)
    np.testing.assert_allclose(fxx, (f(x + d) - 2 * f(x) + f(x - d)) / d**2, atol=1e-3)


def test_constant_moisture_transported(params):
    ch, st = _eq_setup(params)
    snap = evaluate_window(ch, st, 0.7)
    np.testing.assert_allclose(snap.M_p, 0.3, atol=1e-15)
    np.testing.assert_allclose(snap.M_f, 0.3, atol=1e-15)


def test_zero_moisture_stays_zero(params):
    ch, st = _eq_setup(params, M_in=0.0)
    zero = ScalarProfile(X, 0 * X)
    snap = evaluate_window(ch, replace(st, M_p=zero, M_f=zero), 0.8)
    assert np.all(snap.M_p == 0.0) and np.all(snap.M_f == 0.0)


def test_temperature_relaxes_to_ode_fixed_point(params):
    p = replace(params, alpha_heat=20.0)
    T_b, T_in = 1.0, 2.0
    ch, st = _eq_setup(p, T_in=T_in, T_b=T_b)
    g = heat_generation_pfz(p, 1.0, 1 / 3)
    T_star = T_b - g / p.C0
    snap = evaluate_window(ch, st, 0.8)
    # boundary region x < 2 t: travel time x l_e / (zeta N_e) = x / 2
    x = snap.x[snap.x < 1.5]
    expected = T_star + (T_in - T_star) * np.exp(p.C0 * x / 2)
    np.testing.assert_allclose(snap.T_p[snap.x < 1.5], expected, rtol=1e-12)
    assert abs(snap.T_p[-1] - T_star) < 1e-4


def test_temperature_without_source_stays_at_exchange_temperature(params):
    # zero heating power: only the exchange term, which vanishes at T = T_b
    p = replace(params, mu_p=1e-300, mu_f=1e-300)
    ch, st = _eq_setup(p, T_in=1.0, T_b=1.0)
    snap = evaluate_window(ch, st, 0.9)
    np.testing.assert_allclose(snap.T_p, 1.0, atol=1e-14)
    np.testing.assert_allclose(snap.T_f, 1.0, atol=1e-14)


def _front_scenario(horizon=0.35):
    sc = equilibrium_scenario(horizon=horizon)
    sig = replace(sc.signals, M_in=PiecewiseLinear([0.0, 0.1, 0.1001, 1.0], [0.3, 0.3, 0.6, 0.6]))
    return Scenario("front", sc.params, sc.l_e, sc.N_e, sig, sc.initial, sc.l0, horizon,
                    [0.0, horizon], conserving=True)


def test_moisture_front_position():
    sc = _front_scenario()
    sol = solve_global(sc, SolverConfig(grid_n=513))
    snap = sol.history.snapshots[-1]
    front = 2.0 * (0.35 - 0.10005)  # zeta N_e t / l_e in the normalized variable
    assert np.all(np.abs(snap.M_p[snap.x < front - 0.01] - 0.6) < 1e-12)
    assert np.all(np.abs(snap.M_p[snap.x > front + 0.01] - 0.3) < 1e-12)
    errs = [compare(sol.history, fv_solve(sc, n))["M_p"] for n in (200, 400, 800)]
    # upwind converges like sqrt(dx) in L1 across a jump
    assert errs[0] > errs[1] > errs[2]
    assert errs[1] / errs[2] > 1.25


def _constant_residual(n, member):
    t = np.linspace(0, 1, n)
    x = np.linspace(0, 1, n)
    TT, XX = np.meshgrid(t, x, indexing="ij")
    a = 1 + 0.5 * XX + TT
    u = np.full_like(a, 0.7)
    phi, pt, px = member[1:]
    return weak_residual(t, x, u, a, np.full_like(a, 0.5), np.full(n, 0.7), phi, pt, px)


@pytest.mark.parametrize("k", range(9))
def test_weak_residual_constant_solution(k):
    member = polynomial_test_family()[k]
    coarse, fine = _constant_residual(41, member), _constant_residual(81, member)
    assert abs(fine) < 2e-4
    # only quadrature error remains, which is second order
    assert abs(fine) <= abs(coarse) / 3.5 or abs(fine) < 1e-13


def test_weak_residual_requires_vanishing_test_function():
    t = x = np.linspace(0, 1, 5)
    u = np.zeros((5, 5))
    with pytest.raises(ValueError):
        weak_residual(t, x, u, u + 1, u, np.zeros(5), lambda t, x: t + x,
                      lambda t, x: 1 + 0 * x, lambda t, x: 1 + 0 * x)


def test_equilibrium_norms_and_mass_are_zero():
    sc = equilibrium_scenario(horizon=0.3)
    sc.output_times = list(np.linspace(0, 0.3, 7))
    sol = solve_global(sc, SolverConfig(grid_n=65))
    rep = estimate_norms(sol.history, sc.equilibrium, 0.0, sc.params, sc.signals)
    assert rep["fp_dev_w1inf"] == 0.0 and rep["l_dev_sup"] == 0.0
    assert rep["fp_dev_h2_sup"] == 0.0
    _, defect = mass_balance_defect(sc.params, sc.signals, sol.history)
    assert np.max(np.abs(defect)) < 1e-13


def test_moisture_maximum_principle(perturbed_solution, perturbed):
    ini = perturbed.initial
    tq = np.linspace(0, perturbed.horizon, 2001)
    data = np.concatenate([ini["M_p"], ini["M_f"], perturbed.signals.M_in(tq)])
    for s in perturbed_solution.history.snapshots:
        for u in (s.M_p, s.M_f):
            assert data.min() - 1e-12 <= u.min() and u.max() <= data.max() + 1e-12
