from fractions import Fraction as Q

import numpy as np
import pytest

from extrusim.errors import CFLError
from extrusim.oracle_fv import FvState, compare, fv_initial, fv_solve, fv_step
from extrusim.scenario import equilibrium_scenario
from extrusim.signals import BilinearTable, OperatingSignals, PiecewiseLinear


def test_equilibrium_step_is_stationary():
    sc = equilibrium_scenario()
    st = fv_initial(sc, 50)
    for _ in range(20):
        new = fv_step(sc.params, sc.signals, st, 0.005)
        for name in ("f_p", "M_p", "T_p", "M_f", "T_f"):
            assert np.max(np.abs(getattr(new, name) - getattr(st, name))) <= 1e-12
        assert abs(new.l - st.l) <= 1e-12
        st = new


def test_constant_source_free_fields_unchanged(perturbed):
    st = fv_initial(perturbed, 40)
    st.M_p[:] = 0.3
    st.M_f[:] = 0.3
    new = fv_step(perturbed.params, perturbed.signals, st, 1e-3)
    np.testing.assert_allclose(new.M_f, 0.3, rtol=0, atol=1e-15)
    # first PFZ cell sees the inlet value 0.3 as well
    np.testing.assert_allclose(new.M_p, 0.3, rtol=0, atol=1e-15)


def test_single_step_against_hand_calculation(params):
    """Four cells, unit parameters, exact rational arithmetic for the expected values."""
    f = [Q(30, 100), Q(32, 100), Q(34, 100), Q(36, 100)]
    M = [Q(1, 10), Q(2, 10), Q(3, 10), Q(4, 10)]
    l, N, F_in, M_in = Q(1, 2), Q(1), Q(3, 10), Q(1, 2)
    dt, dx = Q(1, 100), Q(1, 4)
    xc = [Q(1, 8), Q(3, 8), Q(5, 8), Q(7, 8)]
    fp1 = f[-1]
    Fd = N * (1 - l) / (1 + (1 - l))
    F = (Fd - N * fp1) / (1 - fp1)
    a_p = [(N - x * F) / l for x in xc]
    a_f = [(Fd + (x - 1) * F) / (1 - l) for x in xc]

    def upwind(u, ghost, a):
        left = [ghost] + u[:-1]
        return [u[i] - dt / dx * a[i] * (u[i] - left[i]) for i in range(4)]

    f_new = upwind(f, F_in / N, a_p)
    M_new = upwind(M, M_in, a_p)
    Mf_new = upwind(M, M[-1], a_f)

    c = PiecewiseLinear.constant
    sig = OperatingSignals(c(1.0), c(0.3), c(0.5), c(1.0), BilinearTable.constant(1.0),
                           BilinearTable.constant(1.0))
    fl = lambda v: np.array([float(q) for q in v])
    st = FvState(0.0, 0.5, fl(f), fl(M), np.ones(4), fl(M), np.ones(4))
    new = fv_step(params, sig, st, 0.01)
    np.testing.assert_allclose(new.f_p, fl(f_new), rtol=1e-14)
    np.testing.assert_allclose(new.M_p, fl(M_new), rtol=1e-14)
    np.testing.assert_allclose(new.M_f, fl(Mf_new), rtol=1e-14)
    assert new.l == pytest.approx(float(l + dt * F), rel=1e-15)


def test_forced_time_step_violating_cfl(perturbed):
    with pytest.raises(CFLError):
        fv_solve(perturbed, 100, dt=0.01)
    with pytest.raises(CFLError):
        fv_solve(perturbed, 100, cfl=1.5)


def test_self_comparison_is_zero(perturbed):
    sc = equilibrium_scenario(horizon=0.2)
    sc.output_times = [0.0, 0.1, 0.2]
    h = fv_solve(sc, 60)
    assert all(v == 0.0 for v in compare(h, h).values())


def test_lands_on_output_times(perturbed):
    h = fv_solve(perturbed, 50, output_times=[0.0, 0.123, 0.5])
    np.testing.assert_allclose(h.times, [0.0, 0.123, 0.5], atol=1e-12)
