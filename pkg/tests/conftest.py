import numpy as np
import pytest

from extrusim.characteristics import Characteristics
from extrusim.interface import SolverConfig, choose_window, solve_global, solve_window
from extrusim.scenario import equilibrium_scenario, perturbed_scenario, unit_params


@pytest.fixture(scope="session")
def params():
    return unit_params()


@pytest.fixture(scope="session")
def perturbed():
    return perturbed_scenario(0.02)


@pytest.fixture(scope="session")
def equilibrium():
    return equilibrium_scenario()


@pytest.fixture(scope="session")
def perturbed_solution(perturbed):
    return solve_global(perturbed, SolverConfig())


@pytest.fixture(scope="session")
def first_window(perturbed):
    """Converged first window of the perturbed scenario and its characteristics."""
    cfg = SolverConfig()
    eq = perturbed.equilibrium
    state = perturbed.initial_state(cfg.grid_n)
    delta = choose_window(cfg, perturbed.params, eq, state, perturbed.horizon)
    res = solve_window(perturbed.params, perturbed.signals, state, cfg, eq, delta)
    ch = Characteristics(perturbed.params, perturbed.signals, res.traj, cfg.guard)
    return res, ch, state


def rk4_xi(ch, zone, t, x, s, steps=4000):
    """Independent oracle: classical RK4 of d xi/ds = alpha(s, xi) from (t, x) back to s."""
    h = (s - t) / steps
    y = x
    u = t
    for _ in range(steps):
        k1 = ch.velocity(zone, u, y)
        k2 = ch.velocity(zone, u + h / 2, y + h / 2 * k1)
        k3 = ch.velocity(zone, u + h / 2, y + h / 2 * k2)
        k4 = ch.velocity(zone, u + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        u += h
    return float(np.asarray(y))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
