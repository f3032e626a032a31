"""Exception types raised by the simulator."""

from __future__ import annotations


class ExtruderError(Exception):
    """Base class for every failure the simulator reports."""


class RegimeError(ExtruderError, ValueError):
    """Data or iterates left the small-perturbation regime the solver relies on."""

    def __init__(self, message: str, window: int | None = None):
        if window is not None:
            message = f"window {window}: {message}"
        super().__init__(message)
        self.window = window


class DegenerateDenominatorError(RegimeError):
    """Filling ratio at the interface too close to 1."""


class InflowRegimeError(RegimeError):
    """Inlet filling ratio F_in / theta(N) outside (0, 1)."""


class ConvergenceError(ExtruderError):
    """Picard iteration did not reach tolerance."""

    def __init__(self, message: str, window: int | None = None):
        if window is not None:
            message = f"window {window}: {message}"
        super().__init__(message)
        self.window = window


class CFLError(ExtruderError):
    """Finite-volume time step violates the CFL bound."""


class ScenarioError(ExtruderError):
    """Scenario failed validation; ``issues`` lists every violation."""

    def __init__(self, issues):
        self.issues = list(issues)
        lines = [f"[{i.code}] {i.path}: {i.message}" for i in self.issues]
        super().__init__("invalid scenario:\n  " + "\n  ".join(lines))
