"""Bi-zone extruder simulation: partially and fully filled zones coupled at a moving interface."""

from .errors import (CFLError, ConvergenceError, DegenerateDenominatorError, ExtruderError,
                     InflowRegimeError, RegimeError, ScenarioError)
from .model import EquilibriumPoint, PhysicalParams
from .scenario import Scenario, load_scenario

__all__ = [
    "CFLError", "ConvergenceError", "DegenerateDenominatorError", "ExtruderError",
    "InflowRegimeError", "RegimeError", "ScenarioError", "EquilibriumPoint",
    "PhysicalParams", "Scenario", "load_scenario",
]
