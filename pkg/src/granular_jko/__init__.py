"""Mesh-refined JKO solvers for blow-up in a granular kinetic equation.

The collision operator is treated as a Wasserstein gradient flow solved by a
Fisher-regularised minimizing-movement step; spatial transport is handled by
a semi-Lagrangian split step; adaptive meshes track concentration.
"""

from .analytic import SelfSimilarParams, closed_form, integrate_ode
from .driver import BlowupReport, RunConfig, Strategy, Trigger, run_homogeneous, run_inhomogeneous
from .grid import Grid1D, PhaseField
from .jko import JkoOptions, solve_collision
from .kernels import KernelSpec
from .meshmap import BumpMode
from .scenarios import Scenario, build_initial_condition, load_scenarios, run_scenario

__version__ = "0.1.0"

__all__ = [
    "BlowupReport", "BumpMode", "Grid1D", "JkoOptions", "KernelSpec", "PhaseField", "RunConfig",
    "Scenario", "SelfSimilarParams", "Strategy", "Trigger", "build_initial_condition",
    "closed_form", "integrate_ode", "load_scenarios", "run_homogeneous", "run_inhomogeneous",
    "run_scenario", "solve_collision",
]
