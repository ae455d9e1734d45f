"""Finite-volume simulator and checks for chemotaxis with density-suppressed motility."""

from .grid import Grid, build_grid, dirichlet_energy, integrate, laplacian, lp_norm, mean
from .elliptic import EllipticSolveOptions, helmholtz_solve, poisson_meanzero_solve, weighted_helmholtz_solve
from .kinetics import ConsumptionSpec, ModelParams, MotilitySpec, check_assumptions, rescale_from_physical
from .solver import InitialSpec, State, StepControls, init_state, run, step
from .diagnostics import DiagnosticsCollector, auxiliary_fields, fit_exponential_rate, lyapunov

__version__ = "0.1.0"
