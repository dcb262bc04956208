"""Steady free convection in a bounded, fluid-saturated porous medium.

Finite-difference solver for the coupled stream-function / temperature
system, numerical checks of its structural estimates, and shooting for the
boundary-layer similarity profiles.
"""

from .analysis import (CheckResult, EstimateContext, check_apriori, check_max_principle,
                       estimate_context, poincare_constant, smallness_report, trilinear_a,
                       trilinear_a_skew)
from .coupled import (PhysicsParams, SolveReport, SolverConfig, constant_vector,
                      edge_linear_temperature, equation_residuals, picard_step, solve_coupled,
                      solve_linearized)
from .elliptic import EllipticProblem, LinearSystem, assemble, harmonic_lift, solve_linear
from .exceptions import (ConfigurationError, InvalidParameterError, NonConvergenceError,
                         NoSolutionError)
from .grid import (BoundaryPartition, Grid, build_grid, gradient, h1_seminorm, inner, l2_norm,
                   laplacian, linf_norm, perp)
from .similarity import (PhysicalConstants, SimilarityProblem, SimilarityProfile, gamma_value,
                         integrate_profile, ode_rhs, rayleigh, reconstruct_fields, shoot_flux,
                         shoot_temperature)

__version__ = "0.1.0"
