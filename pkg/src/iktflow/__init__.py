"""Inverse kinetic theory for the incompressible Navier-Stokes equations.

A phase-space dynamical system whose Liouville transport of the local
Maxwellian reproduces, through its velocity moments, the incompressible NS
fields.  The package provides the analytic flow corpus, the Maxwellian and its
quadrature moments, the phase-space vector field and flow (with bounce-back
walls), Liouville residual checks, a semi-Lagrangian kinetic solver and a
pseudo-spectral reference solver.
"""

__version__ = "0.1.0"

from .errors import (ConfigurationError, ContractError, GrazingEventError, IKTError, InvariantViolation,
                     PositivityError)
from .fields import (CASES, AnalyticFlow, FluidParams, FluidSample, FluidState, continuity_residual,
                     divergence_residual, energy_residual, eval_analytic, momentum_residual, poisson_residual)
from .grid import Grid
from .kinetics import (MaxwellianParams, MomentSet, QuadratureSet, closure_moments, kinetic_pressure,
                       maxwellian_eval, moments, vth_from_pressure)
from .vector_field import (FieldContext, PhasePoint, force_F0, force_F1, maxwellian_context, phase_divergence,
                           phase_divergence_fd, scalar_bracket, vector_field_X)
from .phase_flow import (PlanarWall, Trajectory, WallEvent, WallModel, bounce_back, flow_map, integrate,
                         jacobian_along)
from .liouville import (BoundaryReport, MaxwellianPdf, Norms, ResidualReport, kinetic_bc_check, liouville_residual,
                        maxwellian_liouville, moment_residuals, transport_pdf)
from .spectral import (SpectralState, project, run_reference, solve_pressure_poisson, solve_poisson, spectral_step,
                       taylor_green_exact)
from .kinetic_solver import (KineticState, RunDiagnostics, SolverConfig, init_from_fields, init_from_flow, run,
                             step)
