"""Operator-splitting integrators for reaction-diffusion equations with
inhomogeneous boundary conditions."""

from .errors import (BlowUpError, BoundarySpecError, ConfigError, CorrectorBoundError,
                     DimensionError, KrylovConvergenceError, MultigridConvergenceError,
                     NumericalFailure, SplittingError, StepFailure, TraceMismatchError)
from .mesh import (BoundaryCondition, BoundarySpec, DiscreteDiffusion, Grid,
                   apply_boundary_reconstruction, build_laplacian, dirichlet, neumann,
                   null_diffusion, robin)
from .matfun import MatFunBackend, expm_action, phi1_action, phi2_action
from .flows import (FlowCounters, IntegralReaction, QuadraticReaction, ReactionTerm,
                    ZeroReaction, diffusion_flow, projection_flow, reaction_flow,
                    reaction_minus_q_flow)
from .multigrid import MultigridConfig
from .corrector import (Corrector, CorrectorRule, boundary_trace_m3, boundary_trace_m5a,
                        boundary_trace_m5b, extend_analytic, extend_harmonic)
from .schemes import (DiscreteProblem, SchemeConfig, Trajectory, integrate, rk4_reference,
                      step_m3, step_m5, step_strang)

__version__ = "0.1.0"
