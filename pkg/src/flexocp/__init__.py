"""flexocp: optimal control by integrated-residual transcription.

The solver first drives the time-integral of the squared dynamics
defect below a tolerance on a mesh whose node times are decision
variables, then minimises the actual cost subject to that residual
budget.  Movable nodes let coarse meshes park themselves on control
switches, so discontinuous solutions converge superlinearly.
"""

from .ad import Dual, Dual2, gradient, hessian, jacobian
from .driver import (SolveReport, SolverConfig, convergence_study, fit_slope,
                     pareto_sweep, solve_ocp)
from .mesh import (DecisionVector, FlexMesh, Trajectory, decision_from_dict,
                   decision_to_dict, interval_bound_constraints, pack, unpack,
                   uniform_mesh, vector_length, warm_start_expand)
from .nlp import NlpResult, NlpSpec, NlpStatus, lagrangian_hessian, solve
from .ocp import OcpProblem, fuller_problem, validate
from .problems import BenchmarkEntry, get, registry
from .quadrature import QuadRule, gauss_legendre, quad_error_estimate, residual_weights, scaled_points
from .transcription import (TranscribedNlp, build_cost_nlp, build_residual_nlp,
                            integrated_residual)

__version__ = "0.1.0"
