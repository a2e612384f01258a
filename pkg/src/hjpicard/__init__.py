"""Mesh-free Picard fixed-point solver for first-order Hamilton-Jacobi equations."""

from hjpicard.core import (
    DivergenceError,
    EvaluationError,
    KernelSpec,
    ProblemDef,
    Query,
    SolveResult,
    SolverConfig,
    fixed_point_map,
    hopf_lax_energy,
)
from hjpicard.kernels import BACKEND, available_backends
from hjpicard.multistart import MultiStartResult, solve_multistart
from hjpicard.picard import (
    ContractionInfo,
    ErrorBounds,
    contraction_info,
    error_bounds,
    predicted_iterations,
    solve,
)
from hjpicard.problems import LqrSpec, make_problem

__version__ = "0.1.0"
