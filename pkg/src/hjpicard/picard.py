"""Single-start Picard solver plus its a-posteriori diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from hjpicard import kernels
from hjpicard.core import (
    DivergenceError,
    EvaluationError,
    ProblemDef,
    Query,
    SolveResult,
    SolverConfig,
    as_vector,
    hopf_lax_energy,
)

__all__ = [
    "ContractionInfo",
    "ErrorBounds",
    "solve",
    "contraction_info",
    "error_bounds",
    "predicted_iterations",
    "build_result",
]


@dataclass(frozen=True)
class ContractionInfo:
    modulus: float
    is_contraction: bool
    available: bool


@dataclass(frozen=True)
class ErrorBounds:
    """Residual-based error bounds; a bound that cannot be certified is ``inf``."""

    minimizer_bound: float
    solution_bound: float
    gradient_bound: float
    valid: bool


def _frozen(arr) -> np.ndarray:
    arr = np.array(arr, dtype=np.float64)
    arr.flags.writeable = False
    return arr


def _degenerate(problem: ProblemDef, query: Query) -> SolveResult:
    x = query.x
    value = float(problem.initial_value(x))
    grad = np.asarray(problem.initial_grad(x), dtype=np.float64)
    if not np.isfinite(value):
        raise EvaluationError("initial_value")
    if not np.all(np.isfinite(grad)):
        raise EvaluationError("initial_grad")
    return SolveResult(
        minimizer=_frozen(x),
        value=value,
        gradient=_frozen(grad),
        control=_frozen(np.zeros_like(x)),
        iterations=0,
        final_residual=0.0,
        converged=True,
        residual_history=_frozen([]),
        status="t0",
    )


def build_result(problem, query, y, iterations, history, converged) -> SolveResult:
    """Derive value, gradient and control from a final iterate."""
    y = as_vector(y, problem.dim, "minimizer")
    history = np.asarray(history, dtype=np.float64)
    history = history[: int(iterations) + 1]
    grad = np.asarray(problem.initial_grad(y), dtype=np.float64)
    if not np.all(np.isfinite(grad)):
        raise EvaluationError("initial_grad")
    return SolveResult(
        minimizer=y,
        value=hopf_lax_energy(problem, query, y),
        gradient=_frozen(grad),
        control=_frozen((query.x - y) / query.t),
        iterations=int(iterations),
        final_residual=float(history[-1]) if history.size else 0.0,
        converged=bool(converged),
        residual_history=_frozen(history),
        status="converged" if converged else "max_iters",
    )


def raise_for_status(problem, query, status: int, iterations: int):
    if status == kernels.BAD_GRAD_G:
        raise EvaluationError("initial_grad", f"initial_grad returned a non-finite value at iteration {iterations}")
    if status == kernels.BAD_GRAD_H:
        raise EvaluationError(
            "hamiltonian_grad", f"hamiltonian_grad returned a non-finite value at iteration {iterations}"
        )
    if status == kernels.DIVERGED:
        info = contraction_info(problem, query.t)
        detail = f" (L_F = {info.modulus:.6g})" if info.available else ""
        raise DivergenceError(
            f"Picard iterates exceeded the overflow guard after {iterations + 1} steps{detail}",
            iterations=iterations,
            modulus=info.modulus if info.available else None,
        )


def solve(
    problem: ProblemDef,
    query: Query,
    config: Optional[SolverConfig] = None,
    y0=None,
    backend: Optional[str] = None,
) -> SolveResult:
    """Picard iteration ``y <- x - t grad_H(grad_g(y))`` from ``y0`` (default ``x``).

    Stops once ``||y_{k+1} - y_k|| < config.tolerance`` or after
    ``config.max_iters`` steps and returns the last iterate ``y_{k+1}``.

    Raises:
        EvaluationError: an evaluator produced NaN/inf.
        DivergenceError: an iterate's norm exceeded ``config.overflow_guard``.
    """
    config = config or SolverConfig()
    if query.dim != problem.dim:
        raise ValueError(f"query has dimension {query.dim}, problem has {problem.dim}")
    if query.t == 0:
        return _degenerate(problem, query)
    start = query.x if y0 is None else as_vector(y0, problem.dim, "y0")

    out = kernels.run_batch(
        problem,
        query.x,
        query.t,
        start[None, :],
        config.tolerance,
        config.max_iters,
        config.overflow_guard,
        backend=backend,
    )
    status, k = int(out.status[0]), int(out.iterations[0])
    raise_for_status(problem, query, status, k)
    return build_result(problem, query, out.Y[0], k, out.history[0], status == kernels.CONVERGED)


def contraction_info(problem: ProblemDef, t: float) -> ContractionInfo:
    if t < 0:
        raise ValueError("t must be >= 0")
    if problem.lipschitz_H is None or problem.lipschitz_g is None:
        return ContractionInfo(modulus=math.nan, is_contraction=False, available=False)
    modulus = t * problem.lipschitz_H * problem.lipschitz_g
    return ContractionInfo(modulus=modulus, is_contraction=modulus < 1, available=True)


def error_bounds(problem: ProblemDef, query: Query, result: SolveResult) -> ErrorBounds:
    """Bounds on minimizer, value and gradient error from the final residual.

    With ``L = t L_H L_g < 1`` and residual ``r``::

        |y - y*|            <= r / (1 - L)
        |u - u*|            <= (L_H*/t + L_g) r / (1 - L)
        |grad u - grad u*|  <= L_g r
    """
    r = float(result.final_residual)
    if not math.isfinite(r):
        raise ValueError("final_residual must be finite")
    if query.t == 0:
        return ErrorBounds(0.0, 0.0, 0.0, True)
    info = contraction_info(problem, query.t)
    if not info.is_contraction:
        return ErrorBounds(math.inf, math.inf, math.inf, False)
    shrink = 1.0 - info.modulus
    minimizer = r / shrink
    gradient = problem.lipschitz_g * r
    if problem.lipschitz_H_conj is None:
        solution = math.inf
    else:
        solution = (problem.lipschitz_H_conj / query.t + problem.lipschitz_g) / shrink * r
    return ErrorBounds(minimizer, solution, gradient, math.isfinite(solution))


def predicted_iterations(L_F: float, initial_distance: float, epsilon: float) -> int:
    """Smallest ``k`` with ``(1 + L_F) L_F**k * initial_distance <= epsilon``."""
    if not 0 < L_F < 1:
        raise ValueError("L_F must lie in (0, 1)")
    if initial_distance < 0 or not epsilon > 0:
        raise ValueError("initial_distance must be >= 0 and epsilon > 0")
    if initial_distance == 0:
        return 0
    bound = math.log((1 + L_F) * initial_distance / epsilon) / -math.log(L_F)
    return max(0, math.ceil(bound))
