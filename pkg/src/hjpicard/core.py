"""Problem definitions, value types and the two primitive maps.

The Hopf-Lax energy of a candidate foot point ``y`` for the query ``(x, t)`` is

    E(y; x, t) = t * H*((x - y) / t) + g(y)

and its stationary points are the fixed points of

    F(y) = x - t * grad_H(grad_g(y)).

Vectors are plain 1-D float64 numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "EvaluationError",
    "DivergenceError",
    "KernelSpec",
    "ProblemDef",
    "Query",
    "SolverConfig",
    "SolveResult",
    "as_vector",
    "hopf_lax_energy",
    "fixed_point_map",
]


class EvaluationError(ArithmeticError):
    """An evaluator returned a non-finite value."""

    def __init__(self, evaluator: str, message: str = ""):
        self.evaluator = evaluator
        super().__init__(message or f"{evaluator} returned a non-finite value")


class DivergenceError(ArithmeticError):
    """Picard iterates left the overflow guard (contraction modulus >= 1)."""

    def __init__(self, message: str, iterations: int = 0, modulus: Optional[float] = None):
        self.iterations = iterations
        self.modulus = modulus
        super().__init__(message)


def as_vector(values, dim: Optional[int] = None, name: str = "vector") -> np.ndarray:
    vec = np.array(values, dtype=np.float64).reshape(-1)
    if dim is not None and vec.shape[0] != dim:
        raise ValueError(f"{name} has length {vec.shape[0]}, expected {dim}")
    if vec.shape[0] < 1:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(vec)):
        raise ValueError(f"{name} has non-finite components")
    vec.flags.writeable = False
    return vec


@dataclass(frozen=True)
class KernelSpec:
    """Closed description of a built-in map for the compiled Picard kernel.

    ``g_kind``/``h_kind`` select the gradient formulas; matrices are only
    used by the ``"matrix"`` kinds.
    """

    g_kind: str
    h_kind: str
    g_matrix: Optional[np.ndarray] = None
    h_matrix: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class ProblemDef:
    """A first-order Hamilton-Jacobi problem ``u_t + H(grad u) = 0, u(., 0) = g``.

    When ``vectorized`` is true every evaluator accepts arrays of shape
    ``(..., dim)`` and reduces (or maps) along the last axis; otherwise they
    are only ever called on single vectors.

    ``exact_solution(x, t)`` returns ``(u, grad_u)``.
    """

    dim: int
    hamiltonian_grad: Callable[[np.ndarray], np.ndarray]
    hamiltonian_conjugate: Callable[[np.ndarray], float]
    initial_value: Callable[[np.ndarray], float]
    initial_grad: Callable[[np.ndarray], np.ndarray]
    hamiltonian: Optional[Callable[[np.ndarray], float]] = None
    lipschitz_H: Optional[float] = None
    lipschitz_g: Optional[float] = None
    lipschitz_H_conj: Optional[float] = None
    exact_solution: Optional[Callable[[np.ndarray, float], tuple]] = None
    name: str = "custom"
    vectorized: bool = False
    kernel: Optional[KernelSpec] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValueError("dim must be >= 1")
        for attr in ("lipschitz_H", "lipschitz_g", "lipschitz_H_conj"):
            value = getattr(self, attr)
            if value is not None and not value > 0:
                raise ValueError(f"{attr} must be positive when given")


@dataclass(frozen=True)
class Query:
    """Evaluation point ``(x, t)``."""

    x: np.ndarray
    t: float

    def __post_init__(self):
        object.__setattr__(self, "x", as_vector(self.x, name="x"))
        t = float(self.t)
        if not np.isfinite(t) or t < 0:
            raise ValueError(f"t must be finite and >= 0, got {self.t!r}")
        object.__setattr__(self, "t", t)

    @property
    def dim(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 1000
    tolerance: float = 1e-6
    multi_init_count: int = 32
    init_box_halfwidth: Optional[float] = None
    dedup_tolerance: float = 1e-6
    rng_seed: int = 0
    overflow_guard: float = 1e12
    # False samples starts from the origin-centred box [-a, a]^d instead of x + [-a, a]^d
    center_on_query: bool = True
    workers: int = 1

    def __post_init__(self):
        if int(self.max_iters) < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")
        if int(self.multi_init_count) < 0:
            raise ValueError("multi_init_count must be >= 0")
        if self.init_box_halfwidth is not None and not self.init_box_halfwidth > 0:
            raise ValueError("init_box_halfwidth must be > 0")
        if not self.dedup_tolerance > 0:
            raise ValueError("dedup_tolerance must be > 0")
        if not 0 <= int(self.rng_seed) < 2**64:
            raise ValueError("rng_seed must fit in 64 unsigned bits")
        if not self.overflow_guard > 0:
            raise ValueError("overflow_guard must be > 0")


@dataclass(frozen=True, eq=False)
class SolveResult:
    """Outcome of one Picard run.

    ``iterations`` is the loop index at which the run stopped, i.e. the
    returned minimizer is iterate ``iterations + 1`` and
    ``len(residual_history) == iterations + 1`` (both 0 for ``t == 0``).
    """

    minimizer: np.ndarray
    value: float
    gradient: np.ndarray
    control: np.ndarray
    iterations: int
    final_residual: float
    converged: bool
    residual_history: np.ndarray
    status: str = "converged"


def _check_finite(values, evaluator: str):
    if not np.all(np.isfinite(values)):
        raise EvaluationError(evaluator)
    return values


def hopf_lax_energy(problem: ProblemDef, query: Query, y) -> float:
    """Hopf-Lax objective ``t H*((x - y)/t) + g(y)``; undefined at ``t == 0``."""
    if query.t == 0:
        raise ValueError("Hopf-Lax energy is undefined at t = 0; use g(x) directly")
    y = as_vector(y, problem.dim, "y")
    t = query.t
    running = t * float(problem.hamiltonian_conjugate((query.x - y) / t))
    terminal = float(problem.initial_value(y))
    return float(_check_finite(running, "hamiltonian_conjugate") + _check_finite(terminal, "initial_value"))


def fixed_point_map(problem: ProblemDef, query: Query, y) -> np.ndarray:
    """One Picard step ``x - t grad_H(grad_g(y))``."""
    y = as_vector(y, problem.dim, "y")
    if query.t == 0:
        return query.x.copy()
    p = _check_finite(np.asarray(problem.initial_grad(y), dtype=np.float64), "initial_grad")
    q = _check_finite(np.asarray(problem.hamiltonian_grad(p), dtype=np.float64), "hamiltonian_grad")
    return query.x - query.t * q
