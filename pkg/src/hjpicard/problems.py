"""Built-in benchmark problems.

All evaluators are vectorized along the last axis, so they accept either a
single ``(d,)`` vector or a ``(n, d)`` batch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from hjpicard.core import KernelSpec, ProblemDef, as_vector

__all__ = [
    "LqrSpec",
    "PROBLEMS",
    "spectral_norm",
    "quadratic_problem",
    "lqr_problem",
    "cubic_problem",
    "steady_kink_problem",
    "unsteady_kink_problem",
    "abs_quadratic_problem",
    "log_quadratic_problem",
    "make_problem",
    "exact_minimizer",
]


def _half_sq(v):
    return 0.5 * np.sum(np.square(v), axis=-1)


def _identity(v):
    return np.asarray(v, dtype=np.float64)


def _norm(v):
    return np.sqrt(np.sum(np.square(v), axis=-1))


def spectral_norm(A, tol: float = 1e-10, max_iter: int = 100_000) -> float:
    """Largest singular value of ``A`` by power iteration on ``A^T A``."""
    A = np.asarray(A, dtype=np.float64)
    v = np.ones(A.shape[1]) / np.sqrt(A.shape[1])
    sigma = 0.0
    for _ in range(max_iter):
        w = A.T @ (A @ v)
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0
        v = w / norm_w
        estimate = np.sqrt(norm_w)
        if abs(estimate - sigma) <= tol * estimate:
            return float(estimate)
        sigma = estimate
    return float(sigma)


def quadratic_problem(d: int) -> ProblemDef:
    """``H(p) = |p|^2/2``, ``g(x) = |x|^2/2``; ``u = |x|^2 / (2(1+t))``."""
    if d < 1:
        raise ValueError("d must be >= 1")

    def exact(x, t):
        x = np.asarray(x, dtype=np.float64)
        return float(np.dot(x, x) / (2.0 * (1.0 + t))), x / (1.0 + t)

    return ProblemDef(
        dim=d,
        hamiltonian=_half_sq,
        hamiltonian_grad=_identity,
        hamiltonian_conjugate=_half_sq,
        initial_value=_half_sq,
        initial_grad=_identity,
        lipschitz_H=1.0,
        lipschitz_g=1.0,
        lipschitz_H_conj=1.0,
        exact_solution=exact,
        name="quadratic",
        vectorized=True,
        kernel=KernelSpec("identity", "identity"),
    )


@dataclass(frozen=True, eq=False)
class LqrSpec:
    """Cost matrices ``Q = s1 (A^T A + I)``, ``R = s2 (B^T B + I)``."""

    Q: np.ndarray
    R: np.ndarray
    scale_q: float
    scale_r: float
    seed: int

    def __post_init__(self):
        for name in ("Q", "R"):
            M = np.asarray(getattr(self, name), dtype=np.float64)
            if M.ndim != 2 or M.shape[0] != M.shape[1]:
                raise ValueError(f"{name} must be square")
            if not np.all(np.isfinite(M)):
                raise ValueError(f"{name} has non-finite entries")
            if np.max(np.abs(M - M.T)) > 1e-12 * max(1.0, np.max(np.abs(M))):
                raise ValueError(f"{name} is not symmetric")
            try:
                linalg.cholesky(M, lower=True)
            except linalg.LinAlgError as exc:
                raise ValueError(f"{name} is not positive definite") from exc
            object.__setattr__(self, name, M)
        if self.Q.shape != self.R.shape:
            raise ValueError("Q and R must have the same shape")

    @property
    def dim(self) -> int:
        return self.Q.shape[0]

    @classmethod
    def generate(
        cls, d: int, seed: int = 0, scale_q: Optional[float] = None, scale_r: Optional[float] = None
    ) -> "LqrSpec":
        """Draw ``A`` then ``B`` (row-major, standard normal) from one seeded generator.

        Scales default to ``1/d``.
        """
        if d < 1:
            raise ValueError("d must be >= 1")
        s1 = 1.0 / d if scale_q is None else float(scale_q)
        s2 = 1.0 / d if scale_r is None else float(scale_r)
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((d, d))
        B = rng.standard_normal((d, d))
        Q = s1 * (A.T @ A + np.eye(d))
        R = s2 * (B.T @ B + np.eye(d))
        return cls(Q=0.5 * (Q + Q.T), R=0.5 * (R + R.T), scale_q=s1, scale_r=s2, seed=seed)


def lqr_problem(spec: LqrSpec) -> ProblemDef:
    """``H(p) = p^T R^{-1} p / 2``, ``g(y) = y^T Q y / 2``.

    The minimizer solves ``(R + tQ) y* = R x`` and ``u = x^T Q y* / 2``.
    """
    Q, R, d = spec.Q, spec.R, spec.dim
    chol_R = linalg.cho_factor(R)
    R_inv = linalg.cho_solve(chol_R, np.eye(d))
    R_inv = 0.5 * (R_inv + R_inv.T)
    R_inv.flags.writeable = False

    def quad_form(M):
        return lambda v: 0.5 * np.einsum("...i,ij,...j->...", v, M, v)

    def exact(x, t):
        x = np.asarray(x, dtype=np.float64)
        y_star = linalg.cho_solve(linalg.cho_factor(R + t * Q), R @ x)
        grad = Q @ y_star
        return float(0.5 * np.dot(x, grad)), grad

    def minimizer(x, t):
        x = np.asarray(x, dtype=np.float64)
        return linalg.cho_solve(linalg.cho_factor(R + t * Q), R @ x)

    lip_H = spectral_norm(R_inv)
    lip_g = spectral_norm(Q)
    return ProblemDef(
        dim=d,
        hamiltonian=quad_form(R_inv),
        hamiltonian_grad=lambda p: p @ R_inv.T,
        hamiltonian_conjugate=quad_form(R),
        initial_value=quad_form(Q),
        initial_grad=lambda y: y @ Q.T,
        lipschitz_H=lip_H,
        lipschitz_g=lip_g,
        lipschitz_H_conj=spectral_norm(R),
        exact_solution=exact,
        name="lqr",
        vectorized=True,
        kernel=KernelSpec("matrix", "matrix", g_matrix=Q, h_matrix=R_inv),
        metadata={
            "seed": spec.seed,
            "scale_q": spec.scale_q,
            "scale_r": spec.scale_r,
            "R_inv": R_inv,
            "spectral_norm_RinvQ": spectral_norm(R_inv @ Q),
            "exact_minimizer": minimizer,
        },
    )


def cubic_problem(d: int) -> ProblemDef:
    """``H(p) = |p|^3/3`` with ``H*(q) = (2/3)|q|^{3/2}``, ``g(x) = |x|^3``.

    No global Lipschitz constants and no closed form.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    return ProblemDef(
        dim=d,
        hamiltonian=lambda p: _norm(p) ** 3 / 3.0,
        hamiltonian_grad=lambda p: _norm(p)[..., None] * p,
        hamiltonian_conjugate=lambda q: (2.0 / 3.0) * _norm(q) ** 1.5,
        initial_value=lambda y: _norm(y) ** 3,
        initial_grad=lambda y: 3.0 * _norm(y)[..., None] * y,
        name="cubic",
        vectorized=True,
        kernel=KernelSpec("cubic", "cubic"),
    )


def steady_kink_problem(d: int) -> ProblemDef:
    """``H(p) = |p|^2/2``, ``g(x) = -|x|_1``; ``u = -|x|_1 - d t / 2``.

    ``grad g`` uses the selection ``sign(0) = 0``.
    """
    if d < 1:
        raise ValueError("d must be >= 1")

    def exact(x, t):
        x = np.asarray(x, dtype=np.float64)
        return float(-np.sum(np.abs(x)) - d * t / 2.0), -np.sign(x)

    return ProblemDef(
        dim=d,
        hamiltonian=_half_sq,
        hamiltonian_grad=_identity,
        hamiltonian_conjugate=_half_sq,
        initial_value=lambda y: -np.sum(np.abs(y), axis=-1),
        initial_grad=lambda y: -np.sign(y),
        lipschitz_H=1.0,
        lipschitz_H_conj=1.0,
        exact_solution=exact,
        name="steady-kink",
        vectorized=True,
        kernel=KernelSpec("neg_sign", "identity"),
    )


def unsteady_kink_problem(d: int) -> ProblemDef:
    """``g(x) = sum_i min(x_i, 0)``; ``u = sum_{x_i < t/2} (x_i - t/2)``.

    ``grad g`` takes the right-hand slope 0 at ``y_i = 0``.
    """
    if d < 1:
        raise ValueError("d must be >= 1")

    def exact(x, t):
        x = np.asarray(x, dtype=np.float64)
        left = x < t / 2.0
        return float(np.sum(x[left] - t / 2.0)), left.astype(np.float64)

    return ProblemDef(
        dim=d,
        hamiltonian=_half_sq,
        hamiltonian_grad=_identity,
        hamiltonian_conjugate=_half_sq,
        initial_value=lambda y: np.sum(np.minimum(y, 0.0), axis=-1),
        initial_grad=lambda y: (np.asarray(y) < 0).astype(np.float64),
        lipschitz_H=1.0,
        lipschitz_H_conj=1.0,
        exact_solution=exact,
        name="unsteady-kink",
        vectorized=True,
        kernel=KernelSpec("neg_step", "identity"),
    )


def abs_quadratic_problem() -> ProblemDef:
    """1-D Burgers data ``g(x) = x|x|`` (so ``g'(x) = 2|x|``)."""
    return ProblemDef(
        dim=1,
        hamiltonian=_half_sq,
        hamiltonian_grad=_identity,
        hamiltonian_conjugate=_half_sq,
        initial_value=lambda y: np.sum(y * np.abs(y), axis=-1),
        initial_grad=lambda y: 2.0 * np.abs(y),
        lipschitz_H=1.0,
        lipschitz_g=2.0,
        lipschitz_H_conj=1.0,
        name="abs-quadratic",
        vectorized=True,
        kernel=KernelSpec("abs2", "identity"),
    )


def log_quadratic_problem() -> ProblemDef:
    """1-D Burgers data ``g(x) = x^2 log(2 + |x|)``."""

    def grad(y):
        y = np.asarray(y, dtype=np.float64)
        a = np.abs(y)
        return 2.0 * y * np.log(2.0 + a) + y * a / (2.0 + a)

    return ProblemDef(
        dim=1,
        hamiltonian=_half_sq,
        hamiltonian_grad=_identity,
        hamiltonian_conjugate=_half_sq,
        initial_value=lambda y: np.sum(np.square(y) * np.log(2.0 + np.abs(y)), axis=-1),
        initial_grad=grad,
        lipschitz_H=1.0,
        lipschitz_H_conj=1.0,
        name="log-quadratic",
        vectorized=True,
        kernel=KernelSpec("log_quad", "identity"),
    )


def _one_dim_only(factory):
    def make(d: int = 1) -> ProblemDef:
        if d != 1:
            raise ValueError("this problem is one-dimensional")
        return factory()

    return make


PROBLEMS = {
    "quadratic": quadratic_problem,
    "lqr": lambda d, seed=0: lqr_problem(LqrSpec.generate(d, seed)),
    "cubic": cubic_problem,
    "steady-kink": steady_kink_problem,
    "unsteady-kink": unsteady_kink_problem,
    "abs-quadratic": _one_dim_only(abs_quadratic_problem),
    "log-quadratic": _one_dim_only(log_quadratic_problem),
}

SMOOTH_PROBLEMS = ("quadratic", "lqr", "cubic", "abs-quadratic", "log-quadratic")
KINK_PROBLEMS = ("steady-kink", "unsteady-kink")


def make_problem(problem_id: str, dim: int = 1, seed: int = 0) -> ProblemDef:
    """Look up a built-in problem by id; ``seed`` only affects ``lqr``."""
    try:
        factory = PROBLEMS[problem_id]
    except KeyError:
        raise ValueError(f"unknown problem {problem_id!r}; choose from {', '.join(PROBLEMS)}") from None
    if problem_id == "lqr":
        return factory(dim, seed)
    return factory(dim)


def exact_minimizer(problem: ProblemDef, x, t: float) -> Optional[np.ndarray]:
    """Closed-form minimizer where one is known (quadratic, lqr)."""
    x = as_vector(x, problem.dim, "x")
    if problem.name == "quadratic":
        return x / (1.0 + t)
    if problem.name == "lqr":
        return problem.metadata["exact_minimizer"](x, t)
    return None
