"""Brute-force grid minimization of the Hopf-Lax energy (d <= 3).

Shares nothing with the Picard path except the problem's own evaluators:
no gradients of the energy, no fixed-point map.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from hjpicard.core import EvaluationError, ProblemDef, Query, hopf_lax_energy

__all__ = ["OracleResult", "default_halfwidth", "grid_minimize"]

_CHUNK = 1 << 16


@dataclass(frozen=True, eq=False)
class OracleResult:
    minimizer: np.ndarray
    value: float
    grid_points_per_axis: int
    box_halfwidth: float
    refinement_levels: int
    level_values: tuple = ()

    @property
    def resolution(self) -> float:
        """Grid spacing of the final level."""
        return 2.0 * self.box_halfwidth / (self.grid_points_per_axis - 1)


def default_halfwidth(problem: ProblemDef, query: Query) -> float:
    grad = np.asarray(problem.initial_grad(query.x), dtype=np.float64)
    return float(np.max(np.abs(query.x)) + query.t * (1.0 + np.linalg.norm(grad)))


def _energies(problem, query, Y):
    t = query.t
    if problem.vectorized:
        vals = t * np.asarray(problem.hamiltonian_conjugate((query.x - Y) / t)) + np.asarray(
            problem.initial_value(Y)
        )
    else:
        vals = np.array(
            [t * problem.hamiltonian_conjugate((query.x - y) / t) + problem.initial_value(y) for y in Y]
        )
    if not np.all(np.isfinite(vals)):
        raise EvaluationError("hamiltonian_conjugate/initial_value", "non-finite Hopf-Lax energy on the oracle grid")
    return vals


def _scan(problem, query, center, h, n, workers):
    """Lowest energy on the n^d grid over center + [-h, h]^d, first index on ties."""
    d = problem.dim
    axis = np.linspace(-h, h, n)
    total = n**d
    starts = range(0, total, _CHUNK)

    def run(start):
        flat = np.arange(start, min(start + _CHUNK, total))
        idx = np.unravel_index(flat, (n,) * d)
        Y = center + np.stack([axis[i] for i in idx], axis=-1)
        vals = _energies(problem, query, Y)
        j = int(np.argmin(vals))
        return float(vals[j]), Y[j]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    best_val, best_pt = parts[0]
    for val, pt in parts[1:]:
        if val < best_val:
            best_val, best_pt = val, pt
    return best_val, best_pt


def grid_minimize(
    problem: ProblemDef,
    query: Query,
    box_halfwidth: Optional[float] = None,
    points_per_axis: int = 201,
    refinement_levels: int = 4,
    workers: int = 1,
    max_expansions: int = 8,
) -> OracleResult:
    """Exhaustive grid search over ``x + [-h, h]^d`` with zoom-in refinement.

    While the coarse minimum sits on the box boundary the box is doubled, at
    most ``max_expansions`` times. After each level the box is recentred on the
    incumbent and its half-width shrunk to two grid spacings. The incumbent is
    kept unless a strictly lower energy is found, so values never increase
    across levels.
    """
    if problem.dim > 3:
        raise ValueError("grid oracle supports dim <= 3 only")
    if query.t <= 0:
        raise ValueError("grid oracle requires t > 0")
    if points_per_axis < 3:
        raise ValueError("points_per_axis must be >= 3")
    if refinement_levels < 0 or max_expansions < 0:
        raise ValueError("refinement_levels and max_expansions must be >= 0")

    h = default_halfwidth(problem, query) if box_halfwidth is None else float(box_halfwidth)
    if not h > 0:
        raise ValueError("box_halfwidth must be > 0")
    n = int(points_per_axis)

    center = query.x.copy()
    best_val, best_pt = _scan(problem, query, center, h, n, workers)
    # a minimum on the boundary means the box was too small; widen it
    for _ in range(max_expansions):
        if np.max(np.abs(best_pt - center)) < h * (1.0 - 1.5 / (n - 1)):
            break
        h *= 2.0
        best_val, best_pt = _scan(problem, query, center, h, n, workers)
    best_val = hopf_lax_energy(problem, query, best_pt)
    levels = [best_val]
    for _ in range(refinement_levels):
        h = 4.0 * h / (n - 1)
        val, pt = _scan(problem, query, best_pt, h, n, workers)
        val = hopf_lax_energy(problem, query, pt)
        if val < best_val:
            best_val, best_pt = val, pt
        levels.append(best_val)

    best_pt = np.array(best_pt, dtype=np.float64)
    best_pt.flags.writeable = False
    return OracleResult(
        minimizer=best_pt,
        value=float(best_val),
        grid_points_per_axis=n,
        box_halfwidth=h,
        refinement_levels=int(refinement_levels),
        level_values=tuple(levels),
    )
