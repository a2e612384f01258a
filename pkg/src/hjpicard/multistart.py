"""Multi-start Picard solving for problems with several fixed points.

Starts are drawn uniformly from a box, every start is iterated
independently, converged end points are clustered, and the cluster with the
lowest Hopf-Lax energy is selected.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from hjpicard import kernels
from hjpicard.core import (
    DivergenceError,
    ProblemDef,
    Query,
    SolveResult,
    SolverConfig,
    hopf_lax_energy,
)
from hjpicard.picard import _degenerate, build_result, raise_for_status

__all__ = ["FixedPoint", "MultiStartResult", "default_box_halfwidth", "sample_starts", "solve_multistart"]


@dataclass(frozen=True, eq=False)
class FixedPoint:
    point: np.ndarray
    energy: float
    multiplicity: int


@dataclass(frozen=True, eq=False)
class MultiStartResult:
    best: SolveResult
    fixed_points: tuple
    attempted: int
    converged_count: int


def default_box_halfwidth(query: Query) -> float:
    return 2.0 * (1.0 + float(np.max(np.abs(query.x))) + query.t)


def sample_starts(query: Query, config: SolverConfig) -> np.ndarray:
    """All starting points, drawn up front so results never depend on scheduling."""
    alpha = config.init_box_halfwidth or default_box_halfwidth(query)
    rng = np.random.default_rng(int(config.rng_seed))
    offsets = rng.uniform(-alpha, alpha, size=(int(config.multi_init_count), query.dim))
    return query.x + offsets if config.center_on_query else offsets


def _cluster(points: np.ndarray, radius: float):
    """Greedy clustering in sampling order; returns (representative indices, sizes)."""
    reps, sizes = [], []
    for i, p in enumerate(points):
        for j, r in enumerate(reps):
            if np.linalg.norm(p - points[r]) <= radius:
                sizes[j] += 1
                break
        else:
            reps.append(i)
            sizes.append(1)
    return reps, sizes


def solve_multistart(
    problem: ProblemDef,
    query: Query,
    config: Optional[SolverConfig] = None,
    backend: Optional[str] = None,
) -> MultiStartResult:
    config = config or SolverConfig()
    if config.multi_init_count < 1:
        raise ValueError("multi_init_count must be >= 1 for multi-start solving")
    if query.dim != problem.dim:
        raise ValueError(f"query has dimension {query.dim}, problem has {problem.dim}")
    if query.t == 0:
        best = _degenerate(problem, query)
        fp = FixedPoint(best.minimizer, best.value, 1)
        return MultiStartResult(best, (fp,), attempted=0, converged_count=0)

    starts = sample_starts(query, config)
    out = kernels.run_batch(
        problem,
        query.x,
        query.t,
        starts,
        config.tolerance,
        config.max_iters,
        config.overflow_guard,
        backend=backend,
        workers=config.workers,
    )
    for code in (kernels.BAD_GRAD_G, kernels.BAD_GRAD_H):
        hit = np.flatnonzero(out.status == code)
        if hit.size:
            raise_for_status(problem, query, code, int(out.iterations[hit[0]]))

    converged = np.flatnonzero(out.status == kernels.CONVERGED)
    if converged.size == 0:
        survivors = np.flatnonzero(out.status == kernels.MAX_ITERS)
        if survivors.size == 0:
            raise DivergenceError(
                f"all {len(starts)} starts diverged past the overflow guard",
                iterations=int(out.iterations.max()),
            )
        energies = [hopf_lax_energy(problem, query, out.Y[i]) for i in survivors]
        pick = int(survivors[int(np.argmin(energies))])
        best = build_result(problem, query, out.Y[pick], out.iterations[pick], out.history[pick], False)
        return MultiStartResult(best, (), attempted=len(starts), converged_count=0)

    reps, sizes = _cluster(out.Y[converged], config.dedup_tolerance)
    fixed_points = []
    for r, size in zip(reps, sizes):
        point = out.Y[converged[r]].copy()
        point.flags.writeable = False
        fixed_points.append(FixedPoint(point, hopf_lax_energy(problem, query, point), size))
    # argmin keeps the earliest representative on exact ties
    best_rep = int(np.argmin([fp.energy for fp in fixed_points]))
    idx = int(converged[reps[best_rep]])
    best = build_result(problem, query, out.Y[idx], out.iterations[idx], out.history[idx], True)
    return MultiStartResult(best, tuple(fixed_points), attempted=len(starts), converged_count=int(converged.size))
