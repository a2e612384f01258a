"""Per-point error records and batch aggregation.

"L2" aggregates are mean squared errors, not root-mean-square; per-point
gradient error is the max-abs difference over components.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Optional, Sequence

import numpy as np

from hjpicard.core import Query

__all__ = ["PointRecord", "BenchReport", "REPORT_FIELDS", "aggregate", "point_errors"]


@dataclass(frozen=True)
class PointRecord:
    query: Query
    value_err: Optional[float]
    grad_err: Optional[float]
    iterations: int
    wall_time: float
    converged: bool


@dataclass(frozen=True)
class BenchReport:
    problem_id: str
    dim: int
    n_points: int
    l2_value_err: float
    linf_value_err: float
    l2_grad_err: float
    linf_grad_err: float
    total_time: float
    mean_iterations: float
    seed: int

    def as_dict(self) -> dict:
        return asdict(self)


# CSV column name -> BenchReport attribute
REPORT_FIELDS = {
    "problem": "problem_id",
    "dim": "dim",
    "n_points": "n_points",
    "l2_u": "l2_value_err",
    "linf_u": "linf_value_err",
    "l2_grad": "l2_grad_err",
    "linf_grad": "linf_grad_err",
    "time_s": "total_time",
    "mean_iters": "mean_iterations",
    "seed": "seed",
}
assert set(REPORT_FIELDS.values()) == {f.name for f in fields(BenchReport)}


def point_errors(value, gradient, ref_value, ref_gradient):
    """Absolute value error and max-abs gradient error against a reference."""
    value_err = abs(float(value) - float(ref_value))
    grad_err = float(np.max(np.abs(np.asarray(gradient) - np.asarray(ref_gradient))))
    return value_err, grad_err


def _mse_max(errs):
    if any(e is None for e in errs):
        return math.nan, math.nan
    # fsum keeps the result independent of record order
    return math.fsum(float(e) ** 2 for e in errs) / len(errs), float(max(errs))


def aggregate(records: Sequence[PointRecord], problem_id: str = "", seed: int = 0) -> BenchReport:
    """Collapse point records into one report row.

    Aggregates over errors are NaN when any record lacks a reference.
    """
    records = list(records)
    if not records:
        raise ValueError("cannot aggregate an empty record list")
    l2_u, linf_u = _mse_max([r.value_err for r in records])
    l2_g, linf_g = _mse_max([r.grad_err for r in records])
    return BenchReport(
        problem_id=problem_id,
        dim=records[0].query.dim,
        n_points=len(records),
        l2_value_err=l2_u,
        linf_value_err=linf_u,
        l2_grad_err=l2_g,
        linf_grad_err=linf_g,
        total_time=math.fsum(r.wall_time for r in records),
        mean_iterations=sum(r.iterations for r in records) / len(records),
        seed=int(seed),
    )
