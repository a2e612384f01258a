"""Backend selection for the batch Picard loop.

The compiled extension ``hjpicard._ckernel`` is used for problems that carry
a :class:`~hjpicard.core.KernelSpec` whenever it imported successfully;
everything else runs the numpy loop in :mod:`hjpicard._fallback`. Set
``HJPICARD_BACKEND=python`` to force the fallback.

Dense-matrix problems of dimension ``MATRIX_DIM_CUTOFF`` or more also go to
the numpy loop unless a backend is named explicitly: it advances all rows
with one BLAS matrix product, which beats per-row matrix-vector products.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple, Optional

import numpy as np

from hjpicard import _fallback
from hjpicard._fallback import BAD_GRAD_G, BAD_GRAD_H, CONVERGED, DIVERGED, MAX_ITERS

try:
    from hjpicard import _ckernel
except ImportError:  # extension not built
    _ckernel = None

__all__ = [
    "BACKEND",
    "BatchOutcome",
    "available_backends",
    "run_batch",
    "CONVERGED",
    "MAX_ITERS",
    "DIVERGED",
    "BAD_GRAD_G",
    "BAD_GRAD_H",
]


def available_backends() -> list:
    return ["compiled", "python"] if _ckernel is not None else ["python"]


def _default_backend() -> str:
    requested = os.environ.get("HJPICARD_BACKEND", "").strip().lower()
    if requested == "python" or _ckernel is None:
        return "python"
    return "compiled"


BACKEND = _default_backend()

_DUMMY = np.zeros((1, 1))

MATRIX_DIM_CUTOFF = 64


class BatchOutcome(NamedTuple):
    Y: np.ndarray
    iterations: np.ndarray
    status: np.ndarray
    history: np.ndarray
    backend: str


def _row_wise(fn):
    def apply(rows):
        return np.array([np.asarray(fn(r), dtype=np.float64) for r in rows]).reshape(rows.shape)

    return apply


def _run_chunk(problem, x, t, Y0, tol, max_iters, guard, backend):
    if backend == "compiled":
        spec = problem.kernel
        g_mat = _DUMMY if spec.g_matrix is None else np.ascontiguousarray(spec.g_matrix, dtype=np.float64)
        h_mat = _DUMMY if spec.h_matrix is None else np.ascontiguousarray(spec.h_matrix, dtype=np.float64)
        return _ckernel.picard_batch(
            spec.g_kind, spec.h_kind, x, t, Y0, tol, max_iters, guard, g_mat, h_mat
        )
    if problem.vectorized:
        grad_g, grad_h = problem.initial_grad, problem.hamiltonian_grad
    else:
        grad_g, grad_h = _row_wise(problem.initial_grad), _row_wise(problem.hamiltonian_grad)
    return _fallback.picard_batch(grad_g, grad_h, x, t, Y0, tol, max_iters, guard)


def run_batch(
    problem,
    x: np.ndarray,
    t: float,
    Y0: np.ndarray,
    tol: float,
    max_iters: int,
    guard: float,
    backend: Optional[str] = None,
    workers: int = 1,
) -> BatchOutcome:
    """Run independent Picard iterations from every row of ``Y0``.

    Rows are split into contiguous chunks when ``workers > 1``; results are
    reassembled in row order so the outcome does not depend on ``workers``.
    """
    if backend is None:
        backend = BACKEND
        spec = problem.kernel
        if spec is not None and "matrix" in (spec.g_kind, spec.h_kind) and problem.dim >= MATRIX_DIM_CUTOFF:
            backend = "python"
    if backend == "compiled" and (_ckernel is None or problem.kernel is None):
        backend = "python"
    if backend not in ("compiled", "python"):
        raise ValueError(f"unknown backend {backend!r}")
    x = np.ascontiguousarray(x, dtype=np.float64)
    Y0 = np.ascontiguousarray(np.atleast_2d(Y0), dtype=np.float64)
    args = (problem, x, float(t))
    tail = (float(tol), int(max_iters), float(guard), backend)

    if workers <= 1 or Y0.shape[0] < 2:
        parts = [_run_chunk(*args, Y0, *tail)]
    else:
        chunks = np.array_split(Y0, min(workers, Y0.shape[0]))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda c: _run_chunk(*args, np.ascontiguousarray(c), *tail), chunks))

    Y = np.concatenate([p[0] for p in parts])
    iterations = np.concatenate([p[1] for p in parts])
    status = np.concatenate([p[2] for p in parts])
    history = np.concatenate([p[3] for p in parts])
    return BatchOutcome(Y, iterations, status, history, backend)
