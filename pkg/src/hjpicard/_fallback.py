"""Pure numpy batch Picard loop, used when the compiled kernel is absent
or the problem has no built-in kernel description."""

import numpy as np

CONVERGED = 0
MAX_ITERS = 1
DIVERGED = 2
BAD_GRAD_G = 3
BAD_GRAD_H = 4


def picard_batch(grad_g, grad_h, x, t, Y0, tol, max_iters, guard):
    """Iterate ``y <- x - t grad_h(grad_g(y))`` for every row of ``Y0``.

    ``grad_g`` and ``grad_h`` map ``(n, d)`` arrays to ``(n, d)`` arrays.
    Returns ``(Y, iterations, status, history)`` where ``history[i, k]`` is the
    step norm of row ``i`` at loop index ``k`` (NaN past the stop). History has
    one column per loop index up to the longest-running row.
    """
    Y = np.array(Y0, dtype=np.float64, copy=True)
    n = Y.shape[0]
    iterations = np.full(n, max_iters - 1, dtype=np.int64)
    status = np.full(n, MAX_ITERS, dtype=np.int8)
    columns = []

    with np.errstate(over="ignore", invalid="ignore"):
        _loop(grad_g, grad_h, x, t, Y, tol, max_iters, guard, iterations, status, columns)
    width = int(iterations.max()) + 1 if n else 0
    history = np.full((n, width), np.nan)
    if columns:
        history[:, : len(columns)] = np.stack(columns, axis=1)[:, :width]
    return Y, iterations, status, history


def _loop(grad_g, grad_h, x, t, Y, tol, max_iters, guard, iterations, status, columns):
    active = np.arange(Y.shape[0])
    for k in range(max_iters):
        if active.size == 0:
            break
        column = np.full(Y.shape[0], np.nan)
        columns.append(column)
        current = Y[active]
        p = np.asarray(grad_g(current), dtype=np.float64)
        bad = ~np.isfinite(p).all(axis=1)
        if bad.any():
            status[active[bad]] = BAD_GRAD_G
            iterations[active[bad]] = k
            active, current, p = active[~bad], current[~bad], p[~bad]
        q = np.asarray(grad_h(p), dtype=np.float64)
        bad = ~np.isfinite(q).all(axis=1)
        if bad.any():
            status[active[bad]] = BAD_GRAD_H
            iterations[active[bad]] = k
            active, current, q = active[~bad], current[~bad], q[~bad]

        new = x - t * q
        step = np.sqrt(np.sum((new - current) ** 2, axis=1))
        column[active] = step
        Y[active] = new

        diverged = ~(np.sqrt(np.sum(new * new, axis=1)) <= guard)
        done = diverged | (step < tol)
        status[active[diverged]] = DIVERGED
        status[active[done & ~diverged]] = CONVERGED
        iterations[active[done]] = k
        active = active[~done]
