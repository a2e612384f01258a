"""Compiled kernel vs numpy fallback."""

import numpy as np
import pytest

from hjpicard import kernels
from hjpicard.core import ProblemDef
from hjpicard.problems import PROBLEMS, make_problem

needs_compiled = pytest.mark.skipif("compiled" not in kernels.available_backends(), reason="extension not built")

DIMS = {"abs-quadratic": 1, "log-quadratic": 1}


@needs_compiled
@pytest.mark.parametrize("name", list(PROBLEMS))
def test_backends_agree(name, rng):
    d = DIMS.get(name, 4)
    problem = make_problem(name, d, seed=5)
    x = rng.uniform(-0.5, 0.5, d)
    t = 0.08
    Y0 = x + rng.uniform(-1, 1, size=(25, d))
    a = kernels.run_batch(problem, x, t, Y0, 1e-10, 400, 1e12, backend="compiled")
    b = kernels.run_batch(problem, x, t, Y0, 1e-10, 400, 1e12, backend="python")
    assert a.backend == "compiled" and b.backend == "python"
    np.testing.assert_array_equal(a.status, b.status)
    np.testing.assert_allclose(a.Y, b.Y, rtol=1e-12, atol=1e-13)
    assert np.all(np.abs(a.iterations - b.iterations) <= 1)
    same = a.iterations == b.iterations
    width = min(a.history.shape[1], b.history.shape[1])
    np.testing.assert_allclose(a.history[same, :width], b.history[same, :width], rtol=1e-6, atol=1e-12)


@pytest.mark.parametrize("backend_name", kernels.available_backends())
def test_divergence_status(backend_name):
    problem = make_problem("quadratic", 2)
    out = kernels.run_batch(problem, np.ones(2), 2.0, np.ones((3, 2)), 1e-6, 1000, 1e12, backend=backend_name)
    assert np.all(out.status == kernels.DIVERGED)


@pytest.mark.parametrize("backend_name", kernels.available_backends())
def test_max_iters_status(backend_name):
    problem = make_problem("quadratic", 1)
    out = kernels.run_batch(problem, np.ones(1), 0.99, np.ones((1, 1)), 1e-12, 5, 1e12, backend=backend_name)
    assert out.status[0] == kernels.MAX_ITERS
    assert out.iterations[0] == 4
    assert np.all(np.isfinite(out.history[0]))


@pytest.mark.parametrize("backend_name", kernels.available_backends())
def test_non_finite_gradient_status(backend_name):
    # |y|^3 overflows for huge starts
    problem = make_problem("cubic", 1)
    out = kernels.run_batch(problem, np.zeros(1), 0.1, np.array([[1e150]]), 1e-6, 10, np.inf, backend=backend_name)
    assert out.status[0] in (kernels.BAD_GRAD_G, kernels.BAD_GRAD_H)


def test_unvectorized_problem_uses_row_loop():
    plain = ProblemDef(
        dim=2,
        hamiltonian_grad=lambda p: np.asarray(p),
        hamiltonian_conjugate=lambda q: 0.5 * float(q @ q),
        initial_value=lambda y: 0.5 * float(y @ y),
        initial_grad=lambda y: np.asarray(y),
    )
    out = kernels.run_batch(plain, np.array([1.0, -1.0]), 0.5, np.zeros((4, 2)), 1e-12, 200, 1e12)
    assert out.backend == "python"
    np.testing.assert_allclose(out.Y, np.tile([2 / 3, -2 / 3], (4, 1)), atol=1e-11)


@pytest.mark.parametrize("backend_name", kernels.available_backends())
def test_worker_chunking_is_deterministic(backend_name, rng):
    problem = make_problem("steady-kink", 3)
    x = rng.uniform(-0.2, 0.2, 3)
    Y0 = x + rng.uniform(-2, 2, size=(101, 3))
    one = kernels.run_batch(problem, x, 0.3, Y0, 1e-8, 100, 1e12, backend=backend_name, workers=1)
    many = kernels.run_batch(problem, x, 0.3, Y0, 1e-8, 100, 1e12, backend=backend_name, workers=4)
    np.testing.assert_array_equal(one.Y, many.Y)
    np.testing.assert_array_equal(one.iterations, many.iterations)
    np.testing.assert_array_equal(one.history, many.history)


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.run_batch(make_problem("quadratic", 1), np.zeros(1), 0.1, np.zeros((1, 1)), 1e-6, 10, 1e12, backend="gpu")


def test_large_matrix_problems_default_to_batched_numpy():
    big = make_problem("lqr", kernels.MATRIX_DIM_CUTOFF)
    out = kernels.run_batch(big, np.zeros(big.dim), 0.1, np.ones((2, big.dim)), 1e-8, 100, 1e12)
    assert out.backend == "python"
    small = make_problem("lqr", 4)
    out = kernels.run_batch(small, np.zeros(4), 0.1, np.ones((2, 4)), 1e-8, 100, 1e12)
    assert out.backend == kernels.BACKEND


@needs_compiled
def test_history_is_trimmed_to_longest_row():
    problem = make_problem("quadratic", 1)
    Y0 = np.array([[0.5], [100.0]])
    for name in ("compiled", "python"):
        out = kernels.run_batch(problem, np.ones(1), 0.5, Y0, 1e-6, 1000, 1e12, backend=name)
        assert out.history.shape == (2, out.iterations.max() + 1)
        assert np.all(np.isnan(out.history[0, out.iterations[0] + 1 :]))
        assert np.all(np.isfinite(out.history[1]))
