"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line (see the ``verdict`` fixture) before
asserting, so the summary lists every criterion even when one fails.
"""

import math
import time

import numpy as np

from conftest import central_diff
from hjpicard.cli import main, read_reports_csv, run_bench
from hjpicard.core import Query, SolverConfig, fixed_point_map, hopf_lax_energy
from hjpicard.multistart import solve_multistart
from hjpicard.oracle import grid_minimize
from hjpicard.picard import contraction_info, error_bounds, predicted_iterations, solve
from hjpicard.problems import SMOOTH_PROBLEMS, exact_minimizer, make_problem

SEED = 20240611

# t windows where plain Picard converges for problems without global constants
_T_WINDOW = {"cubic": (0.01, 0.05), "log-quadratic": (0.02, 0.15)}


def _t_sampler(problem, rng):
    if problem.name in _T_WINDOW:
        return lambda: rng.uniform(*_T_WINDOW[problem.name])
    modulus = contraction_info(problem, 1.0).modulus
    return lambda: rng.uniform(0.1, 0.9) / modulus


def _x_sampler(problem, rng):
    # the cubic map only contracts locally, so keep |x| <= 1 there
    scale = 1.0 / math.sqrt(problem.dim) if problem.name == "cubic" else 1.0
    return lambda: scale * rng.uniform(-1, 1, problem.dim)


def _dims(name, dims):
    return [1] if name in ("abs-quadratic", "log-quadratic") else dims


def test_criterion_01_quadratic_benchmark(verdict):
    reports, _, _ = run_bench("quadratic", [1, 2, 3, 10, 50, 100], points=128, config=SolverConfig(tolerance=1e-6), seed=SEED)
    worst_u = max(r.linf_value_err for r in reports)
    worst_g = max(r.linf_grad_err for r in reports)
    slowest = max(r.total_time for r in reports)
    ok = worst_u <= 1e-5 and worst_g <= 1e-5 and slowest <= 1.0
    verdict(1, "quadratic benchmark accuracy", ok, f"linf_u={worst_u:.2e} linf_grad={worst_g:.2e} max time/dim={slowest:.3f}s")
    assert ok


def test_criterion_02_dimension_robustness(verdict):
    rng = np.random.default_rng(SEED)
    n = 128
    ts = rng.uniform(0.1, 0.4, n)
    radii = rng.uniform(0.05, 1.0, n)
    directions = rng.standard_normal((n, 100))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    low, high = make_problem("quadratic", 1), make_problem("quadratic", 100)

    def timed(problem, query):
        start = time.perf_counter()
        result = solve(problem, query)
        return result.iterations, time.perf_counter() - start

    # one warm-up call each so import and first-call costs are not timed
    timed(low, Query([0.5], 0.2))
    timed(high, Query(np.full(100, 0.05), 0.2))
    it1, it100, t1, t100 = [], [], 0.0, 0.0
    for t, r, u in zip(ts, radii, directions):
        k, dt = timed(low, Query([r], t))
        it1.append(k)
        t1 += dt
        k, dt = timed(high, Query(r * u, t))
        it100.append(k)
        t100 += dt
    max_gap = int(np.max(np.abs(np.array(it1) - np.array(it100))))
    ratio = t100 / t1
    ok = max_gap <= 2 and ratio <= 25.0
    verdict(2, "dimension robustness", ok, f"max |iters(100)-iters(1)|={max_gap} time ratio={ratio:.2f}")
    assert ok


def test_criterion_03_lqr(verdict):
    worst = 0.0
    for d in (1, 10, 50, 100):
        problem = make_problem("lqr", d, seed=0)
        cap = 1.0 / problem.metadata["spectral_norm_RinvQ"]
        reports, _, _ = run_bench("lqr", [d], points=100, t_range=(0.05 * cap, 0.95 * cap), t_scale="absolute", seed=SEED)
        worst = max(worst, reports[0].linf_value_err)

    rng = np.random.default_rng(SEED)
    worst_resid = 0.0
    for i in range(100):
        d = int(rng.choice([1, 10, 50, 100]))
        problem = make_problem("lqr", d, seed=i % 3)
        query = Query(rng.uniform(-1, 1, d), rng.uniform(0.01, 0.99) / problem.metadata["spectral_norm_RinvQ"])
        y = exact_minimizer(problem, query.x, query.t)
        worst_resid = max(worst_resid, float(np.linalg.norm(y - fixed_point_map(problem, query, y))))
    ok = worst <= 1e-3 and worst_resid <= 1e-10
    verdict(3, "LQR accuracy and closed-form consistency", ok, f"linf_u={worst:.2e} max |y*-F(y*)|={worst_resid:.1e}")
    assert ok


def test_criterion_04_cubic(verdict):
    rng = np.random.default_rng(SEED)
    problem = make_problem("cubic", 1)
    worst_oracle = 0.0
    for _ in range(50):
        query = Query(rng.uniform(-1, 1, 1), rng.uniform(0.005, 0.05))
        result = solve(problem, query)
        oracle = grid_minimize(problem, query)
        worst_oracle = max(worst_oracle, abs(result.value - oracle.value))

    worst_stat, worst_grad, runs = 0.0, 0.0, 0
    for d in (10, 50, 100):
        problem = make_problem("cubic", d)
        for _ in range(10):
            query = Query(rng.uniform(-1, 1, d) / math.sqrt(d), rng.uniform(0.01, 0.05))
            result = solve(problem, query)
            if not result.converged:
                continue
            runs += 1
            y = result.minimizer
            worst_stat = max(worst_stat, float(np.linalg.norm(fixed_point_map(problem, query, y) - y)))
            grad = central_diff(lambda v: hopf_lax_energy(problem, query, v), y)
            worst_grad = max(worst_grad, float(np.linalg.norm(grad)))
    ok = worst_oracle <= 1e-4 and worst_stat < 1e-6 and worst_grad <= 1e-4 and runs > 0
    verdict(
        4, "cubic benchmark", ok,
        f"max |u-oracle|={worst_oracle:.1e} stationarity={worst_stat:.1e} |grad E|={worst_grad:.1e} over {runs} runs",
    )
    assert ok


def test_criterion_05_kinks(verdict):
    steady, _, _ = run_bench("steady-kink", [1, 2, 3], points=128, sample_box=0.5, t_scale="absolute", seed=SEED)
    _, records, _ = run_bench("steady-kink", [1], points=128, sample_box=0.5, t_scale="absolute", seed=SEED, timing=False)
    inside = sum(np.max(np.abs(r.query.x)) < r.query.t for r in records[1])
    unsteady, _, _ = run_bench("unsteady-kink", [1, 2, 3], points=128, t_scale="absolute", seed=SEED)
    worst_s = max(r.linf_value_err for r in steady)
    worst_u = max(r.linf_value_err for r in unsteady)

    out = solve_multistart(make_problem("steady-kink", 1), Query([0.0], 1.0), SolverConfig(multi_init_count=100))
    energies = [fp.energy for fp in out.fixed_points]
    two = len(energies) == 2 and all(abs(e + 0.5) <= 1e-9 for e in energies)
    ok = worst_s <= 1e-4 and worst_u <= 1e-4 and inside > 0 and two
    verdict(
        5, "kink recovery", ok,
        f"steady linf_u={worst_s:.1e} ({inside} pts with |x|<t in d=1) unsteady linf_u={worst_u:.1e} "
        f"fixed points at (0,1)={len(energies)}",
    )
    assert ok


def test_criterion_06_bound_soundness(verdict):
    rng = np.random.default_rng(SEED)
    violations, checked = 0, 0
    for i in range(600):
        name = "quadratic" if i % 2 else "lqr"
        d = int(rng.choice([1, 2, 5, 10, 50]))
        problem = make_problem(name, d, seed=i % 7)
        t = rng.uniform(0.01, 0.99) / (problem.lipschitz_H * problem.lipschitz_g)
        query = Query(rng.uniform(-1, 1, d), t)
        config = SolverConfig(tolerance=10 ** rng.uniform(-10, -3))
        result = solve(problem, query, config, y0=query.x + rng.uniform(-3, 3, d))
        bounds = error_bounds(problem, query, result)
        if not bounds.valid:
            violations += 1
            continue
        u, grad = problem.exact_solution(query.x, t)
        y_star = exact_minimizer(problem, query.x, t)
        checked += 1
        violations += np.linalg.norm(result.minimizer - y_star) > bounds.minimizer_bound
        violations += abs(result.value - u) > bounds.solution_bound
        violations += np.linalg.norm(result.gradient - grad) > bounds.gradient_bound
    ok = violations == 0 and checked >= 500
    verdict(6, "error bound soundness", ok, f"{violations} violations over {checked} queries")
    assert ok


def test_criterion_07_linear_convergence(verdict):
    rng = np.random.default_rng(SEED)
    worst_ratio, over = 0.0, 0
    for _ in range(100):
        d = int(rng.integers(1, 20))
        problem = make_problem("quadratic", d)
        query = Query(rng.uniform(-1, 1, d), 0.5)
        y0 = rng.uniform(-5, 5, d)
        result = solve(problem, query, y0=y0)
        h = result.residual_history
        worst_ratio = max(worst_ratio, float(np.max(h[1:] / h[:-1])))
        distance = float(np.linalg.norm(y0 - exact_minimizer(problem, query.x, 0.5)))
        over += result.iterations > predicted_iterations(0.5, distance, 1e-6)
    ok = worst_ratio <= 0.5 + 1e-9 and over == 0
    verdict(7, "linear convergence", ok, f"max ratio={worst_ratio:.12f} runs over prediction={over}")
    assert ok


def test_criterion_08_oracle_equivalence(verdict):
    rng = np.random.default_rng(SEED)
    worst, count, stalled = 0.0, 0, 0
    for name in SMOOTH_PROBLEMS:
        for d in _dims(name, [1, 2]):
            problem = make_problem(name, d, seed=1)
            draw_t, draw_x = _t_sampler(problem, rng), _x_sampler(problem, rng)
            for _ in range(20):
                query = Query(draw_x(), draw_t())
                result = solve(problem, query)
                stalled += not result.converged
                oracle = grid_minimize(problem, query, points_per_axis=201 if d == 1 else 101)
                worst = max(worst, abs(result.value - oracle.value) / oracle.resolution)
                count += 1
    ok = worst <= 10.0 and stalled == 0
    verdict(8, "oracle equivalence", ok, f"max |u-oracle|/resolution={worst:.2f} over {count} queries, {stalled} unconverged")
    assert ok


def test_criterion_09_gradient_consistency(verdict):
    rng = np.random.default_rng(SEED)
    worst, count = 0.0, 0
    for name in SMOOTH_PROBLEMS:
        for d in _dims(name, [1, 3, 10]):
            problem = make_problem(name, d, seed=2)
            draw_t, draw_x = _t_sampler(problem, rng), _x_sampler(problem, rng)
            n = 100 if len(_dims(name, [1, 3, 10])) == 1 else 34
            for _ in range(n):
                x, t = draw_x(), draw_t()
                result = solve(problem, Query(x, t))
                fd = central_diff(lambda v: solve(problem, Query(v, t)).value, x, h=1e-5)
                worst = max(worst, float(np.max(np.abs(result.gradient - fd))))
                count += 1
    ok = worst <= 1e-4
    verdict(9, "gradient consistency", ok, f"max |grad - FD|_inf={worst:.1e} over {count} queries")
    assert ok


def test_criterion_10_determinism(verdict, tmp_path, capsys):
    paths = [tmp_path / "first.csv", tmp_path / "second.csv", tmp_path / "threaded.csv"]
    argv = ["bench", "--problem", "steady-kink", "--dims", "1,2,3", "--points", "32", "--seed", "7", "--no-timing"]
    codes = [
        main(argv + ["--out", str(paths[0])]),
        main(argv + ["--out", str(paths[1])]),
        main(argv + ["--out", str(paths[2]), "--workers", "4"]),
    ]
    capsys.readouterr()
    data = [p.read_bytes() for p in paths]
    ok = codes == [0, 0, 0] and data[0] == data[1] == data[2] and len(read_reports_csv(str(paths[0]))) == 3
    verdict(10, "bench determinism", ok, f"exit codes {codes}, {len(data[0])} bytes")
    assert ok
