"""Command-line interface: ``solve``, ``bench`` and ``profile``.

Exit codes: 0 success, 1 usage or evaluation error, 2 solver non-convergence
(or divergence) at some point. ``bench`` and ``profile`` still write their
output files when exiting with 2.

The worker pool size defaults to ``$HJPICARD_WORKERS`` (1 if unset).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Optional

import numpy as np

from hjpicard import kernels
from hjpicard.core import DivergenceError, EvaluationError, Query, SolverConfig
from hjpicard.metrics import REPORT_FIELDS, BenchReport, PointRecord, aggregate, point_errors
from hjpicard.multistart import solve_multistart
from hjpicard.oracle import grid_minimize
from hjpicard.picard import contraction_info, error_bounds, solve
from hjpicard.problems import KINK_PROBLEMS, PROBLEMS, make_problem

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGED = 0, 1, 2

# oracle grid size per dimension when a problem has no closed form
_ORACLE_POINTS = {1: 201, 2: 101, 3: 41}


class UsageError(Exception):
    pass


def _floats(text: str, what: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{what} must be a comma-separated list of reals, got {text!r}") from None


def _range(text: str, what: str) -> tuple:
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise UsageError(f"{what} must look like lo:hi, got {text!r}") from None
    if not hi >= lo:
        raise UsageError(f"{what} must satisfy lo <= hi")
    return lo, hi


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _workers(args) -> int:
    if getattr(args, "workers", None):
        return max(1, args.workers)
    try:
        return max(1, int(os.environ.get("HJPICARD_WORKERS", "1")))
    except ValueError:
        return 1


def _problem(args, dim: int):
    try:
        return make_problem(args.problem, dim, seed=args.problem_seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _write_atomic(path: Optional[str], text: str):
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------- reports


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(REPORT_FIELDS))
    for rep in reports:
        writer.writerow([_fmt(getattr(rep, attr)) for attr in REPORT_FIELDS.values()])
    return buf.getvalue()


def read_reports_csv(path_or_text: str) -> list:
    """Parse a bench CSV (path or literal text) back into BenchReport rows."""
    if os.path.exists(path_or_text):
        with open(path_or_text, newline="") as fh:
            text = fh.read()
    else:
        text = path_or_text
    rows = csv.DictReader(io.StringIO(text))
    out = []
    for row in rows:
        out.append(
            BenchReport(
                problem_id=row["problem"],
                dim=int(row["dim"]),
                n_points=int(row["n_points"]),
                l2_value_err=float(row["l2_u"]),
                linf_value_err=float(row["linf_u"]),
                l2_grad_err=float(row["l2_grad"]),
                linf_grad_err=float(row["linf_grad"]),
                total_time=float(row["time_s"]),
                mean_iterations=float(row["mean_iters"]),
                seed=int(row["seed"]),
            )
        )
    return out


def reports_to_json(reports, sampling: dict) -> str:
    rows = [{col: getattr(rep, attr) for col, attr in REPORT_FIELDS.items()} for rep in reports]
    # NaN/inf are emitted as JS literals by json.dumps; keep them so round trips stay lossless
    return json.dumps({"reports": rows, "sampling": sampling}, indent=2) + "\n"


# ------------------------------------------------------------------ solve


def _solution_payload(problem, query, result, multi=None) -> dict:
    info = contraction_info(problem, query.t)
    payload = {
        "problem": problem.name,
        "dim": problem.dim,
        "x": query.x.tolist(),
        "t": query.t,
        "value": result.value,
        "gradient": result.gradient.tolist(),
        "control": result.control.tolist(),
        "minimizer": result.minimizer.tolist(),
        "iterations": result.iterations,
        "residual": result.final_residual,
        "converged": result.converged,
        "contraction_modulus": info.modulus if info.available else None,
    }
    if info.available:
        bounds = error_bounds(problem, query, result)
        payload["error_bounds"] = {
            "minimizer": bounds.minimizer_bound,
            "solution": bounds.solution_bound,
            "gradient": bounds.gradient_bound,
            "valid": bounds.valid,
        }
    if problem.exact_solution is not None:
        u, grad = problem.exact_solution(query.x, query.t)
        value_err, grad_err = point_errors(result.value, result.gradient, u, grad)
        payload["exact"] = {"value": u, "value_err": value_err, "grad_err": grad_err}
    if multi is not None:
        payload["multi_init"] = {
            "attempted": multi.attempted,
            "converged": multi.converged_count,
            "fixed_points": [
                {"point": fp.point.tolist(), "energy": fp.energy, "multiplicity": fp.multiplicity}
                for fp in multi.fixed_points
            ],
        }
    return payload


def _print_payload(payload: dict):
    def vec(v):
        return "(" + ", ".join(_fmt(c) for c in v) + ")"

    lines = [
        f"problem     {payload['problem']} (d={payload['dim']})",
        f"query       x={vec(payload['x'])} t={_fmt(payload['t'])}",
        f"value       {_fmt(payload['value'])}",
        f"gradient    {vec(payload['gradient'])}",
        f"control     {vec(payload['control'])}",
        f"minimizer   {vec(payload['minimizer'])}",
        f"iterations  {payload['iterations']}",
        f"residual    {_fmt(payload['residual'])}",
        f"converged   {_fmt(payload['converged'])}",
    ]
    if payload["contraction_modulus"] is not None:
        lines.append(f"L_F         {_fmt(payload['contraction_modulus'])}")
    if "error_bounds" in payload:
        b = payload["error_bounds"]
        lines.append(
            f"bounds      |dy|<={_fmt(b['minimizer'])} |du|<={_fmt(b['solution'])} "
            f"|dgrad|<={_fmt(b['gradient'])} valid={_fmt(b['valid'])}"
        )
    if "exact" in payload:
        e = payload["exact"]
        lines.append(f"exact       u={_fmt(e['value'])} value_err={_fmt(e['value_err'])} grad_err={_fmt(e['grad_err'])}")
    if "multi_init" in payload:
        m = payload["multi_init"]
        lines.append(f"multi-init  {m['converged']}/{m['attempted']} converged, {len(m['fixed_points'])} fixed points")
        for fp in m["fixed_points"]:
            lines.append(f"            {vec(fp['point'])} energy={_fmt(fp['energy'])} x{fp['multiplicity']}")
    print("\n".join(lines))


def cmd_solve(args) -> int:
    x = _floats(args.x, "--x")
    if len(x) != args.dim:
        raise UsageError(f"--x has {len(x)} components but --dim is {args.dim}")
    problem = _problem(args, args.dim)
    query = Query(np.array(x), args.t)
    config = SolverConfig(
        max_iters=args.max_iters,
        tolerance=args.tol,
        multi_init_count=max(args.multi_init, 0),
        init_box_halfwidth=args.alpha,
        rng_seed=args.seed,
        center_on_query=not args.origin_box,
        workers=_workers(args),
    )
    try:
        if args.multi_init > 0:
            multi = solve_multistart(problem, query, config)
            result = multi.best
        else:
            multi = None
            result = solve(problem, query, config)
    except DivergenceError as exc:
        info = contraction_info(problem, query.t)
        msg = f"diverged: {exc}"
        if info.available:
            msg += f"; contraction modulus L_F = {info.modulus:.6g} {'< 1' if info.is_contraction else '>= 1'}"
        print(msg, file=sys.stderr)
        return EXIT_NONCONVERGED

    payload = _solution_payload(problem, query, result, multi)
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        _print_payload(payload)
    return EXIT_OK if result.converged else EXIT_NONCONVERGED


# ------------------------------------------------------------------ bench


def sample_queries(dim: int, n: int, box: float, t_lo: float, t_hi: float, seed: int):
    """``n`` queries with x ~ U[-box, box]^dim and t ~ U[t_lo, t_hi].

    Each dimension gets its own stream so adding dims leaves others unchanged.
    """
    rng = np.random.default_rng([int(seed), int(dim)])
    X = rng.uniform(-box, box, size=(n, dim))
    T = rng.uniform(t_lo, t_hi, size=n)
    return [Query(X[i], T[i]) for i in range(n)]


def _point_seed(seed: int, dim: int, index: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(dim), int(index)]).generate_state(1, np.uint64)[0])


def _reference(problem, query):
    if problem.exact_solution is not None:
        return problem.exact_solution(query.x, query.t)
    if problem.dim <= 3 and query.t > 0:
        oracle = grid_minimize(problem, query, points_per_axis=_ORACLE_POINTS[problem.dim], refinement_levels=6)
        return oracle.value, problem.initial_grad(oracle.minimizer)
    return None


def run_point(problem, query, config, multi_init: int, index: int, seed: int) -> PointRecord:
    """Solve one query and score it against the exact or oracle reference."""
    start = time.perf_counter()
    try:
        if multi_init > 0:
            cfg = replace(config, multi_init_count=multi_init, rng_seed=_point_seed(seed, problem.dim, index))
            result = solve_multistart(problem, query, cfg).best
        else:
            result = solve(problem, query, config)
    except DivergenceError as exc:
        elapsed = time.perf_counter() - start
        return PointRecord(query, math.inf, math.inf, exc.iterations, elapsed, False)
    elapsed = time.perf_counter() - start

    ref = _reference(problem, query)
    if ref is None:
        value_err = grad_err = None
    else:
        value_err, grad_err = point_errors(result.value, result.gradient, *ref)
    return PointRecord(query, value_err, grad_err, result.iterations, elapsed, result.converged)


def run_bench(
    problem_id: str,
    dims,
    points: int = 128,
    sample_box: float = 1.0,
    t_range=(0.1, 0.4),
    t_scale: str = "contraction",
    seed: int = 0,
    problem_seed: int = 0,
    multi_init: Optional[int] = None,
    config: Optional[SolverConfig] = None,
    workers: int = 1,
    timing: bool = True,
):
    """Run the benchmark for each dimension; returns ``(reports, records_by_dim, sampling)``."""
    config = config or SolverConfig()
    reports, all_records = [], {}
    for dim in dims:
        problem = make_problem(problem_id, dim, seed=problem_seed)
        lo, hi = t_range
        info = contraction_info(problem, 1.0)
        if t_scale == "contraction" and info.available:
            lo, hi = lo / info.modulus, hi / info.modulus
        queries = sample_queries(dim, points, sample_box, lo, hi, seed)
        n_starts = (100 * dim if problem_id in KINK_PROBLEMS else 0) if multi_init is None else multi_init

        def one(item):
            i, q = item
            return run_point(problem, q, config, n_starts, i, seed)

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                records = list(pool.map(one, enumerate(queries)))
        else:
            records = [one(item) for item in enumerate(queries)]
        if not timing:
            records = [PointRecord(r.query, r.value_err, r.grad_err, r.iterations, 0.0, r.converged) for r in records]
        all_records[dim] = records
        reports.append(aggregate(records, problem_id=problem_id, seed=seed))

    sampling = {
        "x_box": [-sample_box, sample_box],
        "t_range": list(t_range),
        "t_scale": t_scale,
        "points": points,
        "seed": seed,
        "problem_seed": problem_seed,
        "backend": kernels.BACKEND,
    }
    return reports, all_records, sampling


def _records_csv(records_by_dim) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["dim", "index", "t", "value_err", "grad_err", "iterations", "converged", "time_s"])
    for dim, records in records_by_dim.items():
        for i, r in enumerate(records):
            writer.writerow(
                [dim, i, _fmt(r.query.t), _fmt(r.value_err if r.value_err is not None else math.nan),
                 _fmt(r.grad_err if r.grad_err is not None else math.nan), r.iterations,
                 _fmt(r.converged), _fmt(r.wall_time)]
            )
    return buf.getvalue()


def cmd_bench(args) -> int:
    dims = [int(d) for d in _floats(args.dims, "--dims")]
    if not dims or any(d < 1 for d in dims):
        raise UsageError("--dims must list positive integers")
    if args.problem not in PROBLEMS:
        raise UsageError(f"unknown problem {args.problem!r}; choose from {', '.join(PROBLEMS)}")
    config = SolverConfig(
        max_iters=args.max_iters,
        tolerance=args.tol,
        init_box_halfwidth=args.alpha,
        center_on_query=not args.origin_box,
    )
    try:
        reports, records, sampling = run_bench(
            args.problem,
            dims,
            points=args.points,
            sample_box=args.sample_box,
            t_range=_range(args.t_range, "--t-range"),
            t_scale=args.t_scale,
            seed=args.seed,
            problem_seed=args.problem_seed,
            multi_init=args.multi_init,
            config=config,
            workers=_workers(args),
            timing=not args.no_timing,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    text = reports_to_csv(reports) if args.format == "csv" else reports_to_json(reports, sampling)
    _write_atomic(args.out, text)
    if args.points_out:
        _write_atomic(args.points_out, _records_csv(records))
    failed = any(not r.converged for recs in records.values() for r in recs)
    return EXIT_NONCONVERGED if failed else EXIT_OK


# ---------------------------------------------------------------- profile


def run_profile(problem, xs, times, config: SolverConfig, multi_init: int):
    """Rows ``(x, t, u, grad_u)``; NaN where the iteration did not converge."""
    rows, failed = [], False
    for t in times:
        for x in xs:
            query = Query(np.array([x]), t)
            try:
                if multi_init > 0 and t > 0:
                    result = solve_multistart(problem, query, replace(config, multi_init_count=multi_init)).best
                else:
                    result = solve(problem, query, config)
            except DivergenceError:
                result = None
            if result is None or not result.converged:
                failed = True
                rows.append((x, t, math.nan, math.nan))
            else:
                rows.append((x, t, result.value, float(result.gradient[0])))
    return rows, failed


def cmd_profile(args) -> int:
    if args.dim != 1:
        raise UsageError("profile only supports one-dimensional problems (--dim 1)")
    problem = _problem(args, 1)
    lo, hi = _range(args.x_range, "--x-range")
    if args.nx < 2:
        raise UsageError("--nx must be >= 2")
    times = _floats(args.times, "--times")
    if any(t < 0 for t in times):
        raise UsageError("--times must be >= 0")
    multi = args.multi_init
    if multi is None:
        multi = 100 if args.problem in KINK_PROBLEMS else 0
    config = SolverConfig(
        max_iters=args.max_iters,
        tolerance=args.tol,
        init_box_halfwidth=args.alpha,
        rng_seed=args.seed,
    )
    rows, failed = run_profile(problem, np.linspace(lo, hi, args.nx), times, config, multi)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["x", "t", "u", "grad_u"])
    for row in rows:
        writer.writerow([_fmt(float(v)) for v in row])
    _write_atomic(args.out, buf.getvalue())
    return EXIT_NONCONVERGED if failed else EXIT_OK


# ----------------------------------------------------------------- parser


def _add_solver_flags(p, tol=1e-6, max_iters=1000):
    p.add_argument("--tol", type=float, default=tol, help="residual tolerance")
    p.add_argument("--max-iters", type=int, default=max_iters)
    p.add_argument("--alpha", type=float, default=None, help="multi-init box half-width")
    p.add_argument("--problem-seed", type=int, default=0, help="seed for generated problem data (lqr)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hjpicard", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="evaluate u, grad u and the optimal control at one (x, t)")
    p.add_argument("--problem", required=True)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--x", required=True, help="comma-separated state; use --x=-1,2 for leading minus")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--multi-init", type=int, default=0, help="number of random starts (0 = start at x)")
    p.add_argument("--origin-box", action="store_true", help="sample starts around 0 instead of x")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.add_argument("--workers", type=int, default=None)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", help="batch accuracy/timing report against exact or oracle references")
    p.add_argument("--problem", required=True)
    p.add_argument("--dims", default="1")
    p.add_argument("--points", type=int, default=128)
    p.add_argument("--sample-box", type=float, default=1.0)
    p.add_argument("--t-range", default="0.1:0.4")
    p.add_argument(
        "--t-scale",
        choices=("contraction", "absolute"),
        default="contraction",
        help="'contraction' divides --t-range by L_H*L_g when both are known",
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--multi-init", type=int, default=None, help="starts per point (default 100*d for kink problems)")
    p.add_argument("--origin-box", action="store_true")
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--points-out", default=None, help="optional per-point CSV")
    p.add_argument("--no-timing", action="store_true", help="write 0 for wall-clock fields (byte-reproducible)")
    p.add_argument("--workers", type=int, default=None)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("profile", help="1-D solution profile CSV (x, t, u, grad_u)")
    p.add_argument("--problem", required=True)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--x-range", default="-2:2")
    p.add_argument("--nx", type=int, default=401)
    p.add_argument("--times", default="0,0.5,1")
    p.add_argument("--out", default=None)
    p.add_argument("--multi-init", type=int, default=None, help="starts per point (default 100 for kink problems)")
    p.add_argument("--seed", type=int, default=0)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_profile)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EvaluationError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
