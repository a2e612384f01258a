"""Time the batch Picard loop on the compiled and numpy backends.

    python benchmarks/bench_kernels.py [--rows 2000] [--repeats 5]

Each case runs the same starts through both backends, checks the end
points agree, and prints the best-of-N wall time per backend.
"""

import argparse
import time

import numpy as np

from hjpicard import kernels
from hjpicard.picard import contraction_info
from hjpicard.problems import make_problem

# t is a fraction of 1/(L_H L_g) where both constants are known, absolute otherwise
CASES = [
    ("quadratic", 1, 0.3),
    ("quadratic", 100, 0.3),
    ("lqr", 10, 0.5),
    ("lqr", 100, 0.5),
    ("cubic", 10, 0.02),
    ("steady-kink", 3, 0.5),
    ("unsteady-kink", 3, 0.5),
    ("log-quadratic", 1, 0.1),
]


def best_time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - start)
    return best, out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=2000, help="starts per batch")
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; timing the numpy backend only")
    print(f"{'problem':<15}{'d':>5}{'rows':>7}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")

    rng = np.random.default_rng(args.seed)
    for name, d, t in CASES:
        problem = make_problem(name, d)
        info = contraction_info(problem, 1.0)
        if info.available:
            t = t / info.modulus
        x = rng.uniform(-0.5, 0.5, d) / np.sqrt(d)
        Y0 = x + rng.uniform(-1, 1, size=(args.rows, d))
        times, results = {}, {}
        for backend in backends:
            times[backend], results[backend] = best_time(
                lambda: kernels.run_batch(problem, x, t, Y0, 1e-8, 1000, 1e12, backend=backend), args.repeats
            )
        if len(results) == 2:
            np.testing.assert_allclose(results["compiled"].Y, results["python"].Y, rtol=1e-10, atol=1e-12)
            speedup = f"{times['python'] / times['compiled']:>9.1f}x"
        else:
            speedup = f"{'-':>10}"
        row = f"{name:<15}{d:>5}{args.rows:>7}" + "".join(f"{times[b] * 1e3:>10.2f}ms" for b in backends)
        print(row + speedup)


if __name__ == "__main__":
    main()
