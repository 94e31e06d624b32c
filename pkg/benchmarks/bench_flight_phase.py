"""Benchmark the flight-phase kernel: compiled backend vs pure numpy.

Builds an imputation-shaped balance problem (an n_m x n_r donor grid with
one balance row and per-row purity constraints) and times both backends on
identical inputs.  The two must agree bit for bit; the point of the numbers
is to justify keeping the compiled path as the default.

Run from the repo root:

    python3 benchmarks/bench_flight_phase.py --rows 50 --cols 50 --repeats 20
"""

import argparse
import statistics
import time

import numpy as np

from balimpute._backend import NUMBA_ENABLED
from balimpute.cube import BalanceProblem, flight_phase


def build_problem(n_rows: int, n_cols: int, rng: np.random.Generator) -> BalanceProblem:
    dv = 1.0 + rng.random(n_rows)
    residuals = rng.standard_normal(n_cols)
    a = np.empty((1 + n_rows, n_rows * n_cols))
    a[0] = np.outer(dv, residuals).ravel()
    for k in range(n_rows):
        row = np.zeros(n_rows * n_cols)
        row[k * n_cols:(k + 1) * n_cols] = 1.0
        a[1 + k] = row
    pi0 = np.full(n_rows * n_cols, 1.0 / n_cols)
    return BalanceProblem(pi0=pi0, a_matrix=a)


def time_backend(problem: BalanceProblem, backend: str, seed: int, repeats: int):
    rng = np.random.default_rng(seed)
    result = flight_phase(problem, rng, backend=backend)
    times = []
    for _ in range(repeats):
        rng = np.random.default_rng(seed)
        t0 = time.perf_counter()
        result = flight_phase(problem, rng, backend=backend)
        times.append(time.perf_counter() - t0)
    return result, times


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=50, help="nonrespondent rows")
    parser.add_argument("--cols", type=int, default=50, help="donor columns")
    parser.add_argument("--repeats", type=int, default=20)
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args()

    problem = build_problem(args.rows, args.cols, np.random.default_rng(args.seed))
    m = problem.n_cells
    print(f"problem: {args.rows} x {args.cols} grid, {m} cells, "
          f"{problem.n_constraints} constraints")

    backends = ["numpy"] + (["numba"] if NUMBA_ENABLED else [])
    results = {}
    for backend in backends:
        result, times = time_backend(problem, backend, args.seed, args.repeats)
        results[backend] = result
        print(f"{backend:>6}: median {statistics.median(times) * 1e3:8.2f} ms  "
              f"min {min(times) * 1e3:8.2f} ms  ({result.steps} steps)")

    if len(results) == 2:
        same = np.array_equal(results["numba"].itilde, results["numpy"].itilde)
        print(f"backends bitwise identical: {same}")
        if not same:
            return 1
    else:
        print("compiled backend unavailable; timed numpy only")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
