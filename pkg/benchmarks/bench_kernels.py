#!/usr/bin/env python3
"""Benchmark the compiled kernels against their pure-Python twins.

Times the Monte-Carlo chain simulation and the relative-value-iteration
solve on the packaged default configuration, verifies that both backends
produce bit-identical results, and prints the speedup.

    python benchmarks/bench_kernels.py [--runs N] [--horizon K] [--repeat R]
"""

import argparse
import sys
import time
import warnings
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import remest
from remest import SimConfig, build_mdp, default_config, riccati_steady_state, simulate_chain, solve


def timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--runs", type=int, default=2000)
    parser.add_argument("--horizon", type=int, default=2000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    warnings.simplefilter("ignore", RuntimeWarning)
    cfg = default_config()
    system = cfg.make_system()
    channel = cfg.make_channel()
    sk = riccati_steady_state(system, q_max=cfg.q_max)
    model = build_mdp(sk, channel, cfg.q_max, "mse")
    policy = solve(model).policy
    sim_cfg = SimConfig(horizon=args.horizon, runs=args.runs, seed=cfg.seed)

    print(f"backends available: {remest.available_backends()}")
    if not remest.has_compiled():
        print("compiled kernels are not built; run `python setup.py build_ext --inplace` first")

    rows = []
    results = {}
    for backend in remest.available_backends():
        t_sim, rep = timeit(lambda b=backend: simulate_chain(policy, channel, sk, sim_cfg, backend=b),
                            args.repeat)
        t_rvi, sol = timeit(lambda b=backend: solve(model, backend=b), args.repeat)
        results[backend] = (rep, sol)
        rows.append((backend, t_sim, t_rvi))

    print(f"\nchain simulation: {args.runs} runs x {args.horizon} steps;"
          f" rvi: {model.n_states} states")
    print(f"{'backend':>10} {'sim [s]':>10} {'rvi [ms]':>10}")
    for backend, t_sim, t_rvi in rows:
        print(f"{backend:>10} {t_sim:>10.3f} {t_rvi * 1000:>10.2f}")
    if len(rows) == 2:
        print(f"{'speedup':>10} {rows[1][1] / rows[0][1]:>9.1f}x {rows[1][2] / rows[0][2]:>9.1f}x")
        rep_c, sol_c = results["compiled"]
        rep_p, sol_p = results["python"]
        same = (np.array_equal(rep_c.avg_mse_vs_k, rep_p.avg_mse_vs_k)
                and np.array_equal(rep_c.run_final_mse, rep_p.run_final_mse)
                and np.array_equal(sol_c.bias, sol_p.bias)
                and sol_c.gain == sol_p.gain)
        print(f"bit-identical results across backends: {same}")
        if not same:
            raise SystemExit("backend mismatch: compiled and pure kernels disagree")


if __name__ == "__main__":
    main()
