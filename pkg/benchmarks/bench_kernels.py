"""Compiled vs numpy/pure-Python kernels, and one profit solve with each backend.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from valetcharge import _fallback, kernels
from valetcharge.market import maximize_profit
from valetcharge.params import PAPER_PARAMS, PolicyConfig

try:
    from valetcharge import _kernels
except ImportError:
    _kernels = None


def cases():
    consts = kernels.pack(PAPER_PARAMS)
    lams = np.linspace(3.0, 599.0, 200)
    ns = np.linspace(3.5, 700.0, 200)
    cvs = _fallback.inverse_demand_array(lams, -1.0, 400.0, consts)
    rng = np.random.default_rng(0)
    ia = rng.exponential(1.0 / 47.5, 200_000)
    sv = rng.exponential(1.0, 200_000)
    return {
        "inverse_demand_array (200)": lambda m: m.inverse_demand_array(lams, -1.0, 400.0, consts),
        "profit_grid (200x200)": lambda m: m.profit_grid(lams, cvs, ns, 57.0, 0.0, 25.0, consts),
        "mmn_waits (2e5 customers, N=50)": lambda m: m.mmn_waits(ia, sv, 50),
    }


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels is None:
        print("compiled kernels not built; only the fallback is available")
    print(f"{'kernel':34s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    for name, call in cases().items():
        t_py = best_of(lambda: call(_fallback), args.repeat)
        t_cy = best_of(lambda: call(_kernels), args.repeat) if _kernels else float("nan")
        print(f"{name:34s} {1e3 * t_py:12.2f} {1e3 * t_cy:12.2f} {t_py / t_cy:8.1f}")

    pol = PolicyConfig(k=57)
    times = {}
    for label, impl in (("python", _fallback), ("cython", _kernels)):
        if impl is None:
            continue
        saved, kernels._impl = kernels._impl, impl
        try:
            times[label] = best_of(lambda: maximize_profit(pol, PAPER_PARAMS, with_marginals=False),
                                   args.repeat)
        finally:
            kernels._impl = saved
    line = "  ".join(f"{k}={1e3 * v:.1f} ms" for k, v in times.items())
    print(f"maximize_profit(K=57): {line}")


if __name__ == "__main__":
    main()
