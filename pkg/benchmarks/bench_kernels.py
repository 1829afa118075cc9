"""Compiled vs pure-Python kernel timings.

Times the three sequential kernels against both backends in-process, then
an end-to-end full-universe backtest in subprocesses (the backend is
chosen at import, so each end-to-end run needs its own interpreter).

Run:  python3 benchmarks/bench_kernels.py [--days N] [--repeat K]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from snooptest._kernels import pure

try:
    from snooptest._kernels import _core
except ImportError:
    _core = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_cases(days):
    rng = np.random.default_rng(0)
    buy = (rng.random(days) < 0.1).astype(np.uint8)
    sell = (rng.random(days) < 0.1).astype(np.uint8)
    close = 100.0 * np.exp(np.cumsum(rng.normal(0.0, 0.012, days)))
    u_decide = rng.random(days)
    u_fresh = rng.random(days)
    return [
        ("positions_from_signals (hold)",
         lambda impl: impl.positions_from_signals(buy, sell, pure.MODE_HOLD,
                                                  10, True)),
        ("filter_positions (x=0.05)",
         lambda impl: impl.filter_positions(close, 0.05, 0.0, 0)),
        ("bootstrap_chain (q=0.1)",
         lambda impl: impl.bootstrap_chain(u_decide, u_fresh, 0.1)),
    ]


def end_to_end(pure_python, days):
    code = (
        "import time, numpy as np\n"
        "from snooptest._kernels import backend_name\n"
        "from snooptest.backtest import build_performance_matrix\n"
        "from snooptest.rules.universe import enumerate_universe\n"
        "from snooptest.market_data import PriceSeries\n"
        f"n = {days}\n"
        "rng = np.random.default_rng(0)\n"
        "close = 100.0 * np.exp(np.cumsum(rng.normal(0.0003, 0.012, n)))\n"
        "dates = np.datetime64('2000-01-03') + np.arange(n)\n"
        "vol = rng.uniform(1e5, 1e6, n)\n"
        "prices = PriceSeries(dates=dates, close=close, volume=vol)\n"
        "rules = enumerate_universe()\n"
        "t0 = time.perf_counter()\n"
        "m = build_performance_matrix(prices, rules, warmup=250)\n"
        "print(f'{backend_name()} {time.perf_counter() - t0:.3f}')\n"
    )
    env = dict(os.environ)
    if pure_python:
        env["SNOOPTEST_PURE_PYTHON"] = "1"
    else:
        env.pop("SNOOPTEST_PURE_PYTHON", None)
    proc = subprocess.run([sys.executable, "-c", code], env=env,
                          capture_output=True, text=True, check=True)
    backend, seconds = proc.stdout.split()
    return backend, float(seconds)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--days", type=int, default=5000,
                        help="series length for the kernel loops")
    parser.add_argument("--repeat", type=int, default=5,
                        help="best-of repetitions per measurement")
    parser.add_argument("--skip-end-to-end", action="store_true",
                        help="only time the three kernels")
    args = parser.parse_args()

    if _core is None:
        print("compiled backend not built; timing the pure backend only")

    width = 34
    print(f"{'kernel':<{width}} {'pure':>10} {'compiled':>10} {'speedup':>9}")
    for name, call in kernel_cases(args.days):
        t_pure = best_of(lambda: call(pure), args.repeat)
        if _core is None:
            print(f"{name:<{width}} {t_pure * 1e3:>9.2f}ms {'-':>10} {'-':>9}")
            continue
        t_core = best_of(lambda: call(_core), args.repeat)
        print(f"{name:<{width}} {t_pure * 1e3:>9.2f}ms "
              f"{t_core * 1e3:>9.2f}ms {t_pure / t_core:>8.1f}x")

    if args.skip_end_to_end:
        return
    print()
    print("full-universe backtest (7846 rules, 600 days, warmup 250):")
    backend, seconds = end_to_end(pure_python=True, days=600)
    print(f"  {backend:<10} {seconds:.2f}s")
    if _core is not None:
        backend, seconds = end_to_end(pure_python=False, days=600)
        print(f"  {backend:<10} {seconds:.2f}s")


if __name__ == "__main__":
    main()
