"""Compare the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 3]

Prints the best-of-N wall time for each backend and the speedup.
"""

import argparse
import time

import numpy as np

from sehfs._kernels import _fallback
from sehfs.infotheory import discretize

try:
    from sehfs._kernels import _core
except ImportError:
    _core = None


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    for n, d in [(593, 72), (1000, 300)]:
        codes = discretize(rng.random((n, d)))
        args = (np.ascontiguousarray(codes.codes.T), codes.bins)
        yield f"mi_matrix n={n} d={d}", "mi_matrix", args
    for rows, q in [(300, 6), (20000, 20)]:
        yield f"simplex rows={rows} q={q}", "project_rows_simplex", (rng.normal(size=(rows, q)),)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if _core is None:
        print("compiled core not built; only the fallback is timed")
    rng = np.random.default_rng(args.seed)
    print(f"{'case':<28} {'python [s]':>11} {'cython [s]':>11} {'speedup':>8}")
    for label, name, call_args in cases(rng):
        t_py = best_time(lambda: getattr(_fallback, name)(*call_args), args.repeat)
        if _core is None:
            print(f"{label:<28} {t_py:11.4f} {'-':>11} {'-':>8}")
            continue
        out_py = getattr(_fallback, name)(*call_args)
        out_c = getattr(_core, name)(*call_args)
        assert np.allclose(out_py, out_c, atol=1e-12), f"backends disagree on {label}"
        t_c = best_time(lambda: getattr(_core, name)(*call_args), args.repeat)
        print(f"{label:<28} {t_py:11.4f} {t_c:11.4f} {t_py / t_c:7.1f}x")


if __name__ == "__main__":
    main()
