"""Time the gather/scatter kernels on the numba and numpy paths.

Usage::

    python benchmarks/bench_kernels.py --nodes 64 128 256 --repeats 20

Both paths are checked for agreement before timing.
"""

import argparse
import time

import numpy as np

from gammahom import _kernels


def _best_time(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench(n, components, repeats, seed=0):
    rng = np.random.default_rng(seed)
    nodal = rng.standard_normal((n + 1, n + 1, components))
    h = 1.0 / n
    dA = rng.standard_normal((n, n, components, 2))
    ds = rng.standard_normal((n, n, components))
    rows = {}
    for label, flag in (("numpy", False), ("numba", True)):
        if flag and not _kernels.NUMBA_AVAILABLE:
            continue
        # warm-up also triggers compilation
        _kernels.gather(nodal, h, use_numba=flag)
        _kernels.scatter(dA, ds, h, use_numba=flag)
        rows[label] = (
            _best_time(lambda: _kernels.gather(nodal, h, use_numba=flag), repeats),
            _best_time(lambda: _kernels.scatter(dA, ds, h, use_numba=flag), repeats),
        )
    if "numba" in rows:
        g_np = _kernels.gather(nodal, h, use_numba=False)
        g_nb = _kernels.gather(nodal, h, use_numba=True)
        s_np = _kernels.scatter(dA, ds, h, use_numba=False)
        s_nb = _kernels.scatter(dA, ds, h, use_numba=True)
        assert np.allclose(g_np[0], g_nb[0], rtol=1e-13, atol=1e-12)
        assert np.allclose(g_np[1], g_nb[1], rtol=1e-13, atol=1e-12)
        assert np.allclose(s_np, s_nb, rtol=1e-13, atol=1e-12)
    return rows


def main():
    parser = argparse.ArgumentParser(description="numba vs numpy kernel timings")
    parser.add_argument("--nodes", type=int, nargs="+", default=[64, 128, 256])
    parser.add_argument("--components", type=int, default=3)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()
    print(f"numba available: {_kernels.NUMBA_AVAILABLE}")
    print(f"{'n':>6} {'path':>6} {'gather ms':>10} {'scatter ms':>11}")
    for n in args.nodes:
        rows = bench(n, args.components, args.repeats)
        for label, (g, s) in rows.items():
            print(f"{n:>6} {label:>6} {1e3 * g:>10.3f} {1e3 * s:>11.3f}")
        if len(rows) == 2:
            speed_g = rows["numpy"][0] / rows["numba"][0]
            speed_s = rows["numpy"][1] / rows["numba"][1]
            print(f"{n:>6} {'ratio':>6} {speed_g:>10.2f} {speed_s:>11.2f}")


if __name__ == "__main__":
    main()
