"""Time the compiled kernels against the numpy fallback.

Run with ``python benchmarks/bench_kernels.py``. Prints one line per kernel
with the best-of-five time of each backend, the speedup and the largest
absolute difference between their outputs.
"""
import argparse
import timeit

import numpy as np

from relayfbl import _kernels


def cases(rng, n, rows):
    raw = rng.integers(0, 2**63, size=2 * rows * n, dtype=np.uint64)
    bank = rng.standard_normal((rows, n))
    resid = rng.standard_normal(n)
    z = rng.standard_normal((rows, n))
    x = rng.standard_normal((rows, n))
    return {
        "box_muller": (raw,),
        "sq_dist_rows": (bank, resid, 1.7),
        "mgf_exponents": (z, x, 0.1, 1.0),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--rows", type=int, default=4096)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels.compiled is None:
        print("compiled kernels unavailable; only the numpy fallback is built")
        return
    rng = np.random.default_rng(0)
    print(f"{'kernel':<15}{'numpy [ms]':>12}{'cython [ms]':>13}{'speedup':>9}{'max |diff|':>13}")
    for name, argv in cases(rng, args.n, args.rows).items():
        py = getattr(_kernels.python, name)
        cy = getattr(_kernels.compiled, name)
        t_py = min(timeit.repeat(lambda: py(*argv), number=1, repeat=args.repeat))
        t_cy = min(timeit.repeat(lambda: cy(*argv), number=1, repeat=args.repeat))
        diff = float(np.max(np.abs(py(*argv) - cy(*argv))))
        print(f"{name:<15}{1e3 * t_py:>12.3f}{1e3 * t_cy:>13.3f}{t_py / t_cy:>9.2f}{diff:>13.2e}")


if __name__ == "__main__":
    main()
