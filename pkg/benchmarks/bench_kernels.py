"""Timing of the numba kernels against their numpy twins.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``.  Both kernel
sets are exercised on identical inputs; the outputs are cross-checked before
timing so the comparison is between equivalent computations.
"""
import argparse
import time

import numpy as np

from tdho import SigmaModel
from tdho._kernels import NUMBA_KERNELS, NUMPY_KERNELS


def _best(fn, repeat):
    fn()  # warm up (triggers compilation for numba)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(size):
    rng = np.random.default_rng(0)
    v = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    x2 = np.linspace(-20, 20, size) ** 2
    kind, params, kt, ks = SigmaModel.inverse_square(0.09, 1.0).kernel_args()
    return {
        "phase_rotate": lambda k: k.phase_rotate(v, x2, 0.3, 0.01, 2.0),
        "multiply_phase": lambda k: k.multiply_phase(v, x2, 0.7),
        "dopri5": lambda k: k.dopri5(kind, params, kt, ks, 1e3, 1e-12, 1e-12, 1e-3, 5_000_000)[0],
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", type=int, default=1 << 16)
    args = ap.parse_args(argv)
    if NUMBA_KERNELS is None:
        print("numba is not installed; nothing to compare")
        return 0
    print(f"{'kernel':<16}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}{'max diff':>12}")
    for name, run in cases(args.size).items():
        a, b = run(NUMPY_KERNELS), run(NUMBA_KERNELS)
        diff = float(np.max(np.abs(np.asarray(a) - np.asarray(b)))) if np.shape(a) == np.shape(b) else float("nan")
        rep = 1 if name == "dopri5" else args.repeat
        t_np = _best(lambda: run(NUMPY_KERNELS), rep)
        t_nb = _best(lambda: run(NUMBA_KERNELS), args.repeat)
        print(f"{name:<16}{t_np:>12.4g}{t_nb:>12.4g}{t_np / t_nb:>10.1f}{diff:>12.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
