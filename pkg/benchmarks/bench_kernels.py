"""Compare the compiled and numpy density kernels, alone and inside a full energy evaluation.

Run with ``python3 benchmarks/bench_kernels.py [--n 1000000] [--repeat 5]``.
"""

import argparse
import time

import numpy as np

from twowell import _backend
from twowell.density import TwoWellDensity
from twowell.energy import EnergyParams, energy_eval, energy_gradient
from twowell.generators import generate_example_sequence


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_kernel(n, repeat, variant):
    rng = np.random.default_rng(12345)
    F = np.eye(2) + 0.3 * rng.standard_normal((n, 2, 2))
    code = TwoWellDensity(2, 1.0, 1.0, variant).code
    out = {}
    for backend in ("numpy", "cython"):
        if backend == "cython" and _backend._compiled is None:
            continue
        out[backend] = best_of(lambda: _backend.density_and_grad(F, 1.0, 1.0, code, True, backend),
                               repeat)
    if "cython" in out:
        a = _backend.density_and_grad(F, 1.0, 1.0, code, True, "numpy")
        b = _backend.density_and_grad(F, 1.0, 1.0, code, True, "cython")
        out["max_abs_diff"] = max(float(np.max(np.abs(a[0] - b[0]))), float(np.max(np.abs(a[1] - b[1]))))
    return out


def bench_energy(eps, repeat):
    y = generate_example_sequence(eps, 1)
    W = TwoWellDensity(2, 1.0, 1.0, "hard-min")
    p = EnergyParams(eps)
    out = {}
    saved = _backend.BACKEND
    try:
        for backend in ("numpy", "cython"):
            if backend == "cython" and _backend._compiled is None:
                continue
            _backend.BACKEND = backend
            energy_eval(y, W, p)
            out[backend] = best_of(lambda: (energy_eval(y, W, p), energy_gradient(y, W, p)), repeat)
    finally:
        _backend.BACKEND = saved
    return y.dims, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1_000_000, help="matrices per kernel call")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--eps", type=float, default=0.05, help="eps of the energy benchmark field")
    args = ap.parse_args(argv)
    print(f"compiled kernel available: {_backend._compiled is not None}")
    for variant in ("hard-min", "smooth-harmonic"):
        r = bench_kernel(args.n, args.repeat, variant)
        line = f"kernel {variant:16s} n={args.n}: numpy {r['numpy'] * 1e3:8.1f} ms"
        if "cython" in r:
            line += (f"  cython {r['cython'] * 1e3:8.1f} ms  speedup {r['numpy'] / r['cython']:5.1f}x"
                     f"  max|diff| {r['max_abs_diff']:.1e}")
        print(line)
    dims, r = bench_energy(args.eps, args.repeat)
    line = f"energy+gradient grid {dims}: numpy {r['numpy'] * 1e3:8.1f} ms"
    if "cython" in r:
        line += f"  cython {r['cython'] * 1e3:8.1f} ms  speedup {r['numpy'] / r['cython']:5.1f}x"
    print(line)


if __name__ == "__main__":
    main()
