"""Compare the compiled and numpy kernel backends.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Each kernel is timed on both backends with identical inputs; the results
are checked for agreement before timing so that a speedup never hides a
wrong answer.
"""
import argparse
import timeit

import numpy as np

from entfree import kernels


def _kick(k, psi, v):
    out = psi.copy()
    k.phase_kick(out, v, 0.01)
    return out


def cases(rng):
    a = rng.standard_normal((24, 24)) + 1j * rng.standard_normal((24, 24))
    b = rng.standard_normal((24, 24)) + 1j * rng.standard_normal((24, 24))
    m = rng.standard_normal((576, 576)) + 1j * rng.standard_normal((576, 576))
    psi = rng.standard_normal(256 * 256) + 1j * rng.standard_normal(256 * 256)
    v = rng.standard_normal(256 * 256)
    return {
        "kron 24x24 (x) 24x24": (lambda k: k.kron(a, b)),
        "partial_trace 576, keep A": (lambda k: k.partial_trace(m, 24, 24, True)),
        "partial_trace 576, keep B": (lambda k: k.partial_trace(m, 24, 24, False)),
        "phase_kick 256^2": (lambda k: _kick(k, psi, v)),
        "abs2_sum 256^2": (lambda k: k.abs2_sum(psi)),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=20)
    args = p.parse_args(argv)
    impls = kernels.backends()
    if "cython" not in impls:
        print("compiled backend not available; timing the numpy backend only")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<28}" + "".join(f"{name:>14}" for name in impls) + f"{'speedup':>10}")
    for label, fn in cases(rng).items():
        outs = {name: fn(k) for name, k in impls.items()}
        ref = outs["python"]
        for name, out in outs.items():
            if not np.allclose(out, ref, rtol=1e-12, atol=1e-9):
                raise SystemExit(f"{label}: backend {name} disagrees with numpy")
        times = {
            name: min(timeit.repeat(lambda: fn(k), number=1, repeat=args.repeat))
            for name, k in impls.items()
        }
        row = f"{label:<28}" + "".join(f"{times[n] * 1e3:>12.3f}ms" for n in impls)
        if "cython" in times:
            row += f"{times['python'] / times['cython']:>9.2f}x"
        print(row)


if __name__ == "__main__":
    main()
