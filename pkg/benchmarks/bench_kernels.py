"""Benchmark the numba-jitted SO(3) kernels against the pure-numpy fallback.

Run:  python benchmarks/bench_kernels.py [--size 2048] [--repeat 5]

The same kernels are timed in both builds; results also cross-check that the
two paths agree to roundoff.
"""

import argparse
import time

import numpy as np

from thinrod import _kernels


def bench(fn, args, repeat):
    fn(*args)  # warm-up (includes JIT compilation for the numba build)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=2048, help="number of intervals")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    m = args.size
    gen = rng.standard_normal((m, 3))
    h = np.full(m, 1.0 / m)
    rot = _kernels.numpy_impl.chain_rotations(gen, h)
    g_nodes = rng.standard_normal((m + 1, 3, 3))
    tau = np.full(m + 1, 1.0 / m)
    tau[0] = tau[-1] = 0.5 / m
    b = rng.standard_normal((m, 3))

    impls = {"numpy": _kernels.numpy_impl}
    if _kernels.numba_impl is not None:
        impls["numba"] = _kernels.numba_impl
    else:
        print("numba build unavailable (THINROD_NO_NUMBA set or numba missing)")

    cases = [
        ("chain_rotations", lambda im: (im.chain_rotations, (gen, h))),
        ("solver_load_vectors", lambda im: (im.solver_load_vectors,
                                            (gen, h, rot, g_nodes, tau))),
        ("grad_load_sweep", lambda im: (im.grad_load_sweep,
                                        (gen, h, rot, g_nodes, tau, b))),
        ("hess_load_sweep", lambda im: (im.hess_load_sweep,
                                        (gen, h, rot, g_nodes, tau, b))),
    ]

    print(f"size = {m} intervals, best of {args.repeat}")
    print(f"{'kernel':<22}" + "".join(f"{name:>12}" for name in impls)
          + ("     speedup" if len(impls) == 2 else ""))
    for label, make in cases:
        times = {}
        results = {}
        for name, im in impls.items():
            fn, a = make(im)
            times[name] = bench(fn, a, args.repeat)
            results[name] = np.asarray(fn(*a))
        row = f"{label:<22}" + "".join(f"{times[n] * 1e3:>10.3f}ms" for n in impls)
        if len(impls) == 2:
            row += f"{times['numpy'] / times['numba']:>11.1f}x"
            gap = np.max(np.abs(results["numpy"] - results["numba"]))
            assert gap < 1e-11 * (1.0 + np.max(np.abs(results["numpy"]))), gap
        print(row)


if __name__ == "__main__":
    main()
