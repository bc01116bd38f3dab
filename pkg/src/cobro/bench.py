"""Timing of the compiled kernels against the numpy fallback, and of the two
simulation schemes.

    python -m cobro.bench [--points N] [--reps R]
"""
import argparse
import time

import numpy as np

from . import _backend, _fallback, ctmc, simulate

try:
    from . import _kernels
except ImportError:
    _kernels = None


def _best(fn, repeat=3):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def laplace_kernels(points=200_000, seed=0):
    """Seconds per batch of Laplace-transform evaluations for each backend."""
    cfg = ctmc.RegimeConfig(ctmc.BASE_GENERATOR, [1, 0, 0], [0.3, 0.6, 0.9])
    gen = np.random.default_rng(seed)
    z = -gen.uniform(0, 200, points) + 1j * gen.uniform(-200, 200, points)
    args = (cfg.generator.a, cfg.alpha, cfg.q0, 0.25, z)
    out = {"numpy": _best(lambda: _fallback.laplace_batch(*args))}
    if _kernels is not None:
        out["cython"] = _best(lambda: _kernels.laplace_batch(*args, num_threads=_backend.threads()))
        ref = _fallback.laplace_batch(*args)
        got = _kernels.laplace_batch(*args, num_threads=_backend.threads())
        out["max_rel_diff"] = float(np.max(np.abs(got - ref) / np.maximum(np.abs(ref), 1e-300)))
    return out


def row_sum_kernels(rows=2000, cols=2001, seed=0):
    """Seconds for constant-correlation lattice row sums: recurrence vs direct exponentials."""
    gen = np.random.default_rng(seed)
    t = np.tile(np.arange(cols, dtype=float), rows)
    c0 = -1e-4 * t * t + 1j * gen.uniform(-1, 1, rows * cols)
    q = 5e-5 * t * t + 0j
    scale = np.ones(rows * cols, dtype=np.complex128)
    ptr = np.arange(0, rows * cols + 1, cols)
    args = (c0, q, scale, ptr, 0.3, -2e-4, 1e-4)
    out = {"numpy": _best(lambda: _fallback.quadratic_exp_row_sums(*args))}
    if _kernels is not None:
        out["cython"] = _best(lambda: _kernels.quadratic_exp_row_sums(
            *args, num_threads=_backend.threads()))
    return out


def schemes(reps=5000, steps=100, seed=1):
    """Seconds for ``reps`` endpoint draws: common decomposition vs Euler on the same grid."""
    cfg = ctmc.RegimeConfig(ctmc.BASE_GENERATOR, [1, 0, 0], [0.3, 0.6, 0.9])
    grid = simulate.TimeGrid.uniform(1.0, steps)
    return {
        "cd": _best(lambda: simulate.simulate_cd_endpoints(cfg, 1.0, reps, seed, n_chain_steps=steps)),
        "euler": _best(lambda: simulate.simulate_euler_paths(cfg, grid, reps, seed)),
    }


def main(argv=None):
    p = argparse.ArgumentParser(prog="python -m cobro.bench")
    p.add_argument("--points", type=int, default=200_000)
    p.add_argument("--reps", type=int, default=5000)
    args = p.parse_args(argv)
    k = laplace_kernels(args.points)
    print(f"laplace transform, {args.points} points, threads={_backend.threads()}")
    print(f"  numpy   {k['numpy']:.3f} s")
    if "cython" in k:
        print(f"  cython  {k['cython']:.3f} s  (speedup {k['numpy'] / k['cython']:.1f}x, "
              f"max rel diff {k['max_rel_diff']:.1e})")
    else:
        print("  cython  not built")
    r = row_sum_kernels()
    print("lattice row sums, 2000 x 2001 terms")
    print(f"  numpy   {r['numpy']:.3f} s")
    if "cython" in r:
        print(f"  cython  {r['cython']:.3f} s  (speedup {r['numpy'] / r['cython']:.1f}x)")
    s = schemes(args.reps)
    print(f"simulation, {args.reps} endpoints, 100 steps")
    print(f"  common decomposition  {s['cd']:.3f} s")
    print(f"  euler                 {s['euler']:.3f} s  (ratio {s['euler'] / s['cd']:.2f})")


if __name__ == "__main__":
    main()
