"""Compare the compiled and pure-numpy kernels on the same random blocks.

    python3 benchmarks/bench_kernels.py [--paths N] [--steps K] [--lmax L]
"""

import argparse
import time

import numpy as np

from fracsphere import _kernels_py

try:
    from fracsphere import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def _blocks(n, block, seed):
    rng = np.random.default_rng(seed)
    U = (rng.integers(0, 2**53, size=(n, block)) + 0.5) * 2.0**-53
    E = rng.standard_exponential((n, block))
    G = rng.standard_normal((n, block, 2))
    return U, E, G


def bench_paths(mod, n, steps, nu, reps):
    dtau = 1e-3
    targets = np.array([1e9])  # never reached: every step is executed
    tsteps = np.rint(targets / dtau).astype(np.int64)
    U, E, G = _blocks(n, steps, 1)
    best = np.inf
    for _ in range(reps):
        pos = np.tile([0.0, 0.0, 1.0], (n, 1))
        H = np.zeros(n)
        k = np.zeros(n, dtype=np.int64)
        j = np.zeros(n, dtype=np.int64)
        L = np.zeros((n, 1))
        P = np.zeros((n, 1, 3))
        t0 = time.perf_counter()
        mod.advance_paths(nu, dtau, targets, tsteps, pos, H, k, j, L, P, U, E, G, True)
        best = min(best, time.perf_counter() - t0)
    return best, pos


def bench_legendre(mod, lmax, npts, reps):
    x = np.linspace(-1, 1, npts)
    best = np.inf
    for _ in range(reps):
        t0 = time.perf_counter()
        out = mod.legendre_table(lmax, x)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=2000)
    ap.add_argument("--steps", type=int, default=500)
    ap.add_argument("--nu", type=float, default=0.6)
    ap.add_argument("--lmax", type=int, default=64)
    ap.add_argument("--points", type=int, default=20000)
    ap.add_argument("--reps", type=int, default=3)
    a = ap.parse_args(argv)
    mods = [("numpy", _kernels_py)] + ([("cython", _kernels_c)] if _kernels_c is not None else [])
    res = {}
    print(f"advance_paths: {a.paths} paths x {a.steps} steps, nu={a.nu}")
    for name, mod in mods:
        t, pos = bench_paths(mod, a.paths, a.steps, a.nu, a.reps)
        res[("paths", name)] = (t, pos)
        print(f"  {name:7s} {t:8.4f} s  {1e9 * t / (a.paths * a.steps):8.1f} ns/path-step")
    print(f"legendre_table: lmax={a.lmax}, {a.points} points")
    for name, mod in mods:
        t, out = bench_legendre(mod, a.lmax, a.points, a.reps)
        res[("leg", name)] = (t, out)
        print(f"  {name:7s} {t:8.4f} s")
    if _kernels_c is None:
        print("compiled extension not built; only the numpy fallback was timed")
        return
    dp = np.max(np.abs(res[("paths", "numpy")][1] - res[("paths", "cython")][1]))
    dl = np.max(np.abs(res[("leg", "numpy")][1] - res[("leg", "cython")][1]))
    print(f"speedup: paths x{res[('paths', 'numpy')][0] / res[('paths', 'cython')][0]:.1f}, "
          f"legendre x{res[('leg', 'numpy')][0] / res[('leg', 'cython')][0]:.1f}")
    print(f"max |numpy - cython|: positions {dp:.2e}, legendre {dl:.2e}")


if __name__ == "__main__":
    main()
