"""Wall-clock comparison of the compiled and pure-Python trajectory kernels.

Usage: ``python benchmarks/bench_kernels.py [--sizes 64 128 256] [--steps 200] [--repeat 3]``

Each kernel advances one trajectory for ``--steps`` layers at rate ``1/L``
from the same seed; the best of ``--repeat`` runs is reported per size.
"""
import argparse
import time

import numpy as np

from monifrac import _backend
from monifrac.qdyn import PROJECTIVE, localized_state


def quantum(kern, L, steps, rng):
    psi = localized_state(L)
    kern.quantum_steps(psi, 0, steps, False, None, PROJECTIVE, 0.0, 1.0 / L, rng)


def classical(kern, L, steps, rng):
    dist = np.zeros(L)
    dist[L // 2 - 1] = 1.0
    kern.classical_steps(dist, L // 2 - 1, 0, steps, False, -1.0, 1.0 / L, rng)


def transition(kern, L, steps, rng):
    kern.transition_steps(np.full(L, 1.0 / L), 0, steps, False, 0.5)


CASES = {"quantum_haar": quantum, "classical_random": classical, "transition": transition}


def best_time(fn, kern, L, steps, repeat):
    best = float("inf")
    for _ in range(repeat):
        rng = np.random.default_rng(1)
        start = time.perf_counter()
        fn(kern, L, steps, rng)
        best = min(best, time.perf_counter() - start)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256])
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    if "compiled" not in _backend.BACKENDS:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
    print(f"{'kernel':<18}{'L':>6}{'python [ms]':>14}{'compiled [ms]':>16}{'speedup':>10}")
    for name, fn in CASES.items():
        for L in args.sizes:
            slow = best_time(fn, _backend.BACKENDS["python"], L, args.steps, args.repeat)
            fast = best_time(fn, _backend.BACKENDS["compiled"], L, args.steps, args.repeat)
            print(f"{name:<18}{L:>6}{slow * 1e3:>14.2f}{fast * 1e3:>16.3f}{slow / fast:>9.0f}x")


if __name__ == "__main__":
    main()
