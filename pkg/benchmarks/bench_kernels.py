"""Compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Prints one row per kernel: best-of-repeat wall time for each backend and the
speedup.  Workloads are fixed so rows are comparable across machines.
"""
import argparse
import time

import numpy as np

from weylwalk import _fallback
from weylwalk.quotient import FuchsianGroup
from weylwalk.walk import rotated_pair_measure, stream

try:
    from weylwalk import _kernels
except ImportError:  # pragma: no cover
    _kernels = None


def walk_case(mod, n=20_000):
    mu = rotated_pair_measure()
    ch = mu.sample(stream(0, 0), n)
    t_out = np.empty((n + 1, 2))
    mod.walk(mu.atoms, ch, np.eye(2), np.zeros(2), np.eye(2), t_out)


def walk3_case(mod, n=20_000):
    rng = np.random.default_rng(0)
    atoms = np.array([np.eye(3) + 0.4 * rng.normal(size=(3, 3)) for _ in range(2)])
    atoms /= np.cbrt(np.linalg.det(atoms))[:, None, None]
    atoms = np.ascontiguousarray(atoms)
    ch = rng.integers(0, 2, n).astype(np.int64)
    t_out = np.empty((n + 1, 3))
    mod.walk(atoms, ch, np.eye(3), np.zeros(3), np.eye(3), t_out)


def flag_orbit_case(mod, n=20_000):
    mu = rotated_pair_measure()
    ch = mu.sample(stream(0, 1), n)
    mod.flag_orbit(mu.atoms, ch, np.eye(2), np.empty((n + 1, 2, 2)))


def deviation_case(mod, n=10_000):
    mu = rotated_pair_measure()
    ch = mu.sample(stream(0, 2), n)
    t_seq = np.empty((n + 1, 2))
    l_seq = np.empty((n + 1, 2, 2))
    _kernels_or_fallback().walk(mu.atoms, ch, np.eye(2), np.zeros(2), np.eye(2), t_seq, None, l_seq)
    eta = np.empty((n + 1, 2, 2))
    _kernels_or_fallback().flag_orbit(mu.atoms, np.ascontiguousarray(ch[::-1]), np.ascontiguousarray(l_seq[-1].T), eta)
    eta = np.ascontiguousarray(eta[::-1])
    mod.deviation_terms(np.ascontiguousarray(t_seq[1:]), np.ascontiguousarray(l_seq[1:]),
                        np.ascontiguousarray(eta[1:]), np.empty(n), np.empty((n, 2, 2)))


def quotient_case(mod, n=20_000):
    mode, gens, base_inv, log_l2 = FuchsianGroup.modular().kernel_args()
    mu = rotated_pair_measure()
    ch = mu.sample(stream(0, 3), n)
    mod.quotient_path(np.eye(2), mu.atoms, ch, mode, gens, base_inv, log_l2, np.empty((n + 1, 2, 2)))


def _kernels_or_fallback():
    return _kernels if _kernels is not None else _fallback


CASES = [
    ("walk d=2, 2e4 steps", walk_case),
    ("walk d=3, 2e4 steps", walk3_case),
    ("flag_orbit, 2e4 steps", flag_orbit_case),
    ("deviation_terms, 1e4 steps", deviation_case),
    ("quotient_path modular, 2e4 steps", quotient_case),
]


def best(fn, mod, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(mod)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _kernels is None:
        print("compiled extension not built; only the fallback is timed")
    print(f"{'kernel':36s} {'cython s':>10s} {'python s':>10s} {'speedup':>8s}")
    for name, fn in CASES:
        py = best(fn, _fallback, args.repeat)
        if _kernels is None:
            print(f"{name:36s} {'-':>10s} {py:10.4f} {'-':>8s}")
            continue
        cy = best(fn, _kernels, args.repeat)
        print(f"{name:36s} {cy:10.4f} {py:10.4f} {py / cy:8.1f}")


if __name__ == "__main__":
    main()
