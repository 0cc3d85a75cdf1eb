"""Benchmark: compiled kernels vs the pure-Python fallback.

Times the hot kernels on the matrix sizes the RT loop actually uses, then
an end-to-end RT-loop comparison on the desk scenario. Run:

    python benchmarks/bench_kernels.py [--loops 50]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from cfmimo._kernels import BACKEND, impl, pyref


def bench(fn, *args, repeat=200):
    fn(*args)  # warm up
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--loops", type=int, default=50, help="RT loops for the end-to-end run")
    args = parser.parse_args()

    if BACKEND != "cython":
        print("compiled backend unavailable; nothing to compare")
        return

    rng = np.random.default_rng(0)
    print(f"{'kernel':<14}{'n':>4}{'python':>12}{'cython':>12}{'speedup':>9}")
    for n in (2, 4, 8, 16):
        b = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        a = np.ascontiguousarray(b.conj().T @ b + 0.1 * np.eye(n))
        rhs = np.ascontiguousarray(rng.standard_normal((n, 2)) + 1j * rng.standard_normal((n, 2)))
        lmat = impl.chol(a)
        rows = [
            ("eigh", lambda m=a: impl.eigh(m), lambda m=a: pyref.eigh(m)),
            ("chol", lambda m=a: impl.chol(m), lambda m=a: pyref.chol(m)),
            ("chol_solve", lambda: impl.chol_solve(lmat, rhs), lambda: pyref.chol_solve(lmat, rhs)),
            ("det", lambda m=a: impl.det(m), lambda m=a: pyref.det(m)),
        ]
        for name, cy, py in rows:
            t_py = bench(py, repeat=50)
            t_cy = bench(cy, repeat=500)
            print(f"{name:<14}{n:>4}{t_py * 1e6:>10.1f}us{t_cy * 1e6:>10.1f}us{t_py / t_cy:>8.1f}x")

    phi = 10.0 ** rng.uniform(-2, 2, 4)
    lam = 10.0 ** rng.uniform(-2, 2, 4)
    t_py = bench(lambda: pyref.xi_root(phi, lam, 0.01), repeat=200)
    t_cy = bench(lambda: impl.xi_root(phi, lam, 0.01), repeat=2000)
    print(f"{'xi_root':<14}{4:>4}{t_py * 1e6:>10.1f}us{t_cy * 1e6:>10.1f}us{t_py / t_cy:>8.1f}x")

    print("\nend-to-end expert mode on the desk scenario:")
    here = os.path.dirname(os.path.abspath(__file__))
    script = (
        "import time, sys\n"
        "from cfmimo import orchestrator, scenario\n"
        "from cfmimo._kernels import BACKEND\n"
        f"sc = scenario.load(r'{os.path.join(here, '..', 'configs', 'desk.json')}')\n"
        "sim = orchestrator.Simulation(sc, mode='expert')\n"
        "t0 = time.time()\n"
        f"sim.run({args.loops})\n"
        f"print(f'{{BACKEND}}: {{(time.time() - t0) / {args.loops} * 1e3:.2f}} ms/RT loop')\n"
    )
    for backend in ("cython", "python"):
        env = dict(os.environ, CFMIMO_KERNELS=backend)
        out = subprocess.run(
            [sys.executable, "-c", script], env=env, capture_output=True, text=True
        )
        print(" ", out.stdout.strip() or out.stderr.strip())


if __name__ == "__main__":
    main()
