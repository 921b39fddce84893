"""Compare the compiled extension against the pure-NumPy fallback.

Times the two hot kernels (bordered inverse growth, rank-1 primal update)
at several state sizes, then a short cooperative run end to end under each
backend (subprocesses, since the backend is chosen at import).

Usage: python3 benchmarks/bench_backends.py
"""

import os
import subprocess
import sys
import time

import numpy as np

from netkucb import _ops_np

try:
    from netkucb import _core
except ImportError:
    _core = None

BACKENDS = {"python": _ops_np}
if _core is not None:
    BACKENDS["compiled"] = _core


def time_op(fn, setup, reps):
    best = float("inf")
    for _ in range(5):
        args = setup()
        t0 = time.perf_counter()
        for _ in range(reps):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / reps)
    return best


def bench_grow(ops, n, reps=200):
    def setup():
        rng = np.random.default_rng(0)
        M = np.zeros((n + 1, n + 1))
        A = rng.standard_normal((n, n))
        M[:n, :n] = A @ A.T + np.eye(n)
        u = np.ascontiguousarray(rng.standard_normal(n))
        return M, u, 0.37, n

    return time_op(ops.grow_inverse, setup, reps)


def bench_sherman(ops, p, reps=500):
    def setup():
        rng = np.random.default_rng(1)
        A = rng.standard_normal((p, p))
        return np.ascontiguousarray(A @ A.T + np.eye(p)), \
            np.ascontiguousarray(rng.standard_normal(p))

    return time_op(ops.sherman_morrison, setup, reps)


def bench_rbf_row(ops, n, d=10, reps=500):
    def setup():
        rng = np.random.default_rng(2)
        P = np.ascontiguousarray(rng.standard_normal((n, d)))
        q = np.ascontiguousarray(rng.standard_normal(d))
        return P, q, 0.5, np.empty(n), n

    return time_op(ops.rbf_row, setup, reps)


def bench_trial(backend):
    code = (
        "import time; t0=time.perf_counter(); "
        "from netkucb import ExperimentConfig, run_trial; "
        "cfg = ExperimentConfig(V=8, p=0.6, T=60, trials=1, "
        "policies=('coop','independent'), kernel_x='rbf:1.0', "
        "kernel_z='rbf:1.0', z_model='identical', seed=3); "
        "t1=time.perf_counter(); run_trial(cfg, 0); "
        "print(time.perf_counter()-t1)"
    )
    env = dict(os.environ, NETKUCB_BACKEND=backend)
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True)
    if out.returncode != 0:
        raise RuntimeError(out.stderr)
    return float(out.stdout.strip())


def main():
    print(f"available backends: {', '.join(BACKENDS)}")
    rows = []
    for n in (50, 200, 500):
        rows.append((f"grow_inverse n={n}",
                     {k: bench_grow(ops, n) for k, ops in BACKENDS.items()}))
    for p in (10, 100):
        rows.append((f"sherman_morrison p={p}",
                     {k: bench_sherman(ops, p) for k, ops in BACKENDS.items()}))
    for n in (200, 2000):
        rows.append((f"rbf_row n={n}",
                     {k: bench_rbf_row(ops, n) for k, ops in BACKENDS.items()}))

    header = f"{'operation':28s}" + "".join(f"{k:>14s}" for k in BACKENDS)
    if len(BACKENDS) == 2:
        header += f"{'speedup':>10s}"
    print(header)
    for name, times in rows:
        line = f"{name:28s}" + "".join(
            f"{times[k] * 1e6:12.2f}us" for k in BACKENDS
        )
        if len(BACKENDS) == 2:
            line += f"{times['python'] / times['compiled']:9.2f}x"
        print(line)

    print("\nend-to-end cooperative trial (V=8, T=60, rbf kernels):")
    for backend in BACKENDS:
        try:
            print(f"  {backend:10s} {bench_trial(backend):8.3f}s")
        except RuntimeError as exc:
            print(f"  {backend:10s} failed: {exc}")


if __name__ == "__main__":
    main()
