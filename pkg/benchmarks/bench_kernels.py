#!/usr/bin/env python3
"""Benchmark the hot kernels in both modes: numba-jitted vs numpy fallback.

Run directly for the active mode, or with --compare to spawn a subprocess
with SPINFPE_NO_NUMBA=1 and print both columns side by side:

    python benchmarks/bench_kernels.py --compare

The weighted cosine series is BLAS-bound by construction and is expected to
time the same in both modes; it is included as a control.
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def timeit(fn, repeat=5, number=1):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        for _ in range(number):
            fn()
        best = min(best, (time.perf_counter() - t0) / number)
    return best


def run_benchmarks():
    from spinfpe import kernels, ladder, propagation

    cfg = ladder.LadderConfig(rungs=8, rung_coupling=0.2)
    results = {}

    results["sector_states(16,8)"] = timeit(
        lambda: kernels.sector_states(16, 8), repeat=3
    )

    basis = ladder.build_basis(cfg)
    sites_a = np.concatenate([np.arange(7), 8 + np.arange(7), np.arange(8)])
    sites_b = np.concatenate([np.arange(1, 8), 8 + np.arange(1, 8), 8 + np.arange(8)])
    flip = np.full(22, 0.5)
    zz = np.full(22, 0.15)
    results["xxz_assemble(12870, 22 bonds)"] = timeit(
        lambda: kernels.xxz_assemble(basis.states, sites_a, sites_b, flip, zz), repeat=3
    )

    h = ladder.build_hamiltonian(basis, cfg)
    rng = np.random.default_rng(0)
    x = rng.normal(size=h.dim) + 1j * rng.normal(size=h.dim)
    results["csr_matvec(163k nnz, complex)"] = timeit(
        lambda: kernels.csr_matvec(h.indptr, h.indices, h.data, x), repeat=5, number=20
    )

    projs = ladder.build_projectors(basis)
    perm = np.concatenate([p.indices for p in projs])
    offsets = np.zeros(len(projs) + 1, dtype=np.int64)
    np.cumsum([p.dim for p in projs], out=offsets[1:])
    results["segment_abs2(12870, 9 sets)"] = timeit(
        lambda: kernels.segment_abs2(x, perm, offsets), repeat=5, number=20
    )

    psi = x / np.linalg.norm(x)
    results["krylov_step(dt=0.1, tol=1e-9)"] = timeit(
        lambda: propagation._krylov_step(h.apply, psi, 0.1, 1e-9, 40), repeat=3, number=5
    )

    e_row = rng.normal(size=1200)
    e_col = rng.normal(size=1500)
    w = rng.normal(size=(1200, 1500)) ** 2
    times = np.linspace(0.0, 10.0, 200)
    results["weighted_cos_series(1200x1500x200)"] = timeit(
        lambda: kernels.weighted_cos_series(e_row, e_col, w, times), repeat=3
    )

    return kernels.USING_NUMBA, results


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--compare", action="store_true",
                        help="also run the numpy fallback in a subprocess")
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    args = parser.parse_args()

    using_numba, results = run_benchmarks()
    if args.json:
        print(json.dumps({"numba": using_numba, "timings_s": results}))
        return

    mode = "numba" if using_numba else "numpy"
    columns = {mode: results}
    if args.compare and using_numba:
        env = dict(os.environ, SPINFPE_NO_NUMBA="1")
        out = subprocess.run(
            [sys.executable, __file__, "--json"], env=env, capture_output=True, text=True,
            check=True,
        )
        other = json.loads(out.stdout.strip().splitlines()[-1])
        columns["numpy"] = other["timings_s"]

    names = list(results)
    width = max(len(n) for n in names) + 2
    header = f"{'kernel':<{width}}" + "".join(f"{m:>12}" for m in columns)
    if len(columns) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for name in names:
        row = f"{name:<{width}}"
        for m in columns:
            row += f"{columns[m][name] * 1e3:>10.2f}ms"
        if len(columns) == 2:
            row += f"{columns['numpy'][name] / columns['numba'][name]:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
