"""Compare the compiled and numpy Slater-Condon kernels.

    python3 benchmarks/bench_hamiltonian.py [fixture ...]

Reports wall time per backend for the diagonal, dense (when small) and
sparse upper-triangle builds, and checks that both agree.
"""
import sys
import time

import numpy as np

from splitamp.ci import enumerate_determinants
from splitamp.ci.kernels import available_backends, hamiltonian_dense, hamiltonian_diagonal, hamiltonian_upper
from splitamp.workflows import load_basis

DENSE_MAX = 2000


def timed(fn, repeat=3):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench(name):
    basis = load_basis(f"builtin:{name}")
    dets = enumerate_determinants(basis.n_spatial, basis.n_alpha, basis.n_beta)
    bits = np.array([d.bits(basis.n_spatial) for d in dets], dtype=np.uint64)
    rows = []
    results = {}
    for backend, impl in available_backends().items():
        t_diag, diag = timed(lambda: hamiltonian_diagonal(bits, basis.h, basis.g, impl=impl))
        t_up, (r, c, v) = timed(lambda: hamiltonian_upper(bits, basis.h, basis.g, impl=impl), repeat=1)
        t_dense = np.nan
        if len(bits) <= DENSE_MAX:
            t_dense, _ = timed(lambda: hamiltonian_dense(bits, basis.h, basis.g, impl=impl))
        order = np.lexsort((c, r))
        results[backend] = (diag, r[order], c[order], v[order])
        rows.append((backend, t_diag, t_dense, t_up, len(v)))
    ref = next(iter(results.values()))
    for other in results.values():
        assert np.allclose(ref[0], other[0], atol=1e-12)
        assert np.array_equal(ref[1], other[1]) and np.array_equal(ref[2], other[2])
        assert np.allclose(ref[3], other[3], atol=1e-12)
    print(f"{name}: {len(bits)} determinants")
    print(f"  {'backend':8s} {'diag [s]':>10s} {'dense [s]':>10s} {'upper [s]':>10s} {'nnz':>10s}")
    for b, td, tde, tu, nnz in rows:
        print(f"  {b:8s} {td:10.4f} {tde:10.4f} {tu:10.4f} {nnz:10d}")
    if len(rows) == 2:
        print(f"  speedup (upper): {rows[0][3] / rows[1][3]:.1f}x")
    return rows


if __name__ == "__main__":
    for fx in sys.argv[1:] or ["h4_square_sto3g", "lih_sto3g", "h6_chain_sto3g", "n2_sto3g"]:
        bench(fx)
