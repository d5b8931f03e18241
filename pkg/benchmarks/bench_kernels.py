"""Compare the numba kernels with the pure-numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Times Hamiltonian assembly and 1-RDM extraction on the full Fock space of an
impurity (2 N_x orbitals) and on an N-particle sector of a chain, and checks
that both paths give the same matrices.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from dmetkit import _kernels
from dmetkit.fock import FockBasis
from dmetkit.models import hubbard_chain, random_two_body


def best_of(fn, repeat):
    fn()  # warm up (includes compilation for the numba path)
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def cases():
    rng = np.random.default_rng(7)
    for norb in (4, 6, 8):
        h = rng.normal(size=(norb, norb))
        yield f"impurity full space, {norb} orbitals, dense V", FockBasis.full(norb), \
            0.5 * (h + h.T), random_two_body(norb, rng)
    for L in (10, 12):
        p = hubbard_chain(L, L // 2, U=1.0)
        yield f"chain sector L={L} N={L // 2}, bond V", FockBasis.sector(L, L // 2), p.h, p.V


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _kernels.HAVE_NUMBA:
        print("numba is not available; nothing to compare")
        return
    print(f"{'case':48s} {'kernel':10s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s}")
    for name, basis, h, V in cases():
        args_h = (basis.states, basis.lookup, h, V, 1.0)
        t_nb = best_of(lambda: _kernels.hamiltonian_coo_numba(*args_h), args.repeat)
        t_np = best_of(lambda: _kernels.hamiltonian_coo_numpy(*args_h), args.repeat)
        r1, c1, v1 = _kernels.hamiltonian_coo_numba(*args_h)
        r2, c2, v2 = _kernels.hamiltonian_coo_numpy(*args_h)
        n = basis.dim
        H1 = np.zeros((n, n))
        np.add.at(H1, (r1, c1), v1)
        H2 = np.zeros((n, n))
        np.add.at(H2, (r2, c2), v2)
        assert np.allclose(H1, H2, atol=1e-12), name
        print(f"{name:48s} {'H':10s} {1e3 * t_nb:11.3f} {1e3 * t_np:11.3f} {t_np / t_nb:8.1f}")

        psi = np.linalg.eigh(H1)[1][:, 0]
        args_r = (basis.states, basis.lookup, psi, basis.norb)
        t_nb = best_of(lambda: _kernels.one_rdm_numba(*args_r), args.repeat)
        t_np = best_of(lambda: _kernels.one_rdm_numpy(*args_r), args.repeat)
        assert np.allclose(_kernels.one_rdm_numba(*args_r), _kernels.one_rdm_numpy(*args_r),
                           atol=1e-12)
        print(f"{'':48s} {'1-RDM':10s} {1e3 * t_nb:11.3f} {1e3 * t_np:11.3f} {t_np / t_nb:8.1f}")


if __name__ == "__main__":
    main()
