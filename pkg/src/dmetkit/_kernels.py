"""Occupation-number kernels.

Fock states are integers; orbital ``k`` (0-based) is bit ``k``.  A creation
or annihilation operator on orbital ``k`` picks up the sign
``(-1)**popcount(s & ((1 << k) - 1))``, i.e. the parity of the occupied
orbitals below ``k``.

Two implementations are kept side by side: numba-compiled loops and a
vectorised pure-numpy path.  The compiled path is the default; set
``DMETKIT_NO_NUMBA=1`` to force the numpy path (the choice is read at call
time from :data:`USE_NUMBA`, so tests and benchmarks may flip it).
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

__all__ = [
    "USE_NUMBA",
    "HAVE_NUMBA",
    "popcount",
    "hamiltonian_coo",
    "one_rdm",
    "hamiltonian_coo_numba",
    "hamiltonian_coo_numpy",
    "one_rdm_numba",
    "one_rdm_numpy",
]

USE_NUMBA = HAVE_NUMBA and os.environ.get("DMETKIT_NO_NUMBA", "").lower() not in ("1", "true", "yes")

_POP16 = np.array([bin(i).count("1") for i in range(1 << 16)], dtype=np.int64)


def popcount(x: np.ndarray) -> np.ndarray:
    """Vectorised population count for non-negative int64 arrays."""
    x = np.asarray(x, dtype=np.int64)
    return (_POP16[x & 0xFFFF] + _POP16[(x >> 16) & 0xFFFF]
            + _POP16[(x >> 32) & 0xFFFF] + _POP16[(x >> 48) & 0xFFFF])


# ---------------------------------------------------------------------------
# numpy path


def _parity_below(s, k):
    return 1 - 2 * (popcount(s & ((1 << k) - 1)) & 1)


def _annihilate(s, sgn, ok, k):
    ok = ok & (((s >> k) & 1) == 1)
    sgn = sgn * _parity_below(s, k)
    return s ^ (1 << k), sgn, ok


def _create(s, sgn, ok, k):
    ok = ok & (((s >> k) & 1) == 0)
    sgn = sgn * _parity_below(s, k)
    return s | (1 << k), sgn, ok


def hamiltonian_coo_numpy(states, lookup, h, V, alpha):
    states = np.asarray(states, dtype=np.int64)
    idx = np.arange(states.size)
    one = np.ones(states.size, dtype=np.int64)
    true = np.ones(states.size, dtype=bool)
    rows, cols, vals = [], [], []

    def emit(s, sgn, ok, coef):
        if not ok.any():
            return
        rows.append(lookup[s[ok]])
        cols.append(idx[ok])
        vals.append(coef * sgn[ok])

    for k, l in zip(*np.nonzero(h)):
        s, sgn, ok = _annihilate(states, one, true, l)
        s, sgn, ok = _create(s, sgn, ok, k)
        emit(s, sgn, ok, h[k, l])
    if alpha != 0.0 and V is not None:
        for ka, la, nu, xi in zip(*np.nonzero(V)):
            if ka == la or nu == xi:
                continue
            s, sgn, ok = _annihilate(states, one, true, nu)
            s, sgn, ok = _annihilate(s, sgn, ok, xi)
            s, sgn, ok = _create(s, sgn, ok, la)
            s, sgn, ok = _create(s, sgn, ok, ka)
            emit(s, sgn, ok, 0.5 * alpha * V[ka, la, nu, xi])
    if not rows:
        return np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0)
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals).astype(float)


def one_rdm_numpy(states, lookup, psi, norb):
    states = np.asarray(states, dtype=np.int64)
    one = np.ones(states.size, dtype=np.int64)
    true = np.ones(states.size, dtype=bool)
    gamma = np.zeros((norb, norb))
    for l in range(norb):
        s1, sg1, ok1 = _annihilate(states, one, true, l)
        for k in range(norb):
            s, sgn, ok = _create(s1, sg1, ok1, k)
            if ok.any():
                gamma[k, l] = np.sum(psi[lookup[s[ok]]] * psi[ok] * sgn[ok])
    return gamma


# ---------------------------------------------------------------------------
# numba path


if HAVE_NUMBA:

    @njit(cache=True)
    def _pc(x):
        c = 0
        while x:
            x &= x - 1
            c += 1
        return c

    @njit(cache=True)
    def _ham_terms(states, lookup, h, V, alpha, two_body, rows, cols, vals, fill):
        m = h.shape[0]
        nnz = 0
        for i in range(states.size):
            s = states[i]
            for l in range(m):
                if not (s >> l) & 1:
                    continue
                s1 = s ^ (1 << l)
                p1 = _pc(s1 & ((1 << l) - 1))
                for k in range(m):
                    hkl = h[k, l]
                    if hkl == 0.0 or (s1 >> k) & 1:
                        continue
                    p2 = _pc(s1 & ((1 << k) - 1))
                    if fill:
                        rows[nnz] = lookup[s1 | (1 << k)]
                        cols[nnz] = i
                        vals[nnz] = -hkl if (p1 + p2) & 1 else hkl
                    nnz += 1
            if not two_body:
                continue
            for nu in range(m):
                if not (s >> nu) & 1:
                    continue
                s1 = s ^ (1 << nu)
                p1 = _pc(s1 & ((1 << nu) - 1))
                for xi in range(m):
                    if not (s1 >> xi) & 1:
                        continue
                    s2 = s1 ^ (1 << xi)
                    p2 = _pc(s2 & ((1 << xi) - 1))
                    for la in range(m):
                        if (s2 >> la) & 1:
                            continue
                        s3 = s2 | (1 << la)
                        p3 = _pc(s2 & ((1 << la) - 1))
                        for ka in range(m):
                            v = V[ka, la, nu, xi]
                            if v == 0.0 or (s3 >> ka) & 1:
                                continue
                            if fill:
                                p4 = _pc(s3 & ((1 << ka) - 1))
                                c = 0.5 * alpha * v
                                rows[nnz] = lookup[s3 | (1 << ka)]
                                cols[nnz] = i
                                vals[nnz] = -c if (p1 + p2 + p3 + p4) & 1 else c
                            nnz += 1
        return nnz

    @njit(cache=True)
    def _ham_terms_listed(states, lookup, one_idx, one_val, two_idx, two_val, rows, cols, vals,
                          fill):
        # same operator, but looping over the listed nonzero integrals only
        nnz = 0
        for i in range(states.size):
            s = states[i]
            for q in range(one_val.size):
                k = one_idx[q, 0]
                l = one_idx[q, 1]
                if not (s >> l) & 1:
                    continue
                s1 = s ^ (1 << l)
                if (s1 >> k) & 1:
                    continue
                if fill:
                    p = _pc(s1 & ((1 << l) - 1)) + _pc(s1 & ((1 << k) - 1))
                    rows[nnz] = lookup[s1 | (1 << k)]
                    cols[nnz] = i
                    vals[nnz] = -one_val[q] if p & 1 else one_val[q]
                nnz += 1
            for q in range(two_val.size):
                ka = two_idx[q, 0]
                la = two_idx[q, 1]
                nu = two_idx[q, 2]
                xi = two_idx[q, 3]
                if not (s >> nu) & 1:
                    continue
                s1 = s ^ (1 << nu)
                if not (s1 >> xi) & 1:
                    continue
                s2 = s1 ^ (1 << xi)
                if (s2 >> la) & 1:
                    continue
                s3 = s2 | (1 << la)
                if (s3 >> ka) & 1:
                    continue
                if fill:
                    p = (_pc(s1 & ((1 << nu) - 1)) + _pc(s2 & ((1 << xi) - 1))
                         + _pc(s2 & ((1 << la) - 1)) + _pc(s3 & ((1 << ka) - 1)))
                    rows[nnz] = lookup[s3 | (1 << ka)]
                    cols[nnz] = i
                    vals[nnz] = -two_val[q] if p & 1 else two_val[q]
                nnz += 1
        return nnz

    @njit(cache=True)
    def _one_rdm(states, lookup, psi, norb):
        gamma = np.zeros((norb, norb))
        for i in range(states.size):
            ci = psi[i]
            if ci == 0.0:
                continue
            s = states[i]
            for l in range(norb):
                if not (s >> l) & 1:
                    continue
                s1 = s ^ (1 << l)
                p1 = _pc(s1 & ((1 << l) - 1))
                for k in range(norb):
                    if (s1 >> k) & 1:
                        continue
                    p2 = _pc(s1 & ((1 << k) - 1))
                    c = ci * psi[lookup[s1 | (1 << k)]]
                    gamma[k, l] += -c if (p1 + p2) & 1 else c
        return gamma


def hamiltonian_coo_numba(states, lookup, h, V, alpha):
    states = np.ascontiguousarray(states, dtype=np.int64)
    lookup = np.ascontiguousarray(lookup, dtype=np.int64)
    h = np.ascontiguousarray(h, dtype=float)
    m = h.shape[0]
    two_body = V is not None and alpha != 0.0
    e_i = np.zeros(0, np.int64)
    e_f = np.zeros(0)
    nz = np.count_nonzero(V) if two_body else 0
    n_typ = int(np.round(np.mean(popcount(states[: min(states.size, 64)])))) if states.size else 0
    if nz < max(n_typ, 1) ** 2 * (m - n_typ + 2) ** 2:
        # sparse integrals: loop over the listed nonzero entries
        one_idx = np.ascontiguousarray(np.argwhere(h != 0.0), dtype=np.int64)
        one_val = np.ascontiguousarray(h[h != 0.0])
        if two_body:
            two_idx = np.argwhere(V != 0.0)
            keep = (two_idx[:, 0] != two_idx[:, 1]) & (two_idx[:, 2] != two_idx[:, 3])
            two_idx = np.ascontiguousarray(two_idx[keep], dtype=np.int64)
            two_val = 0.5 * alpha * V[tuple(two_idx.T)]
        else:
            two_idx = np.zeros((0, 4), np.int64)
            two_val = np.zeros(0)
        two_val = np.ascontiguousarray(two_val, dtype=float)
        n = _ham_terms_listed(states, lookup, one_idx, one_val, two_idx, two_val, e_i, e_i, e_f,
                              False)
        rows = np.empty(n, np.int64)
        cols = np.empty(n, np.int64)
        vals = np.empty(n)
        _ham_terms_listed(states, lookup, one_idx, one_val, two_idx, two_val, rows, cols, vals,
                          True)
        return rows, cols, vals
    Vc = np.ascontiguousarray(V, dtype=float) if two_body else np.zeros((1, 1, 1, 1))
    n = _ham_terms(states, lookup, h, Vc, float(alpha), two_body, e_i, e_i, e_f, False)
    rows = np.empty(n, np.int64)
    cols = np.empty(n, np.int64)
    vals = np.empty(n)
    _ham_terms(states, lookup, h, Vc, float(alpha), two_body, rows, cols, vals, True)
    return rows, cols, vals


def one_rdm_numba(states, lookup, psi, norb):
    return _one_rdm(np.ascontiguousarray(states, dtype=np.int64),
                    np.ascontiguousarray(lookup, dtype=np.int64),
                    np.ascontiguousarray(psi, dtype=float), int(norb))


def hamiltonian_coo(states, lookup, h, V, alpha):
    """Matrix elements of ``sum h a+a + alpha/2 sum V a+a+aa`` as COO triplets.

    Duplicate (row, col) pairs may occur and must be summed by the caller.
    """
    if USE_NUMBA:
        return hamiltonian_coo_numba(states, lookup, h, V, alpha)
    return hamiltonian_coo_numpy(states, lookup, h, V, alpha)


def one_rdm(states, lookup, psi, norb):
    """One-particle density matrix ``<psi| a+_k a_l |psi>`` of a real state."""
    if USE_NUMBA:
        return one_rdm_numba(states, lookup, psi, norb)
    return one_rdm_numpy(states, lookup, psi, norb)
