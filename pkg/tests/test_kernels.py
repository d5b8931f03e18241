import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dmetkit import _kernels
from dmetkit.fock import FockBasis
from dmetkit.models import hubbard_chain, random_two_body

pytestmark = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba unavailable")


def dense(coo, n):
    H = np.zeros((n, n))
    np.add.at(H, coo[:2], coo[2])
    return H


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), L=st.integers(2, 6), data=st.data(),
       sparse_v=st.booleans())
def test_numba_matches_numpy(seed, L, data, sparse_v):
    rng = np.random.default_rng(seed)
    n = data.draw(st.integers(0, L))
    b = FockBasis.sector(L, n) if data.draw(st.booleans()) else FockBasis.full(L)
    h = rng.normal(size=(L, L))
    h = h + h.T
    V = hubbard_chain(L, 1, U=1.3, fragment_size=None).V if sparse_v else random_two_body(L, rng)
    a = _kernels.hamiltonian_coo_numba(b.states, b.lookup, h, V, 0.8)
    c = _kernels.hamiltonian_coo_numpy(b.states, b.lookup, h, V, 0.8)
    assert np.allclose(dense(a, b.dim), dense(c, b.dim), atol=1e-12)
    psi = rng.normal(size=b.dim)
    assert np.allclose(_kernels.one_rdm_numba(b.states, b.lookup, psi, L),
                       _kernels.one_rdm_numpy(b.states, b.lookup, psi, L), atol=1e-12)


def test_popcount():
    x = np.array([0, 1, 3, 255, 2**40 + 7, 2**62 - 1])
    assert list(_kernels.popcount(x)) == [bin(int(v)).count("1") for v in x]


def test_env_flag_selects_numpy(monkeypatch):
    import importlib
    monkeypatch.setenv("DMETKIT_NO_NUMBA", "1")
    mod = importlib.reload(_kernels)
    try:
        assert mod.USE_NUMBA is False
    finally:
        monkeypatch.delenv("DMETKIT_NO_NUMBA")
        importlib.reload(_kernels)
    assert _kernels.USE_NUMBA is True
