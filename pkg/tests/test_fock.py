import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dmetkit import fock
from dmetkit.errors import DegenerateGroundState, InvalidInput
from dmetkit.fock import (FockBasis, ManyBodyProblem, assemble_hamiltonian, assemble_operator,
                          creation_operator, ground_state, one_rdm, solve_sector)
from dmetkit.models import random_two_body


def reference_hamiltonian(h, V, alpha, norb):
    """Dense H from explicit products of creation/annihilation matrices."""
    A = [creation_operator(norb, k) for k in range(norb)]
    a = [x.T for x in A]
    H = sum(h[k, l] * A[k] @ a[l] for k in range(norb) for l in range(norb))
    for k in range(norb):
        for l in range(norb):
            for n in range(norb):
                for x in range(norb):
                    if V[k, l, n, x] != 0.0:
                        H = H + 0.5 * alpha * V[k, l, n, x] * A[k] @ A[l] @ a[x] @ a[n]
    return H


def test_anticommutators_exact():
    L = 4
    A = [creation_operator(L, k) for k in range(L)]
    eye = np.eye(1 << L)
    for i in range(L):
        for j in range(L):
            assert np.array_equal(A[i].T @ A[j] + A[j] @ A[i].T, eye * (i == j))
            assert np.array_equal(A[i] @ A[j] + A[j] @ A[i], 0 * eye)


def test_creation_sign_counts_lower_orbitals():
    # orbital 1 occupied (bit 0); creating orbital 2 passes one fermion
    A2 = creation_operator(2, 1)
    assert A2[0b11, 0b01] == -1.0
    A1 = creation_operator(2, 0)
    assert A1[0b11, 0b10] == 1.0


def test_sector_dimensions():
    b = FockBasis.sector(8, 4)
    assert b.dim == 70
    assert np.all(b.lookup[b.states] == np.arange(70))
    assert FockBasis.full(4).dim == 16


def test_hamiltonian_matches_operator_products(rng, kernel_path):
    L = 4
    h = rng.normal(size=(L, L))
    h = h + h.T
    V = random_two_body(L, rng)
    H = assemble_operator(h, V, 0.7, FockBasis.full(L))
    assert np.allclose(H, reference_hamiltonian(h, V, 0.7, L), atol=1e-12)


def test_sector_block_of_full_hamiltonian(rng, kernel_path):
    L = 5
    h = rng.normal(size=(L, L))
    h = h + h.T
    V = random_two_body(L, rng)
    full = assemble_operator(h, V, 1.3, FockBasis.full(L))
    for n in range(L + 1):
        b = FockBasis.sector(L, n)
        Hs = assemble_operator(h, V, 1.3, b)
        assert np.allclose(Hs, full[np.ix_(b.states, b.states)], atol=1e-12)


def test_two_site_density_interaction_energy():
    # V[1,2,1,2] = V[2,1,2,1] = U with h = 0: |11> has energy U
    U = 0.8
    V = np.zeros((2,) * 4)
    V[0, 1, 0, 1] = V[1, 0, 1, 0] = U
    p = ManyBodyProblem(np.zeros((2, 2)), V, 1, 1.0)
    H = assemble_hamiltonian(p, FockBasis.sector(2, 2))
    assert H.shape == (1, 1)
    assert H[0, 0] == pytest.approx(U, abs=1e-14)


def test_two_site_hopping():
    h = np.array([[0.0, -1.0], [-1.0, 0.0]])
    p = ManyBodyProblem(h, None, 1, 1.0)
    s = solve_sector(p)
    assert s.energy == pytest.approx(-1.0, abs=1e-14)
    assert s.gap == pytest.approx(2.0, abs=1e-14)
    assert np.allclose(s.rdm1, 0.5 * np.ones((2, 2)))


def test_spinful_dimer_singlet_energy():
    # two sites x two spins as four spin orbitals (1u, 1d, 2u, 2d), on-site U=1, t=1
    h = np.zeros((4, 4))
    for s in range(2):
        h[s, 2 + s] = h[2 + s, s] = -1.0
    V = np.zeros((4,) * 4)
    for i in range(2):
        u, d = 2 * i, 2 * i + 1
        V[u, d, u, d] = V[d, u, d, u] = 1.0
    e = solve_sector(ManyBodyProblem(h, V, 2, 1.0)).energy
    assert e == pytest.approx((1 - np.sqrt(17)) / 2, abs=1e-12)


def test_degenerate_ground_state_raises():
    # two decoupled equal levels, one particle
    p = ManyBodyProblem(np.diag([-1.0, -1.0, 1.0]), None, 1)
    with pytest.raises(DegenerateGroundState):
        solve_sector(p)


def test_one_rdm_trace_and_hermiticity(rng, kernel_path):
    L, N = 6, 3
    h = rng.normal(size=(L, L))
    p = ManyBodyProblem(h + h.T, random_two_body(L, rng, 0.5), N, 1.0)
    s = solve_sector(p)
    assert np.trace(s.rdm1) == pytest.approx(N, abs=1e-12)
    assert np.allclose(s.rdm1, s.rdm1.T, atol=1e-13)
    w = np.linalg.eigvalsh(s.rdm1)
    assert w.min() > -1e-12 and w.max() < 1 + 1e-12


def test_one_rdm_against_operator_expectations(rng):
    L = 4
    psi = rng.normal(size=1 << L)
    psi /= np.linalg.norm(psi)
    A = [creation_operator(L, k) for k in range(L)]
    ref = np.array([[psi @ A[k] @ A[l].T @ psi for l in range(L)] for k in range(L)])
    assert np.allclose(one_rdm(psi, FockBasis.full(L)), ref, atol=1e-13)


def test_lanczos_path_matches_dense(rng, monkeypatch):
    L, N = 8, 4
    h = rng.normal(size=(L, L))
    p = ManyBodyProblem(h + h.T, random_two_body(L, rng, 0.3), N, 1.0)
    e_dense = solve_sector(p).energy
    monkeypatch.setattr(fock, "DENSE_LIMIT", 10)
    H = assemble_hamiltonian(p)
    assert hasattr(H, "tocsr")
    e_sparse, _, _ = ground_state(H)
    assert e_sparse == pytest.approx(e_dense, abs=1e-10)


def test_problem_validation(rng):
    L = 3
    V = rng.normal(size=(L,) * 4)
    with pytest.raises(InvalidInput):
        ManyBodyProblem(np.eye(L), V, 1)
    with pytest.raises(InvalidInput):
        ManyBodyProblem(np.eye(L), None, 0)
    with pytest.raises(InvalidInput):
        ManyBodyProblem(np.eye(L), None, L)
    with pytest.raises(InvalidInput):
        ManyBodyProblem(np.triu(np.ones((L, L))), None, 1)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(0, 4), alpha=st.floats(-2, 2))
def test_hamiltonian_symmetric_and_number_conserving(seed, n, alpha):
    rng = np.random.default_rng(seed)
    L = 4
    h = rng.normal(size=(L, L))
    h = h + h.T
    V = random_two_body(L, rng)
    H = assemble_operator(h, V, alpha, FockBasis.full(L))
    assert np.allclose(H, H.T, atol=1e-12)
    num = np.diag([bin(s).count("1") for s in range(1 << L)]).astype(float)
    assert np.allclose(H @ num, num @ H, atol=1e-12)
