import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dmetkit.errors import GaplessSpectrum, IncompatibleFragment, InvalidInput
from dmetkit.geometry import (ConstraintSpace, FragmentPartition, aufbau_projector, bd,
                              compatibility, compatibility_conditions, occupied_virtual_basis,
                              require_compatible, tangent_map, tangent_vector)
from dmetkit.models import chain_hopping

from conftest import random_projector

sizes_st = st.lists(st.integers(1, 3), min_size=1, max_size=4)


def test_partition_offsets_and_blocks():
    part = FragmentPartition([2, 1, 3])
    assert part.L == 6
    assert list(part.offsets[:3]) == [0, 2, 3]
    M = np.arange(36.0).reshape(6, 6)
    blocks = part.blocks(M)
    assert [b.shape for b in blocks] == [(2, 2), (1, 1), (3, 3)]
    assert np.array_equal(part.from_blocks(blocks), bd(M, part))
    assert part.dim_constraints == 3 + 1 + 6 - 1


def test_partition_rejects_bad_sizes():
    with pytest.raises((InvalidInput, ValueError)):
        FragmentPartition([2, 0])


@settings(max_examples=40, deadline=None)
@given(sizes=sizes_st, seed=st.integers(0, 10**6))
def test_bd_is_orthogonal_projection(sizes, seed):
    part = FragmentPartition(sizes)
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(part.L, part.L))
    B = rng.normal(size=(part.L, part.L))
    assert np.allclose(bd(bd(A, part), part), bd(A, part))
    # self-adjoint for the Frobenius inner product
    assert np.sum(bd(A, part) * B) == pytest.approx(np.sum(A * bd(B, part)), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(sizes=sizes_st, seed=st.integers(0, 10**6))
def test_constraint_space_orthonormal_traceless(sizes, seed):
    part = FragmentPartition(sizes)
    sp = ConstraintSpace(part)
    B = sp.basis.reshape(sp.dim, part.L ** 2)
    assert sp.dim == sum(n * (n + 1) // 2 for n in sizes) - 1
    assert np.allclose(B @ B.T, np.eye(sp.dim), atol=1e-12)
    for b in sp.basis:
        assert abs(np.trace(b)) < 1e-12
        assert np.allclose(b, b.T)
        assert np.allclose(bd(b, part), b)
    rng = np.random.default_rng(seed)
    Y = rng.normal(size=(part.L, part.L))
    Y = bd(Y + Y.T, part)
    Y -= np.trace(Y) / part.L * np.eye(part.L)
    assert np.allclose(sp.matrix(sp.coords(Y)), Y, atol=1e-12)


def test_aufbau_dimer():
    h = np.array([[0.0, -1.0], [-1.0, 0.0]])
    D, gap = aufbau_projector(h, 1)
    assert np.allclose(D, 0.5 * np.ones((2, 2)), atol=1e-14)
    assert gap == pytest.approx(2.0)


def test_aufbau_gapless_raises():
    with pytest.raises(GaplessSpectrum):
        aufbau_projector(chain_hopping(4, periodic=True), 2)


def test_compatibility_of_chain_ground_state():
    part = FragmentPartition([2, 2, 2, 2])
    D, _ = aufbau_projector(chain_hopping(8), 4)
    rep = require_compatible(D, part)
    assert rep.compatible and rep.min_margin > 0.05


def test_incompatible_fragment_reported():
    # site 1 decoupled and fully occupied
    D = np.diag([1.0, 0.0, 0.0, 0.0])
    D[2:, 2:] = 0.0
    part = FragmentPartition([1, 1, 2])
    with pytest.raises(IncompatibleFragment) as err:
        require_compatible(D, part)
    assert err.value.fragment == 0
    assert not compatibility(D, part).compatible


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), L=st.integers(3, 7), data=st.data())
def test_compatibility_conditions_agree(seed, L, data):
    rng = np.random.default_rng(seed)
    N = data.draw(st.integers(1, L - 1))
    cut = data.draw(st.integers(1, L - 1))
    part = FragmentPartition([cut, L - cut])
    D = random_projector(rng, L, N)
    if data.draw(st.booleans()):
        # force a boundary case: decouple one site into Ran D or its complement
        occ = data.draw(st.booleans())
        D[0, :] = D[:, 0] = 0.0
        w, v = np.linalg.eigh(D[1:, 1:])
        k = N - 1 if occ else N
        k = min(max(k, 0), L - 1)
        sub = v[:, -k:] if k else np.zeros((L - 1, 0))
        D = np.zeros((L, L))
        D[1:, 1:] = sub @ sub.T if k else 0.0
        if occ:
            D[0, 0] = 1.0
    cond = compatibility_conditions(D, part)
    assert len(set(cond.values())) == 1, cond


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), L=st.integers(2, 6), data=st.data())
def test_tangent_map_is_projector_chart(seed, L, data):
    rng = np.random.default_rng(seed)
    N = data.draw(st.integers(1, L - 1))
    D = random_projector(rng, L, N)
    phi, n = occupied_virtual_basis(D)
    assert n == N
    assert np.allclose(tangent_map(np.zeros((L - N, N)), phi), D, atol=1e-12)
    X = rng.normal(size=(L - N, N))
    X *= 0.45 / np.linalg.norm(X, 2)
    F = tangent_map(X, phi)
    assert np.allclose(F @ F, F, atol=1e-12)
    assert np.allclose(F, F.T, atol=1e-13)
    assert np.trace(F) == pytest.approx(N, abs=1e-12)
    # differential at the origin
    t = 1e-6
    fd = (tangent_map(t * X, phi) - tangent_map(-t * X, phi)) / (2 * t)
    assert np.allclose(fd, tangent_vector(X, phi), atol=1e-8)


def test_tangent_map_rejects_large_coordinates():
    phi = np.eye(3)
    with pytest.raises(InvalidInput):
        tangent_map(np.full((2, 1), 0.5), phi)
