import numpy as np
import pytest

from dmetkit.errors import BracketFailure, DegenerateImpurityGroundState, PlateauJump
from dmetkit.geometry import FragmentPartition, aufbau_projector, bd
from dmetkit.highlevel import (ImpuritySolver, high_level_map, high_level_map_hf,
                               match_chemical_potential, total_count)
from dmetkit.impurity import ImpurityModel, build_impurity_basis, build_impurity_model
from dmetkit.models import hubbard_chain


def toy_model(one_body, frag_projector, two_body=None, alpha=0.0):
    return ImpurityModel(0, np.asarray(one_body, float), two_body, alpha, 0.0,
                         np.asarray(frag_projector, float))


@pytest.mark.parametrize("method", ["fock", "onebody"])
def test_negative_orbital_is_occupied(method):
    th = 0.3
    v = np.array([np.cos(th), np.sin(th)])
    sol = ImpuritySolver(toy_model(np.diag([-1.0, 1.0]), np.outer(v, v)), method).solve(0.0)
    assert np.allclose(sol.rdm, np.diag([1.0, 0.0]), atol=1e-13)
    assert sol.count == pytest.approx(np.cos(th) ** 2)
    assert sol.energy == pytest.approx(-1.0)


def test_fock_and_onebody_solvers_agree(rng):
    p = hubbard_chain(8, 4, U=0.0, alpha=0.0)
    D0, _ = aufbau_projector(p.h, 4)
    D = D0 + 0.0
    for x in p.partition:
        m = build_impurity_model(p, D, x)
        for mu in (-0.7, 0.1, 0.9):
            a = ImpuritySolver(m, "fock").solve(mu)
            b = ImpuritySolver(m, "onebody").solve(mu)
            assert np.allclose(a.rdm, b.rdm, atol=1e-10)
            assert a.energy == pytest.approx(b.energy, abs=1e-10)


def test_onebody_solver_rejects_interacting_model():
    p = hubbard_chain(8, 4, U=1.0)
    D0, _ = aufbau_projector(p.h, 4)
    with pytest.raises(ValueError):
        ImpuritySolver(build_impurity_model(p, D0, 0), "onebody")


def test_degenerate_impurity_level_raises():
    m = toy_model(np.diag([0.0, 1.0]), np.diag([1.0, 0.0]))
    with pytest.raises(DegenerateImpurityGroundState):
        ImpuritySolver(m, "fock").solve(0.0)


def test_aufbau_fixed_point_of_noninteracting_map():
    p = hubbard_chain(8, 4, U=0.0)
    D0, _ = aufbau_projector(p.h, 4)
    res = high_level_map(p, D0, tol=1e-12)
    assert abs(res.mu) < 1e-9
    assert np.linalg.norm(res.P - bd(D0, p.partition)) < 1e-9
    for x, s in zip(p.partition, res.solutions):
        nx = p.partition.sizes[x]
        ref = np.zeros((2 * nx, 2 * nx))
        ref[:nx, :nx] = np.eye(nx)
        assert np.allclose(s.rdm, ref, atol=1e-10)


def test_interacting_result_is_a_block_density():
    p = hubbard_chain(8, 4, U=1.0, alpha=0.3)
    D0, _ = aufbau_projector(p.h, 4)
    res = high_level_map(p, D0, tol=1e-12)
    assert np.trace(res.P) == pytest.approx(4.0, abs=1e-9)
    assert np.allclose(res.P, bd(res.P, p.partition))
    for b in res.blocks:
        w = np.linalg.eigvalsh(b)
        assert np.allclose(b, b.T) and w.min() > -1e-12 and w.max() < 1 + 1e-12


def test_fragment_block_two_routes():
    p = hubbard_chain(8, 4, U=1.0, alpha=0.5)
    D0, _ = aufbau_projector(p.h, 4)
    res = high_level_map(p, D0, tol=1e-12)
    for x, (m, s) in enumerate(zip(res.models, res.solutions)):
        tb = build_impurity_basis(D0, p.partition, x)
        U = tb.C_tilde.T @ m.C
        nx = p.partition.sizes[x]
        assert np.allclose((U @ s.rdm @ U.T)[:nx, :nx], res.blocks[x], atol=1e-11)


def test_occupation_monotone_in_mu():
    p = hubbard_chain(6, 3, U=1.0, periodic=True, alpha=0.5)
    D0, _ = aufbau_projector(p.h, 3)
    solver = ImpuritySolver(build_impurity_model(p, D0, 0))
    counts = []
    for mu in np.linspace(-4, 4, 401):
        try:
            counts.append(solver.solve(mu).count)
        except DegenerateImpurityGroundState:
            continue
    assert np.all(np.diff(counts) >= -1e-12)


def test_chemical_potential_against_dense_scan():
    p = hubbard_chain(6, 3, U=1.0, periodic=True, alpha=0.5)
    D0, _ = aufbau_projector(p.h, 3)
    solvers = [ImpuritySolver(build_impurity_model(p, D0, x)) for x in p.partition]
    mu, sols = match_chemical_potential(solvers, 3.0, tol=1e-12)
    assert abs(sum(s.count for s in sols) - 3.0) < 1e-9
    grid = mu + np.arange(-0.05, 0.05 + 1e-12, 1e-4)
    counts = np.array([total_count(solvers, g)[0] for g in grid])
    k = int(np.argmax(counts >= 3.0))
    assert 0 < k and grid[k - 1] <= mu + 1e-12 and mu <= grid[k] + 1e-12


def test_count_constant_on_plateau():
    # fragment orbitals decoupled and bound: any mu above the plateau edge gives the same P
    one = np.diag([-2.0, -1.0, 3.0, 4.0])
    frag = np.diag([1.0, 1.0, 0.0, 0.0])
    solver = ImpuritySolver(toy_model(one, frag), "fock")
    a, b = solver.solve(1.0), solver.solve(5.0)
    assert a.count == b.count == pytest.approx(2.0)
    assert np.array_equal(a.rdm, b.rdm)


def test_bracket_failure_for_unreachable_target():
    m = toy_model(np.diag([-1.0, 1.0]), np.diag([1.0, 0.0]))
    with pytest.raises(BracketFailure):
        match_chemical_potential([ImpuritySolver(m, "onebody")], 1.5, limit=10.0)


def test_plateau_jump_reports_interval():
    # strong coupling from the non-interacting density: the count jumps over N
    p = hubbard_chain(8, 4, U=1.0, alpha=1.0)
    D0, _ = aufbau_projector(p.h, 4)
    with pytest.raises(PlateauJump) as err:
        high_level_map(p, D0, tol=1e-12)
    lo, hi = err.value.interval
    c_lo, c_hi = err.value.counts
    assert lo < hi and c_lo < 4.0 < c_hi


def test_mean_field_high_level_map_reproduces_hf_density():
    from dmetkit.lowlevel import global_hf
    p = hubbard_chain(8, 4, U=1.0, alpha=0.7)
    hf = global_hf(p, tol=1e-12)
    res = high_level_map_hf(p, hf.D, tol=1e-13)
    assert np.linalg.norm(res.P - bd(hf.D, p.partition)) < 1e-9
