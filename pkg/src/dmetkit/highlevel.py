"""High-level map: impurity ground states with a common chemical potential.

For each fragment the grand-canonical ground state of
``H_imp - mu * N_frag`` is computed on the full impurity Fock space (all
particle numbers).  A single ``mu`` is chosen so the fragment occupations add
up to ``N``; the fragment blocks of the impurity 1-RDMs form the new block
density.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import (BracketFailure, DegenerateGroundState, DegenerateImpurityGroundState,
                     PlateauJump)
from .fock import FockBasis, ManyBodyProblem, ground_state, one_rdm
from .geometry import COMPAT_DELTA, FragmentPartition
from .impurity import ImpurityModel, build_impurity_model, build_mean_field_model
from .meanfield import fock_matrix

log = logging.getLogger(__name__)

MU_TOL = 1e-9
MAX_BISECTIONS = 200
DEGENERACY_TOL = 1e-8


@dataclass
class ImpuritySolution:
    mu: float
    energy: float        # <H_imp> including the environment constant, without -mu N_frag
    rdm: np.ndarray      # impurity-orbital 1-RDM
    gap: float
    count: float         # fragment occupation tr(p rdm)
    psi: np.ndarray | None = field(default=None, repr=False)


class ImpuritySolver:
    """Ground states of ``H_imp - mu N_frag`` for one impurity model.

    ``method="fock"`` diagonalises on the 4^N_x dimensional Fock space;
    ``method="onebody"`` fills the negative orbitals of the one-body operator
    and is only valid for non-interacting models.
    """

    def __init__(self, model: ImpurityModel, method: str = "fock",
                 degeneracy_tol: float = DEGENERACY_TOL):
        self.model = model
        self.degeneracy_tol = degeneracy_tol
        interacting = model.two_body is not None and model.alpha != 0.0
        if method == "auto":
            method = "fock" if interacting else "onebody"
        if method == "onebody" and interacting:
            raise ValueError("one-body impurity solver requested for an interacting model")
        self.method = method
        if method == "fock":
            self.basis = FockBasis.full(model.norb)
            self.H = model.fock_hamiltonian(self.basis)
            self.Nf = model.fragment_number_operator(self.basis)

    def solve(self, mu: float) -> ImpuritySolution:
        m = self.model
        if self.method == "onebody":
            w, v = np.linalg.eigh(m.one_body - mu * m.frag_projector)
            gap = float(np.min(np.abs(w)))
            if gap < self.degeneracy_tol:
                raise DegenerateImpurityGroundState(gap, self.degeneracy_tol, m.fragment, mu)
            occ = v[:, w < 0]
            rdm = occ @ occ.T
            energy = float(np.sum(m.one_body * rdm)) + m.e_env
            return ImpuritySolution(mu, energy, rdm, gap, float(np.sum(m.frag_projector * rdm)))
        try:
            e, psi, gap = ground_state(self.H - mu * self.Nf, self.degeneracy_tol)
        except DegenerateGroundState as err:
            raise DegenerateImpurityGroundState(err.gap, err.tol, m.fragment, mu) from None
        rdm = one_rdm(psi, self.basis)
        count = float(np.sum(m.frag_projector * rdm))
        return ImpuritySolution(mu, e + mu * count + m.e_env, rdm, gap, count, psi)


def total_count(solvers, mu: float) -> tuple[float, list[ImpuritySolution]]:
    sols = [s.solve(mu) for s in solvers]
    return sum(s.count for s in sols), sols


def match_chemical_potential(solvers, n_target: float, tol: float = MU_TOL, mu0: float = 0.0,
                             limit: float | None = None, max_iter: int = MAX_BISECTIONS):
    """Find ``mu`` with total fragment occupation ``n_target`` to within ``tol``.

    The occupation is nondecreasing in ``mu``.  The bracket grows geometrically
    from ``mu0 +- 1`` up to ``limit``; the root is then located with Brent's
    method.  Returns ``(mu, solutions)``.
    """
    if limit is None:
        limit = 1e3
    cache: dict[float, tuple[float, list]] = {}

    def evaluate(mu):
        if mu not in cache:
            err = None
            # a level crossing sits (almost) at this mu: step off it
            for shift in (0.0, 1e-8, 1e-6, 1e-4):
                try:
                    cache[mu] = total_count(solvers, mu + shift * (1 + abs(mu)))
                    break
                except DegenerateImpurityGroundState as e:
                    err = e
            else:
                raise err
        return cache[mu]

    c0, sols = evaluate(mu0)
    if abs(c0 - n_target) <= tol:
        return mu0, sols
    lo = hi = mu0
    clo = chi = c0
    step = 1.0
    while clo >= n_target or chi <= n_target:
        if step > 2 * limit:
            raise BracketFailure(mu0 - step / 2, mu0 + step / 2, (clo, chi))
        if clo >= n_target:
            lo = mu0 - step
            clo, sols = evaluate(lo)
            if abs(clo - n_target) <= tol:
                return lo, sols
        if chi <= n_target:
            hi = mu0 + step
            chi, sols = evaluate(hi)
            if abs(chi - n_target) <= tol:
                return hi, sols
        step *= 2.0

    f = lambda mu: evaluate(mu)[0] - n_target
    mu, info = brentq(f, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=max_iter, full_output=True,
                      disp=False)
    c, sols = evaluate(mu)
    if abs(c - n_target) > tol:
        # Brent collapsed onto a discontinuity of the occupation curve
        left = max((m for m in cache if m < mu and cache[m][0] < n_target), default=lo)
        right = min((m for m in cache if m > mu and cache[m][0] > n_target), default=hi)
        raise PlateauJump(left, right, cache[left][0], cache[right][0], n_target)
    return mu, sols


@dataclass
class HighLevelResult:
    P: np.ndarray
    mu: float
    blocks: list[np.ndarray]
    solutions: list[ImpuritySolution]
    models: list[ImpurityModel] = field(repr=False)

    @property
    def energies(self) -> list[float]:
        return [s.energy for s in self.solutions]

    @property
    def gaps(self) -> list[float]:
        return [s.gap for s in self.solutions]


def _mu_limit(problem: ManyBodyProblem) -> float:
    return 2 * np.linalg.norm(problem.h, 2) + abs(problem.alpha) * np.linalg.norm(problem.V) + 1.0


def assemble_result(models, mu, sols, partition: FragmentPartition) -> HighLevelResult:
    blocks = [m.fragment_block(s.rdm) for m, s in zip(models, sols)]
    blocks = [0.5 * (b + b.T) for b in blocks]
    return HighLevelResult(partition.from_blocks(blocks), mu, blocks, sols, models)


def solve_models(models, partition, n_target, tol=MU_TOL, mu0=0.0, limit=1e3,
                 method="fock") -> HighLevelResult:
    solvers = [ImpuritySolver(m, method) for m in models]
    mu, sols = match_chemical_potential(solvers, n_target, tol, mu0, limit)
    return assemble_result(models, mu, sols, partition)


def high_level_map(problem: ManyBodyProblem, D: np.ndarray, tol: float = MU_TOL,
                   mu0: float = 0.0, method: str = "fock",
                   delta: float = COMPAT_DELTA) -> HighLevelResult:
    """Interacting high-level map ``D -> P``."""
    part = problem.partition
    models = [build_impurity_model(problem, D, x, delta=delta) for x in part]
    return solve_models(models, part, problem.N, tol, mu0, _mu_limit(problem), method)


def high_level_map_hf(problem: ManyBodyProblem, D: np.ndarray, tol: float = MU_TOL,
                      mu0: float = 0.0, delta: float = COMPAT_DELTA) -> HighLevelResult:
    """High-level map with the impurity problems replaced by their mean-field version.

    The impurity one-body operator is the Fock matrix of ``D`` projected on the
    impurity orbitals; no two-body term is kept.
    """
    part = problem.partition
    F = fock_matrix(problem.h, problem.V, problem.alpha, D)
    models = [build_mean_field_model(F, part, D, x, delta=delta) for x in part]
    return solve_models(models, part, problem.N, tol, mu0, _mu_limit(problem), "onebody")


def frozen_high_level_map(h_eff: np.ndarray, partition: FragmentPartition, D0: np.ndarray,
                          n_target: int, tol: float = 1e-13, mu0: float = 0.0,
                          bases=None) -> HighLevelResult:
    """Non-interacting high-level map with impurity orbitals frozen at ``D0``."""
    models = [build_mean_field_model(h_eff, partition, D0, x,
                                     basis=None if bases is None else bases[x])
              for x in partition]
    return solve_models(models, partition, n_target, tol, mu0, 1e3, "onebody")
