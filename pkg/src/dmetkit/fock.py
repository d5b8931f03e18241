"""Second-quantised Hamiltonians on occupation-number bases.

The Hamiltonian family is

    H_alpha = sum_{kl} h[k,l] a+_k a_l
              + alpha/2 sum_{klnx} V[k,l,n,x] a+_k a+_l a_x a_n

with real symmetric ``h`` and a two-body tensor obeying
``V[k,l,n,x] = V[n,l,k,x] = V[k,x,n,l] = V[n,x,k,l]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import comb

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels
from .errors import DegenerateGroundState, InvalidInput
from .geometry import FragmentPartition

DENSE_LIMIT = 4096
SYMMETRY_TOL = 1e-12
MAX_ORBITALS = 24

# index permutations of V that must leave it invariant
V_SYMMETRIES = ((2, 1, 0, 3), (0, 3, 2, 1), (2, 3, 0, 1))


def check_two_body_symmetry(V: np.ndarray, tol: float = SYMMETRY_TOL) -> float:
    """Largest violation of the mandated index symmetries; raise above ``tol``."""
    worst = 0.0
    for perm in V_SYMMETRIES:
        diff = np.max(np.abs(V - V.transpose(perm))) if V.size else 0.0
        worst = max(worst, float(diff))
    if worst > tol:
        raise InvalidInput(f"two-body tensor violates index symmetry by {worst:.3e}")
    return worst


@dataclass
class ManyBodyProblem:
    h: np.ndarray
    V: np.ndarray
    N: int
    alpha: float = 1.0
    partition: FragmentPartition | None = None
    name: str = ""
    constant: float = 0.0

    def __post_init__(self):
        self.h = np.array(self.h, dtype=float)
        L = self.h.shape[0]
        if self.h.ndim != 2 or self.h.shape != (L, L):
            raise InvalidInput(f"one-body matrix must be square, got {self.h.shape}")
        if L > MAX_ORBITALS:
            raise InvalidInput(f"at most {MAX_ORBITALS} orbitals are supported, got {L}")
        asym = float(np.max(np.abs(self.h - self.h.T))) if L else 0.0
        if asym > SYMMETRY_TOL:
            raise InvalidInput(f"one-body matrix is not symmetric ({asym:.3e})")
        if self.V is None:
            self.V = np.zeros((L,) * 4)
        self.V = np.array(self.V, dtype=float)
        if self.V.shape != (L,) * 4:
            raise InvalidInput(f"two-body tensor must have shape {(L,) * 4}, got {self.V.shape}")
        check_two_body_symmetry(self.V)
        self.N = int(self.N)
        if not 1 <= self.N < L:
            raise InvalidInput(f"need 1 <= N < L, got N={self.N}, L={L}")
        self.alpha = float(self.alpha)
        if self.partition is not None and not isinstance(self.partition, FragmentPartition):
            self.partition = FragmentPartition(self.partition)
        if self.partition is not None and self.partition.L != L:
            raise InvalidInput(f"partition covers {self.partition.L} sites, problem has {L}")

    @property
    def L(self) -> int:
        return self.h.shape[0]

    def with_alpha(self, alpha: float) -> "ManyBodyProblem":
        return replace(self, alpha=float(alpha))


@dataclass
class FockBasis:
    """Ordered list of occupation bit strings with a reverse lookup table."""

    norb: int
    states: np.ndarray
    lookup: np.ndarray = field(repr=False)
    n_particles: int | None = None

    @classmethod
    def full(cls, norb: int) -> "FockBasis":
        if norb > MAX_ORBITALS:
            raise InvalidInput(f"Fock space over {norb} orbitals is too large")
        states = np.arange(1 << norb, dtype=np.int64)
        return cls(norb, states, states.copy(), None)

    @classmethod
    def sector(cls, norb: int, n: int) -> "FockBasis":
        if norb > MAX_ORBITALS:
            raise InvalidInput(f"Fock space over {norb} orbitals is too large")
        if not 0 <= n <= norb:
            raise InvalidInput(f"sector n={n} outside [0, {norb}]")
        allstates = np.arange(1 << norb, dtype=np.int64)
        states = allstates[_kernels.popcount(allstates) == n]
        lookup = np.full(1 << norb, -1, dtype=np.int64)
        lookup[states] = np.arange(states.size)
        assert states.size == comb(norb, n)
        return cls(norb, states, lookup, n)

    @property
    def dim(self) -> int:
        return int(self.states.size)

    def occupations(self) -> np.ndarray:
        """(dim, norb) 0/1 table of orbital occupations."""
        return ((self.states[:, None] >> np.arange(self.norb)) & 1).astype(np.int8)


def assemble_operator(h, V, alpha, basis: FockBasis, sparse: bool | None = None):
    """Matrix of a number-conserving one- plus two-body operator on ``basis``."""
    h = np.asarray(h, dtype=float)
    if h.shape != (basis.norb, basis.norb):
        raise InvalidInput(f"one-body matrix shape {h.shape} does not match {basis.norb} orbitals")
    rows, cols, vals = _kernels.hamiltonian_coo(basis.states, basis.lookup, h, V, float(alpha))
    n = basis.dim
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(n, n))
    if sparse is None:
        sparse = n > DENSE_LIMIT
    return mat.tocsr() if sparse else mat.toarray()


def assemble_hamiltonian(problem: ManyBodyProblem, basis: FockBasis | None = None,
                         sparse: bool | None = None):
    """Hamiltonian of ``problem`` in its N-particle sector (or on ``basis``)."""
    if basis is None:
        basis = FockBasis.sector(problem.L, problem.N)
    return assemble_operator(problem.h, problem.V, problem.alpha, basis, sparse)


def creation_operator(norb: int, k: int) -> np.ndarray:
    """Dense matrix of ``a+_k`` on the full Fock space of ``norb`` orbitals."""
    s = np.arange(1 << norb, dtype=np.int64)
    free = ((s >> k) & 1) == 0
    sign = 1 - 2 * (_kernels.popcount(s & ((1 << k) - 1)) & 1)
    A = np.zeros((1 << norb, 1 << norb))
    A[s[free] | (1 << k), s[free]] = sign[free]
    return A


def ground_state(H, degeneracy_tol: float = 1e-8, where: str = "many-body"):
    """Lowest eigenpair of a symmetric matrix and the gap to the next level.

    Raises ``DegenerateGroundState`` when the gap is below ``degeneracy_tol``.
    """
    n = H.shape[0]
    if n == 1:
        e = float(H[0, 0]) if not sp.issparse(H) else float(H.toarray()[0, 0])
        return e, np.ones(1), np.inf
    if sp.issparse(H) and n > DENSE_LIMIT:
        w, v = spla.eigsh(H, k=2, which="SA", tol=1e-13)
        order = np.argsort(w)
        w, v = w[order], v[:, order]
    else:
        Hd = H.toarray() if sp.issparse(H) else H
        w, v = np.linalg.eigh(Hd)
    gap = float(w[1] - w[0])
    if gap < degeneracy_tol:
        raise DegenerateGroundState(gap, degeneracy_tol, where)
    psi = v[:, 0]
    j = np.flatnonzero(np.abs(psi) > 1e-12)[0]
    if psi[j] < 0:
        psi = -psi
    return float(w[0]), psi, gap


def one_rdm(psi: np.ndarray, basis: FockBasis) -> np.ndarray:
    """``gamma[k, l] = <psi| a+_k a_l |psi>`` for a real normalised state."""
    return _kernels.one_rdm(basis.states, basis.lookup, np.asarray(psi, dtype=float), basis.norb)


@dataclass
class SectorSolution:
    energy: float
    psi: np.ndarray
    rdm1: np.ndarray
    gap: float
    basis: FockBasis = field(repr=False)


def solve_sector(problem: ManyBodyProblem, degeneracy_tol: float = 1e-8) -> SectorSolution:
    """Exact ground state of ``problem`` in its N-particle sector."""
    basis = FockBasis.sector(problem.L, problem.N)
    H = assemble_hamiltonian(problem, basis)
    e, psi, gap = ground_state(H, degeneracy_tol)
    return SectorSolution(e, psi, one_rdm(psi, basis), gap, basis)
