"""Model Hamiltonians and two-body tensor utilities."""

from __future__ import annotations

import itertools

import numpy as np

from .fock import ManyBodyProblem
from .geometry import FragmentPartition

# index permutations generated by the mandated symmetries plus particle exchange
# (k,l,n,x) -> (l,k,x,n), which leaves the two-body operator unchanged
FULL_GROUP = (
    (0, 1, 2, 3), (2, 1, 0, 3), (0, 3, 2, 1), (2, 3, 0, 1),
    (1, 0, 3, 2), (3, 0, 1, 2), (1, 2, 3, 0), (3, 2, 1, 0),
)


def orbit(index: tuple[int, int, int, int]) -> set[tuple[int, ...]]:
    """All index quadruples tied to ``index`` by the two-body symmetry group."""
    return {tuple(index[p] for p in perm) for perm in FULL_GROUP}


def symmetrize_two_body(V: np.ndarray) -> np.ndarray:
    """Average over the eight-element symmetry group (leaves the operator unchanged)."""
    return sum(np.transpose(V, perm) for perm in FULL_GROUP) / len(FULL_GROUP)


def chain_hopping(L: int, t: float = 1.0, periodic: bool = False) -> np.ndarray:
    h = np.zeros((L, L))
    for i in range(L - 1):
        h[i, i + 1] = h[i + 1, i] = -t
    if periodic and L > 2:
        h[0, L - 1] = h[L - 1, 0] = -t
    return h


def bonds(L: int, periodic: bool) -> list[tuple[int, int]]:
    out = [(i, i + 1) for i in range(L - 1)]
    if periodic and L > 2:
        out.append((0, L - 1))
    return out


def hubbard_chain(L: int, N: int, t: float = 1.0, U: float = 0.0, periodic: bool = False,
                  fragment_size: int | None = 2, alpha: float = 1.0) -> ManyBodyProblem:
    """Spinless lattice fermions with hopping ``-t`` and interaction ``U n_i n_j`` on bonds.

    With one spinless orbital per site a same-site density term vanishes
    identically, so the interaction acts between nearest neighbours:
    ``V[i,j,i,j] = V[j,i,j,i] = U`` for every bond ``(i, j)``.
    """
    h = chain_hopping(L, t, periodic)
    V = np.zeros((L,) * 4)
    if U != 0.0:
        for i, j in bonds(L, periodic):
            V[i, j, i, j] = V[j, i, j, i] = U
    part = None
    if fragment_size:
        if L % fragment_size:
            raise ValueError(f"L={L} is not a multiple of the fragment size {fragment_size}")
        part = FragmentPartition([fragment_size] * (L // fragment_size))
    name = f"chain L={L} N={N} t={t:g} U={U:g}" + (" ring" if periodic else "")
    return ManyBodyProblem(h, V, N, alpha, part, name)


def random_two_body(L: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Random tensor with the full eight-fold symmetry."""
    return symmetrize_two_body(rng.normal(scale=scale, size=(L,) * 4))


def random_problem(L: int, N: int, sizes, rng: np.random.Generator, alpha: float = 1.0,
                   v_scale: float = 0.3) -> ManyBodyProblem:
    h = rng.normal(size=(L, L))
    h = 0.5 * (h + h.T)
    return ManyBodyProblem(h, random_two_body(L, rng, v_scale), N, alpha, FragmentPartition(sizes))


def canonical_entries(V: np.ndarray, tol: float = 0.0) -> list[tuple[tuple[int, ...], float]]:
    """One representative per symmetry orbit with a nonzero value."""
    seen = set()
    out = []
    for idx in itertools.product(range(V.shape[0]), repeat=4):
        if idx in seen:
            continue
        orb = orbit(idx)
        seen |= orb
        rep = min(orb)
        if abs(V[rep]) > tol:
            out.append((rep, float(V[rep])))
    return out
