"""Geometry of one-particle density matrices.

Rank-N orthogonal projectors on R^L, their block-diagonal parts with respect
to a contiguous fragment partition, the traceless block-diagonal constraint
space, and local coordinates on the projector manifold.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import GaplessSpectrum, IncompatibleFragment, InvalidInput

COMPAT_DELTA = 1e-8
GAP_TOL = 1e-8


def fix_signs(vecs: np.ndarray) -> np.ndarray:
    """Flip columns so the first component above 1e-12 in magnitude is positive."""
    vecs = np.array(vecs, dtype=float, copy=True)
    for j in range(vecs.shape[1]):
        nz = np.flatnonzero(np.abs(vecs[:, j]) > 1e-12)
        if nz.size and vecs[nz[0], j] < 0:
            vecs[:, j] *= -1
    return vecs


def sym_eigh(A: np.ndarray):
    """Eigen-decomposition of the symmetric part with deterministic signs."""
    w, v = np.linalg.eigh(0.5 * (A + A.T))
    return w, fix_signs(v)


def matrix_function(A: np.ndarray, f) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (A + A.T))
    return (v * f(w)) @ v.T


class FragmentPartition:
    """Contiguous partition of ``L`` sites into fragments of given sizes."""

    def __init__(self, sizes: Sequence[int]):
        if isinstance(sizes, FragmentPartition):
            sizes = sizes.sizes
        sizes = tuple(int(s) for s in sizes)
        if not sizes or any(s < 1 for s in sizes):
            raise InvalidInput(f"fragment sizes must be positive, got {sizes}")
        self.sizes = sizes
        self.offsets = tuple(int(o) for o in np.concatenate([[0], np.cumsum(sizes)]))
        self.L = self.offsets[-1]

    def __repr__(self):
        return f"FragmentPartition({list(self.sizes)})"

    def __eq__(self, other):
        return isinstance(other, FragmentPartition) and other.sizes == self.sizes

    def __len__(self):
        return len(self.sizes)

    def __iter__(self):
        return iter(range(len(self.sizes)))

    def slice(self, x: int) -> slice:
        return slice(self.offsets[x], self.offsets[x + 1])

    def embedding(self, x: int) -> np.ndarray:
        """``E_x``: the identity columns spanning fragment ``x``."""
        return np.eye(self.L)[:, self.slice(x)]

    def projector(self, x: int) -> np.ndarray:
        P = np.zeros((self.L, self.L))
        s = self.slice(x)
        P[s, s] = np.eye(self.sizes[x])
        return P

    def blocks(self, M: np.ndarray) -> list[np.ndarray]:
        return [np.array(M[self.slice(x), self.slice(x)]) for x in self]

    def from_blocks(self, blocks: Sequence[np.ndarray]) -> np.ndarray:
        M = np.zeros((self.L, self.L))
        for x, b in zip(self, blocks):
            M[self.slice(x), self.slice(x)] = b
        return M

    @property
    def dim_constraints(self) -> int:
        return sum(n * (n + 1) // 2 for n in self.sizes) - 1


def bd(M: np.ndarray, partition: FragmentPartition) -> np.ndarray:
    """Block-diagonal part ``sum_x Pi_x M Pi_x`` (Frobenius-orthogonal projection)."""
    out = np.zeros_like(np.asarray(M, dtype=float))
    for x in partition:
        s = partition.slice(x)
        out[s, s] = M[s, s]
    return out


class ConstraintSpace:
    """Orthonormal basis of traceless block-diagonal symmetric matrices.

    Off-diagonal symmetric units are normalised by 1/sqrt(2); the diagonal
    units are orthogonalised against the identity, which removes the trace.
    """

    def __init__(self, partition: FragmentPartition):
        self.partition = partition
        L = partition.L
        basis = []
        # trace-free combinations of the diagonal units
        Q = np.eye(L) - 1.0 / L
        q, r = np.linalg.qr(Q[:, : L - 1])
        for j in range(L - 1):
            basis.append(np.diag(q[:, j] * np.sign(r[j, j])))
        for x in partition:
            o = partition.offsets[x]
            n = partition.sizes[x]
            for i in range(n):
                for j in range(i + 1, n):
                    B = np.zeros((L, L))
                    B[o + i, o + j] = B[o + j, o + i] = 1 / np.sqrt(2)
                    basis.append(B)
        self.basis = np.array(basis).reshape(len(basis), L, L)
        assert self.basis.shape[0] == partition.dim_constraints

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def coords(self, Y: np.ndarray) -> np.ndarray:
        return np.einsum("bij,ij->b", self.basis, Y)

    def matrix(self, y: np.ndarray) -> np.ndarray:
        return np.einsum("b,bij->ij", y, self.basis)


def check_projector(D: np.ndarray, n: int | None = None, tol: float = 1e-10) -> float:
    """Return the idempotency residual; raise if ``D`` is not a (rank-n) projector."""
    D = np.asarray(D, dtype=float)
    res = float(np.linalg.norm(D @ D - D))
    if res > tol or np.linalg.norm(D - D.T) > tol:
        raise InvalidInput(f"not a symmetric projector (residual {res:.3e})")
    if n is not None and abs(np.trace(D) - n) > 1e-8:
        raise InvalidInput(f"projector has rank {np.trace(D):.6f}, expected {n}")
    return res


def aufbau_projector(h: np.ndarray, n: int, gap_tol: float = GAP_TOL, error=GaplessSpectrum):
    """Spectral projector onto the ``n`` lowest eigenvectors of ``h`` and its gap."""
    w, v = np.linalg.eigh(0.5 * (h + h.T))
    if not 0 < n < len(w):
        raise InvalidInput(f"need 0 < n < {len(w)}, got {n}")
    gap = float(w[n] - w[n - 1])
    if gap < gap_tol:
        raise error(gap, gap_tol)
    occ = v[:, :n]
    return occ @ occ.T, gap


def fermi_level(h: np.ndarray, n: int) -> float:
    """Mid-gap energy between the n-th and (n+1)-th eigenvalue."""
    w = np.linalg.eigvalsh(h)
    return 0.5 * (w[n - 1] + w[n])


# ---------------------------------------------------------------------------
# compatibility of a projector with the partition


@dataclass
class CompatibilityReport:
    compatible: bool
    local_occupations: list[np.ndarray]
    min_margin: float
    offending: list[int]


def local_occupations(D: np.ndarray, partition: FragmentPartition) -> list[np.ndarray]:
    return [np.linalg.eigvalsh(b) for b in partition.blocks(D)]


def compatibility(D: np.ndarray, partition: FragmentPartition,
                  delta: float = COMPAT_DELTA) -> CompatibilityReport:
    """Each fragment block of ``D`` must have spectrum inside (delta, 1 - delta)."""
    occ = local_occupations(D, partition)
    margins = [float(min(e.min(), 1 - e.max())) for e in occ]
    bad = [x for x, m in enumerate(margins) if m <= delta]
    return CompatibilityReport(not bad, occ, min(margins), bad)


def require_compatible(D, partition, delta: float = COMPAT_DELTA):
    rep = compatibility(D, partition, delta)
    if not rep.compatible:
        x = rep.offending[0]
        raise IncompatibleFragment(x, rep.local_occupations[x], delta)
    return rep


def compatibility_conditions(D: np.ndarray, partition: FragmentPartition,
                             delta: float = COMPAT_DELTA) -> dict[str, bool]:
    """The four equivalent compatibility tests, each computed on its own route.

    ``interior``: Bd(D) lies inside the convex hull, block spectra in (delta, 1-delta).
    ``ranks``: D E_x and (1-D) E_x have full column rank (singular values above sqrt(delta)).
    ``spectrum``: eigenvalues of E_x^T D E_x inside (delta, 1-delta).
    ``invertible``: E_x^T D E_x and E_x^T (1-D) E_x have smallest singular value above delta.
    """
    L = partition.L
    P = bd(D, partition)
    Q = np.eye(L) - D
    interior = ranks = spectrum = invertible = True
    for x in partition:
        s = partition.slice(x)
        e = np.linalg.eigvalsh(P[s, s])
        interior &= bool(e.min() > delta and e.max() < 1 - delta)
        E = partition.embedding(x)
        n = partition.sizes[x]
        sv1 = np.linalg.svd(D @ E, compute_uv=False)
        sv2 = np.linalg.svd(Q @ E, compute_uv=False)
        ranks &= bool(np.sum(sv1 > np.sqrt(delta)) == n and np.sum(sv2 > np.sqrt(delta)) == n)
        loc = E.T @ D @ E
        e2 = np.linalg.eigvalsh(loc)
        spectrum &= bool(np.all(e2 > delta) and np.all(e2 < 1 - delta))
        s1 = np.linalg.svd(loc, compute_uv=False).min()
        s2 = np.linalg.svd(E.T @ Q @ E, compute_uv=False).min()
        invertible &= bool(s1 > delta and s2 > delta)
    return {"interior": interior, "ranks": ranks, "spectrum": spectrum, "invertible": invertible}


# ---------------------------------------------------------------------------
# local coordinates on the manifold of rank-N projectors


def occupied_virtual_basis(D: np.ndarray) -> tuple[np.ndarray, int]:
    """Orthonormal eigenbasis of ``D``, occupied columns first, and the rank."""
    w, v = np.linalg.eigh(0.5 * (D + D.T))
    n = int(round(np.sum(w)))
    order = np.argsort(-w, kind="stable")
    return fix_signs(v[:, order]), n


def tangent_map(X: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Projector ``f_phi(X)`` for ``X`` of shape (L-N, N) with spectral norm < 1/2.

    ``phi`` is an orthonormal basis with the N occupied columns first.  The map
    is a local chart around ``phi[:, :N] phi[:, :N]^T`` whose differential at 0
    sends X to ``phi [[0, X^T], [X, 0]] phi^T``.
    """
    X = np.asarray(X, dtype=float)
    nv, no = X.shape
    if np.linalg.norm(X, 2) >= 0.5:
        raise InvalidInput("tangent coordinates need spectral norm below 1/2")
    root = lambda w: np.sqrt(np.clip(w, 0.0, None))
    A = 0.5 * (np.eye(no) + matrix_function(np.eye(no) - 4 * X.T @ X, root))
    C = 0.5 * (np.eye(nv) - matrix_function(np.eye(nv) - 4 * X @ X.T, root))
    M = np.block([[A, X.T], [X, C]])
    return phi @ M @ phi.T


def tangent_vector(X: np.ndarray, phi: np.ndarray) -> np.ndarray:
    nv, no = X.shape
    M = np.zeros((no + nv, no + nv))
    M[no:, :no] = X
    M[:no, no:] = X.T
    return phi @ M @ phi.T
