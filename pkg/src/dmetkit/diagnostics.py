"""Linear response, invertibility and representability diagnostics."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import AssumptionViolation, GaplessSpectrum, InvalidInput
from .geometry import (COMPAT_DELTA, ConstraintSpace, FragmentPartition, aufbau_projector, bd,
                       compatibility, fix_signs, occupied_virtual_basis, tangent_vector)
from .impurity import build_impurity_basis

RANK_RTOL = 1e-8


# ---------------------------------------------------------------------------
# inverse Liouvillian restricted to occupied-virtual blocks


def lx_plus(H: np.ndarray, M: np.ndarray, n_occ: int | None = None) -> np.ndarray:
    """Inverse Liouvillian of ``H`` applied to ``M`` on the occupied-virtual blocks.

    Occupied orbitals are the ``n_occ`` lowest eigenvectors of ``H`` (default:
    the negative eigenvalues).  In the eigenbasis the result is
    ``M[a, i] / (e_a - e_i)`` for virtual ``a`` and occupied ``i`` (and its
    transpose), zero elsewhere.  To first order in ``t`` the occupied
    projector of ``H + t M`` is ``P(H) - t lx_plus(H, M)``.
    """
    w, v = np.linalg.eigh(0.5 * (H + H.T))
    if n_occ is None:
        n_occ = int(np.sum(w < 0))
    Mt = v.T @ M @ v
    eo, ev = w[:n_occ], w[n_occ:]
    denom = ev[:, None] - eo[None, :]
    if denom.size and denom.min() <= 0:
        raise GaplessSpectrum(float(denom.min()), 0.0, "Liouvillian")
    N = np.zeros_like(Mt)
    N[n_occ:, :n_occ] = Mt[n_occ:, :n_occ] / denom
    N[:n_occ, n_occ:] = Mt[:n_occ, n_occ:] / denom.T
    return v @ N @ v.T


def lx_quadratic_form(H: np.ndarray, M: np.ndarray, n_occ: int | None = None) -> float:
    return float(np.sum(M * lx_plus(H, M, n_occ)))


def occupied_virtual_norm(H: np.ndarray, M: np.ndarray, n_occ: int | None = None) -> float:
    """Frobenius norm of ``1_occ(H) M 1_virt(H)``."""
    w, v = np.linalg.eigh(0.5 * (H + H.T))
    if n_occ is None:
        n_occ = int(np.sum(w < 0))
    Mt = v.T @ M @ v
    return float(np.linalg.norm(Mt[:n_occ, n_occ:]))


# ---------------------------------------------------------------------------
# response of the frozen-orbital high-level map at the non-interacting point


class ResponseOperator:
    """Derivative of the non-interacting high-level map at ``D0`` w.r.t. a potential.

    ``R Y = -sum_x Pi_x C_x lx_plus(h_x, C_x^T (Y - l(Y)) C_x) C_x^T Pi_x`` where
    ``C_x`` are the impurity orbitals of ``D0``, ``h_x = C_x^T h C_x`` and the
    chemical-potential shift ``l(Y) Pi_x`` keeps the trace fixed:
    ``l(Y) = tr(G Y) / sum_x <p_x, lx_plus(h_x, p_x)>`` with
    ``G = sum_x C_x lx_plus(h_x, p_x) C_x^T``.
    """

    def __init__(self, h: np.ndarray, partition: FragmentPartition, n: int,
                 D0: np.ndarray | None = None, delta: float = COMPAT_DELTA):
        self.h = np.asarray(h, dtype=float)
        self.partition = partition
        self.n = n
        if D0 is None:
            D0, self.gap = aufbau_projector(self.h, n)
        self.D0 = D0
        self.bases = [build_impurity_basis(D0, partition, x, delta) for x in partition]
        self.space = ConstraintSpace(partition)
        self._hx, self._px = [], []
        G = np.zeros_like(self.h)
        zeta = 0.0
        for x, b in zip(partition, self.bases):
            hx = b.C.T @ self.h @ b.C
            px = b.C.T @ partition.projector(x) @ b.C
            lp = lx_plus(hx, px, partition.sizes[x])
            G += b.C @ lp @ b.C.T
            zeta += float(np.sum(px * lp))
            self._hx.append(hx)
            self._px.append(px)
        self.G = G
        self.zeta = zeta

    def mu_shift(self, Y: np.ndarray) -> float:
        return float(np.sum(self.G * Y)) / self.zeta

    def apply(self, Y: np.ndarray) -> np.ndarray:
        ell = self.mu_shift(Y)
        out = np.zeros_like(self.h)
        for x, b in zip(self.partition, self.bases):
            Pi = self.partition.projector(x)
            M = b.C.T @ (Y - ell * Pi) @ b.C
            out -= Pi @ b.C @ lx_plus(self._hx[x], M, self.partition.sizes[x]) @ b.C.T @ Pi
        return out

    __call__ = apply

    def matrix(self) -> np.ndarray:
        """Representation on the orthonormal basis of the constraint space."""
        sp = self.space
        return np.array([sp.coords(self.apply(B)) for B in sp.basis]).T

    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.matrix(), compute_uv=False)


def assemble_response_R(h, partition, n, D0=None) -> ResponseOperator:
    return ResponseOperator(h, partition, n, D0)


def one_site_response_matrix(D0: np.ndarray) -> np.ndarray:
    """Reference matrix for one-site fragments: ``D_ii - D_ii^2`` on the diagonal,
    ``-D_ij^2`` off the diagonal.  It is invertible on trace-free vectors exactly
    when ``D0`` is irreducible."""
    M = -D0 ** 2
    np.fill_diagonal(M, np.diag(D0) - np.diag(D0) ** 2)
    return M


# ---------------------------------------------------------------------------
# local N-representability


@dataclass
class LocalRepresentability:
    surjective: bool
    rank: int
    dim_constraints: int
    singular_values: np.ndarray = field(repr=False)
    commutant_dim: int
    s_min: float            # smallest eigenvalue of B B^* on the constraint space
    dimension_ok: bool      # N (L - N) >= dim of the constraint space


def tangent_block_matrix(D: np.ndarray, partition: FragmentPartition) -> np.ndarray:
    """Matrix of ``X -> Bd(phi [[0, X^T], [X, 0]] phi^T)`` in constraint coordinates."""
    phi, n = occupied_virtual_basis(D)
    L = D.shape[0]
    nv = L - n
    sp = ConstraintSpace(partition)
    cols = []
    for a in range(nv):
        for i in range(n):
            X = np.zeros((nv, n))
            X[a, i] = 1.0
            cols.append(sp.coords(bd(tangent_vector(X, phi), partition)))
    return np.array(cols).T.reshape(sp.dim, nv * n)


def bbstar(D: np.ndarray, Y: np.ndarray, partition: FragmentPartition) -> np.ndarray:
    """``2 Bd((1-D) Y D + D Y (1-D))``."""
    Q = np.eye(D.shape[0]) - D
    return 2 * bd(Q @ Y @ D + D @ Y @ Q, partition)


def commutant_dimension(D: np.ndarray, partition: FragmentPartition, tol: float = 1e-10) -> int:
    """Dimension of symmetric block-diagonal matrices commuting with ``D``."""
    sp = ConstraintSpace(partition)
    basis = np.concatenate([sp.basis, np.eye(D.shape[0])[None] / np.sqrt(D.shape[0])])
    A = np.array([(B @ D - D @ B).ravel() for B in basis]).T
    s = np.linalg.svd(A, compute_uv=False)
    s = np.concatenate([s, np.zeros(basis.shape[0] - s.size)])
    return int(np.sum(s <= tol * max(1.0, np.linalg.norm(D))))


def nrep_local(D: np.ndarray, partition: FragmentPartition,
               rtol: float = RANK_RTOL) -> LocalRepresentability:
    """Is ``Bd`` restricted to the tangent space at ``D`` onto the constraint space?"""
    M = tangent_block_matrix(D, partition)
    s = np.linalg.svd(M, compute_uv=False)
    dim = partition.dim_constraints
    rank = int(np.sum(s > rtol * max(s.max(initial=0.0), 1e-300))) if s.size else 0
    n = int(round(np.trace(D)))
    sp = ConstraintSpace(partition)
    S = np.array([sp.coords(bbstar(D, B, partition)) for B in sp.basis]).T
    s_min = float(np.linalg.eigvalsh(0.5 * (S + S.T)).min()) if dim else 0.0
    return LocalRepresentability(rank == dim, rank, dim, s, commutant_dimension(D, partition),
                                 s_min, n * (D.shape[0] - n) >= dim)


# ---------------------------------------------------------------------------
# two-fragment representability


@dataclass
class TwoFragmentVerdict:
    representable: bool
    witness: np.ndarray | None
    fractional_1: np.ndarray
    fractional_2: np.ndarray
    reason: str = ""


def _clusters(values: np.ndarray, tol: float) -> list[list[int]]:
    out: list[list[int]] = []
    for i in np.argsort(values):
        if out and abs(values[i] - values[out[-1][-1]]) <= tol:
            out[-1].append(int(i))
        else:
            out.append([int(i)])
    return out


def nrep_two_fragment(P: np.ndarray, partition: FragmentPartition,
                      tol: float = 1e-8) -> TwoFragmentVerdict:
    """Decide representability of a two-block density and build a projector witness.

    A block density ``diag(P1, P2)`` with spectra in [0, 1] is the block part
    of a projector iff for every fractional ``n`` the multiplicity of ``n`` in
    ``P1`` equals the multiplicity of ``1 - n`` in ``P2``.  The witness couples
    each matched pair of eigenvectors by ``sqrt(n (1 - n))``.
    """
    if len(partition) != 2:
        raise InvalidInput("two-fragment test needs exactly two fragments")
    P1, P2 = partition.blocks(P)
    w1, u1 = np.linalg.eigh(0.5 * (P1 + P1.T))
    w2, u2 = np.linalg.eigh(0.5 * (P2 + P2.T))
    if min(w1.min(), w2.min()) < -tol or max(w1.max(), w2.max()) > 1 + tol:
        return TwoFragmentVerdict(False, None, w1, w2, "block spectrum outside [0, 1]")
    u1, u2 = fix_signs(u1), fix_signs(u2)
    frac1 = [i for i, w in enumerate(w1) if tol < w < 1 - tol]
    frac2 = [j for j, w in enumerate(w2) if tol < w < 1 - tol]
    # match fractional eigenvalues of P1 with 1 - (eigenvalues of P2)
    pairs = []
    used = set()
    for cl in _clusters(w1[frac1], tol):
        idx1 = [frac1[k] for k in cl]
        target = 1 - w1[idx1[0]]
        idx2 = [j for j in frac2 if j not in used and abs(w2[j] - target) <= tol]
        if len(idx2) != len(idx1):
            return TwoFragmentVerdict(
                False, None, w1[frac1], w2[frac2],
                f"occupation {w1[idx1[0]]:.6g} has multiplicity {len(idx1)} in block 1 but "
                f"{1 - w1[idx1[0]]:.6g} has multiplicity {len(idx2)} in block 2")
        used.update(idx2)
        pairs.extend(zip(idx1, idx2))
    if len(used) != len(frac2):
        j = next(j for j in frac2 if j not in used)
        return TwoFragmentVerdict(False, None, w1[frac1], w2[frac2],
                                  f"occupation {w2[j]:.6g} of block 2 has no partner in block 1")
    n1, n2 = P1.shape[0], P2.shape[0]
    M = np.zeros((n1 + n2, n1 + n2))
    d1 = np.where(w1 > 0.5, 1.0, 0.0)
    d2 = np.where(w2 > 0.5, 1.0, 0.0)
    for i in frac1:
        d1[i] = w1[i]
    for j in frac2:
        d2[j] = w2[j]
    M[:n1, :n1] = np.diag(d1)
    M[n1:, n1:] = np.diag(d2)
    for i, j in pairs:
        # use the block-1 occupation on both sides so the witness is exactly idempotent
        n = w1[i]
        M[n1 + j, n1 + j] = 1 - n
        M[i, n1 + j] = M[n1 + j, i] = np.sqrt(n * (1 - n))
    U = np.zeros_like(M)
    U[:n1, :n1] = u1
    U[n1:, n1:] = u2
    D = U @ M @ U.T
    return TwoFragmentVerdict(True, 0.5 * (D + D.T), w1[frac1], w2[frac2])


# ---------------------------------------------------------------------------
# structural assumptions at the non-interacting point


@dataclass
class AssumptionReport:
    gap: float
    compat_margin: float
    surjective: bool
    s_min: float
    commutant_dim: int
    dimension_ok: bool
    r_sigma_min: float | None
    thresholds: dict

    @property
    def flags(self) -> dict[str, bool]:
        t = self.thresholds
        return {
            "gap": self.gap > t["gap"],
            "compatible": self.compat_margin > t["compat"],
            "representable": self.surjective and self.s_min > t["s_min"],
            "response_invertible": self.r_sigma_min is not None and self.r_sigma_min > t["r_sigma"],
        }

    @property
    def ok(self) -> bool:
        return all(self.flags.values())

    def as_dict(self) -> dict:
        d = asdict(self)
        d["flags"] = self.flags
        d["ok"] = self.ok
        return d


def check_assumptions(h: np.ndarray, n: int, partition: FragmentPartition,
                      gap_tol: float = 1e-8, compat_delta: float = COMPAT_DELTA,
                      s_min_tol: float = 1e-10, r_sigma_tol: float = 1e-6) -> AssumptionReport:
    """Gap, fragment compatibility, local representability and response invertibility."""
    thresholds = {"gap": gap_tol, "compat": compat_delta, "s_min": s_min_tol, "r_sigma": r_sigma_tol}
    w = np.linalg.eigvalsh(h)
    gap = float(w[n] - w[n - 1])
    occ = np.linalg.eigh(h)[1][:, :n]
    D0 = occ @ occ.T
    comp = compatibility(D0, partition, compat_delta)
    loc = nrep_local(D0, partition)
    r_min = None
    if gap > gap_tol and comp.compatible:
        try:
            r_min = float(ResponseOperator(h, partition, n, D0).singular_values().min())
        except AssumptionViolation:
            r_min = None
    return AssumptionReport(gap, comp.min_margin, loc.surjective, loc.s_min, loc.commutant_dim,
                            loc.dimension_ok, r_min, thresholds)
