"""Fragment-plus-bath orbitals and the projected impurity Hamiltonian.

For a projector ``D`` compatible with fragment ``x`` the impurity space is
spanned by ``D X_x`` and ``(1-D) X_x`` (each of dimension ``N_x``).  The part
of ``Ran D`` orthogonal to ``D X_x`` is the frozen core; its mean field and
energy are folded into the impurity Hamiltonian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IncompatibleFragment
from .fock import FockBasis, ManyBodyProblem, assemble_operator
from .geometry import COMPAT_DELTA, FragmentPartition, fix_signs
from .meanfield import mean_field_potential


@dataclass
class ImpurityBasis:
    fragment: int
    C: np.ndarray          # (L, 2 N_x): occupied-like half first, then virtual-like
    C_tilde: np.ndarray    # (L, 2 N_x): fragment sites first, then bath
    core: np.ndarray       # core projector, rank N - N_x
    local: np.ndarray      # E_x^T D E_x


def _polar(A: np.ndarray) -> np.ndarray:
    """Orthonormal factor ``U W^T`` of ``A = U S W^T``, i.e. ``A (A^T A)^{-1/2}``.

    Computed from the SVD, which keeps the columns orthonormal to machine
    precision even when ``A^T A`` is badly conditioned.
    """
    u, _, wt = np.linalg.svd(A, full_matrices=False)
    return u @ wt


def build_impurity_basis(D: np.ndarray, partition: FragmentPartition, x: int,
                         delta: float = COMPAT_DELTA) -> ImpurityBasis:
    E = partition.embedding(x)
    L = partition.L
    Q = np.eye(L) - D
    loc = E.T @ D @ E
    w = np.linalg.eigvalsh(loc)
    if w.min() <= delta or w.max() >= 1 - delta:
        raise IncompatibleFragment(x, w, delta)
    # D E (E^T D E)^{-1/2} and (1-D) E (E^T (1-D) E)^{-1/2}, as polar factors
    occ = _polar(D @ E)
    vir = _polar(Q @ E)
    C = np.hstack([occ, vir])
    core = D - occ @ occ.T
    core = 0.5 * (core + core.T)
    bath = (np.eye(L) - partition.projector(x)) @ occ
    C_tilde = np.hstack([E, _polar(bath)])
    return ImpurityBasis(x, C, C_tilde, core, loc)


@dataclass
class ImpurityModel:
    """Impurity Hamiltonian on 2 N_x orbitals.

    ``H_imp = E_env + sum one_body a+a + alpha/2 sum two_body a+a+aa``;
    ``frag_projector`` is the fragment projector expressed in the impurity
    orbitals, used for the fragment number operator.
    """

    fragment: int
    one_body: np.ndarray
    two_body: np.ndarray | None
    alpha: float
    e_env: float
    frag_projector: np.ndarray
    C: np.ndarray | None = None
    partition: FragmentPartition | None = None

    @property
    def norb(self) -> int:
        return self.one_body.shape[0]

    def fock_hamiltonian(self, basis: FockBasis | None = None):
        """``H_imp`` without the constant ``e_env``, on the full impurity Fock space."""
        basis = basis or FockBasis.full(self.norb)
        return assemble_operator(self.one_body, self.two_body, self.alpha, basis, sparse=False)

    def fragment_number_operator(self, basis: FockBasis | None = None):
        basis = basis or FockBasis.full(self.norb)
        return assemble_operator(self.frag_projector, None, 0.0, basis, sparse=False)

    def fragment_block(self, rdm: np.ndarray) -> np.ndarray:
        """``E_x^T C rdm C^T E_x`` for an impurity 1-RDM."""
        s = self.partition.slice(self.fragment)
        Cx = self.C[s, :]
        return Cx @ rdm @ Cx.T


def transform_two_body(V: np.ndarray, C: np.ndarray) -> np.ndarray:
    return np.einsum("abcd,ai,bj,ck,dl->ijkl", V, C, C, C, C, optimize=True)


def build_impurity_model(problem: ManyBodyProblem, D: np.ndarray, x: int,
                         basis: ImpurityBasis | None = None,
                         delta: float = COMPAT_DELTA) -> ImpurityModel:
    """Interacting impurity Hamiltonian of fragment ``x`` around projector ``D``."""
    part = problem.partition
    basis = basis or build_impurity_basis(D, part, x, delta)
    C, core = basis.C, basis.core
    a = problem.alpha
    G = mean_field_potential(problem.V, core) if a != 0.0 else np.zeros_like(core)
    one = C.T @ (problem.h + a * G) @ C
    e_env = float(np.sum(problem.h * core) + 0.5 * a * np.sum(G * core))
    two = transform_two_body(problem.V, C) if a != 0.0 else None
    Pi = part.projector(x)
    return ImpurityModel(x, 0.5 * (one + one.T), two, a, e_env, C.T @ Pi @ C, C, part)


def build_mean_field_model(h_eff: np.ndarray, partition: FragmentPartition, D: np.ndarray,
                           x: int, basis: ImpurityBasis | None = None,
                           delta: float = COMPAT_DELTA) -> ImpurityModel:
    """Non-interacting impurity model with one-body operator ``C^T h_eff C``."""
    basis = basis or build_impurity_basis(D, partition, x, delta)
    C = basis.C
    one = C.T @ h_eff @ C
    Pi = partition.projector(x)
    e_env = float(np.sum(h_eff * basis.core))
    return ImpurityModel(x, 0.5 * (one + one.T), None, 0.0, e_env, C.T @ Pi @ C, C, partition)


def core_orbitals(D: np.ndarray, partition: FragmentPartition, x: int) -> np.ndarray:
    """Orthonormal basis of ``Ran D`` orthogonal to ``D X_x``, built by SVD.

    Independent of the closed-form core projector; used by the wedge-product
    check of the impurity Hamiltonian.
    """
    w, v = np.linalg.eigh(D)
    occ = v[:, w > 0.5]
    DE = D @ partition.embedding(x)
    A = occ.T @ DE
    u, s, _ = np.linalg.svd(A, full_matrices=True)
    k = int(np.sum(s > 1e-10))
    return fix_signs(occ @ u[:, k:])
