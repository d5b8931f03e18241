"""Hartree-Fock and the constrained mean-field (low-level) map.

The low-level map sends a block density ``P`` to the Hartree-Fock-like
projector ``D`` whose block-diagonal part equals ``P``.  It is realised by a
Lagrange multiplier ``Lambda`` in the traceless block-diagonal space::

    D = aufbau_N(h + alpha (J(D) - K(D)) + Lambda),    Bd(D) = P.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import AufbauBreakdown, GaplessFock, LowLevelNotConverged, NotRepresentable, SCFNotConverged
from .fock import ManyBodyProblem
from .geometry import ConstraintSpace, aufbau_projector, bd
from .meanfield import fock_matrix, hf_energy

log = logging.getLogger(__name__)


class DIIS:
    """Pulay extrapolation of Fock matrices from commutator residuals."""

    def __init__(self, depth: int = 8):
        self.depth = depth
        self.F: list[np.ndarray] = []
        self.E: list[np.ndarray] = []

    def __call__(self, F: np.ndarray, err: np.ndarray) -> np.ndarray:
        self.F.append(F)
        self.E.append(err)
        if len(self.F) > self.depth:
            self.F.pop(0)
            self.E.pop(0)
        m = len(self.F)
        if m < 2:
            return F
        B = -np.ones((m + 1, m + 1))
        B[m, m] = 0.0
        for i in range(m):
            for j in range(m):
                B[i, j] = np.sum(self.E[i] * self.E[j])
        rhs = np.zeros(m + 1)
        rhs[m] = -1.0
        try:
            c = np.linalg.solve(B, rhs)[:m]
        except np.linalg.LinAlgError:
            return F
        if not np.all(np.isfinite(c)):
            return F
        return sum(ci * Fi for ci, Fi in zip(c, self.F))


@dataclass
class SCFResult:
    D: np.ndarray
    fock: np.ndarray
    residual: float
    iterations: int
    gap: float


def self_consistent_field(build_fock, D: np.ndarray, n: int, tol: float = 1e-10,
                          max_iter: int = 200, damping: float = 0.0, gap_tol: float = 1e-8,
                          gap_error=GaplessFock, diis_depth: int = 8) -> SCFResult:
    """Iterate ``D <- aufbau_n(F(D))`` until ``||[F(D), D]|| < tol``.

    Density damping ``D <- (1 - damping) aufbau + damping D`` is applied to the
    input of the Fock build; DIIS extrapolation is used unless ``diis_depth``
    is 0.
    """
    diis = DIIS(diis_depth) if diis_depth else None
    Din = D
    res = np.inf
    gap = np.nan
    for it in range(max_iter + 1):
        F = build_fock(Din)
        err = F @ Din - Din @ F
        res = float(np.linalg.norm(err))
        if res < tol and np.linalg.norm(Din @ Din - Din) < 1e-10:
            gap = float(np.diff(np.linalg.eigvalsh(F)[n - 1:n + 1])[0])
            if gap < gap_tol:
                raise gap_error(gap, gap_tol)
            return SCFResult(Din, F, res, it, gap)
        Fx = diis(F, err) if diis is not None else F
        Dnew, gap = aufbau_projector(Fx, n, gap_tol, gap_error)
        Din = Dnew if damping == 0.0 or it == 0 else (1 - damping) * Dnew + damping * Din
    raise SCFNotConverged(max_iter, res)


@dataclass
class HFResult:
    D: np.ndarray
    energy: float
    fock: np.ndarray
    gap: float
    iterations: int
    residual: float


def global_hf(problem: ManyBodyProblem, D_init: np.ndarray | None = None, tol: float = 1e-10,
              max_iter: int = 500, damping: float = 0.0, gap_tol: float = 1e-8) -> HFResult:
    """Aufbau Hartree-Fock solution of ``problem`` at its coupling ``alpha``."""
    h, V, a, n = problem.h, problem.V, problem.alpha, problem.N
    if D_init is None:
        D_init, _ = aufbau_projector(h, n, gap_tol, GaplessFock)
    res = self_consistent_field(lambda D: fock_matrix(h, V, a, D), D_init, n, tol, max_iter,
                                damping, gap_tol, GaplessFock)
    e = hf_energy(h, V, a, res.D)
    return HFResult(res.D, e, res.fock, res.gap, res.iterations, res.residual)


@dataclass
class LowLevelResult:
    D: np.ndarray
    Lambda: np.ndarray
    residual: float          # ||Bd(D) - P||
    stationarity: float      # ||(1-D)(F(D) + Lambda) D||
    iterations: int
    energy: float


def _check_block_density(P, partition, tol=1e-12):
    for x, b in enumerate(partition.blocks(P)):
        w = np.linalg.eigvalsh(0.5 * (b + b.T))
        if w.min() < -tol or w.max() > 1 + tol:
            raise NotRepresentable(
                f"fragment {x} block has occupations outside [0, 1]: [{w.min():.3e}, {w.max():.3e}]")


def low_level_map(problem: ManyBodyProblem, P: np.ndarray, D_init: np.ndarray | None = None,
                  Lambda_init: np.ndarray | None = None, tol: float = 1e-11,
                  max_iter: int = 60, fd_step: float = 1e-6, refresh: int = 5,
                  scf_tol: float = 1e-13, gap_tol: float = 1e-8) -> LowLevelResult:
    """Constrained mean-field projector with block-diagonal part ``P``.

    Quasi-Newton iteration on the multiplier coordinates: the Jacobian is
    built by forward differences and corrected by Broyden updates, with a
    full refresh every ``refresh`` steps.  Each residual evaluation runs the
    inner self-consistent field, warm-started from the previous projector.
    """
    part = problem.partition
    h, V, a, n = problem.h, problem.V, problem.alpha, problem.N
    _check_block_density(P, part)
    if abs(np.trace(P) - n) > 1e-8:
        raise NotRepresentable(f"trace of the block density is {np.trace(P):.10g}, expected {n}")
    space = ConstraintSpace(part)
    target = space.coords(P)
    y = np.zeros(space.dim) if Lambda_init is None else space.coords(Lambda_init)
    if D_init is None:
        D_init, _ = aufbau_projector(h + space.matrix(y), n, gap_tol, AufbauBreakdown)
    state = {"D": D_init}

    def solve_inner(yv, D_start):
        Lam = space.matrix(yv)
        if a == 0.0:
            D, _ = aufbau_projector(h + Lam, n, gap_tol, AufbauBreakdown)
            return D
        scf = self_consistent_field(lambda D: fock_matrix(h, V, a, D) + Lam, D_start, n,
                                    scf_tol, 300, 0.0, gap_tol, AufbauBreakdown)
        return scf.D

    def residual(yv, D_start):
        D = solve_inner(yv, D_start)
        return space.coords(D) - target, D

    def jacobian(yv, D_start, r0):
        J = np.empty((space.dim, space.dim))
        for b in range(space.dim):
            yp = yv.copy()
            yp[b] += fd_step
            rp, _ = residual(yp, D_start)
            J[:, b] = (rp - r0) / fd_step
        return J

    r, D = residual(y, state["D"])
    rn = float(np.linalg.norm(r))
    J = None
    since_refresh = 0
    it = 0
    while rn > tol:
        if it >= max_iter:
            raise LowLevelNotConverged(it, rn)
        if J is None or since_refresh >= refresh:
            J = jacobian(y, D, r)
            since_refresh = 0
        try:
            step = -np.linalg.solve(J, r)
        except np.linalg.LinAlgError:
            raise NotRepresentable("constraint Jacobian is singular") from None
        t = 1.0
        while True:
            y_new = y + t * step
            try:
                r_new, D_new = residual(y_new, D)
            except (AufbauBreakdown, SCFNotConverged):
                r_new, D_new = None, None
            if r_new is not None and np.linalg.norm(r_new) < max(rn, 1e-14) * (1 - 1e-4 * t) + 1e-15:
                break
            t *= 0.5
            if t < 1e-3:
                if r_new is None:
                    raise LowLevelNotConverged(it, rn)
                break
        dy = y_new - y
        J = J + np.outer(r_new - r - J @ dy, dy) / float(dy @ dy)
        since_refresh += 1
        if t < 1.0:
            since_refresh = refresh  # force a fresh Jacobian after a damped step
        y, r, D = y_new, r_new, D_new
        rn_new = float(np.linalg.norm(r))
        if rn_new >= rn and rn < 1e3 * tol:
            rn = rn_new
            break  # at the noise floor
        rn = rn_new
        it += 1
        log.debug("low-level iteration %d residual %.3e", it, rn)
    Lam = space.matrix(y)
    F = fock_matrix(h, V, a, D) + Lam
    Q = np.eye(part.L) - D
    stat = float(np.linalg.norm(Q @ F @ D))
    if rn > 10 * tol:
        raise LowLevelNotConverged(it, rn)
    return LowLevelResult(D, Lam, float(np.linalg.norm(bd(D, part) - P)), stat, it,
                          hf_energy(h, V, a, D))
