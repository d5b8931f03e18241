"""Weak-coupling behaviour of the embedding, Hartree-Fock and exact densities.

At ``alpha = 0`` all three densities coincide with the Aufbau projector of
``h`` and share the same first derivative ``-lx_plus(h, J(D0) - K(D0))``.
This module computes the densities along ``alpha``, their finite-difference
derivatives and the long-format records used by the command line sweeps.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .diagnostics import lx_plus
from .errors import DmetError
from .fock import ManyBodyProblem, solve_sector
from .geometry import aufbau_projector, bd
from .highlevel import high_level_map_hf
from .loop import DmetState, LoopConfig, dmet_solve
from .lowlevel import global_hf, low_level_map
from .meanfield import mean_field_potential

log = logging.getLogger(__name__)

FD_STEP_FIRST = 1e-4
FD_STEP_SECOND = 1e-3
METHODS = ("dmet", "hf", "fci")

# tolerances tight enough for second differences at step 1e-3
TIGHT_LOOP = LoopConfig(beta=0.5, anderson=5, tol=1e-12, max_iter=300, low_level_tol=1e-13,
                        mu_tol=1e-13)


def fci_density(problem: ManyBodyProblem) -> np.ndarray:
    return solve_sector(problem).rdm1


def hf_density(problem: ManyBodyProblem, D_init=None, tol: float = 1e-13) -> np.ndarray:
    return global_hf(problem, D_init=D_init, tol=tol).D


def first_order_density(problem: ManyBodyProblem) -> np.ndarray:
    """Analytic ``d/dalpha`` of the densities at ``alpha = 0``."""
    D0, _ = aufbau_projector(problem.h, problem.N)
    return -lx_plus(problem.h, mean_field_potential(problem.V, D0), problem.N)


def central_first(values: Sequence[np.ndarray], step: float) -> np.ndarray:
    """(f(+h) - f(-h)) / 2h from ``[f(-h), f(+h)]``."""
    return (values[1] - values[0]) / (2 * step)


def central_second(values: Sequence[np.ndarray], step: float) -> np.ndarray:
    """(f(+h) - 2 f(0) + f(-h)) / h^2 from ``[f(-h), f(0), f(+h)]``."""
    return (values[2] - 2 * values[1] + values[0]) / step ** 2


class DensityEvaluator:
    """Densities of each method at a given coupling, with warm starts.

    ``dmet`` returns ``(P, D)`` of the embedding fixed point, ``hf`` and ``fci``
    return ``(Bd(D), D)``.
    """

    def __init__(self, problem: ManyBodyProblem, loop: LoopConfig = TIGHT_LOOP):
        self.problem = problem
        self.loop = loop
        self.D0, _ = aufbau_projector(problem.h, problem.N)
        self._dmet_seed: DmetState | None = None
        self.cache: dict[tuple[str, float], tuple[np.ndarray, np.ndarray]] = {}

    def __call__(self, method: str, alpha: float):
        key = (method, float(alpha))
        if key not in self.cache:
            self.cache[key] = getattr(self, "_" + method)(self.problem.with_alpha(alpha))
        return self.cache[key]

    def _fci(self, p):
        D = fci_density(p)
        return bd(D, p.partition), D

    def _hf(self, p):
        D = hf_density(p, D_init=self.D0)
        return bd(D, p.partition), D

    def _dmet(self, p):
        s = self._dmet_seed
        if p.alpha == 0.0 or s is None:
            st = dmet_solve(p, self.loop)
        else:
            st = dmet_solve(p, self.loop, P_init=s.P, D_init=s.D, Lambda_init=s.Lambda, mu_init=s.mu)
        if abs(p.alpha) <= 1e-2:
            self._dmet_seed = st
        return st.P, st.D


@dataclass
class DerivativeReport:
    alpha: float
    step_first: float
    step_second: float
    first: dict          # method -> (dP, dD)
    second: dict         # method -> (d2P, d2D)
    analytic_first: np.ndarray | None

    def norm(self, a: str, b: str, which: str = "P", order: int = 1) -> float:
        src = self.first if order == 1 else self.second
        k = 0 if which == "P" else 1
        return float(np.linalg.norm(src[a][k] - src[b][k]))


def derivatives(problem: ManyBodyProblem, alpha: float = 0.0, methods: Iterable[str] = METHODS,
                step_first: float = FD_STEP_FIRST, step_second: float | None = FD_STEP_SECOND,
                evaluator: DensityEvaluator | None = None) -> DerivativeReport:
    ev = evaluator or DensityEvaluator(problem)
    first, second = {}, {}
    for m in methods:
        vals = [ev(m, alpha - step_first), ev(m, alpha + step_first)]
        first[m] = tuple(central_first([v[k] for v in vals], step_first) for k in (0, 1))
        if step_second:
            vals = [ev(m, alpha - step_second), ev(m, alpha), ev(m, alpha + step_second)]
            second[m] = tuple(central_second([v[k] for v in vals], step_second) for k in (0, 1))
    analytic = first_order_density(problem) if alpha == 0.0 else None
    return DerivativeReport(alpha, step_first, step_second, first, second, analytic)


def convergence_slope(problem: ManyBodyProblem, alphas: Sequence[float],
                      evaluator: DensityEvaluator | None = None) -> tuple[float, np.ndarray]:
    """Least-squares slope of log ||D_dmet - D_hf|| against log alpha."""
    ev = evaluator or DensityEvaluator(problem)
    norms = np.array([np.linalg.norm(ev("dmet", a)[1] - ev("hf", a)[1]) for a in alphas])
    slope = np.polyfit(np.log(alphas), np.log(norms), 1)[0]
    return float(slope), norms


def mean_field_consistency(problem: ManyBodyProblem, tol: float = 1e-13) -> float:
    """``||F_LL(F_HL^HF(D_hf)) - D_hf||``: the mean-field high-level map fixes HF."""
    D = hf_density(problem, tol=tol)
    hl = high_level_map_hf(problem, D, tol=1e-13)
    ll = low_level_map(problem, hl.P, tol=1e-13)
    return float(np.linalg.norm(ll.D - D))


# ---------------------------------------------------------------------------
# long-format sweep records


@dataclass
class SweepRecord:
    alpha: float
    method: str
    quantity: str
    value: float
    status: str = "ok"


FIELDS = ("alpha", "method", "quantity", "value", "status")


def derivative_sweep(problem: ManyBodyProblem, alphas: Sequence[float],
                     methods: Sequence[str] = METHODS, step_first: float = FD_STEP_FIRST,
                     step_second: float = FD_STEP_SECOND,
                     loop: LoopConfig = TIGHT_LOOP) -> list[SweepRecord]:
    """Norms of densities, derivatives and method differences along ``alphas``.

    A failing point is recorded with a non-``ok`` status instead of aborting.
    """
    ev = DensityEvaluator(problem, loop)
    out: list[SweepRecord] = []
    for a in alphas:
        dens = {}
        for m in methods:
            try:
                P, D = ev(m, a)
                dens[m] = (P, D)
                out.append(SweepRecord(a, m, "norm_P", float(np.linalg.norm(P))))
                out.append(SweepRecord(a, m, "norm_D", float(np.linalg.norm(D))))
            except DmetError as err:
                out.append(SweepRecord(a, m, "norm_P", float("nan"), type(err).__name__))
                continue
            try:
                rep = derivatives(problem, a, [m], step_first, step_second, ev)
                dP, dD = rep.first[m]
                d2P, d2D = rep.second[m]
                for q, v in (("dP", dP), ("dD", dD), ("d2P", d2P), ("d2D", d2D)):
                    out.append(SweepRecord(a, m, "norm_" + q, float(np.linalg.norm(v))))
            except DmetError as err:
                out.append(SweepRecord(a, m, "norm_dP", float("nan"), type(err).__name__))
        for i, m1 in enumerate(methods):
            for m2 in methods[i + 1:]:
                if m1 in dens and m2 in dens:
                    out.append(SweepRecord(a, f"{m1}-{m2}", "diff_P",
                                           float(np.linalg.norm(dens[m1][0] - dens[m2][0]))))
                    out.append(SweepRecord(a, f"{m1}-{m2}", "diff_D",
                                           float(np.linalg.norm(dens[m1][1] - dens[m2][1]))))
    return out


def write_csv(records: Iterable[SweepRecord], fh) -> None:
    w = csv.DictWriter(fh, fieldnames=FIELDS)
    w.writeheader()
    for r in records:
        w.writerow(asdict(r))
