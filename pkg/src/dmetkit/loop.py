"""Self-consistent embedding loop ``P <- F_HL(F_LL(P))`` with damping or Anderson mixing."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConvergenceFailure, FixedPointNotConverged
from .fock import ManyBodyProblem
from .geometry import ConstraintSpace, aufbau_projector, bd
from .highlevel import high_level_map
from .lowlevel import low_level_map

log = logging.getLogger(__name__)


@dataclass
class LoopConfig:
    beta: float = 0.5             # damping weight of the new iterate
    anderson: int = 0             # Anderson history depth, 0 for plain damping
    tol: float = 1e-9             # ||F(P) - P|| stopping threshold
    max_iter: int = 200
    low_level_tol: float = 1e-11
    mu_tol: float = 1e-12
    method: str = "fock"


@dataclass
class DmetState:
    P: np.ndarray
    D: np.ndarray
    mu: float
    Lambda: np.ndarray
    residual: float
    iterations: int
    converged: bool
    alpha: float
    energy_hf: float
    energies_imp: list[float] = field(default_factory=list)
    history: list[dict] = field(default_factory=list, repr=False)


class JsonlTelemetry:
    """Append one JSON object per iteration to a stream or file."""

    def __init__(self, sink):
        self._own = isinstance(sink, (str, bytes)) or hasattr(sink, "__fspath__")
        self.fh = open(sink, "a") if self._own else sink

    def __call__(self, record: dict):
        self.fh.write(json.dumps(record) + "\n")
        self.fh.flush()

    def close(self):
        if self._own:
            self.fh.close()


class Anderson:
    def __init__(self, depth: int, beta: float):
        self.depth, self.beta = depth, beta
        self.x: list[np.ndarray] = []
        self.g: list[np.ndarray] = []

    def step(self, x: np.ndarray, fx: np.ndarray) -> np.ndarray:
        g = fx - x
        self.x.append(x)
        self.g.append(g)
        if len(self.x) > self.depth + 1:
            self.x.pop(0)
            self.g.pop(0)
        if len(self.x) == 1:
            return x + self.beta * g
        dX = np.array([b - a for a, b in zip(self.x[:-1], self.x[1:])]).T
        dG = np.array([b - a for a, b in zip(self.g[:-1], self.g[1:])]).T
        gamma, *_ = np.linalg.lstsq(dG, g, rcond=1e-12)
        return x + self.beta * g - (dX + self.beta * dG) @ gamma


def dmet_solve(problem: ManyBodyProblem, config: LoopConfig | None = None,
               P_init: np.ndarray | None = None, D_init: np.ndarray | None = None,
               Lambda_init: np.ndarray | None = None, mu_init: float = 0.0,
               telemetry: Callable[[dict], None] | None = None) -> DmetState:
    """Iterate the embedding map to a fixed point ``P = F_HL(F_LL(P))``."""
    cfg = config or LoopConfig()
    part = problem.partition
    L, n = problem.L, problem.N
    space = ConstraintSpace(part)
    if P_init is None:
        D0, _ = aufbau_projector(problem.h, n)
        P_init = bd(D0, part)
        D_init = D0 if D_init is None else D_init
    offset = (n / L) * np.eye(L)
    to_vec = lambda P: space.coords(P)
    to_mat = lambda y: space.matrix(y) + offset
    x = to_vec(P_init)
    D, Lam, mu = D_init, Lambda_init, mu_init
    mixer = Anderson(cfg.anderson, cfg.beta) if cfg.anderson else None
    history = []
    t0 = time.perf_counter()
    for it in range(1, cfg.max_iter + 1):
        P = to_mat(x)
        ll = low_level_map(problem, P, D_init=D, Lambda_init=Lam, tol=cfg.low_level_tol)
        hl = high_level_map(problem, ll.D, tol=cfg.mu_tol, mu0=mu, method=cfg.method)
        D, Lam, mu = ll.D, ll.Lambda, hl.mu
        fx = to_vec(hl.P)
        res = float(np.linalg.norm(hl.P - P))
        rec = {"iteration": it, "alpha": problem.alpha, "residual": res, "mu": mu,
               "energy_hf": ll.energy, "energy_imp": float(sum(hl.energies)),
               "low_level_iterations": ll.iterations, "low_level_residual": ll.residual,
               "elapsed": time.perf_counter() - t0}
        history.append(rec)
        if telemetry is not None:
            telemetry(rec)
        log.info("dmet iteration %d residual %.3e mu %.6g", it, res, mu)
        if res < cfg.tol:
            return DmetState(P, D, mu, Lam, res, it, True, problem.alpha, ll.energy,
                             hl.energies, history)
        x = mixer.step(x, fx) if mixer else (1 - cfg.beta) * x + cfg.beta * fx
    raise FixedPointNotConverged(cfg.max_iter, res, history)


def dmet_continuation(problem: ManyBodyProblem, alphas: Sequence[float],
                      config: LoopConfig | None = None, telemetry=None,
                      max_halvings: int = 6) -> list[DmetState]:
    """Solve along a grid of couplings, warm-starting each point from the previous one.

    When a point fails to converge, intermediate couplings are inserted by
    halving the step (at most ``max_halvings`` times) before giving up.
    """
    states = []
    prev = None
    a_prev = 0.0

    def solve_at(a, seed):
        p = problem.with_alpha(a)
        if seed is None:
            return dmet_solve(p, config, telemetry=telemetry)
        return dmet_solve(p, config, P_init=seed.P, D_init=seed.D, Lambda_init=seed.Lambda,
                          mu_init=seed.mu, telemetry=telemetry)

    for a in alphas:
        target = float(a)
        depth = 0
        while True:
            try:
                st = solve_at(target, prev)
            except ConvergenceFailure:
                if prev is None or depth >= max_halvings:
                    raise
                depth += 1
                target = 0.5 * (a_prev + target)
                log.info("continuation step failed, retrying at alpha=%.6g", target)
                continue
            prev, a_prev = st, target
            if target == float(a):
                break
            target, depth = float(a), 0
        states.append(prev)
    return states
