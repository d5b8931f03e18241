"""Exception hierarchy.

Every error raised on purpose by the library derives from ``DmetError``.
Errors that signal a violated structural assumption (gaps, compatibility,
representability) also derive from ``AssumptionViolation`` so that callers
such as the command line driver can map them to a single exit code.
"""

from __future__ import annotations


class DmetError(Exception):
    """Base class for all library errors."""


class AssumptionViolation(DmetError):
    """A structural hypothesis of the embedding scheme does not hold."""


class ConvergenceFailure(DmetError):
    """An iterative procedure did not reach its tolerance."""


class InvalidInput(DmetError, ValueError):
    """Malformed problem data (shape, symmetry, index range)."""


class ParseError(InvalidInput):
    """A problem file could not be parsed."""


class DegenerateGroundState(AssumptionViolation):
    def __init__(self, gap: float, tol: float, where: str = "many-body"):
        self.gap = gap
        self.tol = tol
        super().__init__(f"{where} ground state is degenerate: gap {gap:.3e} < {tol:.1e}")


class DegenerateImpurityGroundState(DegenerateGroundState):
    def __init__(self, gap: float, tol: float, fragment: int, mu: float):
        self.fragment = fragment
        self.mu = mu
        super().__init__(gap, tol, where=f"impurity {fragment} (mu={mu:.6g})")


class GaplessSpectrum(AssumptionViolation):
    def __init__(self, gap: float, tol: float, what: str = "one-body spectrum"):
        self.gap = gap
        self.tol = tol
        super().__init__(f"{what} has no gap at the Fermi level: {gap:.3e} < {tol:.1e}")


class GaplessFock(GaplessSpectrum):
    def __init__(self, gap: float, tol: float):
        super().__init__(gap, tol, what="Fock operator")


class AufbauBreakdown(GaplessSpectrum):
    def __init__(self, gap: float, tol: float):
        super().__init__(gap, tol, what="constrained mean-field operator")


class IncompatibleFragment(AssumptionViolation):
    def __init__(self, fragment: int, eigenvalues, delta: float):
        self.fragment = fragment
        self.eigenvalues = eigenvalues
        self.delta = delta
        lo, hi = float(min(eigenvalues)), float(max(eigenvalues))
        super().__init__(
            f"fragment {fragment} is not compatible with the density: local "
            f"occupations span [{lo:.3e}, {hi:.3e}], margin {delta:.1e}"
        )


class NotRepresentable(AssumptionViolation):
    def __init__(self, message: str = "block density is not representable by a projector"):
        super().__init__(message)


class BracketFailure(ConvergenceFailure):
    def __init__(self, lo: float, hi: float, counts):
        self.lo, self.hi, self.counts = lo, hi, counts
        super().__init__(
            f"could not bracket the chemical potential within [{lo:.3g}, {hi:.3g}] "
            f"(fragment counts {counts})"
        )


class PlateauJump(ConvergenceFailure):
    def __init__(self, lo: float, hi: float, count_lo: float, count_hi: float, target: float):
        self.interval = (lo, hi)
        self.counts = (count_lo, count_hi)
        super().__init__(
            f"fragment count jumps over the target {target:g} between mu={lo:.12g} "
            f"({count_lo:.12g}) and mu={hi:.12g} ({count_hi:.12g})"
        )


class SCFNotConverged(ConvergenceFailure):
    def __init__(self, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"SCF stopped after {iterations} iterations, residual {residual:.3e}")


class FixedPointNotConverged(ConvergenceFailure):
    def __init__(self, iterations: int, residual: float, history=None):
        self.iterations = iterations
        self.residual = residual
        self.history = history or []
        super().__init__(
            f"embedding fixed point not reached after {iterations} iterations, "
            f"residual {residual:.3e}"
        )


class LowLevelNotConverged(ConvergenceFailure):
    def __init__(self, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"constrained mean-field solve stopped after {iterations} iterations, "
            f"residual {residual:.3e}"
        )
