"""Density matrix embedding for lattice and model fermion Hamiltonians."""

__version__ = "0.1.0"

from .errors import (AssumptionViolation, AufbauBreakdown, BracketFailure, ConvergenceFailure,
                     DegenerateGroundState, DegenerateImpurityGroundState, DmetError,
                     GaplessFock, GaplessSpectrum, IncompatibleFragment, InvalidInput,
                     NotRepresentable, ParseError, PlateauJump, SCFNotConverged)
from .fock import FockBasis, ManyBodyProblem, assemble_hamiltonian, ground_state, one_rdm, solve_sector
from .geometry import ConstraintSpace, FragmentPartition, aufbau_projector, bd, tangent_map
from .impurity import ImpurityModel, build_impurity_basis, build_impurity_model
from .highlevel import high_level_map, high_level_map_hf, match_chemical_potential
from .lowlevel import global_hf, low_level_map
from .meanfield import hf_energy_and_fock
from .loop import DmetState, LoopConfig, dmet_continuation, dmet_solve
from .diagnostics import (ResponseOperator, assemble_response_R, check_assumptions, lx_plus,
                          nrep_local, nrep_two_fragment)
from .perturbation import derivative_sweep, first_order_density
from .models import hubbard_chain

__all__ = [name for name in dir() if not name.startswith("_")]
