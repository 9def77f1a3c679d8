"""Numerical laboratory for singularly perturbed two-well elastic energies."""

from ._backend import BACKEND
from .density import TwoWellDensity, density_eval, density_gradient, distance_to_well, q_lin
from .energy import EnergyBreakdown, EnergyParams, energy_eval, energy_gradient, eta_bar
from .errors import (DomainError, GeometryError, GridTooSmallError, InvalidInputError,
                     ResolutionError, StageError, StagnationError, StructuralError, TwoWellError)
from .gamma import LimitingTriple, check_admissible, gamma_gap, limiting_energy, make_triple, triple_distance
from .grid import GridField, read_twg, write_twg
from .optimize import minimize
from .partition import (CaccioppoliPartition, build_partition, coarsen_partition,
                        component_translations, jump_height_extract, p_exponent,
                        rescaled_displacement)
from .profile import ReducedDensity, analytic_K, solve_single_profile
from .rigidity import decompose_phases

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "TwoWellDensity", "density_eval", "density_gradient", "distance_to_well", "q_lin",
    "EnergyBreakdown", "EnergyParams", "energy_eval", "energy_gradient", "eta_bar",
    "DomainError", "GeometryError", "GridTooSmallError", "InvalidInputError", "ResolutionError",
    "StageError", "StagnationError", "StructuralError", "TwoWellError",
    "LimitingTriple", "check_admissible", "gamma_gap", "limiting_energy", "make_triple",
    "triple_distance", "GridField", "read_twg", "write_twg", "minimize",
    "CaccioppoliPartition", "build_partition", "coarsen_partition", "component_translations",
    "jump_height_extract", "p_exponent", "rescaled_displacement",
    "ReducedDensity", "analytic_K", "solve_single_profile", "decompose_phases",
]
