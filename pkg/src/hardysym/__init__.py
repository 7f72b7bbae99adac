"""Biradial symmetry solver and Morse-index analyzer for Hardy-Sobolev critical equations."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConvergenceError,
    ExtrapolationError,
    GridMismatchError,
    HardySymError,
    NonRealExponentError,
    ParameterError,
    ResolutionError,
    ShootingError,
    SpectralError,
    StalenessError,
)
from .grids import BiradialGrid, Field, RadialGrid, SphereGrid, SplitDims  # noqa: E402
from .morse import MorseReport, morse_index  # noqa: E402
from .operators import asymptotic_exponents, hardy_sobolev_quotient  # noqa: E402
from .solve import ProblemSpec, Solution, best_constant, solve, symmetry_breaking_criterion  # noqa: E402
from .sphere import (  # noqa: E402
    SphereProblem,
    shoot_nodal_solution,
    sphere_constant_solution,
    sphere_morse_index,
    stereographic_transport,
)
from .symmetry import SymmetryVerdict, radiality_defect, symmetry_verdict, w_relative  # noqa: E402

__all__ = [
    "BiradialGrid", "ConvergenceError", "ExtrapolationError", "Field", "GridMismatchError",
    "HardySymError", "MorseReport", "NonRealExponentError", "ParameterError", "ProblemSpec",
    "RadialGrid", "ResolutionError", "ShootingError", "Solution", "SpectralError", "SphereGrid",
    "SphereProblem", "SplitDims", "StalenessError", "SymmetryVerdict", "asymptotic_exponents",
    "best_constant", "hardy_sobolev_quotient", "morse_index", "radiality_defect",
    "shoot_nodal_solution", "solve", "sphere_constant_solution", "sphere_morse_index",
    "stereographic_transport", "symmetry_breaking_criterion", "symmetry_verdict", "w_relative",
]
