"""Carleman linearisation of quadratic ODEs, with the worst-case and chaotic
benchmarks that probe when it stays accurate."""

from .carleman import CarlemanOperator, assemble, assemble_global, integrate_euler, solve_global
from .errors import (CapacityError, ContractError, DivergenceError, DomainError, LabError,
                     NumericalError, ParseError)
from .quadratic_ode import QuadraticSystem, reynolds_like_r, rhs_eval, spectral_report
from .reference import IntegratorConfig, integrate_reference

__all__ = [
    "CapacityError", "CarlemanOperator", "ContractError", "DivergenceError", "DomainError",
    "IntegratorConfig", "LabError", "NumericalError", "ParseError", "QuadraticSystem",
    "assemble", "assemble_global", "integrate_euler", "integrate_reference",
    "reynolds_like_r", "rhs_eval", "solve_global", "spectral_report",
]
__version__ = "0.1.0"
