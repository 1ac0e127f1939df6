"""Jacobi polynomials for root systems with even multiplicities on compact tori.

Exact Jacobi polynomials and shift operators, the Jacobi transform with its
Paley-Wiener support experiments, and the modified wave equation.
"""

from .exppoly import ExpPoly, delta_poly, inner_product_m, orbit_sum
from .jacobi import jacobi, jacobi_summary, jacobi_table, scalar_tables
from .root_system import KINDS, RootSystemData, RootSystemError, build_root_system
from .shiftop import DiffOperator, solve_D

__version__ = "0.1.0"

__all__ = [
    "KINDS", "DiffOperator", "ExpPoly", "RootSystemData", "RootSystemError", "build_root_system", "delta_poly",
    "inner_product_m", "jacobi", "jacobi_summary", "jacobi_table", "orbit_sum", "scalar_tables", "solve_D",
]
