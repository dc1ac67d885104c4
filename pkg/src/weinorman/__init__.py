"""Wei-Norman reduction for the classical Lie algebras A, B, C, D (and G2).

Typical use::

    from weinorman import build_matrix_basis, extract_hierarchy, emit_equations
    basis = build_matrix_basis("B", 2)
    print(emit_equations(extract_hierarchy(basis)))
"""

from .integrate import (CoeffVector, SolveOptions, compare_with_reference, reconstruct_K,
                        reference_solution, solve_wn)
from .liealg import build_matrix_basis, verify_block_structure
from .rootsys import ConfigurationError, build_root_system, dim_a1
from .wn import assemble_A, degree_report, emit_equations, extract_hierarchy, parse_machine

__all__ = [
    "CoeffVector",
    "ConfigurationError",
    "SolveOptions",
    "assemble_A",
    "build_matrix_basis",
    "build_root_system",
    "compare_with_reference",
    "degree_report",
    "dim_a1",
    "emit_equations",
    "extract_hierarchy",
    "parse_machine",
    "reconstruct_K",
    "reference_solution",
    "solve_wn",
    "verify_block_structure",
]
__version__ = "0.1.0"
