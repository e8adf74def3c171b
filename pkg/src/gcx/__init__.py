"""Numerical toolkit for twisted generalized complex structures and generalized moment maps."""

__version__ = "0.1.0"

from .genlin import (GeneralizedStructure, Quadruple, StructureError, b_field_shift,
                     compatible_polar, from_complex_structure, from_symplectic, quadruple_extract,
                     type_of, validate_structure)
from .spinor import MultiForm, purity_report, spinor_of_structure, structure_from_spinor
from .geom import courant_bracket, integrability_residual
from .hamilton import MomentSystem, hamiltonian_residual, weak_nondegeneracy_report
from .convexity import convex_hull, level_connectivity, theorem_a_report
from .builtins import BUILTINS, make_builtin

__all__ = [
    "__version__", "GeneralizedStructure", "Quadruple", "StructureError", "b_field_shift",
    "compatible_polar", "from_complex_structure", "from_symplectic", "quadruple_extract",
    "type_of", "validate_structure", "MultiForm", "purity_report", "spinor_of_structure",
    "structure_from_spinor", "courant_bracket", "integrability_residual", "MomentSystem",
    "hamiltonian_residual", "weak_nondegeneracy_report", "convex_hull", "level_connectivity",
    "theorem_a_report", "BUILTINS", "make_builtin",
]
