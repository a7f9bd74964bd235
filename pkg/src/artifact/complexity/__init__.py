"""Information complexity of Karhunen-Loeve truncation for tensor-product fields."""

from .asymptotics import (MomentSummary, asymptotic_n, lattice_constant, moments,
                          normal_quantile_q)
from .catalog import FIELDS, EigenSequence, catalog, detect_lattice
from .exact import ComplexityResult, asymptotic_result, convergence_table, exact_count

__all__ = [
    "FIELDS", "ComplexityResult", "EigenSequence", "MomentSummary", "asymptotic_n",
    "asymptotic_result", "catalog", "convergence_table", "detect_lattice", "exact_count",
    "lattice_constant", "moments", "normal_quantile_q",
]
