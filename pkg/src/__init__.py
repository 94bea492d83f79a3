"""
Puiseux Roots over Monomial Valuations
Exact expansions of algebraic functions in several variables, graded by weighted degree.
"""

from .weights import GradeValue, Weights, rel_approx
from .tower_arithmetic import FunctionField, TowerField
from .graded_series import SeriesRing, TruncatedGradedSeries
from .homogeneous import HomogeneousElement, HomTower, tower_compress
from .puiseux_solver import MonicPoly, PuiseuxRoot, newton_puiseux_roots
from .newton_geometry import aj_roots, discriminant, newton_polygon, quasi_ordinary_test
from .effective_ift import effective_ift
from .liouville_detector import liouville_flag, partial_sum_approximants, record
from .document_parser import parse, run, serialize

__version__ = "1.0.0"
__author__ = "Puiseux Toolkit Team"

__all__ = [
    "GradeValue",
    "Weights",
    "rel_approx",
    "FunctionField",
    "TowerField",
    "SeriesRing",
    "TruncatedGradedSeries",
    "HomogeneousElement",
    "HomTower",
    "tower_compress",
    "MonicPoly",
    "PuiseuxRoot",
    "newton_puiseux_roots",
    "aj_roots",
    "discriminant",
    "newton_polygon",
    "quasi_ordinary_test",
    "effective_ift",
    "liouville_flag",
    "partial_sum_approximants",
    "record",
    "parse",
    "run",
    "serialize",
]
