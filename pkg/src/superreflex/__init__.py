"""Quantitative superreflexivity: J-convexity and summation-operator
factorization constants of finite-dimensional normed spaces."""

from .errors import (
    BudgetExhausted, CheckFailed, DimensionMismatch, PreconditionError, SuperreflexError,
)
from .jconvexity import JWitness, j_certify_grid, j_margin, j_upper_search
from .operators import Factorization, LinOperator, search_factorization, summation_operator
from .spaces import INF, dual_norm, make_l2sum, make_lp, norm, parse_space

__version__ = "0.1.0"

__all__ = [
    "BudgetExhausted", "CheckFailed", "DimensionMismatch", "PreconditionError",
    "SuperreflexError", "JWitness", "j_certify_grid", "j_margin", "j_upper_search",
    "Factorization", "LinOperator", "search_factorization", "summation_operator",
    "INF", "dual_norm", "make_l2sum", "make_lp", "norm", "parse_space",
]
