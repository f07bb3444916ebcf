"""Bayesian linear regression with a super heavy-tailed error density.

Numerical checks that the posterior discards diverging outliers, plus
brute-force verifiers for the supporting covering and product lemmas.
"""

from .errors import (
    BudgetError,
    InvalidInputError,
    NumericalError,
    PostRobustError,
    PreconditionError,
    UnsupportedDimensionError,
)
from .heavytail import CoefficientPrior, LptnDensity, ScalePrior
from .kernels import BACKEND
from .model import RegressionProblem, canonical_problem

__all__ = [
    "BACKEND",
    "BudgetError",
    "CoefficientPrior",
    "InvalidInputError",
    "LptnDensity",
    "NumericalError",
    "PostRobustError",
    "PreconditionError",
    "RegressionProblem",
    "ScalePrior",
    "UnsupportedDimensionError",
    "canonical_problem",
]

__version__ = "0.1.0"
