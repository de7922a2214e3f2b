"""Truthful mechanisms, incentive checkers and exhaustive lower-bound searches."""
from .core import INF, PHI, SQRT5, Distribution, MechanismOutcome, Scalar, TypeDomain, parse_scalar

__version__ = "0.1.0"

__all__ = ["INF", "PHI", "SQRT5", "Distribution", "MechanismOutcome", "Scalar", "TypeDomain", "parse_scalar"]
