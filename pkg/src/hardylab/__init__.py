"""hardylab: numerical laboratory for variable-exponent Hardy and
Caccioppoli inequalities on one-dimensional domains."""

__version__ = "0.1.0"

from .expr import (
    Expr,
    Interval,
    differentiate,
    evaluate,
    parse,
    singular_points,
    to_string,
)

__all__ = [
    "Expr",
    "Interval",
    "parse",
    "evaluate",
    "differentiate",
    "singular_points",
    "to_string",
    "__version__",
]
