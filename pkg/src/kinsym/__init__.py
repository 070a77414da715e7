"""Group-classification toolkit for the one-dimensional kinetic equation."""
from .expr import Env, Expr, evaluate, diff, parse, subs, to_text

__all__ = ["Env", "Expr", "evaluate", "diff", "parse", "subs", "to_text"]
__version__ = "0.1.0"
