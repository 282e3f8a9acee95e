"""owlab: a numerical laboratory for operator-weighted dyadic analysis."""

__version__ = "0.1.0"
