"""Coverage probabilities for random spherical caps and the GCC condition number."""

__version__ = "0.1.0"
