"""Numerical toolkit for the perturbed Moser-Trudinger maximization problem on planar domains."""

__version__ = "0.1.0"

from .errors import GridMismatch, NumericalAbort  # noqa: E402

__all__ = ["GridMismatch", "NumericalAbort", "__version__"]
