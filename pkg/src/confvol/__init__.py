"""Numerical toolkit for renormalized volume coefficients and their
conformal variations on model Riemannian manifolds."""

__version__ = "0.1.0"
