"""Regularization-annealed epoch dual averaging for sparse stochastic optimization."""

__version__ = "0.1.0"
