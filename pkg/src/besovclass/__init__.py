"""Hierarchical Besov-Laplace and Gaussian-process priors for
nonparametric binary classification, with dimension-robust MCMC."""

__version__ = "0.1.0"
