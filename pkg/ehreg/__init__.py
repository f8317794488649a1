"""Robust Bayesian linear regression with extremely heavily-tailed (EH) errors."""

__version__ = "0.1.0"
