"""Marginal, pseudo-marginal and noisy Metropolis-Hastings toolkit."""

__version__ = "0.1.0"
