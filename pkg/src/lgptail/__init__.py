"""Semiparametric Bayesian estimation of heavy-tailed densities.

A GPD transformation ``f(y) = g_theta(y) psi(G_theta(y))`` with a logistic
Gaussian process prior on ``psi``, sampled by blocked adaptive Metropolis.
"""

__version__ = "0.1.0"
