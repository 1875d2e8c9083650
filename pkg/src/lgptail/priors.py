"""Priors on the GPD parameters and the LGP hyperparameter settings.

The sampler works in unconstrained coordinates ``zeta`` and ``tau = log(sigma)``
where ``alpha = alpha_min + (2 - alpha_min) exp(zeta / 1.5)`` and ``zeta`` is
standard logistic a priori, while ``sigma`` is half-Cauchy.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

LOG_2_OVER_PI = float(np.log(2.0 / np.pi))


@dataclass(frozen=True)
class PriorConfig:
    alpha_min: float = 0.5
    a_kappa: float = 1.5
    b_kappa: float = 1.5
    a_lambda: float = 16.0
    b_lambda: float = 2.2

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not (value > 0 and np.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value}")
        if self.alpha_min >= 2:
            raise ValueError("alpha_min must be below 2")

    def to_dict(self) -> dict:
        return asdict(self)


def alpha_transform(zeta, alpha_min: float = 0.5):
    return alpha_min + (2.0 - alpha_min) * np.exp(np.asarray(zeta, dtype=float) / 1.5)


def alpha_untransform(alpha, alpha_min: float = 0.5):
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha <= alpha_min):
        raise ValueError(f"alpha must exceed alpha_min={alpha_min}")
    return 1.5 * np.log((alpha - alpha_min) / (2.0 - alpha_min))


def logistic_logpdf(zeta):
    zeta = np.asarray(zeta, dtype=float)
    # symmetric form, stable for large |zeta|
    a = np.abs(zeta)
    return -a - 2.0 * np.log1p(np.exp(-a))


def half_cauchy_log_tau(tau):
    """Half-Cauchy log density of ``sigma = exp(tau)`` expressed in ``tau``."""
    tau = np.asarray(tau, dtype=float)
    # log(1 + s^2) written to avoid overflow of exp(2 tau)
    log1p_s2 = np.logaddexp(0.0, 2.0 * tau)
    return LOG_2_OVER_PI - log1p_s2 + tau


def log_prior_theta(zeta, tau):
    """Joint log prior density of ``(zeta, tau)``."""
    return logistic_logpdf(zeta) + half_cauchy_log_tau(tau)


def sample_prior_theta(n: int, rng: np.random.Generator, alpha_min: float = 0.5):
    """Draw ``(alpha, sigma)`` pairs from the prior; returns two arrays."""
    zeta = rng.logistic(size=n)
    sigma = np.abs(rng.standard_cauchy(size=n))
    return alpha_transform(zeta, alpha_min), sigma
