"""Generalized Pareto distribution (location 0, shape 1/alpha) and the
synthetic heavy-tailed families used in the simulation study.

The GPD is parameterized by its tail index ``alpha`` and scale ``sigma``:

    g(y) = sigma^-1 (1 + y / (alpha sigma))^-(alpha + 1),   y >= 0.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special, stats

# largest probability accepted by the quantile functions before clamping
Q_MAX = 1.0 - 1e-12


@dataclass(frozen=True)
class ThetaParam:
    """GPD tail index / scale pair."""

    alpha: float
    sigma: float

    def __post_init__(self):
        if not (self.alpha > 0 and np.isfinite(self.alpha)):
            raise ValueError(f"alpha must be positive and finite, got {self.alpha}")
        if not (self.sigma > 0 and np.isfinite(self.sigma)):
            raise ValueError(f"sigma must be positive and finite, got {self.sigma}")

    @property
    def xi(self) -> float:
        return 1.0 / self.alpha

    def to_unconstrained(self, alpha_min: float = 0.5) -> tuple[float, float]:
        """Map to ``(zeta, tau)``; see :mod:`lgptail.priors`."""
        from .priors import alpha_untransform

        return float(alpha_untransform(self.alpha, alpha_min)), float(np.log(self.sigma))

    @classmethod
    def from_unconstrained(cls, zeta: float, tau: float, alpha_min: float = 0.5) -> "ThetaParam":
        from .priors import alpha_transform

        return cls(float(alpha_transform(zeta, alpha_min)), float(np.exp(tau)))


def _unpack(theta) -> tuple[float, float]:
    if isinstance(theta, ThetaParam):
        return theta.alpha, theta.sigma
    alpha, sigma = theta
    return alpha, sigma


def _check_y(y):
    y = np.asarray(y, dtype=float)
    if np.any(y < 0) or np.any(np.isnan(y)):
        raise ValueError("GPD support is y >= 0")
    return y


def gpd_logpdf(theta, y):
    alpha, sigma = _unpack(theta)
    y = _check_y(y)
    return -np.log(sigma) - (alpha + 1.0) * np.log1p(y / (alpha * sigma))


def gpd_pdf(theta, y):
    """Density ``g_theta(y)``. Raises ``ValueError`` for negative ``y``."""
    alpha, sigma = _unpack(theta)
    y = _check_y(y)
    # direct power form: exact on dyadic examples, underflows gracefully
    return np.power(1.0 + y / (alpha * sigma), -(alpha + 1.0)) / sigma


def gpd_logsf(theta, y):
    alpha, sigma = _unpack(theta)
    y = _check_y(y)
    return -alpha * np.log1p(y / (alpha * sigma))


def gpd_sf(theta, y):
    return np.exp(gpd_logsf(theta, y))


def gpd_cdf(theta, y):
    return -np.expm1(gpd_logsf(theta, y))


def gpd_quantile(theta, q):
    """Inverse CDF ``alpha sigma ((1 - q)^(-1/alpha) - 1)``.

    ``q`` must lie in ``[0, 1)``; values above ``1 - 1e-12`` are clamped
    to that bound so the result stays finite.
    """
    alpha, sigma = _unpack(theta)
    q = np.asarray(q, dtype=float)
    if np.any(q < 0) or np.any(q >= 1) or np.any(np.isnan(q)):
        raise ValueError("quantile level must lie in [0, 1)")
    q = np.minimum(q, Q_MAX)
    return alpha * sigma * np.expm1(-np.log1p(-q) / alpha)


def gpd_isf(theta, p):
    """Upper quantile ``G^-1(1 - p)`` computed without forming ``1 - p``."""
    alpha, sigma = _unpack(theta)
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0) or np.any(p > 1) or np.any(np.isnan(p)):
        raise ValueError("exceedance probability must lie in (0, 1]")
    p = np.maximum(p, 1.0 - Q_MAX)
    return alpha * sigma * np.expm1(-np.log(p) / alpha)


def psi_from_density(f: Callable, theta, u):
    """Density of ``U = G_theta(Y)`` when ``Y`` has density ``f``.

    ``psi(u) = f(G^-1(u)) / g(G^-1(u))``. Any density ``f`` on
    ``(0, inf)`` can be written as ``g_theta * psi(G_theta)`` this way;
    with ``f = g_theta`` the result is identically one.
    """
    u = np.asarray(u, dtype=float)
    if np.any(u < 0) or np.any(u >= 1):
        raise ValueError("u must lie in [0, 1)")
    y = gpd_quantile(theta, u)
    return f(y) / gpd_pdf(theta, y)


# ---------------------------------------------------------------------------
# synthetic families


class Family(str, enum.Enum):
    GPD = "gpd"
    GPD4 = "gpd4"
    HALFT = "halft"


@dataclass(frozen=True)
class SyntheticFamily:
    """One of the three regularly varying test shapes, each with tail index ``alpha``.

    * ``gpd``:   ``g_(alpha, 1)``
    * ``gpd4``:  ``4 g G^3`` with ``(alpha, 1)``, the law of the max of four GPD draws
    * ``halft``: ``|T|`` with ``T`` Student-t on ``alpha`` degrees of freedom
    """

    kind: Family
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "kind", Family(self.kind))
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    @property
    def xi(self) -> float:
        return 1.0 / self.alpha

    def pdf(self, y):
        y = _check_y(y)
        th = (self.alpha, 1.0)
        if self.kind is Family.GPD:
            return gpd_pdf(th, y)
        if self.kind is Family.GPD4:
            return 4.0 * gpd_pdf(th, y) * gpd_cdf(th, y) ** 3
        return halft_pdf(self.alpha, y)

    def sf(self, y):
        y = _check_y(y)
        th = (self.alpha, 1.0)
        if self.kind is Family.GPD:
            return gpd_sf(th, y)
        if self.kind is Family.GPD4:
            # 1 - G^4 = (1 - G)(1 + G + G^2 + G^3), avoids cancellation
            g = gpd_cdf(th, y)
            return gpd_sf(th, y) * (1 + g + g * g + g**3)
        return halft_sf(self.alpha, y)

    def cdf(self, y):
        y = _check_y(y)
        if self.kind is Family.GPD4:
            return gpd_cdf((self.alpha, 1.0), y) ** 4
        return 1.0 - self.sf(y)

    def sample(self, n: int, rng: np.random.Generator):
        if self.kind is Family.GPD:
            return sample_gpd((self.alpha, 1.0), n, rng)
        if self.kind is Family.GPD4:
            return sample_gpd4(self.alpha, n, rng)
        return sample_halft(self.alpha, n, rng)


def halft_pdf(alpha: float, y):
    """Half Student-t density ``2 c(alpha) (1 + y^2/alpha)^-((alpha + 1)/2)``."""
    y = _check_y(y)
    log_c = (
        special.gammaln((alpha + 1) / 2)
        - special.gammaln(alpha / 2)
        - 0.5 * np.log(alpha * np.pi)
    )
    return 2.0 * np.exp(log_c - 0.5 * (alpha + 1) * np.log1p(y * y / alpha))


def halft_sf(alpha: float, y):
    return 2.0 * stats.t.sf(_check_y(y), df=alpha)


def sample_gpd(theta, n: int, rng: np.random.Generator):
    """Inverse-CDF draws from ``GPD(theta)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    alpha, sigma = _unpack(theta)
    # 1 - U has the same law as U and keeps the log finite
    v = 1.0 - rng.random(n)
    return alpha * sigma * np.expm1(-np.log(v) / alpha)


def sample_gpd4(alpha: float, n: int, rng: np.random.Generator):
    if n < 1:
        raise ValueError("n must be >= 1")
    return sample_gpd((alpha, 1.0), 4 * n, rng).reshape(n, 4).max(axis=1)


def sample_halft(alpha: float, n: int, rng: np.random.Generator):
    if n < 1:
        raise ValueError("n must be >= 1")
    return np.abs(rng.standard_t(alpha, size=n))
