"""Posterior summaries: tail index, tail quantiles, density curves, return periods.

Under the model the distribution function is ``F(y) = Psi(G_theta(y - a))``
with ``a`` the support shift, hence the upper quantile
``Q(p) = a + G_theta^-1(Psi^-1(1 - p))``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .gpd import gpd_cdf, gpd_pdf, gpd_quantile, gpd_sf
from .model import SemiparametricModel

DEFAULT_PROBS = (1e-2, 1e-3, 1e-4, 1e-5)


@dataclass(frozen=True)
class Interval:
    estimate: float
    lower95: float
    upper95: float
    mean: float
    median: float

    def contains(self, value: float) -> bool:
        return self.lower95 <= value <= self.upper95

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class QuantileReport:
    p: float
    estimate: float
    lower95: float
    upper95: float

    def to_dict(self) -> dict:
        return asdict(self)


def summarize(values, point: str = "median", level: float = 0.95) -> Interval:
    """Point estimate plus equal-tailed interval of a vector of draws."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("no draws to summarize")
    tail = 50.0 * (1.0 - level)
    lo, med, hi = np.percentile(values, [tail, 50.0, 100.0 - tail])
    mean = float(values.mean())
    est = mean if point == "mean" else float(med)
    return Interval(estimate=est, lower95=float(lo), upper95=float(hi), mean=mean, median=float(med))


def _rows(samples):
    samples = np.asarray(samples, dtype=float)
    return samples[None, :] if samples.ndim == 1 else samples


def xi_draws(model: SemiparametricModel, samples) -> np.ndarray:
    return np.array([model.theta(row).xi for row in _rows(samples)])


def xi_summary(model: SemiparametricModel, samples) -> Interval:
    """Posterior mean of ``xi = 1/alpha`` and its 95% equal-tailed interval."""
    return summarize(xi_draws(model, samples), point="mean")


def tail_quantile(model: SemiparametricModel, x, p):
    """Upper quantile ``Q(p)`` for a single state ``x`` (array of ``p`` allowed)."""
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0) or np.any(p >= 1):
        raise ValueError("p must lie in (0, 1)")
    if np.any(p < 1e-12):
        raise ValueError("p below 1e-12 cannot be resolved")
    u = model.psi(x).isf(p)
    return model.data.support_shift + gpd_quantile(model.theta(x), np.minimum(u, 1.0 - 1e-12))


def survival(model: SemiparametricModel, x, y):
    """``F_bar(y) = 1 - Psi(G_theta(y - a))`` for a single state ``x``."""
    y = np.asarray(y, dtype=float) - model.data.support_shift
    if np.any(y < 0):
        raise ValueError("level must not lie below the support shift")
    theta = model.theta(x)
    # 1 - G in closed form, then Psi's upper tail mass at u = 1 - (1 - G)
    v = gpd_sf(theta, y)
    return model.psi(x).sf(1.0 - v)


def density(model: SemiparametricModel, x, y):
    y = np.asarray(y, dtype=float) - model.data.support_shift
    theta = model.theta(x)
    out = np.zeros_like(y)
    ok = y >= 0
    out[ok] = gpd_pdf(theta, y[ok]) * model.psi(x).pdf(gpd_cdf(theta, y[ok]))
    return out


def tail_quantile_draws(model: SemiparametricModel, samples, probs, inclusion_fraction: float = 1.0) -> np.ndarray:
    """Per-draw ``Q(p)`` matrix of shape (n_draws, len(probs)).

    ``probs`` refer to the original, untruncated record; with a fraction
    ``q = n/N`` of records retained, ``Q(p)`` is the model quantile at ``p/q``.
    """
    probs = np.atleast_1d(np.asarray(probs, dtype=float))
    if not 0 < inclusion_fraction <= 1:
        raise ValueError("inclusion fraction must lie in (0, 1]")
    scaled = probs / inclusion_fraction
    if np.any(scaled >= 1):
        raise ValueError("exceedance probability exceeds the retained fraction")
    return np.array([tail_quantile(model, row, scaled) for row in _rows(samples)])


def quantile_report(model: SemiparametricModel, samples, probs=DEFAULT_PROBS, inclusion_fraction: float = 1.0):
    Q = tail_quantile_draws(model, samples, probs, inclusion_fraction)
    out = []
    for j, p in enumerate(np.atleast_1d(probs)):
        s = summarize(Q[:, j])
        out.append(QuantileReport(float(p), s.estimate, s.lower95, s.upper95))
    return out


def density_curve(model: SemiparametricModel, samples, y):
    """Pointwise posterior mean and 95% band of the density over ``y``."""
    y = np.asarray(y, dtype=float)
    D = np.array([density(model, row, y) for row in _rows(samples)])
    lo, hi = np.percentile(D, [2.5, 97.5], axis=0)
    return {"y": y, "mean": D.mean(axis=0), "lower95": lo, "upper95": hi}


def return_period_draws(model: SemiparametricModel, samples, level: float, records_per_year: float = 365.25,
                        inclusion_fraction: float = 1.0) -> np.ndarray:
    if level <= model.data.support_shift:
        raise ValueError("level must exceed the support lower bound")
    if not 0 < inclusion_fraction <= 1:
        raise ValueError("inclusion fraction must lie in (0, 1]")
    sf = np.array([float(survival(model, row, level)) for row in _rows(samples)])
    with np.errstate(divide="ignore"):
        return 1.0 / (records_per_year * inclusion_fraction * sf)


def return_period(model: SemiparametricModel, samples, level: float, records_per_year: float = 365.25,
                  inclusion_fraction: float = 1.0) -> Interval:
    """Years between exceedances of ``level``: ``1 / (records_per_year * q * F_bar(level))``."""
    return summarize(return_period_draws(model, samples, level, records_per_year, inclusion_fraction))
