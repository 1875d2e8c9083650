"""Peaks-over-threshold baseline: Bayesian GPD fit to threshold excesses.

Excesses ``y - t`` over a threshold ``t`` get the same ``(alpha, sigma)``
prior as the semiparametric model and are sampled with the same adaptive
Metropolis kernel using a single ``(zeta, tau)`` block. Tail quantiles
are extrapolated as ``t + G_theta^-1(1 - p / zeta_t)`` with
``zeta_t`` the exceedance fraction.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .gpd import gpd_isf
from .priors import PriorConfig, alpha_transform, alpha_untransform
from .sampler import PosteriorDraws, SamplerConfig, run_chain
from .summaries import Interval, summarize

logger = logging.getLogger(__name__)

MIN_EXCEEDANCES = 30


class TooFewExceedances(ValueError):
    pass


@dataclass
class PotFit:
    threshold: float
    k: int
    n: int
    alpha: np.ndarray
    sigma: np.ndarray
    draws: PosteriorDraws = field(repr=False)

    @property
    def exceed_frac(self) -> float:
        return self.k / self.n

    @property
    def xi(self) -> np.ndarray:
        return 1.0 / self.alpha

    def xi_summary(self) -> Interval:
        return summarize(self.xi, point="mean")


def default_threshold_grid(start: float = 0.005, stop: float = 3.0, step: float = 0.025) -> np.ndarray:
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(n)


def fit_pot(
    y,
    threshold: float,
    prior: PriorConfig | None = None,
    sampler_config: SamplerConfig | None = None,
    min_exceedances: int = MIN_EXCEEDANCES,
    rng: np.random.Generator | None = None,
) -> PotFit:
    """Sample the GPD posterior of the excesses over ``threshold``."""
    prior = prior or PriorConfig()
    sampler_config = sampler_config or SamplerConfig()
    y = np.asarray(y, dtype=float)
    excess = np.sort(y[y > threshold] - threshold)
    k = excess.size
    if k < max(min_exceedances, 1):
        raise TooFewExceedances(f"only {k} exceedances of threshold {threshold} (need {min_exceedances})")
    scale0 = float(np.median(excess))
    init = [float(alpha_untransform(2.0, prior.alpha_min)), math.log(scale0) if scale0 > 0 else 0.0]
    draws = run_chain(
        _kernels.gpd_log_posterior,
        (excess, float(prior.alpha_min)),
        init,
        sampler_config,
        blocks=[np.arange(2)],
        names=["zeta", "tau"],
        block_names=["theta"],
        rng=rng,
    )
    alpha = alpha_transform(draws.column("zeta"), prior.alpha_min)
    return PotFit(threshold=float(threshold), k=k, n=y.size, alpha=alpha, sigma=np.exp(draws.column("tau")), draws=draws)


def pot_tail_quantile_draws(fit: PotFit, p) -> np.ndarray:
    """Per-draw ``t + alpha sigma ((p / zeta_t)^(-1/alpha) - 1)``; shape (n_draws, len(p))."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if np.any(p <= 0) or np.any(p > fit.exceed_frac * (1 + 1e-12)):
        raise ValueError(f"p must lie in (0, {fit.exceed_frac}] for this threshold")
    ratio = np.minimum(p / fit.exceed_frac, 1.0)
    return fit.threshold + np.array([gpd_isf((a, s), ratio) for a, s in zip(fit.alpha, fit.sigma)])


def pot_tail_quantile(fit: PotFit, p) -> list[Interval]:
    Q = pot_tail_quantile_draws(fit, p)
    return [summarize(Q[:, j]) for j in range(Q.shape[1])]


@dataclass
class XiCurvePoint:
    threshold: float
    k: int
    estimate: float | None
    lower95: float | None
    upper95: float | None

    @property
    def is_gap(self) -> bool:
        return self.estimate is None


def pot_xi_curve(
    y,
    thresholds=None,
    prior: PriorConfig | None = None,
    sampler_config: SamplerConfig | None = None,
    min_exceedances: int = MIN_EXCEEDANCES,
    seed: int | None = None,
    n_jobs: int = 1,
) -> list[XiCurvePoint]:
    """POT estimates of ``xi`` across thresholds; thin thresholds become gaps."""
    y = np.asarray(y, dtype=float)
    thresholds = default_threshold_grid() if thresholds is None else np.asarray(thresholds, dtype=float)
    seeds = np.random.SeedSequence(seed).spawn(thresholds.size)
    jobs = [(y, float(t), prior, sampler_config, min_exceedances, s) for t, s in zip(thresholds, seeds)]
    if n_jobs == 1:
        return [_curve_point(*job) for job in jobs]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(_curve_point, *zip(*jobs)))


def _curve_point(y, t, prior, sampler_config, min_exceedances, seed_seq) -> XiCurvePoint:
    k = int(np.count_nonzero(y > t))
    try:
        fit = fit_pot(y, t, prior, sampler_config, min_exceedances, rng=np.random.default_rng(seed_seq))
    except TooFewExceedances:
        logger.info("threshold %.4g: %d exceedances, recorded as gap", t, k)
        return XiCurvePoint(t, k, None, None, None)
    s = fit.xi_summary()
    return XiCurvePoint(t, k, s.estimate, s.lower95, s.upper95)
