"""scikit-learn style estimators wrapping the semiparametric model and the POT baseline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, DensityMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import _kernels
from .density import make_grid
from .lowrank import build_lambda_grid, cached_lambda_grid, make_knots
from .model import Dataset, SemiparametricModel
from .pot import MIN_EXCEEDANCES, fit_pot, pot_tail_quantile
from .priors import PriorConfig
from .sampler import SamplerConfig, run_chain
from .summaries import (
    DEFAULT_PROBS,
    density,
    quantile_report,
    return_period,
    survival,
    xi_summary,
)


def _check_1d(X) -> np.ndarray:
    X = check_array(X, ensure_2d=False, dtype=np.float64)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"expected a single feature, got {X.shape[1]}")
        X = X[:, 0]
    return X


def _draw_subset(samples: np.ndarray, max_draws: int | None) -> np.ndarray:
    if max_draws is None or samples.shape[0] <= max_draws:
        return samples
    idx = np.linspace(0, samples.shape[0] - 1, max_draws).round().astype(int)
    return samples[idx]


class SemiparametricTailDensity(DensityMixin, BaseEstimator):
    """Heavy-tailed density estimator: GPD transform plus logistic Gaussian process.

    Parameters
    ----------
    grid_size : int, default=101
        Points of the equally spaced grid on which ``psi`` is represented.
    n_knots : int, default=11
        Knots of the low-rank field.
    alpha_min, a_kappa, b_kappa, a_lambda, b_lambda : float
        Prior settings, see :class:`lgptail.priors.PriorConfig`.
    n_iter, burn_in, thin, target_accept : sampler settings
    support_shift : float, default=0.0
        Known lower end of the support; data are shifted by it before fitting.
    lambda_grid_cache : str or path, optional
        Directory for caching the discretized lambda prior.
    random_state : int, optional

    Attributes
    ----------
    model_ : SemiparametricModel
    draws_ : PosteriorDraws
    xi_ : Interval
        Posterior mean and 95% interval of ``xi = 1/alpha``.
    """

    def __init__(
        self,
        grid_size=101,
        n_knots=11,
        alpha_min=0.5,
        a_kappa=1.5,
        b_kappa=1.5,
        a_lambda=16.0,
        b_lambda=2.2,
        n_iter=50_000,
        burn_in=None,
        thin=10,
        target_accept=0.15,
        support_shift=0.0,
        lambda_grid_cache=None,
        random_state=None,
    ):
        self.grid_size = grid_size
        self.n_knots = n_knots
        self.alpha_min = alpha_min
        self.a_kappa = a_kappa
        self.b_kappa = b_kappa
        self.a_lambda = a_lambda
        self.b_lambda = b_lambda
        self.n_iter = n_iter
        self.burn_in = burn_in
        self.thin = thin
        self.target_accept = target_accept
        self.support_shift = support_shift
        self.lambda_grid_cache = lambda_grid_cache
        self.random_state = random_state

    def _prior(self) -> PriorConfig:
        return PriorConfig(self.alpha_min, self.a_kappa, self.b_kappa, self.a_lambda, self.b_lambda)

    def _sampler_config(self) -> SamplerConfig:
        seed = self.random_state if isinstance(self.random_state, (int, np.integer)) or self.random_state is None else None
        return SamplerConfig(
            n_iter=self.n_iter, burn_in=self.burn_in, thin=self.thin, target_accept=self.target_accept, seed=seed
        )

    def fit(self, X, y=None, dataset: Dataset | None = None):
        """Fit to positive observations ``X`` (1-d or a single column).

        ``dataset`` may carry preprocessing provenance; its values are used
        instead of ``X`` when given.
        """
        if dataset is None:
            values = _check_1d(X) - self.support_shift
            dataset = Dataset(values, support_shift=self.support_shift)
        if self.grid_size < 2 * self.n_knots:
            raise ValueError("grid_size must be at least twice n_knots")
        prior = self._prior()
        knots, grid = make_knots(self.n_knots), make_grid(self.grid_size)
        if self.lambda_grid_cache is not None:
            lgrid = cached_lambda_grid(self.lambda_grid_cache, knots, grid, prior.a_lambda, prior.b_lambda)
        else:
            lgrid = build_lambda_grid(knots, grid, prior.a_lambda, prior.b_lambda)
        model = SemiparametricModel(dataset, prior, lambda_grid=lgrid)
        rng = self.random_state if isinstance(self.random_state, np.random.Generator) else None
        self.draws_ = run_chain(
            _kernels.semi_log_posterior,
            model.kernel_args(),
            model.initial_state().to_vector(),
            self._sampler_config(),
            names=model.names,
            block_names=["omega", "theta", "joint"],
            rng=rng,
        )
        self.model_ = model
        self.xi_ = xi_summary(model, self.draws_.samples)
        self.n_features_in_ = 1
        return self

    def score_samples(self, X, max_draws=200):
        """Log of the posterior-mean density at ``X``."""
        check_is_fitted(self, "draws_")
        X = _check_1d(X)
        rows = _draw_subset(self.draws_.samples, max_draws)
        dens = np.mean([density(self.model_, row, X) for row in rows], axis=0)
        with np.errstate(divide="ignore"):
            return np.log(dens)

    def score(self, X, y=None):
        return float(np.sum(self.score_samples(X)))

    def predict(self, X, max_draws=200):
        """Posterior-mean density at ``X``."""
        return np.exp(self.score_samples(X, max_draws))

    def transform(self, X, max_draws=200):
        """Posterior-mean distribution function ``F(X)``."""
        check_is_fitted(self, "draws_")
        X = _check_1d(X)
        rows = _draw_subset(self.draws_.samples, max_draws)
        below = X <= self.model_.data.support_shift
        Xc = np.where(below, self.model_.data.support_shift, X)
        F = 1.0 - np.mean([survival(self.model_, row, Xc) for row in rows], axis=0)
        return np.where(below, 0.0, F)

    def tail_quantiles(self, probs=DEFAULT_PROBS, inclusion_fraction=1.0, max_draws=None):
        check_is_fitted(self, "draws_")
        rows = _draw_subset(self.draws_.samples, max_draws)
        return quantile_report(self.model_, rows, probs, inclusion_fraction)

    def return_period(self, level, records_per_year=365.25, inclusion_fraction=1.0, max_draws=None):
        check_is_fitted(self, "draws_")
        rows = _draw_subset(self.draws_.samples, max_draws)
        return return_period(self.model_, rows, level, records_per_year, inclusion_fraction)


class PeaksOverThreshold(BaseEstimator):
    """Bayesian GPD fit to the excesses over a fixed threshold."""

    def __init__(
        self,
        threshold=0.0,
        min_exceedances=MIN_EXCEEDANCES,
        alpha_min=0.5,
        n_iter=20_000,
        burn_in=None,
        thin=10,
        target_accept=0.15,
        random_state=None,
    ):
        self.threshold = threshold
        self.min_exceedances = min_exceedances
        self.alpha_min = alpha_min
        self.n_iter = n_iter
        self.burn_in = burn_in
        self.thin = thin
        self.target_accept = target_accept
        self.random_state = random_state

    def fit(self, X, y=None):
        X = _check_1d(X)
        config = SamplerConfig(
            n_iter=self.n_iter, burn_in=self.burn_in, thin=self.thin, target_accept=self.target_accept,
            seed=self.random_state,
        )
        self.fit_ = fit_pot(X, self.threshold, PriorConfig(alpha_min=self.alpha_min), config, self.min_exceedances)
        self.xi_ = self.fit_.xi_summary()
        self.n_features_in_ = 1
        return self

    def tail_quantiles(self, probs=DEFAULT_PROBS):
        check_is_fitted(self, "fit_")
        return pot_tail_quantile(self.fit_, probs)
